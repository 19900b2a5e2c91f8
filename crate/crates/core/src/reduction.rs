//! Scalar operators `D_t^m + sum a_{j alpha} t^{(j+(l*+1)|alpha|-m)+} D_t^j D_x^alpha`
//! with Levi-type lower order terms, their reduced symbols `p`, `q`, the
//! companion system and the closed-form bound on `delta`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{c, eigenvalues, CMatrix, I};
use crate::systems::{
    delta_bound_system, make_row, symmetrizer_from_roots, DeltaBound, FirstOrderSystem, Root,
    SamplePoint, SecondaryFn, SystemError,
};
use crate::symbolcalc::SymbolFn;
use crate::weights::{DegeneracySpec, WeightsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error("term (j={j}, alpha={alpha:?}) not allowed for an operator of order {m} in dimension {dim}")]
    BadTerm {
        j: usize,
        alpha: Vec<usize>,
        m: usize,
        dim: usize,
    },
    #[error("order must be at least 1")]
    ZeroOrder,
    #[error("p is not strictly hyperbolic at x={x:?}, xi={xi:?}: {reason}")]
    NotStrictlyHyperbolic {
        x: Vec<f64>,
        xi: Vec<f64>,
        reason: String,
    },
    #[error("dp/dtau = {value:e} at root {root} is below tolerance")]
    DegenerateRoot { root: f64, value: f64 },
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
}

/// Coefficient `a_{j alpha}(t, x)`.
pub type CoeffFn = Arc<dyn Fn(f64, &[f64]) -> Complex64 + Send + Sync>;

/// `L = D_t^m + sum_{j<m, j+|alpha|<=m} a_{j alpha}(t,x) t^{e(j,alpha)} D_t^j D_x^alpha`
/// with Levi exponents `e`; e.g. `D_t^2 - t^2 D_x^2` has `a_{0,(2)} = -1`.
#[derive(Clone)]
pub struct ScalarOperator {
    order: usize,
    dim: usize,
    spec: DegeneracySpec,
    name: String,
    terms: BTreeMap<(usize, Vec<usize>), CoeffFn>,
}

impl std::fmt::Debug for ScalarOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarOperator")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("terms", &self.terms.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl ScalarOperator {
    pub fn new(spec: DegeneracySpec, order: usize, dim: usize) -> Result<Self, ReductionError> {
        if order == 0 {
            return Err(ReductionError::ZeroOrder);
        }
        Ok(Self {
            order,
            dim,
            spec,
            name: format!("operator of order {order}"),
            terms: BTreeMap::new(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Add (or replace) the coefficient of `t^{e} D_t^j D_x^alpha`.
    pub fn with_term(
        mut self,
        j: usize,
        alpha: Vec<usize>,
        coeff: CoeffFn,
    ) -> Result<Self, ReductionError> {
        let len: usize = alpha.iter().sum();
        if j >= self.order || j + len > self.order || alpha.len() != self.dim {
            return Err(ReductionError::BadTerm {
                j,
                alpha,
                m: self.order,
                dim: self.dim,
            });
        }
        self.terms.insert((j, alpha), coeff);
        Ok(self)
    }

    pub fn with_constant_term(
        self,
        j: usize,
        alpha: Vec<usize>,
        value: Complex64,
    ) -> Result<Self, ReductionError> {
        self.with_term(j, alpha, Arc::new(move |_, _| value))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spec(&self) -> &DegeneracySpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Levi exponent `(j + (l*+1)|alpha| - m)+` of a term.
    pub fn levi_exponent(&self, j: usize, alpha: &[usize]) -> usize {
        let len: usize = alpha.iter().sum();
        (j + (self.spec.l_star() as usize + 1) * len).saturating_sub(self.order)
    }

    pub fn coefficient(&self, j: usize, alpha: &[usize], t: f64, x: &[f64]) -> Complex64 {
        self.terms
            .get(&(j, alpha.to_vec()))
            .map(|f| f(t, x))
            .unwrap_or_default()
    }

    /// Iterate over `(j, alpha, coefficient)`.
    pub fn terms(&self) -> impl Iterator<Item = (usize, &[usize], &CoeffFn)> {
        self.terms.iter().map(|((j, a), f)| (*j, a.as_slice(), f))
    }
}

fn monomial(xi: &[f64], alpha: &[usize]) -> f64 {
    xi.iter().zip(alpha).map(|(v, &a)| v.powi(a as i32)).product()
}

/// Coefficients of the monic `p(tau) = tau^m + sum_j p_j tau^j` and of
/// `q(tau) = sum_{j <= m-2} q_j tau^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSymbols {
    pub p: Vec<Complex64>,
    pub q: Vec<Complex64>,
}

impl ReducedSymbols {
    fn full_p(&self) -> Vec<Complex64> {
        let mut v = self.p.clone();
        v.push(c(1.0));
        v
    }

    pub fn p_at(&self, tau: Complex64) -> Complex64 {
        horner(&self.full_p(), tau)
    }

    pub fn dp_at(&self, tau: Complex64) -> Complex64 {
        horner(&derivative(&self.full_p()), tau)
    }

    pub fn ddp_at(&self, tau: Complex64) -> Complex64 {
        horner(&derivative(&derivative(&self.full_p())), tau)
    }

    pub fn q_at(&self, tau: Complex64) -> Complex64 {
        horner(&self.q, tau)
    }

    /// `-((tau/2) p'' + Re q) / p'` at a real root.
    pub fn root_quotient(&self, tau: f64) -> Result<f64, ReductionError> {
        let z = c(tau);
        let dp = self.dp_at(z).re;
        let scale = self.p.iter().map(|a| a.norm()).fold(1.0, f64::max);
        if dp.abs() < 1e-12 * scale {
            return Err(ReductionError::DegenerateRoot { root: tau, value: dp });
        }
        Ok(-(0.5 * tau * self.ddp_at(z).re + self.q_at(z).re) / dp)
    }
}

fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::default(), |acc, &a| acc * z + a)
}

fn derivative(coeffs: &[Complex64]) -> Vec<Complex64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &a)| a * k as f64)
        .collect()
}

/// `p_j` at time `t` and `q_j` (always at `t = 0`).
pub fn reduced_symbols_at(op: &ScalarOperator, t: f64, x: &[f64], xi_hat: &[f64]) -> ReducedSymbols {
    let m = op.order;
    let mut p = vec![Complex64::default(); m];
    let mut q = vec![Complex64::default(); m.saturating_sub(1)];
    let ls = op.spec.ls();
    for (j, alpha, f) in op.terms() {
        let len: usize = alpha.iter().sum();
        if len == m - j {
            p[j] += f(t, x) * monomial(xi_hat, alpha);
        } else if len + 1 == m - j && j + 1 < m {
            // a zeroth-order D_t^{m-1} term has no slot in q; it is lower order
            q[j] += I / ls * f(0.0, x) * monomial(xi_hat, alpha);
        }
    }
    ReducedSymbols { p, q }
}

/// Reduced symbols at `t = 0`, checking strict hyperbolicity of `p`.
pub fn reduced_symbols(
    op: &ScalarOperator,
    x: &[f64],
    xi_hat: &[f64],
    gap_tol: f64,
) -> Result<ReducedSymbols, ReductionError> {
    let r = reduced_symbols_at(op, 0.0, x, xi_hat);
    real_roots(&r.p, gap_tol).map_err(|reason| ReductionError::NotStrictlyHyperbolic {
        x: x.to_vec(),
        xi: xi_hat.to_vec(),
        reason,
    })?;
    Ok(r)
}

/// Companion matrix of the monic polynomial with lower coefficients `p`.
pub fn companion(p: &[Complex64]) -> CMatrix {
    let m = p.len();
    let mut a = CMatrix::zeros(m, m);
    for r in 0..m.saturating_sub(1) {
        a[(r, r + 1)] = c(1.0);
    }
    for (col, &pj) in p.iter().enumerate() {
        a[(m - 1, col)] = -pj;
    }
    a
}

/// Roots of `tau^m + sum p_j tau^j`, sorted by real part.
pub fn polynomial_roots(p: &[Complex64]) -> Vec<Complex64> {
    let mut r = eigenvalues(&companion(p));
    r.sort_by(|a, b| a.re.total_cmp(&b.re));
    r
}

/// Real, pairwise separated roots (ascending), or the reason they are not.
pub fn real_roots(p: &[Complex64], gap_tol: f64) -> Result<Vec<f64>, String> {
    let roots = polynomial_roots(p);
    let scale = roots.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if let Some(z) = roots.iter().find(|z| z.im.abs() > 1e-8 * scale) {
        return Err(format!("non-real root {z}"));
    }
    let re: Vec<f64> = roots.iter().map(|z| z.re).collect();
    for w in re.windows(2) {
        if w[1] - w[0] < gap_tol * scale {
            return Err(format!("roots {} and {} closer than {}", w[0], w[1], gap_tol * scale));
        }
    }
    Ok(re)
}

/// First-order system of the weighted derivatives: `A0` is the companion
/// matrix of `p`, `A1 = diag(m-1, ..., 1, 0)` with last row
/// `(-q_0, ..., -q_{m-2}, 0)`; the roots are those of `p`, ascending.
pub fn companion_system(op: &ScalarOperator) -> FirstOrderSystem {
    let m = op.order;
    let o0 = op.clone();
    let a0: SymbolFn = Arc::new(move |t, x, xi| companion(&reduced_symbols_at(&o0, t, x, xi).p));
    let o1 = op.clone();
    let a1: SecondaryFn = Arc::new(move |x, xi| {
        let r = reduced_symbols_at(&o1, 0.0, x, xi);
        let mut a = CMatrix::zeros(m, m);
        for k in 0..m {
            a[(k, k)] = c((m - 1 - k) as f64);
        }
        for (col, &qj) in r.q.iter().enumerate() {
            a[(m - 1, col)] = -qj;
        }
        a
    });
    let roots = (0..m)
        .map(|h| {
            let o = op.clone();
            Root::new(
                Arc::new(move |t, x, xi| polynomial_roots(&reduced_symbols_at(&o, t, x, xi).p)[h].re),
                1,
            )
        })
        .collect();
    FirstOrderSystem::new(*op.spec(), m, a0, a1, roots)
        .expect("m simple roots for an m x m system")
        .with_name(format!("companion system of {}", op.name))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VandermondePair {
    pub m0_inv: CMatrix,
    pub m0: CMatrix,
}

/// `M0^{-1}` is the Vandermonde matrix of the roots (row `j` holds
/// `mu_h^j`); `M0` is its inverse in closed form,
/// `(M0)_{hj} = (mu_h^{m-j} + p_{m-1} mu_h^{m-j-1} + ... + p_j) / p'(mu_h)`
/// with `j` counted from one.
pub fn vandermonde_symmetrizer(
    roots: &[f64],
    p: &[Complex64],
) -> Result<VandermondePair, ReductionError> {
    let m = roots.len();
    let rs = ReducedSymbols {
        p: p.to_vec(),
        q: Vec::new(),
    };
    let full = rs.full_p();
    let mut m0_inv = CMatrix::zeros(m, m);
    let mut m0 = CMatrix::zeros(m, m);
    for (h, &mu) in roots.iter().enumerate() {
        for j in 0..m {
            m0_inv[(j, h)] = c(mu.powi(j as i32));
        }
        let dp = rs.dp_at(c(mu));
        if dp.norm() < 1e-12 {
            return Err(ReductionError::DegenerateRoot { root: mu, value: dp.norm() });
        }
        for j in 1..=m {
            let num: Complex64 = (j..=m).map(|i| full[i] * mu.powi((i - j) as i32)).sum();
            m0[(h, j - 1)] = num / dp;
        }
    }
    Ok(VandermondePair { m0_inv, m0 })
}

/// `delta(x) = max_h sup_xi -((tau/2) p'' + Re q) / p'` at `tau = mu_h(0,x,xi)`.
pub fn delta_bound_scalar(
    op: &ScalarOperator,
    x_grid: &[Vec<f64>],
    xi_samples: &[Vec<f64>],
    gap_tol: f64,
) -> Result<DeltaBound, ReductionError> {
    if x_grid.is_empty() || xi_samples.is_empty() {
        return Err(SystemError::NoSamples.into());
    }
    let spec = *op.spec();
    let rows: Result<Vec<_>, ReductionError> = x_grid
        .par_iter()
        .map(|x| {
            let mut per_xi = Vec::with_capacity(xi_samples.len());
            for xi in xi_samples {
                let r = reduced_symbols_at(op, 0.0, x, xi);
                let roots = real_roots(&r.p, gap_tol).map_err(|reason| {
                    ReductionError::NotStrictlyHyperbolic {
                        x: x.clone(),
                        xi: xi.clone(),
                        reason,
                    }
                })?;
                let vals = roots
                    .iter()
                    .map(|&mu| r.root_quotient(mu))
                    .collect::<Result<Vec<f64>, _>>()?;
                per_xi.push((xi.clone(), vals));
            }
            Ok(make_row(&spec, x, per_xi, true))
        })
        .collect();
    Ok(DeltaBound {
        l_star: spec.l_star(),
        beta_star: spec.beta_star(),
        method: "closed form at the roots of p, tight on samples".into(),
        rows: rows?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub max_discrepancy: f64,
    pub system: DeltaBound,
    pub scalar: DeltaBound,
}

/// Compare the Sylvester pipeline on the companion system with the closed
/// form: `delta_sys = delta_scalar + (m - 1)` pointwise in `x`.
pub fn cross_validate(
    op: &ScalarOperator,
    x_grid: &[Vec<f64>],
    xi_samples: &[Vec<f64>],
    gap_tol: f64,
) -> Result<CrossValidation, ReductionError> {
    let scalar = delta_bound_scalar(op, x_grid, xi_samples, gap_tol)?;
    let sys = companion_system(op);
    let samples: Vec<SamplePoint> = x_grid
        .iter()
        .flat_map(|x| {
            xi_samples.iter().map(move |xi| SamplePoint {
                t: 0.0,
                x: x.clone(),
                xi_hat: xi.clone(),
            })
        })
        .collect();
    let pair = symmetrizer_from_roots(&sys, &samples, gap_tol)?;
    let system = delta_bound_system(&sys, &pair, x_grid, xi_samples, gap_tol)?;
    let shift = (op.order - 1) as f64;
    let max_discrepancy = system
        .rows
        .iter()
        .zip(&scalar.rows)
        .map(|(a, b)| (a.delta - b.delta - shift).abs())
        .fold(0.0, f64::max);
    Ok(CrossValidation {
        max_discrepancy,
        system,
        scalar,
    })
}
