//! First-order systems `D_t - A` with
//! `A = lambda(t)|xi| A0(t,x,xi) - i l* t^{-1} A1(x,xi) + A2`, symmetrizers,
//! block diagonalization of the secondary symbol and the resulting bound
//! `delta(x)` on the loss of regularity.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{
    block_diag, c, frobenius, hermitian_part, inverse, max_real_part_eig,
    smallest_singular_subspace, solve_sylvester, CMatrix, I,
};
use crate::symbolcalc::{Remainder, StructuredSymbol, SymbolFn, SymbolOrders};
use crate::weights::{bracket, Cutoff, DegeneracySpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("root multiplicities sum to {sum}, system size is {size}")]
    MultiplicityMismatch { sum: usize, size: usize },
    #[error("constant multiplicity violated: roots {a} and {b} closer than {tol} at t={t}, x={x:?}, xi={xi:?}")]
    RootGap {
        a: f64,
        b: f64,
        tol: f64,
        t: f64,
        x: Vec<f64>,
        xi: Vec<f64>,
    },
    #[error("A0 not diagonalizable with the declared roots (block {block}, residual {residual:e}) at t={t}, x={x:?}, xi={xi:?}")]
    NotSymmetrizable {
        block: usize,
        residual: f64,
        t: f64,
        x: Vec<f64>,
        xi: Vec<f64>,
    },
    #[error("symmetrizer is singular at x={x:?}, xi={xi:?}")]
    SingularSymmetrizer { x: Vec<f64>, xi: Vec<f64> },
    #[error("blocks {j} and {k} share the eigenvalue {mu}; the Sylvester map is not invertible")]
    SharedSpectrum { j: usize, k: usize, mu: f64 },
    #[error("block diagonalization residual {0:e} above tolerance")]
    Residual(f64),
    #[error("order raising needs a separable symbol")]
    NotSeparable,
    #[error("empty sample set")]
    NoSamples,
}

/// Matrix-valued function of `(x, unit frequency)`.
pub type SecondaryFn = Arc<dyn Fn(&[f64], &[f64]) -> CMatrix + Send + Sync>;
/// Real characteristic root `mu(t, x, unit frequency)`.
pub type RootFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Root {
    pub mu: RootFn,
    pub multiplicity: usize,
}

impl Root {
    pub fn new(mu: RootFn, multiplicity: usize) -> Self {
        Self { mu, multiplicity }
    }

    pub fn constant(value: f64, multiplicity: usize) -> Self {
        Self::new(Arc::new(move |_, _, _| value), multiplicity)
    }
}

/// A point `(t, x, xi_hat)` of a sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub xi_hat: Vec<f64>,
}

#[derive(Clone)]
pub struct FirstOrderSystem {
    size: usize,
    spec: DegeneracySpec,
    name: String,
    a0: SymbolFn,
    a1: SecondaryFn,
    a2: Option<Remainder>,
    roots: Vec<Root>,
    separable: bool,
}

impl std::fmt::Debug for FirstOrderSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FirstOrderSystem")
            .field("name", &self.name)
            .field("size", &self.size)
            .field(
                "multiplicities",
                &self.roots.iter().map(|r| r.multiplicity).collect::<Vec<_>>(),
            )
            .finish()
    }
}

impl FirstOrderSystem {
    pub fn new(
        spec: DegeneracySpec,
        size: usize,
        a0: SymbolFn,
        a1: SecondaryFn,
        roots: Vec<Root>,
    ) -> Result<Self, SystemError> {
        let sum: usize = roots.iter().map(|r| r.multiplicity).sum();
        if sum != size {
            return Err(SystemError::MultiplicityMismatch { sum, size });
        }
        Ok(Self {
            size,
            spec,
            name: String::from("system"),
            a0,
            a1,
            a2: None,
            roots,
            separable: true,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_remainder(mut self, rem: Remainder) -> Self {
        self.a2 = Some(rem);
        self
    }

    /// Mark the symbol as not of the finite-sum form needed for order raising.
    pub fn non_separable(mut self) -> Self {
        self.separable = false;
        self
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn spec(&self) -> &DegeneracySpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn roots(&self) -> &[Root] {
        &self.roots
    }

    pub fn is_separable(&self) -> bool {
        self.separable
    }

    pub fn remainder(&self) -> Option<&Remainder> {
        self.a2.as_ref()
    }

    pub fn a0(&self, t: f64, x: &[f64], xi_hat: &[f64]) -> CMatrix {
        (self.a0)(t, x, xi_hat)
    }

    pub fn a1(&self, x: &[f64], xi_hat: &[f64]) -> CMatrix {
        (self.a1)(x, xi_hat)
    }

    /// Root values and multiplicities at a point.
    pub fn root_values(&self, t: f64, x: &[f64], xi_hat: &[f64]) -> Vec<(f64, usize)> {
        self.roots
            .iter()
            .map(|r| ((r.mu)(t, x, xi_hat), r.multiplicity))
            .collect()
    }

    /// Constant multiplicity on the samples: pairwise gaps at least
    /// `gap_tol * max(1, max |mu|)`.
    pub fn check_roots(&self, samples: &[SamplePoint], gap_tol: f64) -> Result<(), SystemError> {
        for s in samples {
            check_gaps(&self.root_values(s.t, &s.x, &s.xi_hat), gap_tol, s)?;
        }
        Ok(())
    }

    /// The structured symbol of orders `(1, 1)`: `a0 = |zeta| A0`,
    /// `a1 = -i l* A1`, remainder `A2`.
    pub fn as_structured(&self) -> StructuredSymbol {
        let (a0, a1) = (self.a0.clone(), self.a1.clone());
        let ls = self.spec.ls();
        let mut s = StructuredSymbol::new(
            self.spec,
            self.size,
            SymbolOrders::new(1.0, 1.0),
            Arc::new(move |t, x, z| {
                let n = norm(z);
                a0(t, x, &unit(z)) * c(n)
            }),
            Arc::new(move |_, x, z| a1(x, &unit(z)) * Complex64::new(0.0, -ls)),
        );
        if let Some(r) = &self.a2 {
            s = s.with_remainder(r.clone());
        }
        s
    }

    /// Full symbol `chi+ (lambda|xi| A0 - i l* t^{-1} A1) + A2`.
    pub fn full_symbol(&self, t: f64, x: &[f64], xi: &[f64]) -> CMatrix {
        self.as_structured().eval(t, x, xi)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|a| a / n).collect()
}

fn check_gaps(roots: &[(f64, usize)], gap_tol: f64, s: &SamplePoint) -> Result<(), SystemError> {
    let scale = roots.iter().map(|r| r.0.abs()).fold(1.0, f64::max);
    let tol = gap_tol * scale;
    for (i, a) in roots.iter().enumerate() {
        for b in &roots[i + 1..] {
            if (a.0 - b.0).abs() < tol {
                return Err(SystemError::RootGap {
                    a: a.0,
                    b: b.0,
                    tol,
                    t: s.t,
                    x: s.x.clone(),
                    xi: s.xi_hat.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Unit frequencies for sup over the sphere: exactly `{+1, -1}` in 1-D,
/// 64 equispaced angles in 2-D and a 64-point Fibonacci lattice in 3-D.
/// Higher dimensions use 64 normalized Halton points.
pub fn sphere_samples(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..64)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 64.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let n = 64;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
            let mut out = Vec::new();
            let mut k = 1u32;
            while out.len() < 64 {
                let p: Vec<f64> = (0..dim)
                    .map(|d| 2.0 * halton(k, PRIMES[d % PRIMES.len()]) - 1.0)
                    .collect();
                k += 1;
                if norm(&p) > 0.1 {
                    out.push(unit(&p));
                }
            }
            out
        }
    }
}

fn halton(mut i: u32, base: u32) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Symmetrizer data `M0` and an optional correction `M1`.
#[derive(Clone)]
pub struct SymmetrizerPair {
    pub m0: SymbolFn,
    pub m1: Option<SecondaryFn>,
}

impl SymmetrizerPair {
    pub fn new(m0: SymbolFn) -> Self {
        Self { m0, m1: None }
    }

    pub fn with_m1(mut self, m1: SecondaryFn) -> Self {
        self.m1 = Some(m1);
        self
    }

    /// Set `M1` from a prescribed product `P1 = M1 M0^{-1}` at `t = 0`.
    pub fn with_correction(self, p1: SecondaryFn) -> Self {
        let m0 = self.m0.clone();
        self.with_m1(Arc::new(move |x, xi| p1(x, xi) * m0(0.0, x, xi)))
    }

    /// Rescale the rows of `M0` by fixed nonzero factors.
    pub fn row_scaled(&self, factors: Vec<Complex64>) -> Self {
        let m0 = self.m0.clone();
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(factors));
        let d2 = d.clone();
        let m1 = self.m1.clone().map(|m1| -> SecondaryFn {
            Arc::new(move |x, xi| &d2 * m1(x, xi))
        });
        Self {
            m0: Arc::new(move |t, x, xi| &d * m0(t, x, xi)),
            m1,
        }
    }
}

/// Rows of left eigenvectors of `a0` for the declared roots, in root order.
///
/// A simple root's row is scaled so its largest entry is one; the rows of a
/// multiple root form an orthonormal basis of its left eigenspace.
pub fn left_eigenbasis(
    a0: &CMatrix,
    roots: &[(f64, usize)],
    at: &SamplePoint,
) -> Result<CMatrix, SystemError> {
    let n = a0.nrows();
    let scale = frobenius(a0).max(1.0);
    let mut m0 = CMatrix::zeros(n, n);
    let mut row = 0;
    for (block, &(mu, mult)) in roots.iter().enumerate() {
        let shifted = (a0 - CMatrix::identity(n, n) * c(mu)).transpose();
        let (basis, worst) = smallest_singular_subspace(&shifted, mult);
        if worst > 1e-8 * scale {
            return Err(SystemError::NotSymmetrizable {
                block,
                residual: worst,
                t: at.t,
                x: at.x.clone(),
                xi: at.xi_hat.clone(),
            });
        }
        for k in 0..mult {
            let mut v: Vec<Complex64> = basis.column(k).iter().copied().collect();
            if mult == 1 {
                let pivot = *v
                    .iter()
                    .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                    .expect("nonempty");
                v.iter_mut().for_each(|z| *z /= pivot);
            }
            for (col, z) in v.into_iter().enumerate() {
                m0[(row, col)] = z;
            }
            row += 1;
        }
    }
    Ok(m0)
}

fn diag_of_roots(roots: &[(f64, usize)]) -> CMatrix {
    let vals: Vec<Complex64> = roots
        .iter()
        .flat_map(|&(mu, k)| std::iter::repeat(c(mu)).take(k))
        .collect();
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals))
}

/// Build `M0` from left eigenvectors and check on the samples that
/// `M0 A0 M0^{-1}` is Hermitian with separated roots.
pub fn symmetrizer_from_roots(
    sys: &FirstOrderSystem,
    samples: &[SamplePoint],
    gap_tol: f64,
) -> Result<SymmetrizerPair, SystemError> {
    if samples.is_empty() {
        return Err(SystemError::NoSamples);
    }
    sys.check_roots(samples, gap_tol)?;
    for s in samples {
        let a0 = sys.a0(s.t, &s.x, &s.xi_hat);
        let roots = sys.root_values(s.t, &s.x, &s.xi_hat);
        let m0 = left_eigenbasis(&a0, &roots, s)?;
        let inv = inverse(&m0).ok_or_else(|| SystemError::SingularSymmetrizer {
            x: s.x.clone(),
            xi: s.xi_hat.clone(),
        })?;
        let b0 = &m0 * &a0 * &inv;
        let resid = frobenius(&(&b0 - diag_of_roots(&roots)));
        let herm = frobenius(&(&b0 - b0.adjoint()));
        let scale = frobenius(&a0).max(1.0);
        if resid > 1e-8 * scale || herm > 1e-8 * scale {
            return Err(SystemError::NotSymmetrizable {
                block: 0,
                residual: resid.max(herm),
                t: s.t,
                x: s.x.clone(),
                xi: s.xi_hat.clone(),
            });
        }
    }
    let sys = sys.clone();
    Ok(SymmetrizerPair::new(Arc::new(move |t, x, xi| {
        let a0 = sys.a0(t, x, xi);
        let roots = sys.root_values(t, x, xi);
        let at = SamplePoint {
            t,
            x: x.to_vec(),
            xi_hat: xi.to_vec(),
        };
        left_eigenbasis(&a0, &roots, &at)
            .unwrap_or_else(|_| CMatrix::from_element(a0.nrows(), a0.ncols(), c(f64::NAN)))
    })))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugatedPair {
    pub b0: CMatrix,
    pub b1: CMatrix,
    pub effective: CMatrix,
}

/// `B0 = M0 A0 M0^{-1}`, `B1 = M0 A1 M0^{-1}` at `t = 0` and
/// `effective = Re(B1 + [M1 M0^{-1}, B0])`.
pub fn conjugated_pair(
    sys: &FirstOrderSystem,
    pair: &SymmetrizerPair,
    x: &[f64],
    xi_hat: &[f64],
) -> Result<ConjugatedPair, SystemError> {
    let m0 = (pair.m0)(0.0, x, xi_hat);
    let singular = || SystemError::SingularSymmetrizer {
        x: x.to_vec(),
        xi: xi_hat.to_vec(),
    };
    if m0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(singular());
    }
    let inv = inverse(&m0).ok_or_else(singular)?;
    let b0 = &m0 * sys.a0(0.0, x, xi_hat) * &inv;
    let b1 = &m0 * sys.a1(x, xi_hat) * &inv;
    let mut eff = b1.clone();
    if let Some(m1) = &pair.m1 {
        let p1 = m1(x, xi_hat) * &inv;
        eff += &p1 * &b0 - &b0 * &p1;
    }
    Ok(ConjugatedPair {
        b0,
        b1,
        effective: hermitian_part(&eff),
    })
}

fn block_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0;
    off.push(0);
    for s in sizes {
        acc += s;
        off.push(acc);
    }
    off
}

/// `P1` with zero diagonal blocks such that `B1 + [P1, B0]` is block
/// diagonal, for `B0 = diag(mu_j I_{N_j})`: `P1_jk = B1_jk / (mu_j - mu_k)`.
pub fn sylvester_block_offdiag(
    blocks: &[(f64, usize)],
    b1: &CMatrix,
) -> Result<CMatrix, SystemError> {
    let sizes: Vec<usize> = blocks.iter().map(|b| b.1).collect();
    let off = block_offsets(&sizes);
    let scale = blocks.iter().map(|b| b.0.abs()).fold(1.0, f64::max);
    let mut p1 = CMatrix::zeros(b1.nrows(), b1.ncols());
    for (j, &(mu_j, _)) in blocks.iter().enumerate() {
        for (k, &(mu_k, _)) in blocks.iter().enumerate() {
            if j == k {
                continue;
            }
            let gap = mu_j - mu_k;
            if gap.abs() <= 1e-14 * scale {
                return Err(SystemError::SharedSpectrum { j, k, mu: mu_j });
            }
            for r in off[j]..off[j + 1] {
                for s in off[k]..off[k + 1] {
                    p1[(r, s)] = b1[(r, s)] / gap;
                }
            }
        }
    }
    Ok(p1)
}

/// General form: `B0` block diagonal with arbitrary diagonal blocks of the
/// given sizes; each off-diagonal block solves `P F - E P = -B1_jk` with
/// `E = B0_jj`, `F = B0_kk`.
pub fn sylvester_offdiag_general(
    b0: &CMatrix,
    sizes: &[usize],
    b1: &CMatrix,
) -> Result<CMatrix, SystemError> {
    let off = block_offsets(sizes);
    let mut p1 = CMatrix::zeros(b1.nrows(), b1.ncols());
    for j in 0..sizes.len() {
        for k in 0..sizes.len() {
            if j == k {
                continue;
            }
            let e = b0.view((off[j], off[j]), (sizes[j], sizes[j])).into_owned();
            let f = b0.view((off[k], off[k]), (sizes[k], sizes[k])).into_owned();
            let g = -b1.view((off[j], off[k]), (sizes[j], sizes[k])).into_owned();
            let p = solve_sylvester(&e, &f, &g).ok_or(SystemError::SharedSpectrum {
                j,
                k,
                mu: e[(0, 0)].re,
            })?;
            p1.view_mut((off[j], off[k]), (sizes[j], sizes[k])).copy_from(&p);
        }
    }
    Ok(p1)
}

/// Frobenius norms of the off-diagonal part of `B1 + [P1, B0]` and of the
/// change of its diagonal blocks relative to `B1`.
pub fn block_residuals(b0: &CMatrix, b1: &CMatrix, p1: &CMatrix, sizes: &[usize]) -> (f64, f64) {
    let t = b1 + p1 * b0 - b0 * p1;
    let off = block_offsets(sizes);
    let (mut offdiag, mut diag) = (0.0, 0.0);
    for j in 0..sizes.len() {
        for k in 0..sizes.len() {
            for r in off[j]..off[j + 1] {
                for s in off[k]..off[k + 1] {
                    if j == k {
                        diag += (t[(r, s)] - b1[(r, s)]).norm_sqr();
                    } else {
                        offdiag += t[(r, s)].norm_sqr();
                    }
                }
            }
        }
    }
    (offdiag.sqrt(), diag.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub x: Vec<f64>,
    pub delta: f64,
    pub loss: f64,
    /// Block attaining the maximum, when the bound is computed per block.
    pub argmax_block: Option<usize>,
    pub argmax_xi: Vec<f64>,
    /// Largest eigenvalue of `Re B1_jj` over the frequency samples, per block.
    pub block_max: Vec<f64>,
}

/// Sampled `delta(x)` together with the loss `beta* delta(x) l*`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaBound {
    pub l_star: u32,
    pub beta_star: f64,
    pub method: String,
    pub rows: Vec<DeltaRow>,
}

impl DeltaBound {
    pub fn max_delta(&self) -> f64 {
        self.rows.iter().map(|r| r.delta).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_delta(&self) -> f64 {
        self.rows.iter().map(|r| r.delta).fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,delta,loss,argmax_block,argmax_xi\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.15e},{:.15e},{},{}\n",
                join(&r.x),
                r.delta,
                r.loss,
                r.argmax_block.map(|b| b.to_string()).unwrap_or_default(),
                join(&r.argmax_xi)
            ));
        }
        s
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|a| format!("{a}")).collect::<Vec<_>>().join(";")
}

pub(crate) fn make_row(
    spec: &DegeneracySpec,
    x: &[f64],
    per_xi: Vec<(Vec<f64>, Vec<f64>)>,
    per_block: bool,
) -> DeltaRow {
    let nblocks = per_xi.first().map(|v| v.1.len()).unwrap_or(0);
    let mut block_max = vec![f64::NEG_INFINITY; nblocks];
    let mut best = (f64::NEG_INFINITY, None, Vec::new());
    for (xi, vals) in &per_xi {
        for (b, &v) in vals.iter().enumerate() {
            block_max[b] = block_max[b].max(v);
            if v > best.0 {
                best = (v, per_block.then_some(b), xi.clone());
            }
        }
    }
    DeltaRow {
        x: x.to_vec(),
        delta: best.0,
        loss: spec.beta_star() * best.0 * spec.ls(),
        argmax_block: best.1,
        argmax_xi: best.2,
        block_max,
    }
}

/// `delta(x) = max_j sup_xi lambda_max(Re B1_jj)` after killing the
/// off-diagonal blocks with the Sylvester choice of `P1`. When the pair
/// carries its own `M1`, the bound is `lambda_max` of the effective matrix.
pub fn delta_bound_system(
    sys: &FirstOrderSystem,
    pair: &SymmetrizerPair,
    x_grid: &[Vec<f64>],
    xi_samples: &[Vec<f64>],
    gap_tol: f64,
) -> Result<DeltaBound, SystemError> {
    if x_grid.is_empty() || xi_samples.is_empty() {
        return Err(SystemError::NoSamples);
    }
    let spec = *sys.spec();
    let rows: Result<Vec<DeltaRow>, SystemError> = x_grid
        .par_iter()
        .map(|x| {
            let mut per_xi = Vec::with_capacity(xi_samples.len());
            for xi in xi_samples {
                let at = SamplePoint {
                    t: 0.0,
                    x: x.clone(),
                    xi_hat: xi.clone(),
                };
                let roots = sys.root_values(0.0, x, xi);
                check_gaps(&roots, gap_tol, &at)?;
                let cp = conjugated_pair(sys, pair, x, xi)?;
                if pair.m1.is_some() {
                    per_xi.push((xi.clone(), vec![max_real_part_eig(&cp.effective)]));
                    continue;
                }
                let sizes: Vec<usize> = roots.iter().map(|r| r.1).collect();
                let p1 = sylvester_block_offdiag(&roots, &cp.b1)?;
                let (offd, _) = block_residuals(&cp.b0, &cp.b1, &p1, &sizes);
                let scale = frobenius(&cp.b1).max(1.0);
                // B0 is the numerically conjugated matrix, so allow for its
                // deviation from the exact diagonal
                let b0_err = frobenius(&(&cp.b0 - diag_of_roots(&roots)));
                if offd > 1e-10 * scale + b0_err * frobenius(&p1) {
                    return Err(SystemError::Residual(offd));
                }
                let off = block_offsets(&sizes);
                let vals: Vec<f64> = (0..sizes.len())
                    .map(|j| {
                        let blk = cp
                            .b1
                            .view((off[j], off[j]), (sizes[j], sizes[j]))
                            .into_owned();
                        max_real_part_eig(&blk)
                    })
                    .collect();
                per_xi.push((xi.clone(), vals));
            }
            Ok(make_row(&spec, x, per_xi, pair.m1.is_none()))
        })
        .collect();
    Ok(DeltaBound {
        l_star: spec.l_star(),
        beta_star: spec.beta_star(),
        method: if pair.m1.is_some() {
            "effective matrix with supplied M1".into()
        } else {
            "block diagonalization (Sylvester P1), tight on samples".into()
        },
        rows: rows?,
    })
}

/// Strictly hyperbolic shortcut: `delta(x) = max_j sup_xi Re(M0 A1 M0^{-1})_jj`.
pub fn delta_bound_strict(
    sys: &FirstOrderSystem,
    pair: &SymmetrizerPair,
    x_grid: &[Vec<f64>],
    xi_samples: &[Vec<f64>],
) -> Result<DeltaBound, SystemError> {
    let spec = *sys.spec();
    let rows: Result<Vec<DeltaRow>, SystemError> = x_grid
        .par_iter()
        .map(|x| {
            let mut per_xi = Vec::new();
            for xi in xi_samples {
                let cp = conjugated_pair(sys, pair, x, xi)?;
                let vals = (0..sys.size()).map(|j| cp.b1[(j, j)].re).collect();
                per_xi.push((xi.clone(), vals));
            }
            Ok(make_row(&spec, x, per_xi, true))
        })
        .collect();
    Ok(DeltaBound {
        l_star: spec.l_star(),
        beta_star: spec.beta_star(),
        method: "diagonal of M0 A1 M0^{-1}".into(),
        rows: rows?,
    })
}

/// `d/dt` of a matrix function by central differences (forward near 0).
fn dt_matrix(f: &dyn Fn(f64) -> CMatrix, t: f64, h: f64) -> CMatrix {
    if t >= h {
        (f(t + h) - f(t - h)) * c(0.5 / h)
    } else {
        // second-order one-sided difference
        (f(t) * c(-3.0) + f(t + h) * c(4.0) - f(t + 2.0 * h)) * c(0.5 / h)
    }
}

/// The `2N x 2N` system acting on `(g h^{l*} U, h^{l*} D_t U)`:
///
/// `A00 = A + (D_t g)/g + l* (D_t h)/h`, `A10 = (D_t A + l* (D_t h)/h A)/g`,
/// `A11 = A`, with zero upper-right block. The leading parts are block
/// diagonal copies of those of `sys`; everything else is remainder.
pub fn order_raised_system(sys: &FirstOrderSystem) -> Result<FirstOrderSystem, SystemError> {
    if !sys.separable {
        return Err(SystemError::NotSeparable);
    }
    let n = sys.size;
    let spec = sys.spec;
    let base = sys.as_structured();
    let cut = Cutoff::default();
    let full: SymbolFn = Arc::new(move |t, x, xi| {
        let a = base.eval(t, x, xi);
        let br = bracket(xi);
        let (g, dg) = crate::weights::g_with_dt(&spec, &cut, t, br);
        let (h, dh) = crate::weights::h_with_dt(&spec, &cut, t, br);
        let ls = spec.ls();
        // D_t = -i d/dt
        let dtg_g = -I * (dg / g);
        let dth_h = -I * (dh / h);
        let step = 1e-5 * (t + br.powf(-spec.beta_star()));
        let da = dt_matrix(&|s| base.eval(s, x, xi), t, step) * (-I);
        let a00 = &a + CMatrix::identity(n, n) * (dtg_g + dth_h * ls);
        let a10 = (da + &a * (dth_h * ls)) * c(1.0 / g);
        let mut r = CMatrix::zeros(2 * n, 2 * n);
        r.view_mut((0, 0), (n, n)).copy_from(&a00);
        r.view_mut((n, 0), (n, n)).copy_from(&a10);
        r.view_mut((n, n), (n, n)).copy_from(&a);
        r
    });
    let (a0, a1) = (sys.a0.clone(), sys.a1.clone());
    let a0d: SymbolFn = Arc::new(move |t, x, xi| {
        let m = a0(t, x, xi);
        block_diag(&[&m, &m])
    });
    let a1d: SecondaryFn = Arc::new(move |x, xi| {
        let m = a1(x, xi);
        block_diag(&[&m, &m])
    });
    let roots = sys
        .roots
        .iter()
        .map(|r| Root::new(r.mu.clone(), 2 * r.multiplicity))
        .collect();
    let mut raised = FirstOrderSystem::new(spec, 2 * n, a0d, a1d, roots)?
        .with_name(format!("{} (order raised)", sys.name));
    let lead = raised.as_structured();
    let f2 = full.clone();
    raised = raised.with_remainder(Remainder {
        eval: Arc::new(move |t, x, xi| f2(t, x, xi) - lead.leading(t, x, xi)),
        orders: vec![SymbolOrders::new(-1.0, 1.0), SymbolOrders::new(0.0, 0.0)],
    });
    raised.separable = false;
    Ok(raised)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_matrix;

    fn at0() -> SamplePoint {
        SamplePoint {
            t: 0.0,
            x: vec![0.0],
            xi_hat: vec![1.0],
        }
    }

    #[test]
    fn left_eigenbasis_of_swap() {
        let a0 = real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let m0 = left_eigenbasis(&a0, &[(-1.0, 1), (1.0, 1)], &at0()).unwrap();
        let b0 = &m0 * &a0 * inverse(&m0).unwrap();
        assert!(frobenius(&(b0 - real_matrix(2, 2, &[-1.0, 0.0, 0.0, 1.0]))) < 1e-14);
        // rows proportional to (1,-1) and (1,1)
        assert!((m0[(0, 0)] + m0[(0, 1)]).norm() < 1e-14);
        assert!((m0[(1, 0)] - m0[(1, 1)]).norm() < 1e-14);
    }

    #[test]
    fn jordan_block_rejected() {
        let a0 = real_matrix(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(
            left_eigenbasis(&a0, &[(1.0, 2)], &at0()),
            Err(SystemError::NotSymmetrizable { .. })
        ));
    }

    #[test]
    fn sylvester_two_by_two() {
        let b1 = real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let p1 = sylvester_block_offdiag(&[(1.0, 1), (-1.0, 1)], &b1).unwrap();
        assert!(frobenius(&(p1 - real_matrix(2, 2, &[0.0, 0.5, -0.5, 0.0]))) < 1e-15);
    }

    #[test]
    fn sphere_samples_are_unit() {
        for d in 1..=5 {
            let s = sphere_samples(d);
            assert!(!s.is_empty());
            assert!(s.iter().all(|v| (norm(v) - 1.0).abs() < 1e-12));
        }
    }
}
