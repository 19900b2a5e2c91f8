//! Structured symbols and numerical class-membership checks.
//!
//! A structured symbol of orders `(m, eta)` is stored through its homogeneous
//! parts `a0` (degree `m`) and `a1` (degree `m-1`) in the rescaled frequency
//! `zeta = t^{l*+1} xi`, plus an optional remainder evaluated on the original
//! variables:
//!
//! `a(t,x,xi) = chi+(t,xi) t^{-eta} (a0 + a1)(t,x,t^{l*+1} xi) + a2(t,x,xi)`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{c, frobenius, CMatrix};
use crate::weights::{bracket, weights_at, Cutoff, DegeneracySpec, WeightsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolError {
    #[error("frequency must be nonzero")]
    ZeroFrequency,
    #[error("principal symbol at t=0 is singular: m(l*+1) = {lhs} < eta = {eta}")]
    SingularLimit { lhs: f64, eta: f64 },
    #[error("matrix size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("non-finite symbol value at t={t}, x={x}, xi={xi}")]
    NonFinite { t: f64, x: f64, xi: f64 },
    #[error(transparent)]
    Weights(#[from] WeightsError),
}

/// Exponents of the comparison weight `g_bar^m h_bar^{eta-m}`, with an
/// optional logarithmic power `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymbolOrders {
    pub m: f64,
    pub eta: f64,
    pub log_power: u32,
}

impl SymbolOrders {
    pub fn new(m: f64, eta: f64) -> Self {
        Self { m, eta, log_power: 0 }
    }

    pub fn with_log(self, b: u32) -> Self {
        Self { log_power: b, ..self }
    }

    /// Weight bounding `d_t^j d_x^alpha d_xi^beta` of a symbol of these orders.
    fn weight(&self, g_bar: f64, h_bar: f64, br: f64, j: usize, alpha: usize, beta: usize) -> f64 {
        let mut w = g_bar.powf(self.m)
            * h_bar.powf(self.eta - self.m + j as f64)
            * br.powi(-(beta as i32));
        let logs = self.log_power as i32 + alpha as i32;
        if logs > 0 {
            w *= (1.0 + h_bar.ln().abs()).powi(logs);
        }
        w
    }
}

/// Matrix-valued function of `(t, x, frequency)`.
pub type SymbolFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> CMatrix + Send + Sync>;

/// Remainder term with the orders it is declared to belong to (a union).
#[derive(Clone)]
pub struct Remainder {
    pub eval: SymbolFn,
    pub orders: Vec<SymbolOrders>,
}

#[derive(Clone)]
pub struct StructuredSymbol {
    size: usize,
    spec: DegeneracySpec,
    cutoff: Cutoff,
    a0: SymbolFn,
    a1: SymbolFn,
    a2: Option<Remainder>,
    orders: SymbolOrders,
}

impl std::fmt::Debug for StructuredSymbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StructuredSymbol")
            .field("size", &self.size)
            .field("orders", &self.orders)
            .field("has_remainder", &self.a2.is_some())
            .finish()
    }
}

impl StructuredSymbol {
    pub fn new(
        spec: DegeneracySpec,
        size: usize,
        orders: SymbolOrders,
        a0: SymbolFn,
        a1: SymbolFn,
    ) -> Self {
        Self {
            size,
            spec,
            cutoff: Cutoff::default(),
            a0,
            a1,
            a2: None,
            orders,
        }
    }

    pub fn with_remainder(mut self, rem: Remainder) -> Self {
        self.a2 = Some(rem);
        self
    }

    pub fn with_cutoff(mut self, cutoff: Cutoff) -> Self {
        self.cutoff = cutoff;
        self
    }

    /// The identity, with the low-frequency part `chi- I` as remainder.
    pub fn identity(spec: DegeneracySpec, size: usize) -> Self {
        let cut = Cutoff::default();
        let low: SymbolFn = Arc::new(move |t, _x, xi| {
            let chi = cut.eval(spec.big_lambda(t) * bracket(xi));
            CMatrix::identity(size, size) * Complex64::new(1.0 - chi, 0.0)
        });
        Self::new(
            spec,
            size,
            SymbolOrders::new(0.0, 0.0),
            Arc::new(move |_, _, _| CMatrix::identity(size, size)),
            Arc::new(move |_, _, _| CMatrix::zeros(size, size)),
        )
        .with_remainder(Remainder {
            eval: low,
            orders: vec![SymbolOrders::new(-1.0, 0.0)],
        })
    }

    /// Scalar `g^m h^{eta-m}`, with leading part `|zeta|^m` and the exact
    /// difference carried as remainder.
    pub fn weight_power(spec: DegeneracySpec, m: f64, eta: f64) -> Self {
        let cut = Cutoff::default();
        let rem: SymbolFn = Arc::new(move |t, _x, xi| {
            let br = bracket(xi);
            let w = weights_at(&spec, &cut, t, br);
            let full = w.g.powf(m) * w.h.powf(eta - m);
            let chi = cut.eval(spec.big_lambda(t) * br);
            let lead = if chi > 0.0 {
                let z = t.powi(spec.l_star() as i32 + 1) * norm(xi);
                chi * t.powf(-eta) * z.powf(m)
            } else {
                0.0
            };
            CMatrix::from_element(1, 1, c(full - lead))
        });
        let orders = SymbolOrders::new(m, eta);
        Self::new(
            spec,
            1,
            orders,
            Arc::new(move |_, _, z| CMatrix::from_element(1, 1, c(norm(z).powf(m)))),
            Arc::new(|_, _, _| CMatrix::zeros(1, 1)),
        )
        .with_remainder(Remainder {
            eval: rem,
            orders: vec![orders],
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn orders(&self) -> SymbolOrders {
        self.orders
    }

    pub fn spec(&self) -> &DegeneracySpec {
        &self.spec
    }

    pub fn cutoff(&self) -> &Cutoff {
        &self.cutoff
    }

    pub fn remainder(&self) -> Option<&Remainder> {
        self.a2.as_ref()
    }

    pub fn a0(&self, t: f64, x: &[f64], zeta: &[f64]) -> CMatrix {
        (self.a0)(t, x, zeta)
    }

    pub fn a1(&self, t: f64, x: &[f64], zeta: &[f64]) -> CMatrix {
        (self.a1)(t, x, zeta)
    }

    /// `chi+ t^{-eta} (a0 + a1)(t, x, t^{l*+1} xi)`.
    pub fn leading(&self, t: f64, x: &[f64], xi: &[f64]) -> CMatrix {
        let chi = self.cutoff.eval(self.spec.big_lambda(t) * bracket(xi));
        if chi == 0.0 {
            return CMatrix::zeros(self.size, self.size);
        }
        let zeta = rescale(&self.spec, t, xi);
        let mut out = (self.a0)(t, x, &zeta) + (self.a1)(t, x, &zeta);
        out *= c(chi * t.powf(-self.orders.eta));
        out
    }

    /// Full symbol: leading part plus remainder.
    pub fn eval(&self, t: f64, x: &[f64], xi: &[f64]) -> CMatrix {
        let mut out = self.leading(t, x, xi);
        if let Some(r) = &self.a2 {
            out += (r.eval)(t, x, xi);
        }
        out
    }

    /// Pointwise conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let (a0, a1) = (self.a0.clone(), self.a1.clone());
        let a2 = self.a2.as_ref().map(|r| {
            let e = r.eval.clone();
            Remainder {
                eval: Arc::new(move |t, x, xi| e(t, x, xi).adjoint()),
                orders: r.orders.clone(),
            }
        });
        Self {
            a0: Arc::new(move |t, x, z| a0(t, x, z).adjoint()),
            a1: Arc::new(move |t, x, z| a1(t, x, z).adjoint()),
            a2,
            ..self.clone()
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn rescale(spec: &DegeneracySpec, t: f64, xi: &[f64]) -> Vec<f64> {
    let s = t.powi(spec.l_star() as i32 + 1);
    xi.iter().map(|v| v * s).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalSymbols {
    pub sigma_m: CMatrix,
    pub sigma_tilde: CMatrix,
    pub sigma_tilde_top: CMatrix,
}

/// `sigma^m = t^{-eta} a0(t,x,t^{l*+1} xi)`, `sigma~ = a1(0,x,xi)` and
/// `sigma~_top = a0(0,x,xi)`.
///
/// At `t = 0` the principal symbol is the homogeneity limit
/// `t^{m(l*+1)-eta} a0(t,x,xi)`, which exists when `m(l*+1) >= eta`.
pub fn principal_symbols(
    sym: &StructuredSymbol,
    t: f64,
    x: &[f64],
    xi: &[f64],
) -> Result<PrincipalSymbols, SymbolError> {
    if norm(xi) == 0.0 {
        return Err(SymbolError::ZeroFrequency);
    }
    sym.spec.check_time(t)?;
    let o = sym.orders;
    let sigma_m = if t > 0.0 {
        (sym.a0)(t, x, &rescale(&sym.spec, t, xi)) * c(t.powf(-o.eta))
    } else {
        let lhs = o.m * (sym.spec.ls() + 1.0);
        if lhs > o.eta + 1e-12 {
            CMatrix::zeros(sym.size, sym.size)
        } else if (lhs - o.eta).abs() <= 1e-12 {
            (sym.a0)(0.0, x, xi)
        } else {
            return Err(SymbolError::SingularLimit { lhs, eta: o.eta });
        }
    };
    Ok(PrincipalSymbols {
        sigma_m,
        sigma_tilde: (sym.a1)(0.0, x, xi),
        sigma_tilde_top: (sym.a0)(0.0, x, xi),
    })
}

/// Leading-order composition: `a0 b0` and `a0 b1 + a1 b0`, orders summed.
///
/// The remainder is the exact pointwise product of the full symbols minus
/// the new leading part, declared in the composition error class.
pub fn compose_leading(
    a: &StructuredSymbol,
    b: &StructuredSymbol,
) -> Result<StructuredSymbol, SymbolError> {
    if a.size != b.size {
        return Err(SymbolError::SizeMismatch {
            left: a.size,
            right: b.size,
        });
    }
    let orders = SymbolOrders::new(a.orders.m + b.orders.m, a.orders.eta + b.orders.eta);
    let (a0, a1, b0, b1) = (a.a0.clone(), a.a1.clone(), b.a0.clone(), b.a1.clone());
    let (x0, y0) = (a0.clone(), b0.clone());
    let lead = StructuredSymbol::new(
        a.spec,
        a.size,
        orders,
        Arc::new(move |t, x, z| x0(t, x, z) * y0(t, x, z)),
        Arc::new(move |t, x, z| a0(t, x, z) * b1(t, x, z) + a1(t, x, z) * b0(t, x, z)),
    )
    .with_cutoff(a.cutoff);
    let (fa, fb, fl) = (a.clone(), b.clone(), lead.clone());
    let rem = Remainder {
        eval: Arc::new(move |t, x, xi| fa.eval(t, x, xi) * fb.eval(t, x, xi) - fl.leading(t, x, xi)),
        orders: vec![SymbolOrders::new(
            orders.m - 1.0,
            orders.eta - (a.spec.ls() + 1.0),
        )],
    };
    Ok(lead.with_remainder(rem))
}

/// Sampling grid for class checks: 1-D `x`, `|xi| >= 1` of both signs, and
/// times uniform on `[0,T]` plus a geometric sequence from `T` toward `t = 0`.
///
/// The geometric part resolves the cutoff transition `Lambda(t) <xi> ~ 1`,
/// which is narrow in `t` at large frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    spec: DegeneracySpec,
    n_t: usize,
    n_geo: usize,
    per_octave: usize,
    n_xi: usize,
    xi_max: f64,
    pub times: Vec<f64>,
    pub xis: Vec<f64>,
    pub xs: Vec<f64>,
}

impl SymbolGrid {
    pub fn new(spec: DegeneracySpec, n_t: usize, n_xi: usize, xi_max: f64) -> Self {
        Self::build(spec, n_t, 16, 4, n_xi, xi_max, vec![0.0, 0.7, 2.1])
    }

    fn build(
        spec: DegeneracySpec,
        n_t: usize,
        n_geo: usize,
        per_octave: usize,
        n_xi: usize,
        xi_max: f64,
        xs: Vec<f64>,
    ) -> Self {
        let big_t = spec.horizon();
        let mut times: Vec<f64> = (0..=n_t).map(|k| big_t * k as f64 / n_t as f64).collect();
        let octaves = n_geo + (n_t as f64).log2().ceil() as usize;
        let q = 0.5f64.powf(1.0 / per_octave as f64);
        times.extend((1..=octaves * per_octave).map(|k| big_t * q.powi(k as i32)));
        times.sort_by(f64::total_cmp);
        times.dedup();
        let mut xis = Vec::with_capacity(2 * n_xi);
        for k in 0..n_xi {
            let v = xi_max.powf(k as f64 / (n_xi - 1).max(1) as f64);
            xis.push(v);
            xis.push(-v);
        }
        Self {
            spec,
            n_t,
            n_geo,
            per_octave,
            n_xi,
            xi_max,
            times,
            xis,
            xs,
        }
    }

    pub fn with_xs(self, xs: Vec<f64>) -> Self {
        Self::build(self.spec, self.n_t, self.n_geo, self.per_octave, self.n_xi, self.xi_max, xs)
    }

    /// Denser in every direction, with four times the frequency range.
    pub fn refined(&self) -> Self {
        Self::build(
            self.spec,
            2 * self.n_t,
            self.n_geo + 4,
            2 * self.per_octave,
            2 * self.n_xi,
            4.0 * self.xi_max,
            self.xs.clone(),
        )
    }

    pub fn spec(&self) -> &DegeneracySpec {
        &self.spec
    }

    pub fn descriptor(&self) -> String {
        format!(
            "t: {} uniform + {} geometric on [0,{}]; xi: +-{} log-spaced in [1,{}]; x: {:?}",
            self.n_t,
            self.times.len() - self.n_t - 1,
            self.spec.horizon(),
            self.n_xi,
            self.xi_max,
            self.xs
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateEntry {
    pub j: usize,
    pub alpha: usize,
    pub beta: usize,
    /// Sup of the weighted derivative on the base grid.
    pub base: f64,
    /// Sup on the refined grid; this is the reported constant.
    pub constant: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub entries: Vec<EstimateEntry>,
    pub grid: String,
    pub pass: bool,
}

impl EstimateReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("j,alpha,beta,C,verdict\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{},{:.12e},{}\n",
                e.j,
                e.alpha,
                e.beta,
                e.constant,
                if e.pass { "pass" } else { "fail" }
            ));
        }
        s
    }
}

/// Allowed growth of a constant under one refinement.
const REFINEMENT_GROWTH: f64 = 1.1;

/// Check `|d_t^j d_x^alpha d_xi^beta a| <= C * weight` on a grid and its
/// refinement, for every multi-index up to `max_orders = (J, A, B)`.
///
/// With several `orders` the weight is their sum (a union of classes).
pub fn estimate_constants<F>(
    a: F,
    orders: &[SymbolOrders],
    grid: &SymbolGrid,
    max_orders: (usize, usize, usize),
) -> Result<EstimateReport, SymbolError>
where
    F: Fn(f64, &[f64], &[f64]) -> CMatrix + Sync,
{
    let base = grid_sup(&a, orders, grid, max_orders)?;
    let fine_grid = grid.refined();
    let fine = grid_sup(&a, orders, &fine_grid, max_orders)?;
    let scale = base.iter().map(|(_, v)| *v).fold(1.0, f64::max);
    let entries: Vec<EstimateEntry> = base
        .iter()
        .zip(&fine)
        .map(|(&((j, alpha, beta), b), &(_, f))| EstimateEntry {
            j,
            alpha,
            beta,
            base: b,
            constant: f.max(b),
            pass: f <= REFINEMENT_GROWTH * b + 1e-8 * scale,
        })
        .collect();
    let pass = entries.iter().all(|e| e.pass);
    Ok(EstimateReport {
        entries,
        grid: format!("{} | refined: {}", grid.descriptor(), fine_grid.descriptor()),
        pass,
    })
}

type Index3 = (usize, usize, usize);

fn multi_indices(max: Index3) -> Vec<Index3> {
    let mut v = Vec::new();
    for j in 0..=max.0 {
        for a in 0..=max.1 {
            for b in 0..=max.2 {
                v.push((j, a, b));
            }
        }
    }
    v
}

/// Nodes and weights of the `d`-th difference with step `h`, centered at
/// zero unless that would leave `[lo, hi]` relative to the base point.
fn stencil(d: usize, h: f64, room_below: f64, room_above: f64) -> Vec<(f64, f64)> {
    let half = d as f64 / 2.0;
    let mut shift = -half * h;
    if shift < -room_below {
        shift = -room_below.max(0.0);
    }
    if shift + d as f64 * h > room_above {
        shift = room_above - d as f64 * h;
    }
    let mut binom = 1.0;
    let mut out = Vec::with_capacity(d + 1);
    let hd = h.powi(d as i32);
    for k in 0..=d {
        if k > 0 {
            binom = binom * (d - k + 1) as f64 / k as f64;
        }
        let sign = if (d - k) % 2 == 0 { 1.0 } else { -1.0 };
        out.push((shift + k as f64 * h, sign * binom / hd));
    }
    out
}

fn grid_sup<F>(
    a: &F,
    orders: &[SymbolOrders],
    grid: &SymbolGrid,
    max: Index3,
) -> Result<Vec<(Index3, f64)>, SymbolError>
where
    F: Fn(f64, &[f64], &[f64]) -> CMatrix + Sync,
{
    let spec = grid.spec;
    let idx = multi_indices(max);
    let big_t = spec.horizon();
    let per_time: Result<Vec<Vec<f64>>, SymbolError> = grid
        .times
        .par_iter()
        .map(|&t| {
            let mut sup = vec![0.0f64; idx.len()];
            for &x in &grid.xs {
                for &xi in &grid.xis {
                    let br = bracket(&[xi]);
                    let low = br.powf(-spec.beta_star());
                    let ht = 1e-3 * (t + low);
                    let hxi = 1e-3 * br;
                    let hx = 1e-3;
                    let g_bar = spec.lambda(t) * br + 1.0 / low;
                    let h_bar = 1.0 / (t + low);
                    for (slot, &(j, al, be)) in idx.iter().enumerate() {
                        let st = stencil(j, ht, t, big_t - t);
                        let sx = stencil(al, hx, f64::INFINITY, f64::INFINITY);
                        let sxi = stencil(be, hxi, f64::INFINITY, f64::INFINITY);
                        let mut acc: Option<CMatrix> = None;
                        for &(dt, wt) in &st {
                            for &(dx, wx) in &sx {
                                for &(dxi, wxi) in &sxi {
                                    let v = a(t + dt, &[x + dx], &[xi + dxi]);
                                    if v.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                                        return Err(SymbolError::NonFinite { t: t + dt, x: x + dx, xi: xi + dxi });
                                    }
                                    let w = Complex64::new(wt * wx * wxi, 0.0);
                                    match acc.as_mut() {
                                        Some(m) => *m += v * w,
                                        None => acc = Some(v * w),
                                    }
                                }
                            }
                        }
                        let deriv = acc.map(|m| frobenius(&m)).unwrap_or(0.0);
                        let weight: f64 = orders
                            .iter()
                            .map(|o| o.weight(g_bar, h_bar, br, j, al, be))
                            .sum();
                        sup[slot] = sup[slot].max(deriv / weight);
                    }
                }
            }
            Ok(sup)
        })
        .collect();
    let per_time = per_time?;
    Ok(idx
        .iter()
        .enumerate()
        .map(|(slot, &ix)| (ix, per_time.iter().map(|v| v[slot]).fold(0.0, f64::max)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipticityMargin {
    pub c1: f64,
    pub pass: bool,
}

/// `c1 = inf |det a| / (g_bar^m h_bar^{eta-m})^N` over the grid.
pub fn ellipticity_margin<F>(
    a: F,
    orders: SymbolOrders,
    grid: &SymbolGrid,
    tolerance: f64,
) -> EllipticityMargin
where
    F: Fn(f64, &[f64], &[f64]) -> CMatrix + Sync,
{
    let spec = grid.spec;
    let c1 = grid
        .times
        .par_iter()
        .map(|&t| {
            let mut inf = f64::INFINITY;
            for &x in &grid.xs {
                for &xi in &grid.xis {
                    let m = a(t, &[x], &[xi]);
                    let n = m.nrows() as i32;
                    let br = bracket(&[xi]);
                    let low = br.powf(-spec.beta_star());
                    let g_bar = spec.lambda(t) * br + 1.0 / low;
                    let h_bar = 1.0 / (t + low);
                    let w = (g_bar.powf(orders.m) * h_bar.powf(orders.eta - orders.m)).powi(n);
                    inf = inf.min(m.determinant().norm() / w);
                }
            }
            inf
        })
        .reduce(|| f64::INFINITY, f64::min);
    EllipticityMargin {
        c1,
        pass: c1 > tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_weights_reproduce_monomials() {
        // d-th difference of x^d is d!
        for d in 0..=3 {
            let st = stencil(d, 0.1, 1.0, 1.0);
            let v: f64 = st.iter().map(|(x, w)| w * (0.3 + x).powi(d as i32)).sum();
            let fact: f64 = (1..=d).map(|i| i as f64).product();
            assert!((v - fact).abs() < 1e-8, "d={d}: {v}");
        }
    }

    #[test]
    fn stencil_shifts_forward_at_boundary() {
        let st = stencil(2, 0.1, 0.0, 1.0);
        assert!(st.iter().all(|(x, _)| *x >= 0.0));
    }

    #[test]
    fn zero_frequency_rejected() {
        let spec = DegeneracySpec::new(1, 1.0).unwrap();
        let s = StructuredSymbol::identity(spec, 2);
        assert_eq!(
            principal_symbols(&s, 0.5, &[0.0], &[0.0]).unwrap_err(),
            SymbolError::ZeroFrequency
        );
    }

    #[test]
    fn singular_limit_flagged() {
        let spec = DegeneracySpec::new(1, 1.0).unwrap();
        let s = StructuredSymbol::weight_power(spec, 0.0, 1.0);
        assert!(matches!(
            principal_symbols(&s, 0.0, &[0.0], &[3.0]),
            Err(SymbolError::SingularLimit { .. })
        ));
        let s = StructuredSymbol::weight_power(spec, 1.0, 2.0);
        let p = principal_symbols(&s, 0.0, &[0.0], &[3.0]).unwrap();
        assert!((p.sigma_m[(0, 0)].re - 3.0).abs() < 1e-15);
    }
}
