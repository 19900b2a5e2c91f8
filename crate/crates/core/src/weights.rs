//! Degeneracy parameters and the weight symbols built on them.
//!
//! Everything here is a pure scalar function of `(t, xi)`. Symbols only
//! depend on `|xi|`, so the frequency arguments are vectors of any dimension.

use thiserror::Error;

use crate::jet::Jet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightsError {
    #[error("degeneracy exponent must be >= 1, got {0}")]
    BadExponent(u32),
    #[error("time horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("cutoff derivative of order {order} requested, supported up to {max}")]
    DerivativeOrder { order: usize, max: usize },
    #[error("non-positive weight value {name} = {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Degeneracy exponent `l*`, horizon `T` and the derived `beta* = 1/(l*+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegeneracySpec {
    l_star: u32,
    horizon: f64,
    beta_star: f64,
}

impl DegeneracySpec {
    pub fn new(l_star: u32, horizon: f64) -> Result<Self, WeightsError> {
        if l_star < 1 {
            return Err(WeightsError::BadExponent(l_star));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(WeightsError::BadHorizon(horizon));
        }
        Ok(Self {
            l_star,
            horizon,
            beta_star: 1.0 / (l_star as f64 + 1.0),
        })
    }

    pub fn l_star(&self) -> u32 {
        self.l_star
    }

    /// `l*` as a float, used in exponents.
    pub fn ls(&self) -> f64 {
        self.l_star as f64
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn beta_star(&self) -> f64 {
        self.beta_star
    }

    pub fn check_time(&self, t: f64) -> Result<(), WeightsError> {
        if (0.0..=self.horizon).contains(&t) {
            Ok(())
        } else {
            Err(WeightsError::TimeOutOfRange {
                t,
                horizon: self.horizon,
            })
        }
    }

    /// `lambda(t) = t^{l*}`, unchecked.
    #[inline]
    pub fn lambda(&self, t: f64) -> f64 {
        t.powi(self.l_star as i32)
    }

    /// `d lambda / dt`, unchecked.
    #[inline]
    pub fn lambda_dt(&self, t: f64) -> f64 {
        self.ls() * t.powi(self.l_star as i32 - 1)
    }

    /// `Lambda(t) = beta* t^{l*+1}`, the primitive of `lambda` vanishing at 0.
    #[inline]
    pub fn big_lambda(&self, t: f64) -> f64 {
        self.beta_star * t.powi(self.l_star as i32 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Degeneracy {
    pub lambda: f64,
    pub big_lambda: f64,
}

pub fn degeneracy(spec: &DegeneracySpec, t: f64) -> Result<Degeneracy, WeightsError> {
    spec.check_time(t)?;
    Ok(Degeneracy {
        lambda: spec.lambda(t),
        big_lambda: spec.big_lambda(t),
    })
}

/// `<xi> = (1 + |xi|^2)^{1/2}`.
#[inline]
pub fn bracket(xi: &[f64]) -> f64 {
    bracket_k(1.0, xi)
}

/// `<xi>_K = (K^2 + |xi|^2)^{1/2}`.
#[inline]
pub fn bracket_k(k: f64, xi: &[f64]) -> f64 {
    (k * k + xi.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

const JET_LEN: usize = 5;

/// The C-infinity transition `chi(s) = psi(2s - 1)` with
/// `psi(u) = e^{-1/u} / (e^{-1/u} + e^{-1/(1-u)})` on `(0, 1)`.
///
/// `chi` vanishes for `s <= 1/2`, equals one for `s >= 1` and is monotone in
/// between. Derivatives are exact (Taylor arithmetic) up to `max_derivative`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    max_derivative: usize,
}

impl Default for Cutoff {
    fn default() -> Self {
        Self { max_derivative: 4 }
    }
}

impl Cutoff {
    pub const NAME: &'static str = "chi(s)=psi(2s-1), psi(u)=e^{-1/u}/(e^{-1/u}+e^{-1/(1-u)})";

    pub fn max_derivative(&self) -> usize {
        self.max_derivative
    }

    pub fn name(&self) -> &'static str {
        Self::NAME
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.jet(s).value()
    }

    /// `d^k chi / ds^k` at `s`.
    pub fn derivative(&self, s: f64, order: usize) -> Result<f64, WeightsError> {
        if order > self.max_derivative {
            return Err(WeightsError::DerivativeOrder {
                order,
                max: self.max_derivative,
            });
        }
        Ok(self.jet(s).derivative(order))
    }

    /// Value and first derivative; the hot path for the solver.
    #[inline]
    pub fn value_and_slope(&self, s: f64) -> (f64, f64) {
        if s <= 0.5 {
            return (0.0, 0.0);
        }
        if s >= 1.0 {
            return (1.0, 0.0);
        }
        let j = self.jet_inner::<2>(s);
        (j.value(), j.derivative(1))
    }

    fn jet(&self, s: f64) -> Jet<JET_LEN> {
        if s <= 0.5 {
            Jet::constant(0.0)
        } else if s >= 1.0 {
            Jet::constant(1.0)
        } else {
            self.jet_inner::<JET_LEN>(s)
        }
    }

    fn jet_inner<const N: usize>(&self, s: f64) -> Jet<N> {
        let u = Jet::<N>::variable(s).scale(2.0) - Jet::constant(1.0);
        let one = Jet::<N>::constant(1.0);
        // f = 1/u - 1/(1-u); psi = 1 / (1 + e^f)
        let f = u.recip() - (one - u).recip();
        let f0 = f.value();
        if f0 > 700.0 {
            return Jet::constant(0.0);
        }
        if f0 < -700.0 {
            return Jet::constant(1.0);
        }
        if f0 > 0.0 {
            // e^{-f} / (1 + e^{-f}) avoids overflow
            let e = (-f).exp();
            e * (one + e).recip()
        } else {
            (one + f.exp()).recip()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffPair {
    pub chi_plus: f64,
    pub chi_minus: f64,
}

/// `chi+(t, xi) = chi(Lambda(t) <xi>)` and its complement.
pub fn cutoffs(
    spec: &DegeneracySpec,
    cut: &Cutoff,
    t: f64,
    xi: &[f64],
) -> Result<CutoffPair, WeightsError> {
    spec.check_time(t)?;
    let chi_plus = cut.eval(spec.big_lambda(t) * bracket(xi));
    Ok(CutoffPair {
        chi_plus,
        chi_minus: 1.0 - chi_plus,
    })
}

/// `g`, `h` and their comparison weights `g_bar`, `h_bar` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightValues {
    pub g: f64,
    pub h: f64,
    pub g_bar: f64,
    pub h_bar: f64,
}

impl WeightValues {
    pub fn validate(&self) -> Result<(), WeightsError> {
        for (name, value) in [
            ("g", self.g),
            ("h", self.h),
            ("g_bar", self.g_bar),
            ("h_bar", self.h_bar),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(WeightsError::NonPositive { name, value });
            }
        }
        Ok(())
    }
}

pub fn weight_pair(
    spec: &DegeneracySpec,
    cut: &Cutoff,
    t: f64,
    xi: &[f64],
) -> Result<WeightValues, WeightsError> {
    spec.check_time(t)?;
    let w = weights_at(spec, cut, t, bracket(xi));
    w.validate()?;
    Ok(w)
}

/// Unchecked weights at `<xi> = br`.
#[inline]
pub(crate) fn weights_at(spec: &DegeneracySpec, cut: &Cutoff, t: f64, br: f64) -> WeightValues {
    let bs = spec.beta_star();
    let low = br.powf(bs);
    let lam = spec.lambda(t);
    let chi = cut.eval(spec.big_lambda(t) * br);
    let g = low + chi * (lam * br - low);
    let h = if chi > 0.0 {
        low + chi * (1.0 / t - low)
    } else {
        low
    };
    WeightValues {
        g,
        h,
        g_bar: lam * br + low,
        h_bar: 1.0 / (t + 1.0 / low),
    }
}

/// `(g, dg/dt)` at `<xi> = br`; used to assemble reduced second-order systems.
#[inline]
pub fn g_with_dt(spec: &DegeneracySpec, cut: &Cutoff, t: f64, br: f64) -> (f64, f64) {
    let low = br.powf(spec.beta_star());
    let lam = spec.lambda(t);
    let (chi, dchi) = cut.value_and_slope(spec.big_lambda(t) * br);
    let high = lam * br;
    let g = low + chi * (high - low);
    let dg = dchi * lam * br * (high - low) + chi * spec.lambda_dt(t) * br;
    (g, dg)
}

/// `(h, dh/dt)` at `<xi> = br`.
#[inline]
pub fn h_with_dt(spec: &DegeneracySpec, cut: &Cutoff, t: f64, br: f64) -> (f64, f64) {
    let low = br.powf(spec.beta_star());
    let (chi, dchi) = cut.value_and_slope(spec.big_lambda(t) * br);
    if chi == 0.0 && dchi == 0.0 {
        return (low, 0.0);
    }
    let lam = spec.lambda(t);
    let inv_t = 1.0 / t;
    let h = low + chi * (inv_t - low);
    let dh = dchi * lam * br * (inv_t - low) - chi * inv_t * inv_t;
    (h, dh)
}

/// Band `[c1, c2]` containing both `g / g_bar` and `h / h_bar`.
///
/// Holds for any `[0,1]`-valued cutoff with the support properties of
/// `chi`: in the transition zone the weights are convex combinations of
/// their two branches, and `(l*+1) Lambda <xi>` ranges over `((l*+1)/2, l*+1)`.
pub fn weight_band(spec: &DegeneracySpec) -> (f64, f64) {
    let l1 = spec.ls() + 1.0;
    let c1 = 1.0 / (1.0 + l1.powf(spec.ls() / l1));
    let c2 = 1.0 + l1.powf(spec.beta_star());
    (c1, c2)
}

/// `Theta_{K,delta}(t,x,xi) = chi_K^- <xi>_K^{beta* delta l*} + chi_K^+ t^{-delta l*}`.
pub fn theta_symbol<D>(
    spec: &DegeneracySpec,
    cut: &Cutoff,
    k: f64,
    delta: D,
    t: f64,
    x: &[f64],
    xi: &[f64],
) -> Result<f64, WeightsError>
where
    D: Fn(&[f64]) -> f64,
{
    spec.check_time(t)?;
    let d = delta(x);
    let brk = bracket_k(k, xi);
    let chi = cut.eval(spec.big_lambda(t) * brk);
    let low = brk.powf(spec.beta_star() * d * spec.ls());
    let mut val = (1.0 - chi) * low;
    if chi > 0.0 {
        val += chi * t.powf(-d * spec.ls());
    }
    Ok(val)
}

/// `d Theta / dt` for a fixed exponent `delta` (no x-dependence needed).
pub fn theta_dt(spec: &DegeneracySpec, cut: &Cutoff, k: f64, delta: f64, t: f64, xi: &[f64]) -> f64 {
    let brk = bracket_k(k, xi);
    let (chi, dchi) = cut.value_and_slope(spec.big_lambda(t) * brk);
    if chi == 0.0 && dchi == 0.0 {
        return 0.0;
    }
    let e = delta * spec.ls();
    let low = brk.powf(spec.beta_star() * e);
    let high = t.powf(-e);
    dchi * spec.lambda(t) * brk * (high - low) - chi * e * t.powf(-e - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(l: u32) -> DegeneracySpec {
        DegeneracySpec::new(l, 1.0).unwrap()
    }

    #[test]
    fn degeneracy_values() {
        let d = degeneracy(&spec(1), 1.0).unwrap();
        assert_eq!((d.lambda, d.big_lambda), (1.0, 0.5));
        let d = degeneracy(&spec(2), 0.0).unwrap();
        assert_eq!((d.lambda, d.big_lambda), (0.0, 0.0));
        let d = degeneracy(&spec(2), 1.0).unwrap();
        assert_eq!(d.lambda, 1.0);
        assert!((d.big_lambda - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn beta_star_is_exact_reciprocal() {
        for l in 1..10 {
            let s = spec(l);
            assert_eq!(s.beta_star() * (l as f64 + 1.0), 1.0);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(DegeneracySpec::new(0, 1.0).is_err());
        assert!(DegeneracySpec::new(1, 0.0).is_err());
        assert!(DegeneracySpec::new(1, f64::NAN).is_err());
        assert!(matches!(
            degeneracy(&spec(1), 1.5),
            Err(WeightsError::TimeOutOfRange { .. })
        ));
        assert!(degeneracy(&spec(1), -1e-9).is_err());
        assert!(cutoffs(&spec(1), &Cutoff::default(), 2.0, &[1.0]).is_err());
    }

    #[test]
    fn cutoff_support_and_monotonicity() {
        let c = Cutoff::default();
        assert_eq!(c.eval(0.5), 0.0);
        assert_eq!(c.eval(-3.0), 0.0);
        assert_eq!(c.eval(1.0), 1.0);
        assert_eq!(c.eval(7.0), 1.0);
        assert!((c.eval(0.75) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..=2000 {
            let s = 0.5 + 0.5 * i as f64 / 2000.0;
            let v = c.eval(s);
            assert!(v >= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
        for k in 1..=4 {
            assert_eq!(c.derivative(0.4, k).unwrap(), 0.0);
            assert_eq!(c.derivative(1.2, k).unwrap(), 0.0);
        }
        assert!(c.derivative(0.7, 5).is_err());
    }

    #[test]
    fn cutoff_derivatives_match_finite_differences() {
        let c = Cutoff::default();
        let h = 1e-4;
        for &s in &[0.55, 0.6, 0.7, 0.8, 0.9, 0.95] {
            for k in 1..=3 {
                let f = |d: f64| c.derivative(s + d, k - 1).unwrap();
                let fd = (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h);
                let exact = c.derivative(s, k).unwrap();
                assert!(
                    (fd - exact).abs() < 1e-5 * exact.abs().max(1.0),
                    "s={s} k={k}: {fd} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn cutoffs_partition_unity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let sp = spec(2);
        let c = Cutoff::default();
        for _ in 0..10_000 {
            let t = rng.gen_range(0.0..=1.0);
            let xi = [rng.gen_range(-1e3..1e3)];
            let p = cutoffs(&sp, &c, t, &xi).unwrap();
            assert_eq!(p.chi_plus + p.chi_minus, 1.0);
            assert!((0.0..=1.0).contains(&p.chi_plus));
        }
        let p = cutoffs(&sp, &c, 0.0, &[1e8]).unwrap();
        assert_eq!((p.chi_plus, p.chi_minus), (0.0, 1.0));
        // Lambda(1) <xi> >= 1
        let p = cutoffs(&sp, &c, 1.0, &[5.0]).unwrap();
        assert_eq!(p.chi_plus, 1.0);
    }

    #[test]
    fn weights_at_origin_and_far_zone() {
        let sp = spec(1);
        let c = Cutoff::default();
        let xi = [40.0];
        let w = weight_pair(&sp, &c, 0.0, &xi).unwrap();
        let low = bracket(&xi).sqrt();
        assert_eq!(w.g, low);
        assert_eq!(w.h, low);
        // Lambda(t) <xi> >= 1 here
        let t = 0.5;
        assert!(sp.big_lambda(t) * bracket(&xi) >= 1.0);
        let w = weight_pair(&sp, &c, t, &xi).unwrap();
        assert!((w.g - t * bracket(&xi)).abs() < 1e-12);
        assert!((w.h - 1.0 / t).abs() < 1e-12);
    }

    #[test]
    fn g_and_h_slopes_match_finite_differences() {
        let sp = spec(2);
        let c = Cutoff::default();
        let br = bracket(&[30.0]);
        let dt = 1e-6;
        for i in 1..40 {
            let t = i as f64 / 40.0;
            let (_, dg) = g_with_dt(&sp, &c, t, br);
            let fd = (g_with_dt(&sp, &c, t + dt, br).0 - g_with_dt(&sp, &c, t - dt, br).0) / (2.0 * dt);
            assert!((dg - fd).abs() < 1e-5 * dg.abs().max(1.0), "t={t}");
            let (_, dh) = h_with_dt(&sp, &c, t, br);
            let fd = (h_with_dt(&sp, &c, t + dt, br).0 - h_with_dt(&sp, &c, t - dt, br).0) / (2.0 * dt);
            assert!((dh - fd).abs() < 1e-5 * dh.abs().max(1.0), "t={t}");
        }
    }

    #[test]
    fn theta_cases() {
        let sp = spec(1);
        let c = Cutoff::default();
        let delta = |_: &[f64]| 0.7;
        let xi = [12.0];
        let th = theta_symbol(&sp, &c, 2.0, delta, 0.0, &[0.0], &xi).unwrap();
        assert!((th - bracket_k(2.0, &xi).powf(0.5 * 0.7)).abs() < 1e-14);
        for &t in &[0.0, 0.1, 0.5, 1.0] {
            let th = theta_symbol(&sp, &c, 2.0, |_: &[f64]| 0.0, t, &[0.3], &xi).unwrap();
            assert_eq!(th, 1.0);
        }
        let t = 0.9;
        assert!(sp.big_lambda(t) * bracket_k(2.0, &xi) >= 1.0);
        let th = theta_symbol(&sp, &c, 2.0, delta, t, &[0.0], &xi).unwrap();
        assert!((th - t.powf(-0.7)).abs() < 1e-14);
    }

    #[test]
    fn theta_slope_matches_finite_difference() {
        let sp = spec(1);
        let c = Cutoff::default();
        let xi = [9.0];
        let dt = 1e-6;
        for i in 1..50 {
            let t = i as f64 / 50.0;
            let f = |s: f64| theta_symbol(&sp, &c, 1.5, |_: &[f64]| 0.8, s, &[0.0], &xi).unwrap();
            let fd = (f(t + dt) - f(t - dt)) / (2.0 * dt);
            let ex = theta_dt(&sp, &c, 1.5, 0.8, t, &xi);
            assert!((fd - ex).abs() < 1e-5 * ex.abs().max(1.0));
        }
    }
}
