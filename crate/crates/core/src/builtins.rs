//! Named problems with their spectral realizations, plus seeded random
//! generators.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::linalg::{c, real_matrix, CMatrix, I};
use crate::reduction::{CoeffFn, ReductionError, ScalarOperator};
use crate::solver::{ModeCtx, ModeSymbol, PeriodicGrid, SpectralState, SpectralSystem};
use crate::symbolcalc::{Remainder, SymbolOrders};
use crate::systems::{FirstOrderSystem, Root, SecondaryFn};
use crate::weights::{g_with_dt, Cutoff, DegeneracySpec};

fn spec(l_star: u32, horizon: f64) -> DegeneracySpec {
    DegeneracySpec::new(l_star, horizon).expect("valid built-in degeneracy")
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `D_t^2 - t^2 D_x^2 + i(4k+1) D_x`, i.e. `u_tt - t^2 u_xx - (4k+1) u_x`.
pub fn qi_operator(k: f64) -> ScalarOperator {
    ScalarOperator::new(spec(1, 1.0), 2, 1)
        .and_then(|op| op.with_constant_term(0, vec![2], c(-1.0)))
        .and_then(|op| op.with_constant_term(0, vec![1], Complex64::new(0.0, 4.0 * k + 1.0)))
        .expect("valid terms")
        .with_name(format!("qi(k={k})"))
}

/// `D_t^2 - t^{2l*} D_x^2`.
pub fn wave_operator(l_star: u32) -> Result<ScalarOperator, ReductionError> {
    let s = DegeneracySpec::new(l_star, 1.0)?;
    Ok(ScalarOperator::new(s, 2, 1)?
        .with_constant_term(0, vec![2], c(-1.0))?
        .with_name(format!("wave(l_star={l_star})")))
}

/// `D_t - t^{l*} a D_x`.
pub fn transport_operator(l_star: u32, a: f64) -> ScalarOperator {
    ScalarOperator::new(spec(l_star, 1.0), 1, 1)
        .and_then(|op| op.with_constant_term(0, vec![1], c(-a)))
        .expect("valid terms")
        .with_name(format!("transport(a={a})"))
}

/// The exact symbol of the reduction `U = (g u, D_t u)` of the Qi equation:
/// `[[D_t g / g, g], [(t^2 xi^2 - i(4k+1) xi) / g, 0]]`.
fn qi_exact_symbol(s: &DegeneracySpec, cut: &Cutoff, k: f64, t: f64, xi: f64) -> [Complex64; 4] {
    let br = (1.0 + xi * xi).sqrt();
    let (g, dg) = g_with_dt(s, cut, t, br);
    let lam = s.lambda(t);
    [
        Complex64::new(0.0, -dg / g),
        c(g),
        Complex64::new(lam * lam * xi * xi, -(4.0 * k + 1.0) * xi) / g,
        Complex64::default(),
    ]
}

/// The Qi system in the form `chi+ (t|xi| A0 - i t^{-1} A1) + A2` with
/// `A0 = [[0,1],[1,0]]`, `A1 = [[1,0],[b,0]]`, `b = (4k+1) sgn xi`.
///
/// `A2` is the exact reduced symbol minus the leading part: of order zero
/// where the cutoff is one, and supported near `t = 0` otherwise.
pub fn qi_system(k: f64) -> FirstOrderSystem {
    let s = spec(1, 1.0);
    let a0 = Arc::new(|_: f64, _: &[f64], _: &[f64]| real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    let a1: SecondaryFn = Arc::new(move |_, xi| {
        let b = (4.0 * k + 1.0) * sgn(xi[0]);
        real_matrix(2, 2, &[1.0, 0.0, b, 0.0])
    });
    let sys = FirstOrderSystem::new(
        s,
        2,
        a0,
        a1,
        vec![Root::constant(-1.0, 1), Root::constant(1.0, 1)],
    )
    .expect("two simple roots")
    .with_name(format!("qi system(k={k})"));
    let lead = sys.clone();
    let cut = Cutoff::default();
    let rem = Remainder {
        eval: Arc::new(move |t, x, xi| {
            let e = qi_exact_symbol(&s, &cut, k, t, xi[0]);
            CMatrix::from_row_slice(2, 2, &e) - lead.as_structured().leading(t, x, xi)
        }),
        orders: vec![SymbolOrders::new(0.0, 0.0), SymbolOrders::new(1.0, 1.0)],
    };
    sys.with_remainder(rem)
}

fn diff_a1(x: f64) -> [f64; 4] {
    let off = 0.2 * x.sin();
    [1.0 + 0.3 * x.cos(), off, off, -1.0 + 0.3 * x.cos()]
}

fn diff_a0(x: f64) -> [f64; 4] {
    [0.4 * x.sin(), 0.25, -0.25, 0.3 * x.cos()]
}

/// `L = D_t + t^{l*} a_1(x) D_x + a_0(x)` with a symmetric real `a_1` of
/// eigenvalues `0.3 cos x +- (1 + 0.04 sin^2 x)^{1/2}`.
///
/// `A0 = -a_1 xi_hat`, `A1 = 0`; the lower order term and the part of the
/// principal term cut off near `t = 0` make up `A2`.
pub fn diff_system(l_star: u32) -> FirstOrderSystem {
    let s = spec(l_star, 1.0);
    let a0 = Arc::new(|_: f64, x: &[f64], xi: &[f64]| real_matrix(2, 2, &diff_a1(x[0])) * c(-xi[0]));
    let a1: SecondaryFn = Arc::new(|_, _| CMatrix::zeros(2, 2));
    let root = |sign: f64| -> Root {
        Root::new(
            Arc::new(move |_, x: &[f64], xi: &[f64]| {
                let r = (1.0 + 0.04 * x[0].sin().powi(2)).sqrt();
                -xi[0] * 0.3 * x[0].cos() + sign * r
            }),
            1,
        )
    };
    let sys = FirstOrderSystem::new(s, 2, a0, a1, vec![root(-1.0), root(1.0)])
        .expect("two simple roots")
        .with_name(format!("differential system(l_star={l_star})"));
    let lead = sys.clone();
    let rem = Remainder {
        eval: Arc::new(move |t, x, xi| {
            let exact = real_matrix(2, 2, &diff_a1(x[0])) * c(-s.lambda(t) * xi[0])
                - real_matrix(2, 2, &diff_a0(x[0]));
            exact - lead.as_structured().leading(t, x, xi)
        }),
        orders: vec![SymbolOrders::new(0.0, 0.0), SymbolOrders::new(1.0, 1.0)],
    };
    sys.with_remainder(rem)
}

fn write(buf: &mut [Complex64], e: [Complex64; 4]) {
    buf.copy_from_slice(&e);
}

/// Spectral form of the Qi reduction `U = (g u, D_t u)`.
pub fn qi_spectral(k: f64, grid: &PeriodicGrid) -> SpectralSystem {
    let s = spec(1, 1.0);
    let cut = Cutoff::default();
    let sym: ModeSymbol = Arc::new(move |m: &ModeCtx, buf: &mut [Complex64]| {
        write(buf, qi_exact_symbol(&s, &cut, k, m.t, m.xi))
    });
    SpectralSystem::new(s, 2, grid.clone(), format!("qi(k={k})")).with_term(sym)
}

/// Spectral form of `D_t^2 - t^{2l*} D_x^2` reduced by `U = (g u, D_t u)`.
pub fn wave_spectral(l_star: u32, grid: &PeriodicGrid) -> SpectralSystem {
    let s = spec(l_star, 1.0);
    let cut = Cutoff::default();
    let sym: ModeSymbol = Arc::new(move |m: &ModeCtx, buf: &mut [Complex64]| {
        let br = (1.0 + m.xi * m.xi).sqrt();
        let (g, dg) = g_with_dt(&s, &cut, m.t, br);
        let lam = s.lambda(m.t);
        write(
            buf,
            [
                Complex64::new(0.0, -dg / g),
                c(g),
                c(lam * lam * m.xi * m.xi / g),
                Complex64::default(),
            ],
        )
    });
    SpectralSystem::new(s, 2, grid.clone(), format!("wave(l_star={l_star})")).with_term(sym)
}

/// The Qi system after diagonalization of `A0` and removal of the
/// off-diagonal part of the secondary symbol, shifted so that its real part
/// is nonpositive:
/// `chi+ (t|xi| diag(-1,1) - i (t+eps)^{-1} (diag(1-b,1+b)/2 - delta))`
/// with `delta = (1 + |4k+1|)/2`.
pub fn reduced_qi_spectral(k: f64, grid: &PeriodicGrid) -> SpectralSystem {
    let s = spec(1, 1.0);
    let cut = Cutoff::default();
    let delta = 0.5 * (1.0 + (4.0 * k + 1.0).abs());
    let sym: ModeSymbol = Arc::new(move |m: &ModeCtx, buf: &mut [Complex64]| {
        let br = (1.0 + m.xi * m.xi).sqrt();
        let chi = cut.eval(s.big_lambda(m.t) * br);
        if chi == 0.0 {
            return;
        }
        let b = (4.0 * k + 1.0) * sgn(m.xi);
        let lead = s.lambda(m.t) * m.xi.abs();
        let inv = 1.0 / (m.t + m.eps);
        buf[0] = chi * (c(-lead) - I * inv * (0.5 * (1.0 - b) - delta));
        buf[3] = chi * (c(lead) - I * inv * (0.5 * (1.0 + b) - delta));
    });
    SpectralSystem::new(s, 2, grid.clone(), format!("reduced qi system(k={k})")).with_term(sym)
}

/// `D_t U = t xi [[0,1],[1,0]] U`, a Hermitian multiplier.
pub fn hermitian_spectral(grid: &PeriodicGrid) -> SpectralSystem {
    let sym: ModeSymbol = Arc::new(|m: &ModeCtx, buf: &mut [Complex64]| {
        buf[1] = c(m.t * m.xi);
        buf[2] = c(m.t * m.xi);
    });
    SpectralSystem::new(spec(1, 1.0), 2, grid.clone(), "hermitian test system").with_term(sym)
}

/// Spectral form of [`diff_system`]: `D_t U = -t^{l*} a_1(x) D_x U - a_0(x) U`.
pub fn diff_spectral(l_star: u32, grid: &PeriodicGrid) -> SpectralSystem {
    let s = spec(l_star, 1.0);
    let principal: ModeSymbol = Arc::new(move |m: &ModeCtx, buf: &mut [Complex64]| {
        let v = c(-s.lambda(m.t) * m.xi);
        buf[0] = v;
        buf[3] = v;
    });
    let lower: ModeSymbol = Arc::new(|_: &ModeCtx, buf: &mut [Complex64]| {
        buf[0] = c(-1.0);
        buf[3] = c(-1.0);
    });
    SpectralSystem::new(s, 2, grid.clone(), format!("differential system(l_star={l_star})"))
        .with_field_term(|x| real_matrix(2, 2, &diff_a1(x)), principal)
        .with_field_term(|x| real_matrix(2, 2, &diff_a0(x)), lower)
}

/// Smooth data supported on `|xi| <= cutoff`:
/// `phi_hat(xi) = exp(-(xi/width)^2 + 0.7 i xi)`.
pub fn gaussian_data(grid: &PeriodicGrid, width: f64, cutoff: f64) -> Vec<Complex64> {
    (0..grid.n_modes())
        .map(|m| {
            let xi = grid.frequency(m);
            if xi.abs() <= cutoff {
                Complex64::from_polar((-(xi / width).powi(2)).exp(), 0.7 * xi)
            } else {
                Complex64::default()
            }
        })
        .collect()
}

/// Initial state `(g(0, D) phi, 0)` of a reduced second-order problem.
pub fn second_order_data(spec: &DegeneracySpec, grid: &PeriodicGrid, phi_hat: &[Complex64]) -> SpectralState {
    let cut = Cutoff::default();
    let u1 = phi_hat
        .iter()
        .enumerate()
        .map(|(m, p)| {
            let xi = grid.frequency(m);
            p * g_with_dt(spec, &cut, 0.0, (1.0 + xi * xi).sqrt()).0
        })
        .collect();
    vec![u1, vec![Complex64::default(); phi_hat.len()]]
}

fn separated_values<R: Rng>(rng: &mut R, count: usize, gap: f64) -> Vec<f64> {
    // increments of at least `gap`, centred
    let mut v = Vec::with_capacity(count);
    let mut acc: f64 = rng.gen_range(-1.5..-0.5);
    for _ in 0..count {
        v.push(acc);
        acc += gap + rng.gen_range(0.0..1.0);
    }
    v
}

/// A random operator of order `m` with `l* in {1, 2}`, coefficients
/// depending on `x` and roots `mu_h(x) xi_hat` separated by at least `0.5`.
pub fn random_strictly_hyperbolic<R: Rng>(rng: &mut R, m: usize) -> ScalarOperator {
    let l_star = rng.gen_range(1..=2);
    let base = separated_values(rng, m, 0.9);
    let amp: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..0.2)).collect();
    let phase: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..TAU)).collect();
    let mu = move |x: f64| -> Vec<f64> {
        (0..m).map(|h| base[h] + amp[h] * (x + phase[h]).cos()).collect()
    };
    // elementary symmetric coefficients of prod (tau - mu_h)
    let poly = move |x: f64| -> Vec<f64> {
        let mut coef = vec![1.0];
        for r in mu(x) {
            let mut next = vec![0.0; coef.len() + 1];
            for (i, a) in coef.iter().enumerate() {
                next[i + 1] += a;
                next[i] -= r * a;
            }
            coef = next;
        }
        coef
    };
    let mut op = ScalarOperator::new(spec(l_star, 1.0), m, 1).expect("order >= 1");
    let poly = Arc::new(poly);
    for j in 0..m {
        let p = poly.clone();
        let f: CoeffFn = Arc::new(move |_, x| c(p(x[0])[j]));
        op = op.with_term(j, vec![m - j], f).expect("valid principal term");
        if m - j >= 2 {
            let (re, im, w) = (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-0.5..0.5),
            );
            let f: CoeffFn = Arc::new(move |_, x| Complex64::new(re + w * x[0].sin(), im));
            op = op.with_term(j, vec![m - j - 1], f).expect("valid secondary term");
        }
    }
    op.with_name(format!("random strictly hyperbolic (m={m}, l_star={l_star})"))
}

/// A random `5 x 5` system with roots of multiplicities `(2, 2, 1)` and
/// gaps of at least `0.5`: `A0 = S diag(mu) S^{-1}` with a well conditioned
/// real `S`, and a dense complex `A1`.
pub fn random_block_system<R: Rng>(rng: &mut R) -> FirstOrderSystem {
    let mus = separated_values(rng, 3, 0.5);
    let (m0, m1, m2) = (mus[0], mus[1], mus[2]);
    let n = 5;
    let mut sm = CMatrix::identity(n, n);
    for v in sm.iter_mut() {
        *v += c(rng.gen_range(-0.3..0.3));
    }
    let inv = crate::linalg::inverse(&sm).expect("perturbed identity");
    let diag = [mus[0], mus[0], mus[1], mus[1], mus[2]];
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, diag.iter().map(|&v| c(v))));
    let a0m = &sm * d * &inv;
    let a1m = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let a0 = Arc::new(move |_: f64, _: &[f64], xi: &[f64]| a0m.clone() * c(xi[0].signum()));
    let a1: SecondaryFn = Arc::new(move |_, _| a1m.clone());
    let roots = vec![
        Root::new(Arc::new(move |_, _, xi: &[f64]| m0 * xi[0].signum()), 2),
        Root::new(Arc::new(move |_, _, xi: &[f64]| m1 * xi[0].signum()), 2),
        Root::new(Arc::new(move |_, _, xi: &[f64]| m2 * xi[0].signum()), 1),
    ];
    FirstOrderSystem::new(spec(1, 1.0), n, a0, a1, roots)
        .expect("multiplicities sum to five")
        .with_name("random (2,2,1) block system")
}
