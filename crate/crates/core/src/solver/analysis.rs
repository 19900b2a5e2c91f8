use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::grid::PeriodicGrid;
use super::integrate::{solve_cauchy, Forcing, SpectralState, SpectralTrajectory};
use super::SolverError;
use crate::builtins;
use crate::weights::{g_with_dt, h_with_dt, Cutoff, DegeneracySpec};

fn frequency(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

fn l2_sq(state: &SpectralState) -> f64 {
    let n = state.first().map(|c| c.len()).unwrap_or(1);
    let s: f64 = state.iter().flatten().map(|z| z.norm_sqr()).sum();
    TAU * s / (n * n) as f64
}

fn trapezoid(times: &[f64], vals: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(vals.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// `D_t^2 U` by a three-point difference of the stored `D_t U` on the
/// (possibly nonuniform) output times.
fn second_derivatives(traj: &SpectralTrajectory) -> Vec<SpectralState> {
    let t = &traj.times;
    let d = &traj.derivatives;
    let n = t.len();
    let minus_i = Complex64::new(0.0, -1.0);
    (0..n)
        .map(|i| {
            let (a, b, cw) = if i == 0 {
                let h = t[1] - t[0];
                (None, (0usize, -1.0 / h), (1usize, 1.0 / h))
            } else if i == n - 1 {
                let h = t[n - 1] - t[n - 2];
                (None, (n - 2, -1.0 / h), (n - 1, 1.0 / h))
            } else {
                let hm = t[i] - t[i - 1];
                let hp = t[i + 1] - t[i];
                let den = hm * hp * (hm + hp);
                (
                    Some((i, (hp * hp - hm * hm) / den)),
                    (i - 1, -hp * hp / den),
                    (i + 1, hm * hm / den),
                )
            };
            d[i].iter()
                .enumerate()
                .map(|(comp, col)| {
                    (0..col.len())
                        .map(|k| {
                            let mut v = d[b.0][comp][k] * b.1 + d[cw.0][comp][k] * cw.1;
                            if let Some((j, w)) = a {
                                v += d[j][comp][k] * w;
                            }
                            minus_i * v
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// `( sum_{j<=s} int_0^T || g^{s-j} h^{(s+delta) l*}(t, D) D_t^j U ||^2 dt )^{1/2}`
/// with the time integral by the trapezoid rule on the trajectory's times.
pub fn weighted_norm(traj: &SpectralTrajectory, s: u32, delta: f64) -> Result<f64, SolverError> {
    if s > 2 || (s == 2 && traj.times.len() < 2) {
        return Err(SolverError::Capability { s });
    }
    let spec = traj.spec;
    let cut = Cutoff::default();
    let n = traj.meta.n_modes;
    let second = if s == 2 { Some(second_derivatives(traj)) } else { None };
    let mut total = 0.0;
    for j in 0..=s {
        let per_time: Vec<f64> = traj
            .times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let st = match j {
                    0 => &traj.states[i],
                    1 => &traj.derivatives[i],
                    _ => &second.as_ref().expect("computed for s = 2")[i],
                };
                let mut acc = 0.0;
                for k in 0..n {
                    let br = (1.0 + frequency(k, n).powi(2)).sqrt();
                    let g = g_with_dt(&spec, &cut, t, br).0;
                    let h = h_with_dt(&spec, &cut, t, br).0;
                    let w = g.powi((s - j) as i32) * h.powf((s as f64 + delta) * spec.ls());
                    let m: f64 = st.iter().map(|c| c[k].norm_sqr()).sum();
                    acc += w * w * m;
                }
                TAU * acc / (n * n) as f64
            })
            .collect();
        total += trapezoid(&traj.times, &per_time);
    }
    Ok(total.sqrt())
}

/// Multiplier `q(t, xi)` of the conjugation `exp(-p)`, `p = int_0^t q`.
pub type QMultiplier = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// `q = C g^{-1} h^2`.
pub fn default_q(spec: DegeneracySpec, scale: f64) -> QMultiplier {
    let cut = Cutoff::default();
    Arc::new(move |t, xi| {
        let br = (1.0 + xi * xi).sqrt();
        let g = g_with_dt(&spec, &cut, t, br).0;
        let h = h_with_dt(&spec, &cut, t, br).0;
        scale * h * h / g
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRatio {
    /// `max_t ||W(t)||^2 / (||U0||^2 + int_0^t ||exp(-p) F||^2)`, `W = exp(-p) U`.
    pub max_ratio: f64,
    /// The same without the conjugation.
    pub max_unconjugated: f64,
    /// Smallest unconjugated ratio over the output times.
    pub min_unconjugated: f64,
}

const SUBDIVISIONS: usize = 8;

/// Energy ratios of a trajectory. `p` and the forcing integrals use the
/// trapezoid rule on every output interval split into eight parts; times at
/// which the denominator vanishes are skipped.
pub fn energy_ratio(
    traj: &SpectralTrajectory,
    forcing: Option<&Forcing>,
    q: &QMultiplier,
) -> EnergyRatio {
    let n = traj.meta.n_modes;
    let size = traj.meta.size;
    let freqs: Vec<f64> = (0..n).map(|k| frequency(k, n)).collect();
    let norm_c = TAU / (n * n) as f64;
    let mut p = vec![0.0; n];
    let mut fbuf = vec![Complex64::default(); size * n];
    // (conjugated, plain) of ||F(t)||^2 at a time, given p there
    let mut force_sq = |t: f64, p: &[f64]| -> (f64, f64) {
        let Some(f) = forcing else {
            return (0.0, 0.0);
        };
        fbuf.fill(Complex64::default());
        f(t, &mut fbuf);
        let (mut a, mut b) = (0.0, 0.0);
        for (i, z) in fbuf.iter().enumerate() {
            let k = i % n;
            let m = z.norm_sqr();
            a += (-2.0 * p[k]).exp() * m;
            b += m;
        }
        (a * norm_c, b * norm_c)
    };
    let u0 = l2_sq(&traj.states[0]);
    let (mut int_conj, mut int_plain) = (0.0, 0.0);
    let (mut fc_prev, mut fp_prev) = force_sq(traj.times[0], &p);
    let mut out = EnergyRatio {
        max_ratio: 0.0,
        max_unconjugated: 0.0,
        min_unconjugated: f64::INFINITY,
    };
    for (i, st) in traj.states.iter().enumerate() {
        if i > 0 {
            let (t0, t1) = (traj.times[i - 1], traj.times[i]);
            let dt = (t1 - t0) / SUBDIVISIONS as f64;
            for sub in 0..SUBDIVISIONS {
                let (a, b) = (t0 + sub as f64 * dt, t0 + (sub + 1) as f64 * dt);
                for (k, &xi) in freqs.iter().enumerate() {
                    p[k] += 0.5 * dt * (q(a, xi) + q(b, xi));
                }
                let (fc, fp) = force_sq(b, &p);
                int_conj += 0.5 * dt * (fc_prev + fc);
                int_plain += 0.5 * dt * (fp_prev + fp);
                fc_prev = fc;
                fp_prev = fp;
            }
        }
        let mut w = 0.0;
        let mut u = 0.0;
        for comp in st {
            for (k, z) in comp.iter().enumerate() {
                let m = z.norm_sqr();
                w += (-2.0 * p[k]).exp() * m;
                u += m;
            }
        }
        let (den_c, den_p) = (u0 + int_conj, u0 + int_plain);
        if den_c > 0.0 {
            out.max_ratio = out.max_ratio.max(w * norm_c / den_c);
        }
        if den_p > 0.0 {
            let r = u * norm_c / den_p;
            out.max_unconjugated = out.max_unconjugated.max(r);
            out.min_unconjugated = out.min_unconjugated.min(r);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub sigma_hat: f64,
    pub r2: f64,
    pub shells: usize,
}

/// Regularity estimate from the decay of `|U(xi)|` (all components) over
/// the shells in `band`: `sigma_hat = -slope - 1/2`.
pub fn decay_exponent(state: &SpectralState, band: (f64, f64)) -> Result<DecayFit, SolverError> {
    decay_exponent_weighted(state, band, |_| 1.0)
}

/// As [`decay_exponent`] with the magnitude at `xi` divided by `weight(xi)`.
pub fn decay_exponent_weighted<W: Fn(f64) -> f64>(
    state: &SpectralState,
    band: (f64, f64),
    weight: W,
) -> Result<DecayFit, SolverError> {
    let n = state.first().map(|c| c.len()).unwrap_or(0);
    if n < 16 {
        return Err(SolverError::Fit(format!("state with {n} modes")));
    }
    if !(band.0 >= 1.0 && band.1 <= n as f64 / 3.0 && band.0 < band.1) {
        return Err(SolverError::Fit(format!(
            "band {band:?} outside the resolved range [1, {}]",
            n / 3
        )));
    }
    let lo = band.0.ceil() as usize;
    let hi = band.1.floor() as usize;
    if hi + 1 < lo + 8 {
        return Err(SolverError::Fit(format!("band {band:?} has fewer than 8 shells")));
    }
    let amp = |k: usize| -> f64 {
        let xi = frequency(k, n);
        let m: f64 = state.iter().map(|c| c[k].norm_sqr()).sum();
        m.sqrt() / weight(xi)
    };
    let mut xs = Vec::with_capacity(hi - lo + 1);
    let mut ys = Vec::with_capacity(hi - lo + 1);
    for s in lo..=hi {
        let (a, b) = (amp(s), amp(n - s));
        let m = ((a * a + b * b) / 2.0).sqrt();
        if !(m > 0.0 && m.is_finite()) {
            return Err(SolverError::Fit(format!("shell {s} has magnitude {m}")));
        }
        xs.push((1.0 + (s * s) as f64).sqrt().ln());
        ys.push(m.ln());
    }
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(DecayFit {
        sigma_hat: -slope - 0.5,
        r2,
        shells: xs.len(),
    })
}

/// `|phi_hat(xi)| = <xi>^{-sigma-1/2}` with seeded uniform phases; the
/// Nyquist mode and all modes above two thirds of it are zero.
pub fn power_law_data(grid: &PeriodicGrid, sigma: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..grid.n_modes())
        .map(|k| {
            let xi = grid.frequency(k);
            let phase: f64 = rng.gen_range(0.0..TAU);
            Complex64::from_polar((1.0 + xi * xi).powf(-(sigma + 0.5) / 2.0), phase)
        })
        .collect();
    grid.dealias(&mut v);
    v
}

/// Problems with a known loss of regularity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossProblem {
    /// `u_tt - t^2 u_xx - (4k+1) u_x = 0`, `u(0) = phi`, `u_t(0) = 0`.
    Qi { k: f64 },
    /// `u_tt - t^{2l*} u_xx = 0`, `u(0) = phi`, `u_t(0) = 0`.
    Wave { l_star: u32 },
    /// The 2x2 differential system with `A1 = 0`, `U(0) = (phi, phi)`.
    DifferentialSystem { l_star: u32 },
}

impl LossProblem {
    pub fn name(&self) -> String {
        match self {
            Self::Qi { k } => format!("qi(k={k})"),
            Self::Wave { l_star } => format!("wave(l_star={l_star})"),
            Self::DifferentialSystem { l_star } => format!("differential system(l_star={l_star})"),
        }
    }

    /// Loss predicted by the closed form: `|k + 1/4| - 1/4` for Qi,
    /// `-l*/(2(l*+1))` for the wave equation and zero for the system.
    pub fn predicted_loss(&self) -> f64 {
        match *self {
            Self::Qi { k } => (k + 0.25).abs() - 0.25,
            Self::Wave { l_star } => -(l_star as f64) / (2.0 * (l_star as f64 + 1.0)),
            Self::DifferentialSystem { .. } => 0.0,
        }
    }

    fn l_star(&self) -> u32 {
        match *self {
            Self::Qi { .. } => 1,
            Self::Wave { l_star } | Self::DifferentialSystem { l_star } => l_star,
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        match *self {
            Self::Qi { k } if !k.is_finite() => Err(SolverError::Problem(format!("k = {k}"))),
            Self::Wave { l_star } | Self::DifferentialSystem { l_star } if l_star == 0 => {
                Err(SolverError::Problem("l_star must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossOptions {
    pub n_modes: usize,
    pub tol: f64,
    pub eps: f64,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self {
            n_modes: 512,
            tol: 1e-9,
            eps: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossMeasurement {
    pub problem: LossProblem,
    pub sigma_data: f64,
    pub t_probe: f64,
    pub seed: u64,
    pub sigma_hat: f64,
    pub r2: f64,
    pub loss: f64,
    pub predicted_loss: f64,
    pub band: (f64, f64),
    pub options: LossOptions,
}

/// Solve with power-law data of regularity `sigma_data` and fit the
/// regularity of the solution at `t_probe` on the shells `[n/32, n/8]`.
///
/// For second-order problems the fitted amplitude is `|U(t, xi)| / g(t, xi)`,
/// i.e. the size of `(u, g^{-1} D_t u)`.
pub fn empirical_loss(
    problem: LossProblem,
    sigma_data: f64,
    t_probe: f64,
    seed: u64,
    opts: LossOptions,
) -> Result<LossMeasurement, SolverError> {
    problem.validate()?;
    if !(t_probe > 0.0 && t_probe.is_finite()) {
        return Err(SolverError::BadTimes);
    }
    let grid = PeriodicGrid::new(opts.n_modes)?;
    let phi = power_law_data(&grid, sigma_data, seed);
    let (sys, u0, second_order) = match problem {
        LossProblem::Qi { k } => {
            let sys = builtins::qi_spectral(k, &grid);
            let u0 = builtins::second_order_data(sys.spec(), &grid, &phi);
            (sys, u0, true)
        }
        LossProblem::Wave { l_star } => {
            let sys = builtins::wave_spectral(l_star, &grid);
            let u0 = builtins::second_order_data(sys.spec(), &grid, &phi);
            (sys, u0, true)
        }
        LossProblem::DifferentialSystem { l_star } => {
            let sys = builtins::diff_spectral(l_star, &grid);
            (sys, vec![phi.clone(), phi], false)
        }
    };
    let mut traj = solve_cauchy(&sys, &u0, None, opts.eps, &[t_probe], opts.tol)?;
    traj.meta.seed = Some(seed);
    let n = opts.n_modes as f64;
    let band = (n / 32.0, n / 8.0);
    let spec = DegeneracySpec::new(problem.l_star(), t_probe.max(1.0))
        .map_err(|e| SolverError::Problem(e.to_string()))?;
    let cut = Cutoff::default();
    let fit = if second_order {
        decay_exponent_weighted(traj.last(), band, |xi| {
            g_with_dt(&spec, &cut, t_probe, (1.0 + xi * xi).sqrt()).0
        })?
    } else {
        decay_exponent(traj.last(), band)?
    };
    Ok(LossMeasurement {
        problem,
        sigma_data,
        t_probe,
        seed,
        sigma_hat: fit.sigma_hat,
        r2: fit.r2,
        loss: sigma_data - fit.sigma_hat,
        predicted_loss: problem.predicted_loss(),
        band,
        options: opts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_decay() {
        let g = PeriodicGrid::new(512).unwrap();
        let v: Vec<Complex64> = (0..512)
            .map(|k| c64((1.0 + g.frequency(k).powi(2)).powf(-1.25)))
            .collect();
        let fit = decay_exponent(&vec![v], (16.0, 64.0)).unwrap();
        assert!((fit.sigma_hat - 2.0).abs() < 1e-12);
        assert!(fit.r2 > 1.0 - 1e-12);
    }

    fn c64(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn narrow_band_rejected() {
        let v = vec![vec![c64(1.0); 64]];
        assert!(matches!(decay_exponent(&v, (2.0, 8.0)), Err(SolverError::Fit(_))));
        assert!(matches!(decay_exponent(&v, (2.0, 30.0)), Err(SolverError::Fit(_))));
    }
}
