use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::system::SpectralSystem;
use super::SolverError;
use crate::weights::DegeneracySpec;

/// Per component, per mode coefficient arrays.
pub type SpectralState = Vec<Vec<Complex64>>;

/// Forcing `F(t)` written into a component-major buffer (zeroed beforehand).
pub type Forcing = Arc<dyn Fn(f64, &mut [Complex64]) + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryMeta {
    pub system: String,
    pub size: usize,
    pub n_modes: usize,
    pub eps: f64,
    pub tol: f64,
    pub seed: Option<u64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// States `U(t)` and `D_t U(t)` at the requested output times.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralState>,
    pub derivatives: Vec<SpectralState>,
    pub spec: DegeneracySpec,
    pub meta: TrajectoryMeta,
}

impl SpectralTrajectory {
    pub fn last(&self) -> &SpectralState {
        self.states.last().expect("nonempty trajectory")
    }

    /// CSV rows `(t, component, shell, magnitude)`, where the magnitude of
    /// shell `s` is the root mean square over frequencies `+s` and `-s`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,component,shell,magnitude\n");
        let n = self.meta.n_modes;
        for (t, st) in self.times.iter().zip(&self.states) {
            for (c, comp) in st.iter().enumerate() {
                for shell in 0..n / 2 {
                    let m = shell_magnitude(comp, shell);
                    s.push_str(&format!("{t},{c},{shell},{m:.12e}\n"));
                }
            }
        }
        s
    }
}

pub(crate) fn shell_magnitude(coeffs: &[Complex64], shell: usize) -> f64 {
    let n = coeffs.len();
    if shell == 0 {
        return coeffs[0].norm();
    }
    let a = coeffs[shell].norm_sqr();
    let b = coeffs[n - shell].norm_sqr();
    ((a + b) / 2.0).sqrt()
}

pub(crate) fn flatten(state: &SpectralState) -> Vec<Complex64> {
    state.iter().flat_map(|c| c.iter().copied()).collect()
}

pub(crate) fn unflatten(flat: &[Complex64], n_modes: usize) -> SpectralState {
    flat.chunks(n_modes).map(|c| c.to_vec()).collect()
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MAX_STEPS: usize = 5_000_000;

struct Rhs<'a> {
    sys: &'a SpectralSystem,
    forcing: Option<&'a Forcing>,
    eps: f64,
    fbuf: Vec<Complex64>,
}

impl Rhs<'_> {
    /// `D_t U = A U + F`.
    fn dt(&mut self, t: f64, y: &[Complex64], out: &mut [Complex64]) {
        self.sys.apply(t, self.eps, y, out);
        if let Some(f) = self.forcing {
            self.fbuf.fill(Complex64::default());
            f(t, &mut self.fbuf);
            out.iter_mut().zip(&self.fbuf).for_each(|(o, f)| *o += f);
        }
    }

    /// `dU/dt = i D_t U`.
    fn ddt(&mut self, t: f64, y: &[Complex64], out: &mut [Complex64]) {
        self.dt(t, y, out);
        out.iter_mut().for_each(|z| *z = Complex64::new(-z.im, z.re));
    }
}

/// Integrate `D_t U = A U + F` from `U(0) = u0` with the adaptive
/// Dormand-Prince pair and PI step control.
///
/// The error of each coefficient is measured relative to the size of its
/// whole mode (all components), so high modes with small amplitudes are
/// resolved as accurately as low ones.
pub fn solve_cauchy(
    sys: &SpectralSystem,
    u0: &SpectralState,
    forcing: Option<Forcing>,
    eps: f64,
    t_out: &[f64],
    tol: f64,
) -> Result<SpectralTrajectory, SolverError> {
    sys.check_eps(eps)?;
    let nm = sys.grid().n_modes();
    let size = sys.size();
    if u0.len() != size || u0.iter().any(|c| c.len() != nm) {
        return Err(SolverError::Shape {
            expected: (size, nm),
            got: (u0.len(), u0.first().map(|c| c.len()).unwrap_or(0)),
        });
    }
    if t_out.is_empty()
        || t_out[0] < 0.0
        || t_out.windows(2).any(|w| w[1] <= w[0])
        || t_out.iter().any(|t| !t.is_finite())
    {
        return Err(SolverError::BadTimes);
    }
    if !(tol > 0.0) {
        return Err(SolverError::BadTolerance(tol));
    }
    let dim = size * nm;
    let mut rhs = Rhs {
        sys,
        forcing: forcing.as_ref(),
        eps,
        fbuf: vec![Complex64::default(); dim],
    };
    let mut y = flatten(u0);
    let mut t = 0.0;
    let t_end = *t_out.last().expect("nonempty");
    let rtol = tol;
    let mut f0 = vec![Complex64::default(); dim];
    rhs.ddt(0.0, &y, &mut f0);
    let y_scale = y.iter().chain(&f0).map(|z| z.norm()).fold(0.0, f64::max);
    // Mode-decoupled systems resolve coefficients fourteen orders below the
    // largest one. FFT products carry round-off of about 1e-16 of the total
    // into every mode, so with fields the absolute floor sits above it.
    let floor = if sys.has_fields() { 1e-6 } else { 1e-14 };
    let atol = (rtol * floor * y_scale).max(1e-300);

    let mut times = Vec::with_capacity(t_out.len());
    let mut states = Vec::with_capacity(t_out.len());
    let mut derivs = Vec::with_capacity(t_out.len());
    let mut record = |t: f64, y: &[Complex64], rhs: &mut Rhs| {
        let mut d = vec![Complex64::default(); dim];
        rhs.dt(t, y, &mut d);
        times.push(t);
        states.push(unflatten(y, nm));
        derivs.push(unflatten(&d, nm));
    };
    let mut next_out = 0;
    while next_out < t_out.len() && t_out[next_out] == 0.0 {
        record(0.0, &y, &mut rhs);
        next_out += 1;
    }

    // initial step from the scale of the right-hand side
    let mode_norm = |v: &[Complex64]| -> Vec<f64> {
        (0..nm)
            .map(|k| (0..size).map(|c| v[c * nm + k].norm_sqr()).sum::<f64>().sqrt())
            .collect()
    };
    let d0 = rms_scaled(&y, &mode_norm(&y), &mode_norm(&y), nm, atol, rtol);
    let d1 = rms_scaled(&f0, &mode_norm(&y), &mode_norm(&y), nm, atol, rtol);
    let mut h = 1e-3 * t_end.max(f64::MIN_POSITIVE);
    if d1 > 1e-5 && d0 > 1e-5 {
        h = h.min(0.01 * d0 / d1);
    }

    let mut k: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); dim]; 7];
    k[0].copy_from_slice(&f0);
    let mut ytmp = vec![Complex64::default(); dim];
    let mut ynew = vec![Complex64::default(); dim];
    let mut err_prev: f64 = 1e-4;
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let mut last_rejected = false;

    while next_out < t_out.len() {
        if accepted + rejected > MAX_STEPS {
            return Err(SolverError::TooManySteps { t });
        }
        let target = t_out[next_out];
        if h < 1e-14 * t.max(1.0) {
            return Err(SolverError::Stiff {
                t,
                h,
                max_symbol_norm: sys.max_symbol_norm(t, eps),
            });
        }
        let hit = t + h >= target;
        let h_try = if hit { target - t } else { h };
        for s in 1..7 {
            ytmp.copy_from_slice(&y);
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    let ha = h_try * a;
                    ytmp.iter_mut().zip(kj).for_each(|(yt, kv)| *yt += kv * ha);
                }
            }
            rhs.ddt(t + C[s] * h_try, &ytmp, &mut k[s]);
            if s == 6 {
                ynew.copy_from_slice(&ytmp);
            }
        }
        // error estimate
        let n_old = mode_norm(&y);
        let n_new = mode_norm(&ynew);
        let mut acc = 0.0;
        for i in 0..dim {
            let mut e = Complex64::default();
            for (s, ks) in k.iter().enumerate() {
                if E[s] != 0.0 {
                    e += ks[i] * E[s];
                }
            }
            e *= h_try;
            let m = i % nm;
            let sc = atol + rtol * n_old[m].max(n_new[m]);
            acc += (e.norm() / sc).powi(2);
        }
        let err = (acc / dim as f64).sqrt();
        if !err.is_finite() {
            if ynew.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) && h_try < 1e-10 {
                return Err(SolverError::Divergence { t });
            }
            h = h_try * 0.1;
            rejected += 1;
            last_rejected = true;
            continue;
        }
        if err <= 1.0 {
            accepted += 1;
            t = if hit { target } else { t + h_try };
            std::mem::swap(&mut y, &mut ynew);
            // first-same-as-last
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
            if hit {
                record(t, &y, &mut rhs);
                next_out += 1;
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            fac = fac.clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            err_prev = err.max(1e-4);
            last_rejected = false;
            // a step clipped to an output time does not shrink the next one
            h = if hit { (h_try * fac).max(h * fac.min(1.0)) } else { h * fac };
        } else {
            rejected += 1;
            last_rejected = true;
            h = h_try * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Ok(SpectralTrajectory {
        times,
        states,
        derivatives: derivs,
        spec: *sys.spec(),
        meta: TrajectoryMeta {
            system: sys.name().to_string(),
            size,
            n_modes: nm,
            eps,
            tol,
            seed: None,
            accepted_steps: accepted,
            rejected_steps: rejected,
        },
    })
}

fn rms_scaled(v: &[Complex64], na: &[f64], nb: &[f64], nm: usize, atol: f64, rtol: f64) -> f64 {
    let mut acc = 0.0;
    for (i, z) in v.iter().enumerate() {
        let m = i % nm;
        let sc = atol + rtol * na[m].max(nb[m]);
        acc += (z.norm() / sc).powi(2);
    }
    (acc / v.len() as f64).sqrt() * rtol
}
