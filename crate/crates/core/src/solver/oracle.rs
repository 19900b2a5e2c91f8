use num_complex::Complex64;

use super::grid::PeriodicGrid;

/// `c_{jk}`, `j = 0..=k`, of `u = sum_j c_{jk} t^{2j} phi^{(j)}(x + t^2/2)`,
/// normalized by `c_{0k} = 1`.
///
/// Substituting the ansatz into `u_tt - t^2 u_xx - (4k+1) u_x = 0` leaves
/// `(j+1)(2j+1) c_{j+1} = 2(k-j) c_j`, which terminates at `j = k`.
pub fn qi_coefficients(k: u32) -> Vec<f64> {
    let mut c = vec![1.0];
    for j in 0..k as usize {
        let next = 2.0 * (k as f64 - j as f64) * c[j] / ((j + 1) as f64 * (2 * j + 1) as f64);
        c.push(next);
    }
    c
}

fn series(k: u32, t: f64, xi: f64) -> (Complex64, Complex64) {
    let c = qi_coefficients(k);
    let ix = Complex64::new(0.0, xi);
    let mut s = Complex64::default();
    let mut ds = Complex64::default();
    let mut pw = Complex64::new(1.0, 0.0);
    for (j, cj) in c.iter().enumerate() {
        s += pw * cj * t.powi(2 * j as i32);
        if j > 0 {
            ds += pw * cj * (2 * j) as f64 * t.powi(2 * j as i32 - 1);
        }
        pw *= ix;
    }
    (s, ds)
}

/// Coefficients of `u(t, .)` for data `u(0) = phi`, `u_t(0) = 0`.
pub fn qi_exact(k: u32, grid: &PeriodicGrid, phi_hat: &[Complex64], t: f64) -> Vec<Complex64> {
    phi_hat
        .iter()
        .enumerate()
        .map(|(m, &p)| {
            let xi = grid.frequency(m);
            let (s, _) = series(k, t, xi);
            Complex64::from_polar(1.0, xi * t * t / 2.0) * s * p
        })
        .collect()
}

/// Coefficients of `D_t u(t, .)`.
pub fn qi_exact_dt(k: u32, grid: &PeriodicGrid, phi_hat: &[Complex64], t: f64) -> Vec<Complex64> {
    phi_hat
        .iter()
        .enumerate()
        .map(|(m, &p)| {
            let xi = grid.frequency(m);
            let (s, ds) = series(k, t, xi);
            let dt = Complex64::new(0.0, xi * t) * s + ds;
            // D_t = -i d/dt
            Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, xi * t * t / 2.0) * dt * p
        })
        .collect()
}

/// Largest relative residual of `u_tt - t^2 u_xx - (4k+1) u_x` over the
/// frequencies of the grid, with the time derivatives taken analytically on
/// the symbol `e^{i xi t^2/2} sum_j c_j t^{2j} (i xi)^j`.
pub fn qi_residual(k: u32, grid: &PeriodicGrid, t: f64) -> f64 {
    let c = qi_coefficients(k);
    let mut worst: f64 = 0.0;
    for m in 0..grid.n_modes() {
        let xi = grid.frequency(m);
        let ix = Complex64::new(0.0, xi);
        // polynomial S(t) = sum a_n t^n with a_{2j} = c_j (i xi)^j
        let mut a = vec![Complex64::default(); 2 * c.len() + 1];
        let mut pw = Complex64::new(1.0, 0.0);
        for (j, cj) in c.iter().enumerate() {
            a[2 * j] = pw * cj;
            pw *= ix;
        }
        let eval = |coef: &[Complex64]| -> Complex64 {
            coef.iter().rev().fold(Complex64::default(), |acc, &v| acc * t + v)
        };
        let d1: Vec<Complex64> = a.iter().enumerate().skip(1).map(|(n, v)| v * n as f64).collect();
        let d2: Vec<Complex64> = d1.iter().enumerate().skip(1).map(|(n, v)| v * n as f64).collect();
        let (s, s1, s2) = (eval(&a), eval(&d1), eval(&d2));
        // u = e^{i xi t^2/2} S: u_tt = e (S'' + 2 i xi t S' + (i xi - xi^2 t^2) S)
        let utt = s2 + ix * 2.0 * t * s1 + (ix - xi * xi * t * t) * s;
        let uxx = -xi * xi * s;
        let ux = ix * s;
        let res = utt - t * t * uxx - (4.0 * k as f64 + 1.0) * ux;
        let scale = utt.norm() + (t * t * uxx).norm() + ux.norm() * (4 * k + 1) as f64;
        if scale > 0.0 {
            worst = worst.max(res.norm() / scale);
        }
    }
    worst
}
