use degenhyp_core::weights::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight transcription of the cutoff, kept independent of the library's
/// Taylor-arithmetic implementation.
fn chi_ref(s: f64) -> f64 {
    if s <= 0.5 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let u = 2.0 * s - 1.0;
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    a / (a + b)
}

fn weights_ref(l: u32, t: f64, xi: f64) -> (f64, f64, f64, f64) {
    let bs = 1.0 / (l as f64 + 1.0);
    let br = (1.0 + xi * xi).sqrt();
    let low = br.powf(bs);
    let lam = t.powi(l as i32);
    let c = chi_ref(bs * t.powi(l as i32 + 1) * br);
    let g = (1.0 - c) * low + c * lam * br;
    let h = if c > 0.0 { (1.0 - c) * low + c / t } else { low };
    (g, h, lam * br + low, 1.0 / (t + 1.0 / low))
}

fn band_sweep(l: u32, nt: usize, nxi: usize, xi_max: f64) -> (f64, f64, f64, f64) {
    let spec = DegeneracySpec::new(l, 1.0).unwrap();
    let cut = Cutoff::default();
    let mut times: Vec<f64> = (0..=nt).map(|k| k as f64 / nt as f64).collect();
    times.extend((1..40).map(|k| 0.5f64.powi(k)));
    let mut out = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
    for &t in &times {
        for k in 0..nxi {
            let xi = xi_max.powf(k as f64 / (nxi - 1) as f64);
            let w = weight_pair(&spec, &cut, t, &[xi]).unwrap();
            let (rg, rh) = (w.g / w.g_bar, w.h / w.h_bar);
            out.0 = out.0.min(rg);
            out.1 = out.1.max(rg);
            out.2 = out.2.min(rh);
            out.3 = out.3.max(rh);
        }
    }
    out
}

#[test]
fn weights_match_reference_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cut = Cutoff::default();
    for l in 1..=3 {
        let spec = DegeneracySpec::new(l, 1.0).unwrap();
        for _ in 0..2000 {
            let t: f64 = rng.gen();
            let xi = 10f64.powf(rng.gen_range(-1.0..6.0)) * if rng.gen() { 1.0 } else { -1.0 };
            let w = weight_pair(&spec, &cut, t, &[xi]).unwrap();
            let (g, h, gb, hb) = weights_ref(l, t, xi);
            for (a, b) in [(w.g, g), (w.h, h), (w.g_bar, gb), (w.h_bar, hb)] {
                assert!((a - b).abs() <= 1e-12 * b.abs(), "l={l} t={t} xi={xi}: {a} vs {b}");
            }
        }
    }
}

// Grid inf/sup of g/g_bar and h/h_bar, recorded from a 400x400 log-grid
// sweep (plus a geometric time cluster) and confirmed unchanged on a
// 1600x1600 grid reaching |xi| = 1e8. Depends on the concrete cutoff.
const BAND_L1: (f64, f64, f64, f64) = (0.475_416_194, 1.0, 1.0, 2.106_410_197);
const BAND_L2: (f64, f64, f64, f64) = (0.407_683_291, 1.0, 1.0, 2.208_220_761);

#[test]
fn weight_band_matches_recorded_constants() {
    for (l, want) in [(1, BAND_L1), (2, BAND_L2)] {
        let got = band_sweep(l, 400, 400, 1e6);
        for (a, b) in [(got.0, want.0), (got.1, want.1), (got.2, want.2), (got.3, want.3)] {
            assert!((a - b).abs() < 1e-7, "l={l}: {a} vs {b}");
        }
        // stable under refinement
        let fine = band_sweep(l, 1200, 1200, 1e8);
        assert!((fine.0 - got.0).abs() < 1e-6 && (fine.3 - got.3).abs() < 1e-6);
        // and inside the analytic band
        let (c1, c2) = weight_band(&DegeneracySpec::new(l, 1.0).unwrap());
        assert!(c1 <= got.0 && got.3 <= c2);
    }
}

#[test]
fn product_laws_bounded() {
    let cut = Cutoff::default();
    for l in 1..=3u32 {
        let spec = DegeneracySpec::new(l, 1.0).unwrap();
        let (mut lo1, mut hi1, mut lo2, mut hi2) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
        for it in 0..=200 {
            let t = it as f64 / 200.0;
            for k in 0..200 {
                let xi = 1e7f64.powf(k as f64 / 199.0);
                let w = weight_pair(&spec, &cut, t, &[xi]).unwrap();
                let br = bracket(&[xi]);
                let p1 = w.g_bar * w.h_bar.powi(l as i32) / br;
                let p2 = w.g_bar / w.h_bar / (1.0 + spec.big_lambda(t) * br);
                lo1 = lo1.min(p1);
                hi1 = hi1.max(p1);
                lo2 = lo2.min(p2);
                hi2 = hi2.max(p2);
            }
        }
        assert!(lo1 > 0.05 && hi1 < 20.0, "l={l}: [{lo1}, {hi1}]");
        assert!(lo2 > 0.05 && hi2 < 20.0, "l={l}: [{lo2}, {hi2}]");
    }
}

#[test]
fn big_lambda_is_integral_of_lambda() {
    for l in 1..=4u32 {
        let spec = DegeneracySpec::new(l, 2.0).unwrap();
        for &t in &[0.3, 1.0, 1.7, 2.0] {
            // composite Simpson is exact for polynomials of degree <= 3 and
            // converges fast otherwise
            let n = 2000;
            let h = t / n as f64;
            let mut s = spec.lambda(0.0) + spec.lambda(t);
            for k in 1..n {
                s += spec.lambda(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            let quad = s * h / 3.0;
            let d = degeneracy(&spec, t).unwrap();
            assert!((quad - d.big_lambda).abs() < 1e-12 * d.big_lambda.max(1.0));
        }
    }
}

fn theta_identity_sup(l: u32, delta: f64, nt: usize, nxi: usize, xi_max: f64) -> f64 {
    let cut = Cutoff::default();
    let spec = DegeneracySpec::new(l, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for it in 1..=nt {
        let t = it as f64 / nt as f64;
        for k in 0..nxi {
            let xi = xi_max.powf(k as f64 / (nxi - 1) as f64);
            let th = theta_symbol(&spec, &cut, 1.0, |_| delta, t, &[0.0], &[xi]).unwrap();
            let dth = theta_dt(&spec, &cut, 1.0, delta, t, &[xi]);
            let chi = cutoffs(&spec, &cut, t, &[xi]).unwrap().chi_plus;
            let lhs = dth / th + delta * spec.ls() * chi * chi / t;
            let w = weight_pair(&spec, &cut, t, &[xi]).unwrap();
            let rhs = w.h_bar / (1.0 + spec.big_lambda(t) * bracket(&[xi]));
            worst = worst.max(lhs.abs() / rhs);
        }
    }
    worst
}

#[test]
fn theta_derivative_identity_bounded() {
    // (d_t Theta) / Theta + delta l* (chi+)^2 / t is O(h_bar / (1 + Lambda <xi>)):
    // the sampled constant must not grow when the grid is refined.
    for l in 1..=2u32 {
        for &delta in &[0.5, 1.0, 2.5] {
            let coarse = theta_identity_sup(l, delta, 300, 150, 1e6);
            let fine = theta_identity_sup(l, delta, 1200, 600, 1e9);
            assert!(coarse.is_finite() && coarse > 0.0);
            assert!(fine <= 1.1 * coarse, "l={l} delta={delta}: {coarse} -> {fine}");
        }
    }
}

#[test]
fn theta_examples() {
    let spec = DegeneracySpec::new(2, 1.0).unwrap();
    let cut = Cutoff::default();
    let th0 = theta_symbol(&spec, &cut, 2.0, |x| 1.0 + x[0], 0.0, &[0.5], &[10.0]).unwrap();
    let want = (4.0f64 + 100.0).sqrt().powf(1.5 * 2.0 / 3.0);
    assert!((th0 - want).abs() < 1e-12 * want);
    for &t in &[0.0, 0.2, 0.9] {
        let v = theta_symbol(&spec, &cut, 1.0, |_| 0.0, t, &[0.0], &[33.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }
    let far = theta_symbol(&spec, &cut, 1.0, |_| 1.5, 0.9, &[0.0], &[1e4]).unwrap();
    assert!((far - 0.9f64.powf(-3.0)).abs() < 1e-12);
}
