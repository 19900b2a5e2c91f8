use std::sync::Arc;

use degenhyp_core::builtins::{diff_system, qi_system, random_block_system, random_strictly_hyperbolic};
use degenhyp_core::linalg::{block_diag, frobenius, hermitian_part, inverse, max_real_part_eig, real_matrix, CMatrix};
use degenhyp_core::reduction::companion_system;
use degenhyp_core::symbolcalc::principal_symbols;
use degenhyp_core::systems::{
    block_residuals, conjugated_pair, delta_bound_strict, delta_bound_system, order_raised_system,
    sphere_samples, sylvester_block_offdiag, sylvester_offdiag_general, symmetrizer_from_roots,
    FirstOrderSystem, Root, SamplePoint, SecondaryFn, SymmetrizerPair, SystemError,
};
use degenhyp_core::weights::DegeneracySpec;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAP_TOL: f64 = 1e-6;

fn x_grid(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| vec![std::f64::consts::TAU * i as f64 / n as f64]).collect()
}

fn samples(xs: &[Vec<f64>]) -> Vec<SamplePoint> {
    let mut out = Vec::new();
    for x in xs {
        for xi in sphere_samples(1) {
            for t in [0.0, 0.5, 1.0] {
                out.push(SamplePoint { t, x: x.clone(), xi_hat: xi.clone() });
            }
        }
    }
    out
}

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

#[test]
fn qi_symmetrizer_rows() {
    let sys = qi_system(1.0);
    let xs = x_grid(4);
    let pair = symmetrizer_from_roots(&sys, &samples(&xs), GAP_TOL).unwrap();
    let m0 = (pair.m0)(0.0, &[0.0], &[1.0]);
    // rows proportional to (1,-1) and (1,1)
    assert!((m0[(0, 0)] + m0[(0, 1)]).norm() < 1e-14);
    assert!((m0[(1, 0)] - m0[(1, 1)]).norm() < 1e-14);
    let b0 = &m0 * sys.a0(0.0, &[0.0], &[1.0]) * inverse(&m0).unwrap();
    assert!(frobenius(&(b0 - real_matrix(2, 2, &[-1.0, 0.0, 0.0, 1.0]))) < 1e-12);
}

#[test]
fn diagonal_a0_gives_identity_up_to_scaling() {
    let spec = DegeneracySpec::new(1, 1.0).unwrap();
    let sys = FirstOrderSystem::new(
        spec,
        3,
        Arc::new(|_, _, _| real_matrix(3, 3, &[2.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.5])),
        Arc::new(|_, _| CMatrix::zeros(3, 3)),
        vec![Root::constant(2.0, 1), Root::constant(-1.0, 1), Root::constant(0.5, 1)],
    )
    .unwrap();
    let pair = symmetrizer_from_roots(&sys, &samples(&x_grid(2)), GAP_TOL).unwrap();
    let m0 = (pair.m0)(0.3, &[0.0], &[1.0]);
    for r in 0..3 {
        for s in 0..3 {
            if r != s {
                assert!(m0[(r, s)].norm() < 1e-14);
            } else {
                assert!(m0[(r, s)].norm() > 0.5);
            }
        }
    }
}

#[test]
fn root_gap_violation_is_an_error() {
    let spec = DegeneracySpec::new(1, 1.0).unwrap();
    let sys = FirstOrderSystem::new(
        spec,
        2,
        Arc::new(|_, _, _| real_matrix(2, 2, &[1.0, 0.0, 0.0, 1.0 + 1e-9])),
        Arc::new(|_, _| CMatrix::zeros(2, 2)),
        vec![Root::constant(1.0, 1), Root::constant(1.0 + 1e-9, 1)],
    )
    .unwrap();
    assert!(matches!(
        symmetrizer_from_roots(&sys, &samples(&x_grid(1)), GAP_TOL),
        Err(SystemError::RootGap { .. })
    ));
    assert!(matches!(
        FirstOrderSystem::new(
            spec,
            2,
            Arc::new(|_, _, _| CMatrix::zeros(2, 2)),
            Arc::new(|_, _| CMatrix::zeros(2, 2)),
            vec![Root::constant(0.0, 1)],
        ),
        Err(SystemError::MultiplicityMismatch { sum: 1, size: 2 })
    ));
}

fn qi_pair_with_correction(k: f64) -> SymmetrizerPair {
    let m0 = real_matrix(2, 2, &[0.5, -0.5, 0.5, 0.5]);
    let p1: SecondaryFn = Arc::new(move |_, xi| {
        let b = (4.0 * k + 1.0) * xi[0].signum();
        real_matrix(2, 2, &[0.0, b - 1.0, b + 1.0, 0.0]) * c(0.25)
    });
    SymmetrizerPair::new(Arc::new(move |_, _, _| m0.clone())).with_correction(p1)
}

#[test]
fn qi_conjugated_pair_matches_the_display() {
    for k in [-0.5, 0.0, 1.0, 2.5] {
        let sys = qi_system(k);
        let pair = qi_pair_with_correction(k);
        for s in [1.0, -1.0] {
            let b = (4.0 * k + 1.0) * s;
            let cp = conjugated_pair(&sys, &pair, &[0.4], &[s]).unwrap();
            assert!(frobenius(&(&cp.b0 - real_matrix(2, 2, &[-1.0, 0.0, 0.0, 1.0]))) < 1e-14);
            let b1 = real_matrix(2, 2, &[1.0 - b, 1.0 - b, 1.0 + b, 1.0 + b]) * c(0.5);
            assert!(frobenius(&(&cp.b1 - b1)) < 1e-13);
            let eff = real_matrix(2, 2, &[0.5 * (1.0 - b), 0.0, 0.0, 0.5 * (1.0 + b)]);
            assert!(frobenius(&(&cp.effective - eff)) < 1e-13, "k={k} s={s}");
        }
    }
}

#[test]
fn zero_secondary_gives_zero_effective() {
    let spec = DegeneracySpec::new(2, 1.0).unwrap();
    let sys = FirstOrderSystem::new(
        spec,
        2,
        Arc::new(|_, _, _| real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0])),
        Arc::new(|_, _| CMatrix::zeros(2, 2)),
        vec![Root::constant(-1.0, 1), Root::constant(1.0, 1)],
    )
    .unwrap();
    let m0 = real_matrix(2, 2, &[0.5, -0.5, 0.5, 0.5]);
    let pair = SymmetrizerPair::new(Arc::new(move |_, _, _| m0.clone()))
        .with_m1(Arc::new(|_, _| CMatrix::zeros(2, 2)));
    let cp = conjugated_pair(&sys, &pair, &[0.0], &[1.0]).unwrap();
    assert_eq!(frobenius(&cp.effective), 0.0);
}

#[test]
fn singular_symmetrizer_is_an_error() {
    let sys = qi_system(0.0);
    let pair = SymmetrizerPair::new(Arc::new(|_, _, _| real_matrix(2, 2, &[1.0, 1.0, 1.0, 1.0])));
    assert!(matches!(
        conjugated_pair(&sys, &pair, &[0.0], &[1.0]),
        Err(SystemError::SingularSymmetrizer { .. })
    ));
}

#[test]
fn sylvester_examples() {
    let b1 = real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let p1 = sylvester_block_offdiag(&[(1.0, 1), (-1.0, 1)], &b1).unwrap();
    assert!(frobenius(&(&p1 - real_matrix(2, 2, &[0.0, 0.5, -0.5, 0.0]))) < 1e-15);
    let b0 = real_matrix(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let (off, diag) = block_residuals(&b0, &b1, &p1, &[1, 1]);
    assert!(off < 1e-15 && diag < 1e-15);

    let bd = block_diag(&[&real_matrix(2, 2, &[1.0, 2.0, 3.0, 4.0]), &real_matrix(1, 1, &[5.0])]);
    let p1 = sylvester_block_offdiag(&[(2.0, 2), (-3.0, 1)], &bd).unwrap();
    assert_eq!(frobenius(&p1), 0.0);

    assert!(matches!(
        sylvester_block_offdiag(&[(1.0, 1), (1.0, 1)], &b1),
        Err(SystemError::SharedSpectrum { .. })
    ));
}

#[test]
fn sylvester_general_blocks() {
    // non-scalar diagonal blocks with disjoint spectra
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let e = real_matrix(2, 2, &[1.0, rng.gen_range(-0.5..0.5), 0.0, 1.5]);
        let f = real_matrix(2, 2, &[-2.0, 0.0, rng.gen_range(-0.5..0.5), -1.0]);
        let b0 = block_diag(&[&e, &f]);
        let b1 = CMatrix::from_fn(4, 4, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let p1 = sylvester_offdiag_general(&b0, &[2, 2], &b1).unwrap();
        let (off, diag) = block_residuals(&b0, &b1, &p1, &[2, 2]);
        assert!(off <= 1e-12, "{off:e}");
        assert!(diag <= 1e-12, "{diag:e}");
    }
}

#[test]
fn random_block_systems_diagonalize() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let sys = random_block_system(&mut rng);
        let pair = symmetrizer_from_roots(&sys, &samples(&x_grid(1)), GAP_TOL).unwrap();
        for xi in sphere_samples(1) {
            let cp = conjugated_pair(&sys, &pair, &[0.0], &xi).unwrap();
            let roots = sys.root_values(0.0, &[0.0], &xi);
            let p1 = sylvester_block_offdiag(&roots, &cp.b1).unwrap();
            let sizes: Vec<usize> = roots.iter().map(|r| r.1).collect();
            let (off, diag) = block_residuals(&cp.b0, &cp.b1, &p1, &sizes);
            assert!(off <= 1e-10, "{off:e}");
            assert!(diag <= 1e-12, "{diag:e}");
            // Hermitian principal part
            assert!(frobenius(&(&cp.b0 - cp.b0.adjoint())) <= 1e-8);
        }
    }
}

#[test]
fn differential_system_has_no_loss() {
    for l in [1, 2, 3] {
        let sys = diff_system(l);
        let xs = x_grid(16);
        let pair = symmetrizer_from_roots(&sys, &samples(&xs), GAP_TOL).unwrap();
        let d = delta_bound_system(&sys, &pair, &xs, &sphere_samples(1), GAP_TOL).unwrap();
        assert!(d.rows.iter().all(|r| r.delta.abs() < 1e-14 && r.loss.abs() < 1e-14));
    }
}

#[test]
fn single_block_bound_is_the_top_eigenvalue() {
    // A0 = 0 with one triple root: delta(x) = lambda_max(Re a(x))
    let spec = DegeneracySpec::new(1, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base = CMatrix::from_fn(3, 3, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let wob = CMatrix::from_fn(3, 3, |_, _| c(rng.gen_range(-0.5..0.5)));
    let a = move |x: f64| &base + &wob * c(x.sin());
    let a1 = a.clone();
    let sys = FirstOrderSystem::new(
        spec,
        3,
        Arc::new(|_, _, _| CMatrix::zeros(3, 3)),
        Arc::new(move |x, _| a1(x[0])),
        vec![Root::constant(0.0, 3)],
    )
    .unwrap();
    let xs = x_grid(8);
    let pair = symmetrizer_from_roots(&sys, &samples(&xs), GAP_TOL).unwrap();
    let d = delta_bound_system(&sys, &pair, &xs, &sphere_samples(1), GAP_TOL).unwrap();
    for r in &d.rows {
        let want = max_real_part_eig(&a(r.x[0]));
        assert!((r.delta - want).abs() < 1e-12, "{} vs {want}", r.delta);
        assert!(r.delta >= r.block_max.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
}

#[test]
fn qi_delta_and_loss() {
    for k in [-1.0, -0.5, -0.25, 0.0, 1.0, 2.0] {
        let sys = qi_system(k);
        let xs = x_grid(3);
        let pair = symmetrizer_from_roots(&sys, &samples(&xs), GAP_TOL).unwrap();
        let d = delta_bound_system(&sys, &pair, &xs, &sphere_samples(1), GAP_TOL).unwrap();
        let want = 0.5 * (1.0 + (4.0 * k + 1.0).abs());
        for r in &d.rows {
            assert!((r.delta - want).abs() < 1e-12, "k={k}: {}", r.delta);
            assert!((r.loss - 0.5 * want).abs() < 1e-12);
        }
        // the effective display attains the same bound
        let eff = delta_bound_system(&sys, &qi_pair_with_correction(k), &xs, &sphere_samples(1), GAP_TOL).unwrap();
        assert!((eff.max_delta() - want).abs() < 1e-12);
    }
    let csv = delta_bound_system(
        &qi_system(1.0),
        &symmetrizer_from_roots(&qi_system(1.0), &samples(&x_grid(2)), GAP_TOL).unwrap(),
        &x_grid(2),
        &sphere_samples(1),
        GAP_TOL,
    )
    .unwrap()
    .to_csv();
    assert!(csv.starts_with("x,delta,loss,argmax_block,argmax_xi\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn row_scaling_leaves_delta_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs = x_grid(4);
    let xis = sphere_samples(1);
    for _ in 0..10 {
        let op = random_strictly_hyperbolic(&mut rng, 3);
        let sys = companion_system(&op);
        let pair = symmetrizer_from_roots(&sys, &samples(&xs), GAP_TOL).unwrap();
        let base = delta_bound_system(&sys, &pair, &xs, &xis, GAP_TOL).unwrap();
        let factors: Vec<Complex64> = (0..3)
            .map(|_| Complex64::from_polar(rng.gen_range(0.1..10.0), rng.gen_range(0.0..6.28)))
            .collect();
        let scaled = delta_bound_system(&sys, &pair.row_scaled(factors), &xs, &xis, GAP_TOL).unwrap();
        for (a, b) in base.rows.iter().zip(&scaled.rows) {
            assert!((a.delta - b.delta).abs() <= 1e-10);
        }
    }
    // block systems: one factor per block
    for _ in 0..10 {
        let sys = random_block_system(&mut rng);
        let pair = symmetrizer_from_roots(&sys, &samples(&xs[..1]), GAP_TOL).unwrap();
        let base = delta_bound_system(&sys, &pair, &xs[..1], &xis, GAP_TOL).unwrap();
        let f: Vec<f64> = (0..3).map(|_| rng.gen_range(0.2..5.0)).collect();
        let factors = [f[0], f[0], f[1], f[1], f[2]].map(c).to_vec();
        let scaled = delta_bound_system(&sys, &pair.row_scaled(factors), &xs[..1], &xis, GAP_TOL).unwrap();
        assert!((base.max_delta() - scaled.max_delta()).abs() <= 1e-10);
    }
}

#[test]
fn strict_shortcut_agrees_with_block_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let xs = x_grid(6);
    let xis = sphere_samples(1);
    for m in [2, 3, 4] {
        for _ in 0..5 {
            let sys = companion_system(&random_strictly_hyperbolic(&mut rng, m));
            let pair = symmetrizer_from_roots(&sys, &samples(&xs), GAP_TOL).unwrap();
            let a = delta_bound_system(&sys, &pair, &xs, &xis, GAP_TOL).unwrap();
            let b = delta_bound_strict(&sys, &pair, &xs, &xis).unwrap();
            for (ra, rb) in a.rows.iter().zip(&b.rows) {
                assert!((ra.delta - rb.delta).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn hermitian_part_is_hermitian() {
    let q = CMatrix::from_fn(3, 3, |r, s| Complex64::new(r as f64 - s as f64, (r * s) as f64));
    let h = hermitian_part(&q);
    assert!(frobenius(&(&h - h.adjoint())) == 0.0);
}

#[test]
fn order_raising_doubles_the_principal_data() {
    let sys = qi_system(1.0);
    let raised = order_raised_system(&sys).unwrap();
    assert_eq!(raised.size(), 4);
    let (a, r) = (sys.as_structured(), raised.as_structured());
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let t: f64 = rng.gen_range(1e-3..1.0);
        let x = [rng.gen_range(0.0..6.3)];
        let xi = [rng.gen_range(-50.0..50.0)];
        let p = principal_symbols(&a, t, &x, &xi).unwrap();
        let q = principal_symbols(&r, t, &x, &xi).unwrap();
        let scale = t * xi[0].abs();
        assert!(frobenius(&(q.sigma_m - block_diag(&[&p.sigma_m, &p.sigma_m]))) <= 1e-12 * scale.max(1.0));
        assert!(frobenius(&(q.sigma_tilde - block_diag(&[&p.sigma_tilde, &p.sigma_tilde]))) <= 1e-12);
    }
    // the raised system's remainder is the rest of the full symbol
    assert!(raised.remainder().is_some());
    assert!(matches!(order_raised_system(&raised), Err(SystemError::NotSeparable)));
}

#[test]
fn order_raising_preserves_delta() {
    for k in [0.0, 1.0, -0.75] {
        let sys = qi_system(k);
        let raised = order_raised_system(&sys).unwrap();
        let xs = x_grid(3);
        let xis = sphere_samples(1);
        let d0 = delta_bound_system(
            &sys,
            &symmetrizer_from_roots(&sys, &samples(&xs), GAP_TOL).unwrap(),
            &xs,
            &xis,
            GAP_TOL,
        )
        .unwrap();
        let d1 = delta_bound_system(
            &raised,
            &symmetrizer_from_roots(&raised, &samples(&xs), GAP_TOL).unwrap(),
            &xs,
            &xis,
            GAP_TOL,
        )
        .unwrap();
        assert!((d0.max_delta() - d1.max_delta()).abs() <= 1e-10, "k={k}");
        assert!((d0.min_delta() - d1.min_delta()).abs() <= 1e-10);
    }
}
