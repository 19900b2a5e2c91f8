use degenhyp_core::linalg::{frobenius, CMatrix};
use degenhyp_core::reduction::{vandermonde_symmetrizer, ReducedSymbols};
use degenhyp_core::systems::{block_residuals, sylvester_block_offdiag};
use degenhyp_core::weights::{weight_band, weight_pair, Cutoff, DegeneracySpec};
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn monic(roots: &[f64]) -> Vec<Complex64> {
    let mut coef = vec![c(1.0)];
    for &r in roots {
        let mut next = vec![c(0.0); coef.len() + 1];
        for (i, a) in coef.iter().enumerate() {
            next[i + 1] += a;
            next[i] -= a * r;
        }
        coef = next;
    }
    coef.pop();
    coef
}

/// Increasing values with consecutive gaps at least `gap`.
fn separated(m: usize, gap: f64) -> impl Strategy<Value = Vec<f64>> {
    (-3.0..0.0f64, prop::collection::vec(gap..gap + 1.5, m - 1)).prop_map(|(start, steps)| {
        let mut v = vec![start];
        for s in steps {
            v.push(v.last().unwrap() + s);
        }
        v
    })
}

proptest! {
    #[test]
    fn weights_stay_in_band(l in 1u32..4, t in 0.0..1.0f64, xi in -1e5..1e5f64) {
        let spec = DegeneracySpec::new(l, 1.0).unwrap();
        let (lo, hi) = weight_band(&spec);
        let w = weight_pair(&spec, &Cutoff::default(), t, &[xi]).unwrap();
        for r in [w.g / w.g_bar, w.h / w.h_bar] {
            prop_assert!(r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12), "ratio {r} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn sylvester_kills_off_diagonal_blocks(
        mus in separated(3, 0.5),
        sizes in prop::collection::vec(1usize..3, 3),
        entries in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 36),
    ) {
        let n: usize = sizes.iter().sum();
        let diag: Vec<Complex64> = mus
            .iter()
            .zip(&sizes)
            .flat_map(|(&mu, &k)| std::iter::repeat(c(mu)).take(k))
            .collect();
        let b0 = CMatrix::from_diagonal(&DVector::from_vec(diag));
        let b1 = CMatrix::from_fn(n, n, |r, s| {
            let (re, im) = entries[r * 6 + s];
            Complex64::new(re, im)
        });
        let blocks: Vec<(f64, usize)> = mus.iter().copied().zip(sizes.iter().copied()).collect();
        let p1 = sylvester_block_offdiag(&blocks, &b1).unwrap();
        let (off, diag) = block_residuals(&b0, &b1, &p1, &sizes);
        prop_assert!(off <= 1e-10);
        prop_assert!(diag <= 1e-12);
    }

    #[test]
    fn vandermonde_inverse_pair(roots in (2usize..7).prop_flat_map(|m| separated(m, 0.3))) {
        let m = roots.len();
        let v = vandermonde_symmetrizer(&roots, &monic(&roots)).unwrap();
        prop_assert!(frobenius(&(&v.m0 * &v.m0_inv - CMatrix::identity(m, m))) <= 1e-8);
    }

    #[test]
    fn quotient_shift(roots in separated(3, 0.4), shift in -2.0..2.0f64, q0 in -1.0..1.0f64, q1 in -1.0..1.0f64) {
        let p = monic(&roots);
        let base = ReducedSymbols { p: p.clone(), q: vec![c(q0), c(q1)] };
        // q + shift p' for p = tau^3 + p2 tau^2 + p1 tau + p0
        let moved = ReducedSymbols {
            p: p.clone(),
            q: vec![c(q0) + p[1] * shift, c(q1) + p[2] * (2.0 * shift), c(3.0 * shift)],
        };
        for &mu in &roots {
            let d = moved.root_quotient(mu).unwrap() - base.root_quotient(mu).unwrap();
            prop_assert!((d + shift).abs() <= 1e-10);
        }
    }
}
