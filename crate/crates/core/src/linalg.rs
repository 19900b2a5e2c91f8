//! Small dense complex linear algebra helpers shared by the analysis modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dense complex matrix used for all matrix-valued symbols.
pub type CMatrix = DMatrix<Complex64>;

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Build a complex matrix from real row-major entries.
pub fn real_matrix(rows: usize, cols: usize, entries: &[f64]) -> CMatrix {
    assert_eq!(entries.len(), rows * cols);
    CMatrix::from_row_iterator(rows, cols, entries.iter().map(|&v| c(v)))
}

/// `(Q + Q^*) / 2`.
pub fn hermitian_part(q: &CMatrix) -> CMatrix {
    (q + q.adjoint()).scale(0.5)
}

/// Largest eigenvalue of the Hermitian part of `q`.
pub fn max_real_part_eig(q: &CMatrix) -> f64 {
    let h = hermitian_part(q);
    h.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn frobenius(q: &CMatrix) -> f64 {
    q.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(q: &CMatrix) -> f64 {
    q.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a general complex matrix via the Schur form.
pub fn eigenvalues(q: &CMatrix) -> Vec<Complex64> {
    q.clone()
        .schur()
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .unwrap_or_default()
}

pub fn inverse(q: &CMatrix) -> Option<CMatrix> {
    q.clone().try_inverse()
}

/// Orthonormal basis (as columns) of the `k` right-singular directions of
/// `q` with smallest singular values, together with the largest of those
/// `k` singular values.
pub(crate) fn smallest_singular_subspace(q: &CMatrix, k: usize) -> (CMatrix, f64) {
    let n = q.ncols();
    let svd = q.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let mut basis = CMatrix::zeros(n, k);
    let mut worst: f64 = 0.0;
    for (col, &idx) in order.iter().take(k).enumerate() {
        worst = worst.max(svd.singular_values[idx]);
        for r in 0..n {
            basis[(r, col)] = v_t[(idx, r)].conj();
        }
    }
    (basis, worst)
}

/// Solve `T F - E T = G` for `T` through the Kronecker form.
///
/// Returns `None` when `E` and `F` share an eigenvalue (singular system).
pub fn solve_sylvester(e: &CMatrix, f: &CMatrix, g: &CMatrix) -> Option<CMatrix> {
    let (p, q) = (e.nrows(), f.nrows());
    let n = p * q;
    // column-major vec: vec(T F) = (F^T kron I_p) vec T, vec(E T) = (I_q kron E) vec T
    let mut k = CMatrix::zeros(n, n);
    for a in 0..q {
        for b in 0..q {
            let fba = f[(b, a)];
            for r in 0..p {
                k[(a * p + r, b * p + r)] += fba;
            }
        }
        for r in 0..p {
            for s in 0..p {
                k[(a * p + r, a * p + s)] -= e[(r, s)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_iterator(n, g.iter().copied());
    let lu = k.lu();
    let sol = lu.solve(&rhs)?;
    if sol.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    Some(CMatrix::from_column_slice(p, q, sol.as_slice()))
}

/// Block-diagonal matrix from square blocks.
pub fn block_diag(blocks: &[&CMatrix]) -> CMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((off, off), (k, k)).copy_from(b);
        off += k;
    }
    out
}
