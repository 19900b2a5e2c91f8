use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::PeriodicGrid;
use super::SolverError;
use crate::linalg::CMatrix;
use crate::weights::DegeneracySpec;

/// Arguments of a mode symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCtx {
    pub t: f64,
    pub xi: f64,
    pub eps: f64,
}

/// Writes the `N x N` matrix `m(t, xi)` (row-major) into the buffer. The
/// buffer is zeroed before each call.
pub type ModeSymbol = Arc<dyn Fn(&ModeCtx, &mut [Complex64]) + Send + Sync>;

/// Matrix-valued coefficient sampled on the grid, stored entry by entry.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    entries: Vec<Vec<Complex64>>,
}

impl MatrixField {
    pub fn sample<F: Fn(f64) -> CMatrix>(grid: &PeriodicGrid, size: usize, f: F) -> Self {
        let pts = grid.points();
        let mut entries = vec![Vec::with_capacity(pts.len()); size * size];
        for &x in &pts {
            let m = f(x);
            for r in 0..size {
                for c in 0..size {
                    entries[r * size + c].push(m[(r, c)]);
                }
            }
        }
        Self { entries }
    }
}

/// One term `a(x) m(t, D_x)` of a separable symbol; `a` is the identity when
/// absent.
#[derive(Clone)]
pub struct SeparableTerm {
    pub field: Option<MatrixField>,
    pub symbol: ModeSymbol,
}

/// Spectral realization of `D_t U = A(t, x, D_x) U + F` on a periodic grid.
#[derive(Clone)]
pub struct SpectralSystem {
    size: usize,
    spec: DegeneracySpec,
    grid: PeriodicGrid,
    name: String,
    terms: Vec<SeparableTerm>,
    singular_at_zero: bool,
}

impl std::fmt::Debug for SpectralSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralSystem")
            .field("name", &self.name)
            .field("size", &self.size)
            .field("n_modes", &self.grid.n_modes())
            .field("terms", &self.terms.len())
            .finish()
    }
}

const PAR_MIN: usize = 256;

impl SpectralSystem {
    pub fn new(spec: DegeneracySpec, size: usize, grid: PeriodicGrid, name: impl Into<String>) -> Self {
        Self {
            size,
            spec,
            grid,
            name: name.into(),
            terms: Vec::new(),
            singular_at_zero: false,
        }
    }

    pub fn with_term(mut self, symbol: ModeSymbol) -> Self {
        self.terms.push(SeparableTerm { field: None, symbol });
        self
    }

    pub fn with_field_term<F: Fn(f64) -> CMatrix>(mut self, field: F, symbol: ModeSymbol) -> Self {
        let field = MatrixField::sample(&self.grid, self.size, field);
        self.terms.push(SeparableTerm {
            field: Some(field),
            symbol,
        });
        self
    }

    /// Declare a `t^{-1}` singularity at `t = 0` that only the
    /// regularization `eps > 0` removes.
    pub fn singular_at_zero(mut self) -> Self {
        self.singular_at_zero = true;
        self
    }

    pub fn is_singular_at_zero(&self) -> bool {
        self.singular_at_zero
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn spec(&self) -> &DegeneracySpec {
        &self.spec
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_fields(&self) -> bool {
        self.terms.iter().any(|t| t.field.is_some())
    }

    /// Sum of the `x`-independent terms at one frequency.
    pub fn mode_matrix(&self, t: f64, xi: f64, eps: f64) -> CMatrix {
        let n = self.size;
        let ctx = ModeCtx { t, xi, eps };
        let mut acc = vec![Complex64::default(); n * n];
        let mut buf = vec![Complex64::default(); n * n];
        for term in self.terms.iter().filter(|t| t.field.is_none()) {
            buf.fill(Complex64::default());
            (term.symbol)(&ctx, &mut buf);
            acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
        }
        CMatrix::from_row_slice(n, n, &acc)
    }

    /// Largest Frobenius norm of the `x`-independent part over the modes.
    pub fn max_symbol_norm(&self, t: f64, eps: f64) -> f64 {
        self.grid
            .frequencies()
            .iter()
            .map(|&xi| crate::linalg::frobenius(&self.mode_matrix(t, xi, eps)))
            .fold(0.0, f64::max)
    }

    /// `out = A(t) u` with `u`, `out` stored component-major
    /// (`component * n_modes + mode`).
    pub fn apply(&self, t: f64, eps: f64, u: &[Complex64], out: &mut [Complex64]) {
        let n = self.size;
        let nm = self.grid.n_modes();
        let freqs = self.grid.frequencies();
        let constant: Vec<&SeparableTerm> = self.terms.iter().filter(|t| t.field.is_none()).collect();
        // mode-major scratch for the x-independent part
        let mut acc = vec![Complex64::default(); nm * n];
        acc.par_chunks_mut(n)
            .with_min_len(PAR_MIN)
            .enumerate()
            .for_each_init(
                || (vec![Complex64::default(); n * n], vec![Complex64::default(); n * n]),
                |(mat, buf), (k, slot)| {
                    if constant.is_empty() {
                        return;
                    }
                    let ctx = ModeCtx { t, xi: freqs[k], eps };
                    mat.fill(Complex64::default());
                    for term in &constant {
                        buf.fill(Complex64::default());
                        (term.symbol)(&ctx, buf);
                        mat.iter_mut().zip(buf.iter()).for_each(|(a, b)| *a += b);
                    }
                    for r in 0..n {
                        let mut s = Complex64::default();
                        for c in 0..n {
                            s += mat[r * n + c] * u[c * nm + k];
                        }
                        slot[r] = s;
                    }
                },
            );
        for r in 0..n {
            for k in 0..nm {
                out[r * nm + k] = acc[k * n + r];
            }
        }
        for term in self.terms.iter().filter(|t| t.field.is_some()) {
            self.apply_field_term(term, t, eps, u, out);
        }
        let nyq = self.grid.nyquist_index();
        for r in 0..n {
            out[r * nm + nyq] = Complex64::default();
        }
    }

    fn apply_field_term(&self, term: &SeparableTerm, t: f64, eps: f64, u: &[Complex64], out: &mut [Complex64]) {
        let n = self.size;
        let nm = self.grid.n_modes();
        let freqs = self.grid.frequencies();
        let field = term.field.as_ref().expect("field term");
        let mut v = vec![Complex64::default(); nm * n];
        v.par_chunks_mut(n)
            .with_min_len(PAR_MIN)
            .enumerate()
            .for_each_init(
                || vec![Complex64::default(); n * n],
                |mat, (k, slot)| {
                    mat.fill(Complex64::default());
                    (term.symbol)(&ModeCtx { t, xi: freqs[k], eps }, mat);
                    for r in 0..n {
                        let mut s = Complex64::default();
                        for c in 0..n {
                            s += mat[r * n + c] * u[c * nm + k];
                        }
                        slot[r] = s;
                    }
                },
            );
        let mut phys: Vec<Vec<Complex64>> = (0..n)
            .map(|c| {
                let mut col: Vec<Complex64> = (0..nm).map(|k| v[k * n + c]).collect();
                self.grid.to_physical(&mut col);
                col
            })
            .collect();
        let mut prod = vec![vec![Complex64::default(); nm]; n];
        for (r, row) in prod.iter_mut().enumerate() {
            for (c, col) in phys.iter().enumerate() {
                let f = &field.entries[r * n + c];
                for j in 0..nm {
                    row[j] += f[j] * col[j];
                }
            }
        }
        phys.clear();
        for (r, mut row) in prod.into_iter().enumerate() {
            self.grid.to_spectral(&mut row);
            self.grid.dealias(&mut row);
            for k in 0..nm {
                out[r * nm + k] += row[k];
            }
        }
    }

    pub(crate) fn check_eps(&self, eps: f64) -> Result<(), SolverError> {
        if !(eps >= 0.0 && eps.is_finite()) || (eps == 0.0 && self.singular_at_zero) {
            return Err(SolverError::Regularization(eps));
        }
        Ok(())
    }
}
