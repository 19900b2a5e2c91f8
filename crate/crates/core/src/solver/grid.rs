use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::SolverError;

/// Periodic grid on `[0, 2 pi)` with `n` points; spectral arrays are in FFT
/// order, index `k` carrying frequency `k` for `k <= n/2` and `k - n` above.
#[derive(Clone)]
pub struct PeriodicGrid {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodicGrid").field("n", &self.n).finish()
    }
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self, SolverError> {
        if n < 16 || !n.is_power_of_two() {
            return Err(SolverError::InvalidGrid(n));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n
    }

    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    #[inline]
    pub fn frequency(&self, k: usize) -> f64 {
        if k <= self.n / 2 {
            k as f64
        } else {
            k as f64 - self.n as f64
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.frequency(k)).collect()
    }

    /// Index of integer frequency `xi`, if representable.
    pub fn index_of(&self, xi: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if xi > half || xi <= -half {
            return None;
        }
        Some(if xi >= 0 { xi as usize } else { (xi + self.n as i64) as usize })
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| std::f64::consts::TAU * j as f64 / self.n as f64)
            .collect()
    }

    /// Coefficients to point values, in place.
    pub fn to_physical(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z *= s);
    }

    /// Point values to coefficients, in place.
    pub fn to_spectral(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Zero the Nyquist mode and everything above two thirds of it.
    pub fn dealias(&self, buf: &mut [Complex64]) {
        let cut = self.n as f64 / 3.0;
        for (k, z) in buf.iter_mut().enumerate() {
            if self.frequency(k).abs() > cut || k == self.n / 2 {
                *z = Complex64::default();
            }
        }
    }

    /// Discrete `L^2(0, 2 pi)` norm squared of a coefficient array.
    pub fn l2_sq(&self, coeffs: &[Complex64]) -> f64 {
        let s: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
        std::f64::consts::TAU * s / (self.n * self.n) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(PeriodicGrid::new(8).is_err());
        assert!(PeriodicGrid::new(24).is_err());
        assert!(PeriodicGrid::new(32).is_ok());
    }

    #[test]
    fn frequency_layout() {
        let g = PeriodicGrid::new(16).unwrap();
        assert_eq!(g.frequency(0), 0.0);
        assert_eq!(g.frequency(8), 8.0);
        assert_eq!(g.frequency(9), -7.0);
        assert_eq!(g.index_of(-7), Some(9));
        assert_eq!(g.index_of(-8), None);
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = PeriodicGrid::new(32).unwrap();
        let mut u: Vec<Complex64> = g
            .points()
            .iter()
            .map(|&x| Complex64::new(x.sin() + 0.5 * (3.0 * x).cos(), 0.0))
            .collect();
        let orig = u.clone();
        let phys_l2 = std::f64::consts::TAU / 32.0 * u.iter().map(|z| z.norm_sqr()).sum::<f64>();
        g.to_spectral(&mut u);
        assert!((g.l2_sq(&u) - phys_l2).abs() < 1e-12);
        g.to_physical(&mut u);
        for (a, b) in u.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
