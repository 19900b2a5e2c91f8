//! Truncated Taylor arithmetic.
//!
//! A `Jet<N>` stores the normalized Taylor coefficients `f^(k)(x0) / k!` for
//! `k < N`. Only the handful of operations the cutoff needs are provided.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Jet<const N: usize> {
    pub(crate) c: [f64; N],
}

impl<const N: usize> Jet<N> {
    pub(crate) fn constant(v: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = v;
        Self { c }
    }

    /// The identity function expanded at `x0`.
    pub(crate) fn variable(x0: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = x0;
        if N > 1 {
            c[1] = 1.0;
        }
        Self { c }
    }

    pub(crate) fn value(&self) -> f64 {
        self.c[0]
    }

    /// k-th derivative at the expansion point.
    pub(crate) fn derivative(&self, k: usize) -> f64 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        self.c[k] * fact
    }

    pub(crate) fn recip(&self) -> Self {
        let a0 = self.c[0];
        let mut b = [0.0; N];
        b[0] = 1.0 / a0;
        for k in 1..N {
            let s: f64 = (1..=k).map(|j| self.c[j] * b[k - j]).sum();
            b[k] = -s / a0;
        }
        Self { c: b }
    }

    pub(crate) fn exp(&self) -> Self {
        let mut e = [0.0; N];
        e[0] = self.c[0].exp();
        for k in 1..N {
            let s: f64 = (1..=k).map(|j| j as f64 * self.c[j] * e[k - j]).sum();
            e[k] = s / k as f64;
        }
        Self { c: e }
    }

    pub(crate) fn scale(&self, s: f64) -> Self {
        let mut c = self.c;
        c.iter_mut().for_each(|v| *v *= s);
        Self { c }
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(rhs.c) {
            *a += b;
        }
        Self { c }
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut c = [0.0; N];
        for k in 0..N {
            c[k] = (0..=k).map(|j| self.c[j] * rhs.c[k - j]).sum();
        }
        Self { c }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_variable_matches_series() {
        let j = Jet::<5>::variable(0.3).exp();
        for k in 0..5 {
            assert!((j.derivative(k) - 0.3f64.exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn recip_derivatives() {
        // d^k/dx^k 1/x = (-1)^k k! / x^{k+1}
        let x = 0.7;
        let j = Jet::<5>::variable(x).recip();
        let mut fact = 1.0;
        for k in 0..5 {
            if k > 0 {
                fact *= k as f64;
            }
            let want = (-1f64).powi(k as i32) * fact / x.powi(k as i32 + 1);
            assert!((j.derivative(k) - want).abs() < 1e-10 * want.abs().max(1.0));
        }
    }
}
