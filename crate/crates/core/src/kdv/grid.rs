//! Periodic grid and Fourier differentiation.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::KdvError;

/// `N` equispaced points on `[x_L, x_R)`.
#[derive(Clone)]
pub struct SpectralGrid {
    n: usize,
    x_left: f64,
    x_right: f64,
    dx: f64,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("x_left", &self.x_left)
            .field("x_right", &self.x_right)
            .finish()
    }
}

impl SpectralGrid {
    pub fn new(n: usize, x_left: f64, x_right: f64) -> Result<Self, KdvError> {
        if n < 4 || n % 2 != 0 {
            return Err(KdvError::Grid(format!("N must be even and at least 4, got {n}")));
        }
        if !(x_right > x_left) {
            return Err(KdvError::Grid(format!("empty domain [{x_left}, {x_right})")));
        }
        let length = x_right - x_left;
        let base = 2.0 * PI / length;
        let wavenumbers = (0..n)
            .map(|j| {
                let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                base * m
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(SpectralGrid {
            n,
            x_left,
            x_right,
            dx: length / n as f64,
            wavenumbers,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x_left, self.x_right)
    }

    pub fn length(&self) -> f64 {
        self.x_right - self.x_left
    }

    /// `x_L + jΔx`; the right end is excluded.
    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x_left + j as f64 * self.dx).collect()
    }

    /// Wavenumbers in FFT order; index `N/2` is the Nyquist mode.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn transform(&self, u: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Real part of the normalised inverse transform.
    pub fn inverse_transform(&self, mut coeffs: Vec<Complex64>) -> Vec<f64> {
        self.inverse.process(&mut coeffs);
        let scale = 1.0 / self.n as f64;
        coeffs.iter().map(|c| c.re * scale).collect()
    }

    /// Fourier symbol `(ik)^order`, with the Nyquist mode zeroed for odd orders.
    pub fn symbol(&self, order: u32) -> Vec<Complex64> {
        let i = Complex64::new(0.0, 1.0);
        self.wavenumbers
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                if order % 2 == 1 && j == self.n / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    (i * k).powu(order)
                }
            })
            .collect()
    }

    pub fn derivative(&self, u: &[f64], order: u32) -> Vec<f64> {
        let mut c = self.transform(u);
        for (cj, s) in c.iter_mut().zip(self.symbol(order)) {
            *cj *= s;
        }
        self.inverse_transform(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(SpectralGrid::new(7, 0.0, 1.0).is_err());
        assert!(SpectralGrid::new(2, 0.0, 1.0).is_err());
        assert!(SpectralGrid::new(8, 1.0, 1.0).is_err());
    }

    #[test]
    fn grid_excludes_right_end() {
        let g = SpectralGrid::new(512, -20.0, 60.0).unwrap();
        let x = g.points();
        assert_eq!(x[0], -20.0);
        assert!((x[511] - (60.0 - g.dx())).abs() < 1e-12);
        assert_eq!(g.dx(), 80.0 / 512.0);
    }

    #[test]
    fn sine_eigenfunction() {
        let g = SpectralGrid::new(64, -3.0, 5.0).unwrap();
        let w = 2.0 * PI / g.length();
        let x = g.points();
        let u: Vec<f64> = x.iter().map(|&x| (w * x).sin()).collect();
        let d1 = g.derivative(&u, 1);
        let d3 = g.derivative(&u, 3);
        for j in 0..64 {
            assert!((d1[j] - w * (w * x[j]).cos()).abs() < 1e-12);
            assert!((d3[j] + w.powi(3) * (w * x[j]).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn constants_have_zero_derivative() {
        for n in [8, 512, 1536] {
            let g = SpectralGrid::new(n, -130.0, 130.0).unwrap();
            let u = vec![3.7; n];
            for order in [1, 3] {
                let d = g.derivative(&u, order);
                assert!(d.iter().all(|v| v.abs() <= 1e-12 * n as f64));
            }
        }
    }

    #[test]
    fn nyquist_mode_removed_by_odd_derivatives() {
        let g = SpectralGrid::new(16, 0.0, 1.0).unwrap();
        let u: Vec<f64> = (0..16).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(g.derivative(&u, 1).iter().all(|v| v.abs() < 1e-12));
        assert!(g.derivative(&u, 3).iter().all(|v| v.abs() < 1e-10));
        let d2 = g.derivative(&u, 2);
        let k = PI * 16.0;
        assert!((d2[0] + k * k).abs() < 1e-9);
    }
}
