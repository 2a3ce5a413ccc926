//! Kinetic operator `(-i alpha d/dx)^2 / 2M` on a spatial grid.
//!
//! Periodic grids use the Fourier basis. Vanishing grids use the sine basis
//! of the interior samples `1..n` (walls at `x_min` and `x_max`), realized as
//! an odd extension of length `2n` so both cases run on radix-2 FFTs.

use num_complex::Complex64;

use crate::grid::{Boundary, SpatialGrid};
use crate::spectral;

#[derive(Debug, Clone)]
pub(crate) struct SpectralKinetic {
    grid: SpatialGrid,
    /// `alpha^2 k^2 / 2M` per bin of the working transform.
    energies: Vec<f64>,
}

impl SpectralKinetic {
    pub fn new(grid: SpatialGrid, mass: f64, alpha: f64) -> Self {
        let (n, length) = match grid.boundary() {
            Boundary::Periodic => (grid.len(), grid.length()),
            Boundary::Vanishing => (2 * grid.len(), 2.0 * grid.length()),
        };
        let energies = spectral::wavenumbers(n, length)
            .into_iter()
            .map(|k| alpha * alpha * k * k / (2.0 * mass))
            .collect();
        Self { grid, energies }
    }

    /// Multiply by `f(E_k)` in the kinetic eigenbasis.
    pub fn apply_diagonal(&self, values: &mut [Complex64], f: impl Fn(f64) -> Complex64) {
        match self.grid.boundary() {
            Boundary::Periodic => {
                spectral::forward(values);
                for (v, &e) in values.iter_mut().zip(&self.energies) {
                    *v *= f(e);
                }
                spectral::inverse(values);
            }
            Boundary::Vanishing => {
                let n = values.len();
                let mut ext = vec![Complex64::new(0.0, 0.0); 2 * n];
                for j in 1..n {
                    ext[j] = values[j];
                    ext[2 * n - j] = -values[j];
                }
                spectral::forward(&mut ext);
                for (v, &e) in ext.iter_mut().zip(&self.energies) {
                    *v *= f(e);
                }
                spectral::inverse(&mut ext);
                values[0] = Complex64::new(0.0, 0.0);
                values[1..n].copy_from_slice(&ext[1..n]);
            }
        }
    }

    pub fn apply(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut out = values.to_vec();
        self.apply_diagonal(&mut out, |e| Complex64::new(e, 0.0));
        out
    }
}

/// `T psi` with the three-point stencil `-(alpha^2/2M)(psi_{i+1} - 2 psi_i + psi_{i-1})/dx^2`.
pub(crate) fn centered_difference_apply(grid: &SpatialGrid, mass: f64, alpha: f64, values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len();
    let c = alpha * alpha / (2.0 * mass * grid.dx() * grid.dx());
    let periodic = grid.boundary() == Boundary::Periodic;
    let at = |i: isize| -> Complex64 {
        if periodic {
            values[i.rem_euclid(n as isize) as usize]
        } else if i <= 0 || i >= n as isize {
            Complex64::new(0.0, 0.0)
        } else {
            values[i as usize]
        }
    };
    (0..n as isize)
        .map(|i| {
            if !periodic && i == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                -(at(i + 1) - at(i) * 2.0 + at(i - 1)) * c
            }
        })
        .collect()
}
