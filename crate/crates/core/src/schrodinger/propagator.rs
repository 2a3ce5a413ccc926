use std::f64::consts::PI;

use num_complex::Complex64;

use super::kinetic::SpectralKinetic;
use crate::error::{Error, Result};
use crate::field::Amplitude;
use crate::grid::{SpatialGrid, SystemParams};
use crate::potential::Potential;

/// Strang-split propagator for `i alpha dPsi/dt = [(-i alpha d/dx)^2/2M + V] Psi`.
///
/// One step applies `exp(-i V dt/2alpha) exp(-i T dt/alpha) exp(-i V dt/2alpha)`
/// with the kinetic factor diagonal in the spectral basis of the grid.
#[derive(Debug, Clone)]
pub struct SplitStepPropagator {
    grid: SpatialGrid,
    dt: f64,
    alpha: f64,
    potential_values: Vec<f64>,
    half_kick: Vec<Complex64>,
    kinetic: SpectralKinetic,
}

impl SplitStepPropagator {
    pub fn new(grid: SpatialGrid, potential: &Potential, params: &SystemParams, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::Validation(format!("time step must be finite and non-zero, got {dt}")));
        }
        let alpha = params.alpha();
        let potential_values = potential.sample(&grid);
        if potential_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("potential is not finite on the grid".into()));
        }
        let half_kick = potential_values
            .iter()
            .map(|&v| Complex64::from_polar(1.0, -v * dt / (2.0 * alpha)))
            .collect();
        Ok(Self {
            kinetic: SpectralKinetic::new(grid, params.mass(), alpha),
            grid,
            dt,
            alpha,
            potential_values,
            half_kick,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Phase advanced per step by the largest energy relevant to `psi`:
    /// the potential range on the grid plus the kinetic expectation.
    pub fn phase_per_step(&self, psi: &Amplitude) -> f64 {
        let vmax = self.potential_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let vmin = self.potential_values.iter().cloned().fold(f64::INFINITY, f64::min);
        let t = self.kinetic.apply(psi.values());
        let kin: f64 = psi
            .values()
            .iter()
            .zip(&t)
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
            * self.grid.dx();
        self.dt.abs() * (vmax - vmin + kin) / self.alpha
    }

    pub fn stability_warning(&self, psi: &Amplitude) -> Option<String> {
        let phase = self.phase_per_step(psi);
        (phase > PI / 4.0).then(|| {
            format!("phase advance per step {phase:.3} rad exceeds pi/4; reduce dt = {}", self.dt)
        })
    }

    pub fn step_values(&self, values: &mut [Complex64]) {
        let a = self.alpha;
        let dt = self.dt;
        for (v, k) in values.iter_mut().zip(&self.half_kick) {
            *v *= k;
        }
        self.kinetic
            .apply_diagonal(values, |e| Complex64::from_polar(1.0, -e * dt / a));
        for (v, k) in values.iter_mut().zip(&self.half_kick) {
            *v *= k;
        }
    }

    /// Advance `n_steps`; fails on non-finite values.
    pub fn advance(&self, psi: &Amplitude, n_steps: usize) -> Result<Amplitude> {
        if !psi.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch("amplitude and propagator grids differ".into()));
        }
        let mut values = psi.values().to_vec();
        for s in 0..n_steps {
            self.step_values(&mut values);
            if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return Err(Error::Divergence {
                    time: psi.time() + (s + 1) as f64 * self.dt,
                    detail: "non-finite amplitude in split-step propagation".into(),
                });
            }
        }
        Amplitude::unchecked(self.grid, values, psi.time() + n_steps as f64 * self.dt)
    }
}

/// Propagate `psi` by `n_steps` Strang steps of size `dt` (negative `dt` runs backwards).
pub fn split_step_evolve(
    psi: &Amplitude,
    potential: &Potential,
    params: &SystemParams,
    dt: f64,
    n_steps: usize,
) -> Result<Amplitude> {
    let norm = psi.norm_sq();
    if (norm - 1.0).abs() > crate::field::AMPLITUDE_NORM_TOL {
        return Err(Error::NotNormalized(norm));
    }
    let prop = SplitStepPropagator::new(*psi.grid(), potential, params, dt)?;
    if let Some(w) = prop.stability_warning(psi) {
        log::warn!("{w}");
    }
    prop.advance(psi, n_steps)
}

/// `<psi| H |psi>` with the spectral kinetic operator.
pub fn energy_expectation(psi: &Amplitude, potential: &Potential, params: &SystemParams) -> f64 {
    let kin = SpectralKinetic::new(*psi.grid(), params.mass(), params.alpha());
    let t = kin.apply(psi.values());
    let g = psi.grid();
    psi.values()
        .iter()
        .zip(&t)
        .enumerate()
        .map(|(i, (a, b))| (a.conj() * b).re + potential.value(g.x(i)) * a.norm_sqr())
        .sum::<f64>()
        * g.dx()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::gaussian_packet;
    use crate::grid::Boundary;

    #[test]
    fn free_packet_spreads_like_the_analytic_solution() {
        let grid = SpatialGrid::centered(40.0, 1024).unwrap();
        let params = SystemParams::default();
        let s0 = 1.0;
        let psi = gaussian_packet(grid, 0.0, 0.0, s0, 1.0).unwrap();
        let t = 3.0;
        let out = split_step_evolve(&psi, &Potential::free(), &params, 0.01, 300).unwrap();
        let var: f64 = out
            .density()
            .iter()
            .enumerate()
            .map(|(i, d)| d * grid.x(i).powi(2))
            .sum::<f64>()
            * grid.dx();
        let expected = s0 * s0 * (1.0 + (t / (2.0 * s0 * s0)).powi(2));
        assert!(((var - expected) / expected).abs() < 1e-6, "{var} vs {expected}");
    }

    #[test]
    fn constant_potential_is_a_pure_phase() {
        let grid = SpatialGrid::centered(10.0, 128).unwrap();
        let params = SystemParams::default();
        let psi = gaussian_packet(grid, 0.5, 1.0, 0.8, 1.0).unwrap();
        let a = split_step_evolve(&psi, &Potential::free(), &params, 0.01, 100).unwrap();
        let b = split_step_evolve(&psi, &Potential::constant(0.7), &params, 0.01, 100).unwrap();
        let shifted = a.clone().with_phase(-0.7 * 1.0);
        assert!(b.max_abs_diff(&shifted) < 1e-12);
    }

    #[test]
    fn vanishing_boundary_keeps_wall_at_zero() {
        let grid = SpatialGrid::new(-5.0, 5.0, 64, Boundary::Vanishing).unwrap();
        let psi = gaussian_packet(grid, 0.0, 2.0, 0.5, 1.0).unwrap();
        let out = split_step_evolve(&psi, &Potential::free(), &SystemParams::default(), 0.01, 500).unwrap();
        assert_eq!(out.values()[0], Complex64::new(0.0, 0.0));
        assert!((out.norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let grid = SpatialGrid::centered(10.0, 64).unwrap();
        let psi = Amplitude::unchecked(grid, vec![Complex64::new(1.0, 0.0); 64], 0.0).unwrap();
        assert!(split_step_evolve(&psi, &Potential::free(), &SystemParams::default(), 0.1, 1).is_err());
    }
}
