//! Configuration-space dynamics of the probability amplitude.

mod eigen;
mod kinetic;
mod propagator;

pub use eigen::{
    solve_eigenproblem, solve_eigenproblem_with, stationary_evolution_check, Discretization, EigenSolution,
    STATIONARY_CHECK_DT,
};
pub use propagator::{energy_expectation, split_step_evolve, SplitStepPropagator};

use crate::error::Result;
use crate::field::Amplitude;
use crate::potential::Potential;

/// `|V(r) - V(s) + (r - s) F((r + s)/2)|`: the error of replacing the
/// potential difference by the midpoint force times the separation.
pub fn mean_value_gap(potential: &Potential, r: f64, s: f64) -> f64 {
    (potential.value(r) - potential.value(s) + (r - s) * potential.force(0.5 * (r + s))).abs()
}

/// `P(x) = |Psi(x)|^2`.
pub fn marginal_density(psi: &Amplitude) -> Result<Vec<f64>> {
    let n = psi.norm_sq();
    if (n - 1.0).abs() > crate::field::AMPLITUDE_NORM_TOL {
        return Err(crate::error::Error::NotNormalized(n));
    }
    Ok(psi.density())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::grid::{Boundary, SpatialGrid, SystemParams};

    fn harmonic() -> (Potential, SystemParams, SpatialGrid) {
        (
            Potential::Harmonic { k: 1.0 },
            SystemParams::default(),
            SpatialGrid::centered(10.0, 512).unwrap(),
        )
    }

    #[test]
    fn harmonic_spectrum() {
        let (v, p, g) = harmonic();
        let sol = solve_eigenproblem(&v, &p, g, 6).unwrap();
        for (n, e) in sol.energies.iter().enumerate() {
            let exact = n as f64 + 0.5;
            assert!(((e - exact) / exact).abs() < 1e-4, "n={n} e={e}");
            assert!(sol.residual(n) < 1e-6 * e.abs().max(1.0));
        }
        assert!(sol.orthonormality_defect() < 1e-8);
        // odd states vanish at the origin, even ones peak positive there
        assert!(sol.states[1].values()[256].norm() < 1e-10);
        assert!(sol.states[0].values()[256].re > 0.0);
    }

    #[test]
    fn centered_difference_is_second_order() {
        let (v, p, _) = harmonic();
        let err = |n| {
            let g = SpatialGrid::centered(10.0, n).unwrap();
            let sol = solve_eigenproblem_with(&v, &p, g, 1, Discretization::CenteredDifference).unwrap();
            (sol.energies[0] - 0.5).abs()
        };
        let ratio = err(128) / err(256);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn box_spectrum() {
        let b = 1.0;
        let g = SpatialGrid::new(-b, b, 512, Boundary::Vanishing).unwrap();
        let p = SystemParams::default();
        let sol = solve_eigenproblem(&Potential::free(), &p, g, 5).unwrap();
        for (i, e) in sol.energies.iter().enumerate() {
            let n = (i + 1) as f64;
            let exact = n * n * PI * PI / (8.0 * b * b);
            assert!(((e - exact) / exact).abs() < 1e-3);
        }
    }

    #[test]
    fn constant_shift_moves_all_levels() {
        let (v, p, g) = harmonic();
        let shifted = Potential::polynomial(vec![2.5, 0.0, 0.5]).unwrap();
        let a = solve_eigenproblem(&v, &p, g, 4).unwrap();
        let b = solve_eigenproblem(&shifted, &p, g, 4).unwrap();
        for n in 0..4 {
            assert!((b.energies[n] - a.energies[n] - 2.5).abs() < 1e-9);
            assert!(b.states[n].max_abs_diff(&a.states[n]) < 1e-8);
        }
    }

    #[test]
    fn stationary_states_only_pick_up_a_phase() {
        let (v, p, g) = harmonic();
        let sol = solve_eigenproblem(&v, &p, g, 4).unwrap();
        assert_eq!(stationary_evolution_check(&sol, 0, 0.0).unwrap(), 0.0);
        assert!(stationary_evolution_check(&sol, 0, 1.0).unwrap() < 1e-6);
        assert!(stationary_evolution_check(&sol, 3, 2.0 * PI).unwrap() < 1e-5);
        assert!(stationary_evolution_check(&sol, 9, 1.0).is_err());
    }

    #[test]
    fn mean_value_gap_cases() {
        let q = Potential::polynomial(vec![0.3, -1.2, 0.8]).unwrap();
        assert!(mean_value_gap(&q, 1.7, -0.4) < 1e-12);
        let quartic = Potential::Quartic { lambda: 1.0 };
        assert_eq!(mean_value_gap(&quartic, 0.3, 0.3), 0.0);
        // V(1+y) - V(1-y) - 2y V'(1) = 8 y^3 for V = x^4
        let y = 0.01;
        assert!((mean_value_gap(&quartic, 1.0 + y, 1.0 - y) - 8.0 * y * y * y).abs() < 1e-15);
    }

    #[test]
    fn ground_state_density_is_gaussian() {
        let (v, p, g) = harmonic();
        let sol = solve_eigenproblem(&v, &p, g, 1).unwrap();
        let dens = marginal_density(&sol.states[0]).unwrap();
        let var = 0.5; // alpha / (2 M omega)
        for (i, d) in dens.iter().enumerate().step_by(16) {
            let x = g.x(i);
            let exact = (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
            assert!((d - exact).abs() < 1e-10);
        }
    }
}
