//! Classical phase-space evolution: trajectory ensembles, a grid solver
//! along characteristics, and the residual and correction-term diagnostics
//! that compare classical and quantum dynamics on the same grid.
//!
//! Sign convention: the classical residual is
//! `R = dW/dt + (p/M) dW/dx + F dW/dp` with `F = -V'`. For the quantum
//! distribution `Q` it equals `-(alpha^2/24) V''' d^3Q/dp^3 + (alpha^4/1920) V^(5) d^5Q/dp^5 + ...`,
//! which is exact for harmonic wells (every term vanishes).

mod ensemble;
mod sampling;
mod solver;
mod trajectory;

pub use ensemble::{
    ensemble_to_grid, evolve_ensemble, GriddedEnsemble, Gridding, TrajectoryEnsemble, TrajectorySample,
    OUT_OF_BOUNDS_FAIL, OUT_OF_BOUNDS_WARN,
};
pub use sampling::{sample_initial, InitialDistribution, InitialSample, SamplingMethod};
pub use solver::{
    check_momentum_domain, evolve_grid, evolve_grid_with, GridEvolution, GridSolver, GridSolverOptions,
    Interpolation, DOMAIN_EXIT_LIMIT,
};
pub use trajectory::{energy, integrate_trajectory, step_plan, verlet_step, DEFAULT_TRAJECTORY_DT};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{PhaseDistribution, ScalarField};
use crate::grid::{PhaseSpaceGrid, SystemParams};
use crate::potential::Potential;
use crate::spectral;

/// Phase-space derivative stencil for the residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Differencing {
    /// Second-order centered differences (periodic wrap on both axes).
    #[default]
    Centered,
    /// Band-limited derivatives on both axes.
    Spectral,
}

impl std::str::FromStr for Differencing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centered" => Ok(Self::Centered),
            "spectral" => Ok(Self::Spectral),
            _ => Err(Error::Config(format!("unknown differencing '{s}' (centered | spectral)"))),
        }
    }
}

/// `d^order W / dp^order` (real part) along each x column.
fn p_derivative(w: &[Complex64], grid: &PhaseSpaceGrid, order: u32, method: Differencing) -> Vec<f64> {
    let (nx, np) = (grid.n_x(), grid.n_p());
    let span = np as f64 * grid.dp();
    let cols: Vec<Vec<f64>> = (0..nx)
        .into_par_iter()
        .map(|ix| {
            let col: Vec<Complex64> = (0..np).map(|ip| w[ip * nx + ix]).collect();
            match method {
                Differencing::Spectral => spectral::derivative_periodic(&col, order, span).iter().map(|v| v.re).collect(),
                Differencing::Centered => {
                    let re: Vec<f64> = col.iter().map(|v| v.re).collect();
                    centered(&re, grid.dp(), order)
                }
            }
        })
        .collect();
    let mut out = vec![0.0; grid.len()];
    for (ix, col) in cols.into_iter().enumerate() {
        for (ip, v) in col.into_iter().enumerate() {
            out[ip * nx + ix] = v;
        }
    }
    out
}

fn x_derivative(w: &[Complex64], grid: &PhaseSpaceGrid, method: Differencing) -> Vec<f64> {
    let nx = grid.n_x();
    w.par_chunks(nx)
        .flat_map_iter(|row| match method {
            Differencing::Spectral => spectral::derivative_periodic(row, 1, grid.spatial().length())
                .into_iter()
                .map(|v| v.re)
                .collect::<Vec<f64>>(),
            Differencing::Centered => {
                let re: Vec<f64> = row.iter().map(|v| v.re).collect();
                centered(&re, grid.dx(), 1)
            }
        })
        .collect()
}

/// Periodic centered difference of order 1, or repeated first differences for higher orders.
fn centered(v: &[f64], h: f64, order: u32) -> Vec<f64> {
    let n = v.len();
    let mut cur = v.to_vec();
    for _ in 0..order {
        cur = (0..n)
            .map(|i| (cur[(i + 1) % n] - cur[(i + n - 1) % n]) / (2.0 * h))
            .collect();
    }
    cur
}

/// `dW/dt + (p/M) dW/dx + F(x) dW/dp` at every interior snapshot, with
/// centered differences on all axes.
pub fn liouville_residual(
    series: &[PhaseDistribution],
    potential: &Potential,
    params: &SystemParams,
) -> Result<Vec<ScalarField>> {
    liouville_residual_with(series, potential, params, Differencing::Centered)
}

/// As [`liouville_residual`]; the time derivative is always the centered
/// difference, `method` picks the phase-space stencil.
pub fn liouville_residual_with(
    series: &[PhaseDistribution],
    potential: &Potential,
    params: &SystemParams,
    method: Differencing,
) -> Result<Vec<ScalarField>> {
    if series.len() < 3 {
        return Err(Error::Validation(format!("need >= 3 snapshots, got {}", series.len())));
    }
    let grid = *series[0].grid();
    grid.check_alpha(params.alpha())?;
    if series.iter().any(|w| !w.grid().same_as(&grid)) {
        return Err(Error::GridMismatch("snapshots live on different grids".into()));
    }
    let h = series[1].time() - series[0].time();
    if !(h > 0.0) {
        return Err(Error::Validation("snapshot times must increase".into()));
    }
    for pair in series.windows(2) {
        let d = pair[1].time() - pair[0].time();
        if (d - h).abs() > 1e-9 * h.max(1.0) {
            return Err(Error::Validation(format!("non-uniform snapshot spacing ({d} vs {h})")));
        }
    }
    let forces: Vec<f64> = (0..grid.n_x()).map(|i| potential.force(grid.x(i))).collect();
    let m = params.mass();
    let mut out = Vec::with_capacity(series.len() - 2);
    for k in 1..series.len() - 1 {
        let w = series[k].values();
        let dx = x_derivative(w, &grid, method);
        let dp = p_derivative(w, &grid, 1, method);
        let (prev, next) = (series[k - 1].values(), series[k + 1].values());
        let values = (0..grid.len())
            .map(|idx| {
                let (ix, ip) = (idx % grid.n_x(), idx / grid.n_x());
                (next[idx].re - prev[idx].re) / (2.0 * h) + grid.p(ip) / m * dx[idx] + forces[ix] * dp[idx]
            })
            .collect();
        out.push(ScalarField { grid, values });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CorrectionTerms {
    /// `(order, field)` for orders 3 and, if requested, 5.
    pub terms: Vec<(u32, ScalarField)>,
    pub warning: Option<String>,
}

impl CorrectionTerms {
    pub fn order(&self, order: u32) -> Option<&ScalarField> {
        self.terms.iter().find(|(o, _)| *o == order).map(|(_, f)| f)
    }

    pub fn total(&self) -> ScalarField {
        let mut acc = ScalarField::zeros(self.terms[0].1.grid);
        for (_, f) in &self.terms {
            acc.values.iter_mut().zip(&f.values).for_each(|(a, b)| *a += b);
        }
        acc
    }
}

/// Order-3 term `-(alpha^2/24) V''' d^3Q/dp^3` and order-5 term
/// `+(alpha^4/1920) V^(5) d^5Q/dp^5`, with spectral momentum derivatives.
pub fn quantum_correction_terms(
    q: &PhaseDistribution,
    potential: &Potential,
    params: &SystemParams,
    max_order: u32,
) -> Result<CorrectionTerms> {
    if max_order != 3 && max_order != 5 {
        return Err(Error::Validation(format!("max_order must be 3 or 5, got {max_order}")));
    }
    let grid = *q.grid();
    grid.check_alpha(params.alpha())?;
    let a = params.alpha();
    let warning = potential
        .is_tabulated()
        .then(|| "derivatives above order 2 of a tabulated potential are only O(dx^2) accurate".to_string());
    let mut terms = Vec::new();
    for (order, coeff) in [(3u32, -a * a / 24.0), (5, a.powi(4) / 1920.0)] {
        if order > max_order {
            break;
        }
        let vd: Vec<f64> = (0..grid.n_x()).map(|i| potential.derivative(order, grid.x(i))).collect();
        let values = if vd.iter().all(|v| *v == 0.0) {
            vec![0.0; grid.len()]
        } else {
            let d = p_derivative(q.values(), &grid, order, Differencing::Spectral);
            d.iter()
                .enumerate()
                .map(|(idx, v)| coeff * vd[idx % grid.n_x()] * v)
                .collect()
        };
        terms.push((order, ScalarField { grid, values }));
    }
    Ok(CorrectionTerms { terms, warning })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::grid::{ActionConstant, SpatialGrid};
    use crate::potential::TabulatedPotential;

    fn grid(n: usize) -> PhaseSpaceGrid {
        PhaseSpaceGrid::new(SpatialGrid::centered(10.0, n).unwrap(), n, ActionConstant::default()).unwrap()
    }

    fn gaussian(g: PhaseSpaceGrid) -> PhaseDistribution {
        PhaseDistribution::from_fn(g, |x, p| (-x * x - p * p).exp() / PI)
    }

    #[test]
    fn quadratic_potentials_have_no_corrections() {
        let g = grid(64);
        let q = gaussian(g);
        let c = quantum_correction_terms(&q, &Potential::Harmonic { k: 3.0 }, &SystemParams::default(), 5).unwrap();
        assert!(c.terms.iter().all(|(_, f)| f.max_abs() == 0.0));
        assert!(c.warning.is_none());
    }

    #[test]
    fn quartic_terms() {
        let g = grid(128);
        let q = gaussian(g);
        let lambda = 0.1;
        let params = SystemParams::default();
        let c = quantum_correction_terms(&q, &Potential::Quartic { lambda }, &params, 5).unwrap();
        assert_eq!(c.order(5).unwrap().max_abs(), 0.0);
        let d3 = p_derivative(q.values(), &g, 3, Differencing::Spectral);
        for (idx, v) in c.order(3).unwrap().values.iter().enumerate() {
            let x = g.x(idx % g.n_x());
            assert!((v + lambda * x * d3[idx]).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_term_matches_hermite_oracle() {
        let g = grid(128);
        let q = gaussian(g);
        let v = Potential::polynomial(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let c = quantum_correction_terms(&q, &v, &SystemParams::default(), 3).unwrap();
        let f = c.order(3).unwrap();
        for ip in 0..g.n_p() {
            for ix in 0..g.n_x() {
                let (x, p) = (g.x(ix), g.p(ip));
                let d3 = (12.0 * p - 8.0 * p * p * p) * (-x * x - p * p).exp() / PI;
                let exact = -6.0 / 24.0 * d3;
                assert!((f.values[g.index(ix, ip)] - exact).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn tabulated_potentials_warn() {
        let g = grid(32);
        let tab = TabulatedPotential::new(*g.spatial(), g.spatial().points().iter().map(|x| x * x).collect()).unwrap();
        let c = quantum_correction_terms(&gaussian(g), &Potential::Tabulated(tab), &SystemParams::default(), 3).unwrap();
        assert!(c.warning.is_some());
        assert!(quantum_correction_terms(&gaussian(g), &Potential::free(), &SystemParams::default(), 4).is_err());
    }

    #[test]
    fn constant_series_has_zero_residual() {
        let g = grid(32);
        let c = 1.0 / (g.spatial().length() * g.n_p() as f64 * g.dp());
        let series: Vec<PhaseDistribution> = (0..4)
            .map(|k| PhaseDistribution::from_fn(g, |_, _| c).with_time(0.1 * k as f64))
            .collect();
        let r = liouville_residual(&series, &Potential::Quartic { lambda: 1.0 }, &SystemParams::default()).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn stationary_thermal_state() {
        let g = grid(256);
        let params = SystemParams::default();
        let v = Potential::Quartic { lambda: 0.1 };
        let kt = 1.0;
        let w = PhaseDistribution::from_fn(g, |x, p| (-(p * p / 2.0 + v.value(x)) / kt).exp());
        let mass = w.mass();
        let vals: Vec<f64> = w.real_parts().iter().map(|a| a / mass).collect();
        let series: Vec<PhaseDistribution> = (0..3)
            .map(|k| PhaseDistribution::from_real(g, &vals, 0.05 * k as f64).unwrap())
            .collect();
        let spectral = liouville_residual_with(&series, &v, &params, Differencing::Spectral).unwrap();
        assert!(spectral[0].max_abs() < 1e-10, "{}", spectral[0].max_abs());
        let centered = liouville_residual(&series, &v, &params).unwrap();
        // second-order stencils leave O(dx^2 + dp^2) behind
        assert!(centered[0].max_abs() < 0.05 * series[1].max_abs_re());
    }

    #[test]
    fn residual_validation() {
        let g = grid(32);
        let w = gaussian(g);
        let p = SystemParams::default();
        let v = Potential::free();
        assert!(liouville_residual(&[w.clone(), w.clone()], &v, &p).is_err());
        let uneven = [w.clone(), w.clone().with_time(0.1), w.clone().with_time(0.3)];
        assert!(liouville_residual(&uneven, &v, &p).is_err());
        let other = gaussian(grid(64));
        let mixed = [w.clone(), other.with_time(0.1), w.with_time(0.2)];
        assert!(matches!(liouville_residual(&mixed, &v, &p), Err(Error::GridMismatch(_))));
    }
}
