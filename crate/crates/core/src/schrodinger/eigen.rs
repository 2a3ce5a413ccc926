use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::kinetic::{centered_difference_apply, SpectralKinetic};
use super::propagator::SplitStepPropagator;
use crate::error::{Error, Result};
use crate::field::Amplitude;
use crate::grid::{Boundary, SpatialGrid, SystemParams};
use crate::potential::Potential;

/// How the kinetic term of the discrete Hamiltonian is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Discretization {
    /// Same spectral operator the split-step propagator uses.
    #[default]
    Spectral,
    /// Three-point second difference.
    CenteredDifference,
}

#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub energies: Vec<f64>,
    pub states: Vec<Amplitude>,
    pub potential: Potential,
    pub params: SystemParams,
    pub discretization: Discretization,
}

impl EigenSolution {
    pub fn grid(&self) -> &SpatialGrid {
        self.states[0].grid()
    }

    /// `||H phi_n - e_n phi_n||_2` on the grid (with `dx` weight).
    pub fn residual(&self, n: usize) -> f64 {
        let phi = &self.states[n];
        let h = apply_hamiltonian(phi.grid(), &self.potential, &self.params, self.discretization, phi.values());
        (h.iter()
            .zip(phi.values())
            .map(|(a, b)| (a - b * self.energies[n]).norm_sqr())
            .sum::<f64>()
            * phi.grid().dx())
        .sqrt()
    }

    /// Largest `|<phi_m, phi_n> - delta_mn|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (m, a) in self.states.iter().enumerate() {
            for (n, b) in self.states.iter().enumerate() {
                let target = if m == n { 1.0 } else { 0.0 };
                worst = worst.max((a.inner(b) - target).norm());
            }
        }
        worst
    }
}

pub(crate) fn apply_hamiltonian(
    grid: &SpatialGrid,
    potential: &Potential,
    params: &SystemParams,
    disc: Discretization,
    values: &[Complex64],
) -> Vec<Complex64> {
    let mut out = match disc {
        Discretization::Spectral => SpectralKinetic::new(*grid, params.mass(), params.alpha()).apply(values),
        Discretization::CenteredDifference => centered_difference_apply(grid, params.mass(), params.alpha(), values),
    };
    for (i, o) in out.iter_mut().enumerate() {
        *o += values[i] * potential.value(grid.x(i));
    }
    if grid.boundary() == Boundary::Vanishing {
        out[0] = Complex64::new(0.0, 0.0);
    }
    out
}

/// Lowest `n_states` eigenpairs of the discrete Hamiltonian, ascending.
///
/// States are normalized on the grid and sign-fixed so that the first
/// component above `1e-3` of the peak magnitude is positive.
pub fn solve_eigenproblem(
    potential: &Potential,
    params: &SystemParams,
    grid: SpatialGrid,
    n_states: usize,
) -> Result<EigenSolution> {
    solve_eigenproblem_with(potential, params, grid, n_states, Discretization::Spectral)
}

pub fn solve_eigenproblem_with(
    potential: &Potential,
    params: &SystemParams,
    grid: SpatialGrid,
    n_states: usize,
    disc: Discretization,
) -> Result<EigenSolution> {
    let n = grid.len();
    // vanishing grids: unknowns are samples 1..n
    let offset = usize::from(grid.boundary() == Boundary::Vanishing);
    let dim = n - offset;
    if n_states == 0 || n_states > dim / 2 {
        return Err(Error::Validation(format!(
            "n_states must be in 1..={} for this grid, got {n_states}",
            dim / 2
        )));
    }
    let vs = potential.sample(&grid);
    if vs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("potential is not finite on the grid".into()));
    }

    let mut h = DMatrix::<f64>::zeros(dim, dim);
    let mut unit = vec![Complex64::new(0.0, 0.0); n];
    for col in 0..dim {
        unit.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        unit[col + offset] = Complex64::new(1.0, 0.0);
        let t = match disc {
            Discretization::Spectral => SpectralKinetic::new(grid, params.mass(), params.alpha()).apply(&unit),
            Discretization::CenteredDifference => {
                centered_difference_apply(&grid, params.mass(), params.alpha(), &unit)
            }
        };
        for row in 0..dim {
            h[(row, col)] = t[row + offset].re;
        }
        h[(col, col)] += vs[col + offset];
    }
    let sym = (&h + h.transpose()) * 0.5;

    let eig = SymmetricEigen::try_new(sym, 1e-14, 100_000).ok_or_else(|| {
        Error::NonConvergence(format!("symmetric QR on a {dim}x{dim} Hamiltonian hit 100000 sweeps"))
    })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let dx = grid.dx();
    let mut energies = Vec::with_capacity(n_states);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n_states);
    for &idx in order.iter().take(n_states) {
        energies.push(eig.eigenvalues[idx]);
        vectors.push(eig.eigenvectors.column(idx).iter().copied().collect());
    }
    reorthogonalize_clusters(&energies, &mut vectors);

    let mut states = Vec::with_capacity(n_states);
    for v in vectors {
        let peak = v.iter().map(|a| a.abs()).fold(0.0, f64::max);
        let sign = v
            .iter()
            .find(|a| a.abs() > 1e-3 * peak)
            .map_or(1.0, |a| a.signum());
        let scale = sign / dx.sqrt();
        let mut values = vec![Complex64::new(0.0, 0.0); n];
        for (j, a) in v.iter().enumerate() {
            values[j + offset] = Complex64::new(a * scale, 0.0);
        }
        states.push(Amplitude::normalized(grid, values, 0.0)?);
    }

    Ok(EigenSolution {
        energies,
        states,
        potential: potential.clone(),
        params: *params,
        discretization: disc,
    })
}

/// Modified Gram-Schmidt within groups of (numerically) degenerate eigenvalues.
fn reorthogonalize_clusters(energies: &[f64], vectors: &mut [Vec<f64>]) {
    let tol = |e: f64| 1e-9 * e.abs().max(1.0);
    let mut start = 0;
    while start < energies.len() {
        let mut end = start + 1;
        while end < energies.len() && (energies[end] - energies[start]).abs() < tol(energies[start]) {
            end += 1;
        }
        for i in start..end {
            for j in start..i {
                let (head, tail) = vectors.split_at_mut(i);
                let d: f64 = head[j].iter().zip(&tail[0]).map(|(a, b)| a * b).sum();
                tail[0].iter_mut().zip(&head[j]).for_each(|(b, a)| *b -= d * a);
            }
            let norm = vectors[i].iter().map(|a| a * a).sum::<f64>().sqrt();
            vectors[i].iter_mut().for_each(|a| *a /= norm);
        }
        start = end;
    }
}

/// Step size used by [`stationary_evolution_check`].
pub const STATIONARY_CHECK_DT: f64 = 1e-4;

/// Max abs difference between the propagated eigenstate and `phi_n exp(-i e_n t/alpha)`.
pub fn stationary_evolution_check(sol: &EigenSolution, n: usize, t: f64) -> Result<f64> {
    if n >= sol.states.len() {
        return Err(Error::IndexOutOfRange {
            index: n as i64,
            n_max: sol.states.len().saturating_sub(1),
        });
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let steps = (t.abs() / STATIONARY_CHECK_DT).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let phi = &sol.states[n];
    let prop = SplitStepPropagator::new(*phi.grid(), &sol.potential, &sol.params, dt)?;
    let evolved = prop.advance(phi, steps)?;
    let expected = phi.clone().with_phase(-sol.energies[n] * t / sol.params.alpha());
    Ok(evolved.max_abs_diff(&expected))
}
