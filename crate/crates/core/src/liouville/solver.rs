use num_complex::Complex64;
use rayon::prelude::*;

use super::trajectory::step_plan;
use crate::error::{Error, Result};
use crate::field::{PhaseDistribution, DISTRIBUTION_NORM_TOL};
use crate::grid::{PhaseSpaceGrid, SystemParams};
use crate::potential::{catmull_rom, Potential};
use crate::spectral;

/// How the backward characteristic foot is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Kick-drift-kick as three exact band-limited shifts (momentum, position,
    /// momentum); the composition is the backward velocity-Verlet map.
    #[default]
    Spectral,
    /// Catmull-Rom bicubic interpolation at the backward Verlet foot.
    Bicubic,
}

impl std::str::FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Self::Spectral),
            "bicubic" => Ok(Self::Bicubic),
            _ => Err(Error::Config(format!("unknown interpolation '{s}' (spectral | bicubic)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSolverOptions {
    pub interpolation: Interpolation,
    /// Clip negative values of the final field to zero.
    pub clip_negative: bool,
}

impl Default for GridSolverOptions {
    fn default() -> Self {
        Self {
            interpolation: Interpolation::Spectral,
            clip_negative: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridEvolution {
    pub distribution: PhaseDistribution,
    /// Mass removed by clipping.
    pub clipped_mass: f64,
    /// Largest per-step relative mass drift seen.
    pub max_step_mass_drift: f64,
    pub renormalized: bool,
}

/// Fraction of the grid mass allowed to have its foot outside the momentum window.
pub const DOMAIN_EXIT_LIMIT: f64 = 0.01;

/// Relative level of `|W_0|` that defines the energy ceiling of the initial state.
const SUPPORT_LEVEL: f64 = 1e-8;

/// Require `p_max >= sqrt(2M (E_max - V_min))`, with `E_max` the largest
/// energy on cells where `|W_0|` exceeds `1e-8` of its peak.
pub fn check_momentum_domain(w0: &PhaseDistribution, potential: &Potential, params: &SystemParams) -> Result<()> {
    let g = w0.grid();
    let peak = w0.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let vs = potential.sample(g.spatial());
    let v_min = vs.iter().copied().fold(f64::INFINITY, f64::min);
    let m = params.mass();
    let mut e_max = f64::NEG_INFINITY;
    for ip in 0..g.n_p() {
        for ix in 0..g.n_x() {
            if w0.at(ix, ip).norm() > SUPPORT_LEVEL * peak {
                e_max = e_max.max(g.p(ip).powi(2) / (2.0 * m) + vs[ix]);
            }
        }
    }
    let need = (2.0 * m * (e_max - v_min)).max(0.0).sqrt();
    if need > g.p_max() {
        return Err(Error::DomainTooSmall(format!(
            "initial energy ceiling {e_max:.4} needs p_max >= {need:.4}, grid has {:.4}",
            g.p_max()
        )));
    }
    Ok(())
}

/// Semi-Lagrangian Liouville stepper on a fixed grid.
#[derive(Debug, Clone)]
pub struct GridSolver {
    grid: PhaseSpaceGrid,
    potential: Potential,
    mass: f64,
    dt: f64,
    forces: Vec<f64>,
    kx: Vec<f64>,
    kp: Vec<f64>,
    interpolation: Interpolation,
}

impl GridSolver {
    pub fn new(
        grid: PhaseSpaceGrid,
        potential: &Potential,
        params: &SystemParams,
        dt: f64,
        interpolation: Interpolation,
    ) -> Result<Self> {
        grid.check_alpha(params.alpha())?;
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::Validation(format!("dt must be finite and non-zero, got {dt}")));
        }
        let forces: Vec<f64> = (0..grid.n_x()).map(|i| potential.force(grid.x(i))).collect();
        if forces.iter().any(|f| !f.is_finite()) {
            return Err(Error::Validation("force is not finite on the grid".into()));
        }
        Ok(Self {
            kx: spectral::wavenumbers(grid.n_x(), grid.spatial().length()),
            kp: spectral::wavenumbers(grid.n_p(), grid.n_p() as f64 * grid.dp()),
            grid,
            potential: potential.clone(),
            mass: params.mass(),
            dt,
            forces,
            interpolation,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Share of `sum |W|` sitting on cells whose momentum foot `p - F dt/2` leaves the window.
    fn exit_fraction(&self, values: &[Complex64]) -> f64 {
        let g = &self.grid;
        let edge = g.p_max() + 0.5 * g.dp();
        let (mut out, mut total) = (0.0, 0.0);
        for ip in 0..g.n_p() {
            for ix in 0..g.n_x() {
                let a = values[ip * g.n_x() + ix].norm();
                total += a;
                let foot = g.p(ip) - 0.5 * self.dt * self.forces[ix];
                if foot.abs() > edge || foot < g.p_min() - 0.5 * g.dp() {
                    out += a;
                }
            }
        }
        if total > 0.0 {
            out / total
        } else {
            0.0
        }
    }

    fn kick(&self, values: &mut [Complex64]) {
        let (nx, np) = (self.grid.n_x(), self.grid.n_p());
        let h = 0.5 * self.dt;
        let columns: Vec<Vec<Complex64>> = (0..nx)
            .into_par_iter()
            .map(|ix| {
                let mut col: Vec<Complex64> = (0..np).map(|ip| values[ip * nx + ix]).collect();
                spectral::shift_periodic(&mut col, self.forces[ix] * h, &self.kp);
                col
            })
            .collect();
        for (ix, col) in columns.into_iter().enumerate() {
            for (ip, v) in col.into_iter().enumerate() {
                values[ip * nx + ix] = v;
            }
        }
    }

    fn drift(&self, values: &mut [Complex64]) {
        let nx = self.grid.n_x();
        values.par_chunks_mut(nx).enumerate().for_each(|(ip, row)| {
            spectral::shift_periodic(row, self.grid.p(ip) * self.dt / self.mass, &self.kx);
        });
    }

    fn bicubic(&self, values: &[Complex64]) -> Vec<Complex64> {
        let g = &self.grid;
        let (nx, np) = (g.n_x() as isize, g.n_p() as isize);
        let (h, m) = (self.dt, self.mass);
        let at = |i: isize, k: isize| -> Complex64 {
            if k < 0 || k >= np {
                Complex64::new(0.0, 0.0)
            } else {
                values[(k * nx + i.rem_euclid(nx)) as usize]
            }
        };
        (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let (ix, ip) = (idx % g.n_x(), idx / g.n_x());
                let p_half = g.p(ip) - 0.5 * h * self.forces[ix];
                let xs = g.x(ix) - h * p_half / m;
                let ps = p_half - 0.5 * h * self.potential.force(xs);
                let sx = (xs - g.x(0)) / g.dx();
                let sp = (ps - g.p(0)) / g.dp();
                let (i0, k0) = (sx.floor() as isize, sp.floor() as isize);
                let (tx, tp) = (sx - i0 as f64, sp - k0 as f64);
                let mut rows = [Complex64::new(0.0, 0.0); 4];
                for (r, row) in rows.iter_mut().enumerate() {
                    let k = k0 - 1 + r as isize;
                    let v: [Complex64; 4] = std::array::from_fn(|c| at(i0 - 1 + c as isize, k));
                    *row = Complex64::new(
                        catmull_rom(v[0].re, v[1].re, v[2].re, v[3].re, tx),
                        catmull_rom(v[0].im, v[1].im, v[2].im, v[3].im, tx),
                    );
                }
                Complex64::new(
                    catmull_rom(rows[0].re, rows[1].re, rows[2].re, rows[3].re, tp),
                    catmull_rom(rows[0].im, rows[1].im, rows[2].im, rows[3].im, tp),
                )
            })
            .collect()
    }

    /// One step in place. Fails when the momentum window is too small.
    pub fn step_values(&self, values: &mut Vec<Complex64>) -> Result<()> {
        let exit = self.exit_fraction(values);
        if exit > DOMAIN_EXIT_LIMIT {
            return Err(Error::DomainTooSmall(format!(
                "{:.2}% of the mass has its characteristic outside |p| <= {:.4}",
                100.0 * exit,
                self.grid.p_max()
            )));
        }
        match self.interpolation {
            Interpolation::Spectral => {
                self.kick(values);
                self.drift(values);
                self.kick(values);
            }
            Interpolation::Bicubic => *values = self.bicubic(values),
        }
        Ok(())
    }

    /// Advance `n_steps` without clipping; mass is restored whenever a step drifts by more than `1e-10`.
    pub fn advance(&self, w: &PhaseDistribution, n_steps: usize) -> Result<(PhaseDistribution, f64, bool)> {
        if !w.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch("distribution and solver grids differ".into()));
        }
        let mut values = w.values().to_vec();
        let area = self.grid.cell_area();
        let mass0: Complex64 = values.iter().sum::<Complex64>() * area;
        let (mut worst, mut renormalized) = (0.0f64, false);
        for s in 0..n_steps {
            let before: Complex64 = values.iter().sum::<Complex64>() * area;
            self.step_values(&mut values)?;
            let after: Complex64 = values.iter().sum::<Complex64>() * area;
            if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return Err(Error::Divergence {
                    time: w.time() + (s + 1) as f64 * self.dt,
                    detail: "non-finite phase-space density".into(),
                });
            }
            let drift = (after - before).norm() / before.norm().max(f64::MIN_POSITIVE);
            worst = worst.max(drift);
            if drift > 1e-10 && after.norm() > 0.0 {
                let fix = mass0 / after;
                values.iter_mut().for_each(|v| *v *= fix);
                renormalized = true;
            }
        }
        let out = PhaseDistribution::new(self.grid, values, w.time() + n_steps as f64 * self.dt)?;
        Ok((out, worst, renormalized))
    }
}

/// Evolve `w0` to time `t` along backward characteristics.
pub fn evolve_grid(
    w0: &PhaseDistribution,
    potential: &Potential,
    params: &SystemParams,
    t: f64,
    dt: f64,
) -> Result<GridEvolution> {
    evolve_grid_with(w0, potential, params, t, dt, GridSolverOptions::default())
}

pub fn evolve_grid_with(
    w0: &PhaseDistribution,
    potential: &Potential,
    params: &SystemParams,
    t: f64,
    dt: f64,
    options: GridSolverOptions,
) -> Result<GridEvolution> {
    let peak = w0.max_abs_re();
    if w0.max_abs_im() > 1e-12 * peak.max(f64::MIN_POSITIVE) {
        return Err(Error::Validation("initial distribution must be real".into()));
    }
    let mass = w0.mass();
    if (mass - 1.0).abs() > DISTRIBUTION_NORM_TOL {
        return Err(Error::Validation(format!("initial distribution has mass {mass}, expected 1")));
    }
    check_momentum_domain(w0, potential, params)?;
    let (n, h) = step_plan(t, dt)?;
    let solver = GridSolver::new(*w0.grid(), potential, params, h, options.interpolation)?;
    let (mut w, max_step_mass_drift, renormalized) = solver.advance(w0, n)?;
    let mut clipped_mass = 0.0;
    let mut renormalized = renormalized;
    if options.clip_negative {
        let area = w.grid().cell_area();
        for v in w.values_mut() {
            if v.re < 0.0 {
                clipped_mass -= v.re * area;
                v.re = 0.0;
            }
        }
        let m = w.mass();
        if (m - mass).abs() > 1e-10 && m > 0.0 {
            w.values_mut().iter_mut().for_each(|v| *v *= mass / m);
            renormalized = true;
        }
    }
    Ok(GridEvolution {
        distribution: w,
        clipped_mass,
        max_step_mass_drift,
        renormalized,
    })
}
