use rayon::prelude::*;

use super::config::{ClassicalBranch, ExperimentConfig, InitialState, SweepAxis};
use super::report::{loglog_slope, ComparisonReport, SnapshotMetrics, SweepTable};
use crate::basis::synthesize_amplitude;
use crate::error::{Error, Result};
use crate::field::{Amplitude, PhaseDistribution};
use crate::liouville::{
    check_momentum_domain, ensemble_to_grid, liouville_residual_with, quantum_correction_terms, sample_initial,
    step_plan, GridSolver, InitialDistribution, TrajectoryEnsemble,
};
use crate::schrodinger::SplitStepPropagator;
use crate::wigner::{
    factorize_amplitude, hermiticity_residual, inverse_transform, purity_decomposition, wigner_of_amplitude,
    TransformField, WmnTable,
};

trait Staged<T> {
    fn stage(self, name: &'static str) -> Result<T>;
}

impl<T> Staged<T> for Result<T> {
    fn stage(self, name: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(name))
    }
}

/// Step counts at which snapshots are taken: `0, k, 2k, ...` and the last step.
pub fn snapshot_steps(n_steps: usize, every: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=n_steps).step_by(every.max(1)).collect();
    if *v.last().unwrap() != n_steps {
        v.push(n_steps);
    }
    v
}

/// Quantum branch: `Q(t)` at each snapshot.
fn quantum_series(
    cfg: &ExperimentConfig,
    psi0: &Amplitude,
    h: f64,
    steps: &[usize],
    notes: &mut Vec<String>,
) -> Result<Vec<PhaseDistribution>> {
    let prop = SplitStepPropagator::new(*psi0.grid(), &cfg.potential, &cfg.params, h)?;
    if let Some(w) = prop.stability_warning(psi0) {
        log::warn!("{w}");
        notes.push(w);
    }
    let mut psi = psi0.clone();
    let mut done = 0;
    let mut out = Vec::with_capacity(steps.len());
    for &s in steps {
        psi = prop.advance(&psi, s - done)?;
        done = s;
        out.push(wigner_of_amplitude(&psi, &cfg.params, &cfg.grid)?);
    }
    Ok(out)
}

/// Classical branch on the grid: `W(t)` from `W(0) = q0` at each snapshot.
fn classical_grid_series(
    cfg: &ExperimentConfig,
    q0: &PhaseDistribution,
    h: f64,
    steps: &[usize],
) -> Result<Vec<PhaseDistribution>> {
    check_momentum_domain(q0, &cfg.potential, &cfg.params)?;
    let solver = GridSolver::new(cfg.grid, &cfg.potential, &cfg.params, h, cfg.solver.interpolation)?;
    let mut w = q0.clone();
    let mut done = 0;
    let mut out = Vec::with_capacity(steps.len());
    for &s in steps {
        w = solver.advance(&w, s - done)?.0;
        done = s;
        out.push(w.clone());
    }
    Ok(out)
}

/// Classical branch by trajectories, gridded at each snapshot.
fn classical_ensemble_series(
    cfg: &ExperimentConfig,
    q0: &PhaseDistribution,
    h: f64,
    steps: &[usize],
    notes: &mut Vec<String>,
) -> Result<Vec<PhaseDistribution>> {
    let s = &cfg.solver;
    let init = sample_initial(&InitialDistribution::Tabulated(q0.clone()), s.n_samples, s.sampling, s.seed)?;
    let mut ens = TrajectoryEnsemble::new(&init, &cfg.potential, &cfg.params)?;
    let mut done = 0;
    let mut out = Vec::with_capacity(steps.len());
    for &st in steps {
        if st > done {
            ens = ens.advance((st - done) as f64 * h, h)?;
        }
        done = st;
        let g = ensemble_to_grid(&ens, &cfg.grid, s.gridding)?;
        if let Some(w) = g.warning {
            notes.push(format!("t = {}: {w}", ens.time));
        }
        out.push(g.distribution.with_time(st as f64 * h));
    }
    Ok(out)
}

/// Factorization residual of `T[W]`, or `None` with a note when `T` is degenerate.
fn factorization_residual(w: &PhaseDistribution, cfg: &ExperimentConfig, notes: &mut Vec<String>) -> Result<Option<f64>> {
    let t = inverse_transform(w, &cfg.params)?;
    match factorize_amplitude(&t, None) {
        Ok(f) => Ok(Some(f.residual)),
        Err(e @ (Error::Degenerate(_) | Error::NotNormalized(_))) => {
            notes.push(format!("t = {}: factorization skipped ({e})", w.time()));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Classical Liouville evolution of `Q_0` against the Wigner transform of the
/// Schrodinger evolution, snapshot by snapshot on one shared grid.
pub fn run_equivalence(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    if matches!(cfg.initial, InitialState::Mixture { .. }) {
        return Err(Error::Config("mixtures are only supported by the theorem check".into()));
    }
    let psi0 = cfg.initial_amplitude().stage("initial state")?;
    let q0 = wigner_of_amplitude(&psi0, &cfg.params, &cfg.grid).stage("initial transform")?;
    let (n, h) = step_plan(cfg.solver.t_final, cfg.solver.dt).stage("time grid")?;
    let steps = snapshot_steps(n, cfg.snapshot_every);

    let mut q_notes = Vec::new();
    let mut w_notes = Vec::new();
    let (quantum, classical) = rayon::join(
        || quantum_series(cfg, &psi0, h, &steps, &mut q_notes).stage("quantum branch"),
        || match cfg.solver.classical {
            ClassicalBranch::Grid => classical_grid_series(cfg, &q0, h, &steps).stage("classical grid branch"),
            ClassicalBranch::Ensemble => {
                classical_ensemble_series(cfg, &q0, h, &steps, &mut w_notes).stage("classical ensemble branch")
            }
        },
    );
    let (quantum, classical) = (quantum?, classical?);
    let mut notes = q_notes;
    notes.append(&mut w_notes);

    let mut snapshots = Vec::with_capacity(steps.len());
    for (q, w) in quantum.iter().zip(&classical) {
        let corr = quantum_correction_terms(q, &cfg.potential, &cfg.params, cfg.solver.correction_order)
            .stage("correction terms")?;
        if let Some(wn) = &corr.warning {
            if !notes.contains(wn) {
                notes.push(wn.clone());
            }
        }
        let l2 = w.l2_distance(q);
        snapshots.push(SnapshotMetrics {
            time: q.time(),
            l2: Some(l2),
            l2_relative: Some(l2 / q.l2_norm()),
            linf: Some(w.linf_distance(q)),
            correction_3: corr.order(3).map(|f| f.l2_norm()),
            correction_5: corr.order(5).map(|f| f.l2_norm()),
            factorization_residual: factorization_residual(w, cfg, &mut notes).stage("factorization")?,
            ..Default::default()
        });
    }
    let report = ComparisonReport {
        kind: "equivalence".into(),
        snapshots,
        config: cfg.clone(),
        notes,
    };
    report.check_finite()?;
    Ok(report)
}

/// Basis state `C` to `W = sum C_mn W_mn`, optionally evolved classically,
/// then at each snapshot: hermiticity and purity of the re-extracted `C`, the
/// factorization residual of `T[W]`, and `max |T[W] - Psi*(x-y) Psi(x+y)|`
/// for `Psi` synthesized from the dominant eigenvector of `C`.
pub fn run_theorem_check(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    let (basis, c0) = cfg.initial_matrix().stage("initial state")?.ok_or_else(|| {
        Error::Config("the theorem check needs initial.kind = coefficients or mixture".into())
    })?;
    let table = WmnTable::new(&basis, &cfg.params, &cfg.grid).stage("W_mn table")?;
    let w0 = table.synthesize(&c0).stage("synthesis")?;

    let series = if cfg.solver.t_final > 0.0 {
        let (n, h) = step_plan(cfg.solver.t_final, cfg.solver.dt).stage("time grid")?;
        let steps = snapshot_steps(n, cfg.snapshot_every);
        classical_grid_series(cfg, &w0, h, &steps).stage("classical grid branch")?
    } else {
        vec![w0]
    };

    let mut notes = Vec::new();
    let mut snapshots = Vec::with_capacity(series.len());
    for w in &series {
        let c = table.expand(w).stage("expansion")?;
        let herm = hermiticity_residual(&c);
        let (purity, synthesis_error) = match purity_decomposition(&c) {
            Ok(d) => {
                let psi = synthesize_amplitude(&d.amplitude, &basis, *cfg.grid.spatial())
                    .stage("amplitude synthesis")?
                    .amplitude;
                let direct = TransformField::from_amplitude(&psi, &cfg.grid).stage("transform")?;
                let t = inverse_transform(w, &cfg.params).stage("inverse transform")?;
                (Some(d.purity_defect), Some(t.max_abs_diff(&direct)))
            }
            Err(e) => {
                notes.push(format!("t = {}: purity decomposition skipped ({e})", w.time()));
                (None, None)
            }
        };
        snapshots.push(SnapshotMetrics {
            time: w.time(),
            purity_defect: purity,
            factorization_residual: factorization_residual(w, cfg, &mut notes).stage("factorization")?,
            hermiticity_residual: Some(herm),
            amplitude_error: synthesis_error,
            ..Default::default()
        });
    }
    let report = ComparisonReport {
        kind: "theorem".into(),
        snapshots,
        config: cfg.clone(),
        notes,
    };
    report.check_finite()?;
    Ok(report)
}

fn check_sweep_values(values: &[f64]) -> Result<()> {
    if values.len() < 3 {
        return Err(Error::Config(format!("a sweep needs >= 3 values, got {}", values.len())));
    }
    let up = values.windows(2).all(|w| w[1] > w[0]);
    let down = values.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::Config("sweep values must be strictly monotone".into()));
    }
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Config("sweep values must be positive".into()));
    }
    Ok(())
}

fn amplitude_l2(a: &Amplitude, b: &Amplitude) -> f64 {
    (a.values().iter().zip(b.values()).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>() * a.grid().dx()).sqrt()
}

/// Repeat the configured experiment over `values` of one axis.
///
/// * `dt`: error at `t_final` of both propagators against a run with a
///   step 16 times smaller than the smallest value.
/// * `dx`: `values` are `n_x` (and `n_p`); metric is the L2 norm of the
///   Liouville residual of the classical grid series around `t_final`.
/// * `n_samples`: L2 distance at `t_final` between the gridded trajectory
///   ensemble and the grid-solver evolution of the same initial density.
pub fn run_convergence_sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepTable> {
    check_sweep_values(values)?;
    let t = cfg.solver.t_final;
    if !(t > 0.0) {
        return Err(Error::Config("a sweep needs solver.t_final > 0".into()));
    }
    let (xs, metrics): (Vec<f64>, Vec<(String, Vec<f64>)>) = match axis {
        SweepAxis::Dt => {
            let psi0 = cfg.initial_amplitude().stage("initial state")?;
            let q0 = wigner_of_amplitude(&psi0, &cfg.params, &cfg.grid).stage("initial transform")?;
            let fine = values.iter().copied().fold(f64::INFINITY, f64::min) / 16.0;
            let run = |dt: f64| -> Result<(f64, Amplitude, PhaseDistribution)> {
                let (n, h) = step_plan(t, dt)?;
                let psi = SplitStepPropagator::new(*psi0.grid(), &cfg.potential, &cfg.params, h)?.advance(&psi0, n)?;
                let w = classical_grid_series(cfg, &q0, h, &[n])?.pop().unwrap();
                Ok((h, psi, w))
            };
            let (_, psi_ref, w_ref) = run(fine).stage("reference run")?;
            let points: Vec<(f64, Amplitude, PhaseDistribution)> =
                values.par_iter().map(|&dt| run(dt)).collect::<Result<_>>().stage("sweep point")?;
            let xs = points.iter().map(|p| p.0).collect();
            let quantum = points.iter().map(|p| amplitude_l2(&p.1, &psi_ref)).collect();
            let classical = points.iter().map(|p| p.2.l2_distance(&w_ref) / w_ref.l2_norm()).collect();
            (xs, vec![("quantum_error".into(), quantum), ("classical_error".into(), classical)])
        }
        SweepAxis::Dx => {
            let points: Vec<(f64, f64)> = values
                .par_iter()
                .map(|&n| -> Result<(f64, f64)> {
                    let n = n.round() as usize;
                    let c = cfg.with(&[("grid.n_x", n.to_string()), ("grid.n_p", n.to_string())])?;
                    let psi0 = c.initial_amplitude()?;
                    let q0 = wigner_of_amplitude(&psi0, &c.params, &c.grid)?;
                    let (steps, h) = step_plan(t, c.solver.dt)?;
                    let at = [steps.saturating_sub(1), steps, steps + 1];
                    let series = classical_grid_series(&c, &q0, h, &at)?;
                    let r = liouville_residual_with(&series, &c.potential, &c.params, c.solver.differencing)?;
                    Ok((c.grid.dx(), r[0].l2_norm()))
                })
                .collect::<Result<_>>()
                .stage("sweep point")?;
            (
                points.iter().map(|p| p.0).collect(),
                vec![("liouville_residual".into(), points.iter().map(|p| p.1).collect())],
            )
        }
        SweepAxis::NSamples => {
            let psi0 = cfg.initial_amplitude().stage("initial state")?;
            let q0 = wigner_of_amplitude(&psi0, &cfg.params, &cfg.grid).stage("initial transform")?;
            let (n, h) = step_plan(t, cfg.solver.dt).stage("time grid")?;
            let reference = classical_grid_series(cfg, &q0, h, &[n]).stage("reference run")?.pop().unwrap();
            let errors: Vec<f64> = values
                .par_iter()
                .map(|&ns| -> Result<f64> {
                    let c = cfg.with(&[("solver.n_samples", (ns.round() as usize).to_string())])?;
                    let mut notes = Vec::new();
                    let w = classical_ensemble_series(&c, &q0, h, &[n], &mut notes)?.pop().unwrap();
                    Ok(w.l2_distance(&reference))
                })
                .collect::<Result<_>>()
                .stage("sweep point")?;
            (values.to_vec(), vec![("density_error".into(), errors)])
        }
    };
    let slopes = metrics.iter().map(|(name, col)| (name.clone(), loglog_slope(&xs, col))).collect();
    Ok(SweepTable {
        axis: axis.name().into(),
        values: xs,
        metrics,
        slopes,
        config: cfg.clone(),
    })
}
