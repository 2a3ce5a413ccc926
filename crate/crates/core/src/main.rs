use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phasespace::error::{Error, Result};
use phasespace::experiments::{
    run_convergence_sweep, run_equivalence, run_theorem_check, snapshot_steps, ClassicalBranch, ExperimentConfig,
};
use phasespace::fieldio::{amplitude_csv, fmt_g17, phase_csv, save_field, write_text, Field};
use phasespace::liouville::{
    check_momentum_domain, ensemble_to_grid, sample_initial, step_plan, GridSolver, InitialDistribution,
    TrajectoryEnsemble,
};
use phasespace::schrodinger::{energy_expectation, solve_eigenproblem, SplitStepPropagator};
use phasespace::wigner::wigner_of_amplitude;

#[derive(Parser)]
#[command(name = "phasespace", version, about = "1-D phase-space dynamics experiments")]
struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides solver.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Steps between snapshots (overrides output.snapshots).
    #[arg(long, global = true)]
    snapshots: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lowest eigenpairs of the configured potential.
    Eigen,
    /// Split-step evolution of the initial amplitude.
    EvolveQuantum,
    /// Liouville evolution of the initial state's phase-space density.
    EvolveClassical,
    /// Phase-space transform of the initial amplitude.
    Wigner,
    /// Classical versus quantum evolution from the same initial state.
    Compare,
    /// Factorization check for a coefficient-list initial state.
    Theorem,
    /// Convergence sweep over sweep.axis / sweep.values.
    Sweep,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let base = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::parse("")?,
    };
    let mut overrides = Vec::new();
    if let Some(o) = &cli.out {
        overrides.push(("output.dir", o.display().to_string()));
    }
    if let Some(s) = cli.seed {
        overrides.push(("solver.seed", s.to_string()));
    }
    if let Some(k) = cli.snapshots {
        overrides.push(("output.snapshots", k.to_string()));
    }
    base.with(&overrides)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn eigen(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let sol = solve_eigenproblem(&cfg.potential, &cfg.params, *cfg.grid.spatial(), cfg.eigen_states)?;
    let dir = &cfg.out_dir;
    ensure_dir(dir)?;
    let mut table = String::from("n,energy,residual\n");
    let mut written = Vec::new();
    for (n, (e, phi)) in sol.energies.iter().zip(&sol.states).enumerate() {
        table.push_str(&format!("{n},{},{}\n", fmt_g17(*e), fmt_g17(sol.residual(n))));
        let path = dir.join(format!("state_{n}.pbf"));
        save_field(&Field::Amplitude(phi.clone()), &path)?;
        written.push(path);
    }
    let path = dir.join("eigen.csv");
    write_text(&path, &table)?;
    written.push(path);
    Ok(written)
}

fn evolve_quantum(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let psi0 = cfg.initial_amplitude()?;
    let (n, h) = step_plan(cfg.solver.t_final, cfg.solver.dt)?;
    let prop = SplitStepPropagator::new(*psi0.grid(), &cfg.potential, &cfg.params, h)?;
    if let Some(w) = prop.stability_warning(&psi0) {
        log::warn!("{w}");
    }
    let dir = &cfg.out_dir;
    ensure_dir(dir)?;
    let mut table = String::from("step,time,norm,energy\n");
    let mut written = Vec::new();
    let mut psi = psi0;
    let mut done = 0;
    for s in snapshot_steps(n, cfg.snapshot_every) {
        psi = prop.advance(&psi, s - done)?;
        done = s;
        table.push_str(&format!(
            "{s},{},{},{}\n",
            fmt_g17(psi.time()),
            fmt_g17(psi.norm_sq()),
            fmt_g17(energy_expectation(&psi, &cfg.potential, &cfg.params))
        ));
        let path = dir.join(format!("psi_{s:06}.pbf"));
        save_field(&Field::Amplitude(psi.clone()), &path)?;
        written.push(path);
    }
    let path = dir.join("quantum.csv");
    write_text(&path, &table)?;
    written.push(path);
    let path = dir.join("psi_final.csv");
    write_text(&path, &amplitude_csv(&psi))?;
    written.push(path);
    Ok(written)
}

fn evolve_classical(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let psi0 = cfg.initial_amplitude()?;
    let w0 = wigner_of_amplitude(&psi0, &cfg.params, &cfg.grid)?;
    let (n, h) = step_plan(cfg.solver.t_final, cfg.solver.dt)?;
    let dir = &cfg.out_dir;
    ensure_dir(dir)?;
    let mut written = Vec::new();
    let mut table = String::from("step,time,mass\n");
    let mut last = w0.clone();
    match cfg.solver.classical {
        ClassicalBranch::Grid => {
            check_momentum_domain(&last, &cfg.potential, &cfg.params)?;
            let solver = GridSolver::new(cfg.grid, &cfg.potential, &cfg.params, h, cfg.solver.interpolation)?;
            let mut done = 0;
            for s in snapshot_steps(n, cfg.snapshot_every) {
                last = solver.advance(&last, s - done)?.0;
                done = s;
                snapshot(&last, s, dir, &mut table, &mut written)?;
            }
        }
        ClassicalBranch::Ensemble => {
            let s = &cfg.solver;
            let init = sample_initial(&InitialDistribution::Tabulated(w0), s.n_samples, s.sampling, s.seed)?;
            let mut ens = TrajectoryEnsemble::new(&init, &cfg.potential, &cfg.params)?;
            let mut done = 0;
            for st in snapshot_steps(n, cfg.snapshot_every) {
                if st > done {
                    ens = ens.advance((st - done) as f64 * h, h)?;
                }
                done = st;
                let g = ensemble_to_grid(&ens, &cfg.grid, s.gridding)?;
                if let Some(w) = g.warning {
                    log::warn!("t = {}: {w}", ens.time);
                }
                last = g.distribution.with_time(st as f64 * h);
                snapshot(&last, st, dir, &mut table, &mut written)?;
            }
            let path = dir.join("trajectories.csv");
            write_text(&path, &ens.to_csv())?;
            written.push(path);
        }
    }
    let path = dir.join("classical.csv");
    write_text(&path, &table)?;
    written.push(path);
    Ok(written)
}

fn snapshot(
    w: &phasespace::PhaseDistribution,
    step: usize,
    dir: &Path,
    table: &mut String,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    table.push_str(&format!("{step},{},{}\n", fmt_g17(w.time()), fmt_g17(w.mass())));
    let path = dir.join(format!("w_{step:06}.pbf"));
    save_field(&Field::Phase(w.clone()), &path)?;
    written.push(path);
    Ok(())
}

fn wigner(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let psi0 = cfg.initial_amplitude()?;
    let q = wigner_of_amplitude(&psi0, &cfg.params, &cfg.grid)?;
    let dir = &cfg.out_dir;
    ensure_dir(dir)?;
    let pbf = dir.join("wigner.pbf");
    save_field(&Field::Phase(q.clone()), &pbf)?;
    let csv = dir.join("wigner.csv");
    write_text(&csv, &phase_csv(&q))?;
    Ok(vec![pbf, csv])
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Eigen => eigen(&cfg),
        Command::EvolveQuantum => evolve_quantum(&cfg),
        Command::EvolveClassical => evolve_classical(&cfg),
        Command::Wigner => wigner(&cfg),
        Command::Compare => run_equivalence(&cfg)?.write(&cfg.out_dir, "compare"),
        Command::Theorem => run_theorem_check(&cfg)?.write(&cfg.out_dir, "theorem"),
        Command::Sweep => {
            run_convergence_sweep(&cfg, cfg.sweep_axis, &cfg.sweep_values)?.write(&cfg.out_dir, "sweep")
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
