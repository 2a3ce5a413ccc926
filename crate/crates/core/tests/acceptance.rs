//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --test acceptance`.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phasespace::basis::{synthesize_amplitude, BasisSet, CoefficientVector};
use phasespace::experiments::{run_convergence_sweep, run_equivalence, ExperimentConfig, SweepAxis};
use phasespace::field::gaussian_packet;
use phasespace::liouville::{
    ensemble_to_grid, evolve_ensemble, integrate_trajectory, liouville_residual_with, quantum_correction_terms,
    sample_initial, Differencing, Gridding, InitialDistribution, SamplingMethod,
};
use phasespace::schrodinger::{mean_value_gap, solve_eigenproblem, split_step_evolve};
use phasespace::wigner::{
    hermiticity_residual, inverse_transform, overlap_factor, wigner_of_amplitude, wigner_of_pair, CoefficientMatrix,
    TransformField, WmnTable,
};
use phasespace::{ActionConstant, PhaseDistribution, PhaseSpaceGrid, Potential, SpatialGrid, SystemParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn box_grid(n: usize) -> PhaseSpaceGrid {
    PhaseSpaceGrid::new(SpatialGrid::periodic(-1.0, 1.0, n).unwrap(), n, ActionConstant::default()).unwrap()
}

fn random_vector(basis: &BasisSet, rng: &mut ChaCha8Rng) -> CoefficientVector {
    let mut a = CoefficientVector::zeros(basis);
    for v in a.values.iter_mut() {
        *v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    let norm = a.norm_sq().sqrt();
    a.values.iter_mut().for_each(|v| *v /= norm);
    a
}

fn quadratic_equivalence() -> Outcome {
    let base = "grid.n_x = 256\ngrid.n_p = 256\ninitial.x0 = 2\nsolver.dt = 0.006283185307179587\n";
    let harmonic = ExperimentConfig::parse(&format!(
        "{base}potential.form = harmonic\nsolver.t_final = 6.283185307179586\noutput.snapshots = 100\n"
    ))
    .unwrap();
    let quartic = ExperimentConfig::parse(&format!(
        "{base}potential.form = quartic\npotential.lambda = 0.1\nsolver.t_final = 2\noutput.snapshots = 50\n"
    ))
    .unwrap();
    let h = run_equivalence(&harmonic).unwrap();
    let q = run_equivalence(&quartic).unwrap();
    let worst = h.snapshots.iter().map(|s| s.l2_relative.unwrap()).fold(0.0, f64::max);
    let at_two = q.snapshots.last().unwrap().l2_relative.unwrap();
    let ratio = at_two / worst;
    outcome(
        worst < 1e-3 && ratio >= 10.0,
        format!("harmonic max rel L2 {worst:.3e} (< 1e-3); quartic at t=2 {at_two:.3e}, {ratio:.2e}x baseline (>= 10)"),
    )
}

fn factorization_theorem() -> Outcome {
    let g = box_grid(128);
    let params = SystemParams::default();
    let basis = BasisSet::plane_wave_box(1.0, 8).unwrap();
    let table = WmnTable::new(&basis, &params, &g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = random_vector(&basis, &mut rng);
        let w = table.synthesize(&CoefficientMatrix::pure(&a)).unwrap();
        let t = inverse_transform(&w, &params).unwrap();
        let psi = synthesize_amplitude(&a, &basis, *g.spatial()).unwrap().amplitude;
        let direct = TransformField::from_amplitude(&psi, &g).unwrap();
        worst = worst.max(t.max_abs_diff(&direct));
    }
    outcome(worst < 1e-6, format!("100 rank-1 trials, max |T[W] - Psi*Psi| {worst:.3e} (< 1e-6)"))
}

fn hermiticity() -> Outcome {
    let g = box_grid(128);
    let params = SystemParams::default();
    let basis = BasisSet::plane_wave_box(1.0, 8).unwrap();
    let table = WmnTable::new(&basis, &params, &g).unwrap();

    let dist = InitialDistribution::Gaussian {
        x0: 0.1,
        p0: 0.5,
        sigma_x: 0.15,
        sigma_p: 2.0,
    };
    let init = sample_initial(&dist, 20_000, SamplingMethod::LowDiscrepancy, 0).unwrap();
    let ens = evolve_ensemble(&init, &Potential::Harmonic { k: 1.0 }, &params, 0.3, 1e-3).unwrap();
    let w = ensemble_to_grid(&ens, &g, Gridding::Kde { bandwidth: None }).unwrap().distribution;
    let forward = hermiticity_residual(&table.expand(&w).unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = basis.len();
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..100 {
        let mut c = CoefficientMatrix::zeros(&basis);
        for i in 0..d {
            c.values[(i, i)] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
            for j in i + 1..d {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                c.values[(i, j)] = z;
                c.values[(j, i)] = z.conj();
            }
        }
        let w = table.synthesize(&c).unwrap();
        worst_ratio = worst_ratio.max(w.max_abs_im() / w.max_abs_re());
    }
    outcome(
        forward < 1e-8 && worst_ratio < 1e-8,
        format!("ensemble ||C - C^H||max {forward:.3e} (< 1e-8); random Hermitian C max|Im|/max|Re| {worst_ratio:.3e} (< 1e-8)"),
    )
}

fn orthogonality() -> Outcome {
    let g = box_grid(64);
    let params = SystemParams::default();
    let basis = BasisSet::plane_wave_box(1.0, 4).unwrap();
    let table = WmnTable::new(&basis, &params, &g).unwrap();
    let idx = basis.indices();
    let fields: Vec<PhaseDistribution> = idx
        .iter()
        .flat_map(|&m| idx.iter().map(move |&n| (m, n)))
        .map(|(m, n)| table.get(m, n).unwrap())
        .collect();
    // pi*alpha on the torus; the discrete measure carries it via overlap_factor
    let scale = g.cell_area() * overlap_factor(&g);
    let mut worst: f64 = 0.0;
    for (i, a) in fields.iter().enumerate() {
        for (j, b) in fields.iter().enumerate() {
            let s: Complex64 = a.values().iter().zip(b.values()).map(|(u, v)| u.conj() * v).sum::<Complex64>() * scale;
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s - expect).norm());
        }
    }
    let n = fields.len();
    outcome(
        worst < 1e-6,
        format!("{} quadruples with |index| <= 4, max deviation {worst:.3e} (< 1e-6)", n * n),
    )
}

fn eigenproblem() -> Outcome {
    let params = SystemParams::default();
    let g = SpatialGrid::centered(10.0, 512).unwrap();
    let h = solve_eigenproblem(&Potential::Harmonic { k: 1.0 }, &params, g, 6).unwrap();
    let harm = h
        .energies
        .iter()
        .enumerate()
        .map(|(n, e)| ((e - (n as f64 + 0.5)) / (n as f64 + 0.5)).abs())
        .fold(0.0, f64::max);
    let b = 1.0;
    let bg = SpatialGrid::vanishing(-b, b, 512).unwrap();
    let bx = solve_eigenproblem(&Potential::free(), &params, bg, 5).unwrap();
    let boxed = bx
        .energies
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let n = (i + 1) as f64;
            let exact = n * n * PI * PI / (8.0 * b * b);
            ((e - exact) / exact).abs()
        })
        .fold(0.0, f64::max);
    outcome(
        harm < 1e-4 && boxed < 1e-3,
        format!("harmonic n<=5 max rel err {harm:.3e} (< 1e-4); box n=1..5 max rel err {boxed:.3e} (< 1e-3)"),
    )
}

fn negativity() -> Outcome {
    let params = SystemParams::default();
    let s = SpatialGrid::vanishing(-10.0, 10.0, 256).unwrap();
    let g = PhaseSpaceGrid::new(s, 256, ActionConstant::default()).unwrap();
    let basis = BasisSet::harmonic(&params, 1.0, 1).unwrap();
    let q = wigner_of_pair(&basis, 1, 1, &params, &g).unwrap();
    let (ix, ip) = (128, 128);
    assert!(g.x(ix).abs() < 1e-12 && g.p(ip).abs() < 1e-12);
    let v = q.at(ix, ip).re;
    let exact = -1.0 / (PI * params.alpha());
    let rel = ((v - exact) / exact).abs();
    outcome(rel < 1e-6, format!("Q(0,0) = {v:.12} vs {exact:.12}, rel err {rel:.3e} (< 1e-6)"))
}

fn quantum_residual() -> Outcome {
    let params = SystemParams::default();
    let n = 512;
    let s = SpatialGrid::vanishing(-10.0, 10.0, n).unwrap();
    let g = PhaseSpaceGrid::new(s, n, ActionConstant::default()).unwrap();
    let v = Potential::Quartic { lambda: 0.1 };
    let psi0 = gaussian_packet(s, 1.5, 0.0, 0.5f64.sqrt(), 1.0).unwrap();
    let (t, h) = (1.0, 1e-3);
    let dtq = h / 10.0;
    let a = split_step_evolve(&psi0, &v, &params, dtq, ((t - h) / dtq).round() as usize).unwrap();
    let b = split_step_evolve(&a, &v, &params, dtq, 10).unwrap();
    let c = split_step_evolve(&b, &v, &params, dtq, 10).unwrap();
    let series: Vec<PhaseDistribution> = [a, b, c]
        .iter()
        .map(|p| wigner_of_amplitude(p, &params, &g).unwrap())
        .collect();
    let corr = quantum_correction_terms(&series[1], &v, &params, 5).unwrap();
    let c3 = corr.order(3).unwrap();
    let c5 = corr.order(5).unwrap().max_abs();
    let r = &liouville_residual_with(&series, &v, &params, Differencing::Centered).unwrap()[0];
    let ratio = r.sub(c3).l2_norm() / c3.l2_norm();
    outcome(
        ratio < 0.1 && c5 == 0.0,
        format!("512^2, ||R - C3|| / ||C3|| = {ratio:.3e} (< 0.1); order-5 max {c5:.1e}"),
    )
}

fn mean_value_scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let quad = Potential::polynomial(vec![0.4, -1.1, 0.7]).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (r, s) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        worst = worst.max(mean_value_gap(&quad, r, s));
    }
    let quartic = Potential::Quartic { lambda: 0.1 };
    let x = 0.8;
    let ys: Vec<f64> = (0..8).map(|k| 0.2 * 0.5f64.powi(k)).collect();
    let gaps: Vec<f64> = ys.iter().map(|&y| mean_value_gap(&quartic, x + y, x - y)).collect();
    let slope = phasespace::experiments::loglog_slope(&ys, &gaps);
    outcome(
        worst < 1e-12 && (slope - 3.0).abs() <= 0.05,
        format!("quadratic max gap {worst:.3e} (< 1e-12); quartic slope {slope:.4} (3 +- 0.05)"),
    )
}

fn propagators() -> Outcome {
    let params = SystemParams::default();
    let g = SpatialGrid::centered(10.0, 256).unwrap();
    let v = Potential::Quartic { lambda: 0.1 };
    let psi0 = gaussian_packet(g, 1.0, 0.5, 0.7, 1.0).unwrap();
    let fwd = split_step_evolve(&psi0, &v, &params, 1e-3, 10_000).unwrap();
    let drift = (fwd.norm_sq() - 1.0).abs();
    let back = split_step_evolve(&fwd, &v, &params, -1e-3, 10_000).unwrap();
    let reversal = back.max_abs_diff(&psi0);

    let (x, p) = integrate_trajectory(1.0, 0.5, &v, &params, 5.0, 1e-3).unwrap();
    let (xb, pb) = integrate_trajectory(x, -p, &v, &params, 5.0, 1e-3).unwrap();
    let traj_reversal = (xb - 1.0).abs().max((-pb - 0.5).abs());

    let cfg = ExperimentConfig::parse(
        "grid.n_x = 128\ninitial.x0 = 1.5\npotential.form = harmonic\nsolver.t_final = 1\n",
    )
    .unwrap();
    let sweep = run_convergence_sweep(&cfg, SweepAxis::Dt, &[0.1, 0.05, 0.025, 0.0125]).unwrap();
    let sq = sweep.slope("quantum_error").unwrap();
    let sc = sweep.slope("classical_error").unwrap();
    outcome(
        drift < 1e-10 && reversal < 1e-10 && traj_reversal < 1e-10 && (sq - 2.0).abs() <= 0.1 && (sc - 2.0).abs() <= 0.1,
        format!(
            "norm drift {drift:.2e}, reversal {reversal:.2e} (trajectory {traj_reversal:.2e}) (< 1e-10); dt slopes quantum {sq:.3}, classical {sc:.3} (2 +- 0.1)"
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "grid.n_x = 64\ninitial.x0 = 1\npotential.form = quartic\nsolver.dt = 0.01\nsolver.t_final = 0.5\n\
         solver.classical = ensemble\nsolver.sampling = mc\nsolver.n_samples = 5000\noutput.snapshots = 10\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = || {
        let status = Command::new(env!("CARGO_BIN_EXE_phasespace"))
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--seed", "17", "compare"])
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        let csv = std::fs::read(out.join("compare.csv")).unwrap();
        let json = std::fs::read(out.join("compare.json")).unwrap();
        std::fs::remove_dir_all(&out).unwrap();
        (csv, json)
    };
    let a = run();
    let b = run();
    outcome(
        a == b,
        format!("two compare runs, seed 17: csv {} + json {} bytes, identical = {}", a.0.len(), a.1.len(), a == b),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("quadratic equivalence", quadratic_equivalence),
        ("factorization theorem", factorization_theorem),
        ("hermiticity", hermiticity),
        ("W_mn orthogonality", orthogonality),
        ("eigenproblem", eigenproblem),
        ("negativity witness", negativity),
        ("quantum residual identity", quantum_residual),
        ("mean-value scaling", mean_value_scaling),
        ("propagator properties", propagators),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag} {name}: {} [{:.1}s]", i + 1, o.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
