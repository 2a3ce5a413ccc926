use num_complex::Complex64;
use rayon::prelude::*;

use super::sampling::InitialSample;
use super::trajectory::{energy, integrate_trajectory};
use crate::error::{Error, Result};
use crate::field::PhaseDistribution;
use crate::fieldio::fmt_g17;
use crate::grid::{PhaseSpaceGrid, SystemParams};
use crate::potential::Potential;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub x0: f64,
    pub p0: f64,
    pub weight: f64,
    pub x: f64,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    pub samples: Vec<TrajectorySample>,
    pub params: SystemParams,
    pub potential: Potential,
    pub time: f64,
}

impl TrajectoryEnsemble {
    /// Ensemble at `t = 0`; weights are rescaled to sum to one.
    pub fn new(initial: &[InitialSample], potential: &Potential, params: &SystemParams) -> Result<Self> {
        if initial.is_empty() {
            return Err(Error::Validation("ensemble needs at least one sample".into()));
        }
        let total: f64 = initial.iter().map(|s| s.weight).sum();
        if !(total > 0.0 && total.is_finite()) || initial.iter().any(|s| s.weight < 0.0) {
            return Err(Error::Validation("sample weights must be non-negative with a positive sum".into()));
        }
        Ok(Self {
            samples: initial
                .iter()
                .map(|s| TrajectorySample {
                    x0: s.x0,
                    p0: s.p0,
                    weight: s.weight / total,
                    x: s.x0,
                    p: s.p0,
                })
                .collect(),
            params: *params,
            potential: potential.clone(),
            time: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Advance every sample by `t` more time units.
    pub fn advance(&self, t: f64, dt: f64) -> Result<Self> {
        let moved: Vec<Result<(f64, f64)>> = self
            .samples
            .par_iter()
            .map(|s| integrate_trajectory(s.x, s.p, &self.potential, &self.params, t, dt))
            .collect();
        let failed: Vec<usize> = moved
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.is_err().then_some(i))
            .collect();
        if let [only] = failed[..] {
            if self.samples.len() == 1 {
                return Err(moved.into_iter().nth(only).unwrap().unwrap_err());
            }
        }
        if !failed.is_empty() {
            return Err(Error::EnsembleDivergence { indices: failed });
        }
        let samples = self
            .samples
            .iter()
            .zip(moved)
            .map(|(s, r)| {
                let (x, p) = r.unwrap();
                TrajectorySample { x, p, ..*s }
            })
            .collect();
        Ok(Self {
            samples,
            params: self.params,
            potential: self.potential.clone(),
            time: self.time + t,
        })
    }

    pub fn weight_sum(&self) -> f64 {
        self.samples.iter().map(|s| s.weight).sum()
    }

    /// Weighted `(<x>, <p>)` at the current time.
    pub fn mean(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((0.0, 0.0), |(a, b), s| (a + s.weight * s.x, b + s.weight * s.p))
    }

    /// Weighted standard deviations of the current `(x, p)`.
    pub fn spread(&self) -> (f64, f64) {
        let (mx, mp) = self.mean();
        let (vx, vp) = self.samples.iter().fold((0.0, 0.0), |(a, b), s| {
            (a + s.weight * (s.x - mx).powi(2), b + s.weight * (s.p - mp).powi(2))
        });
        (vx.sqrt(), vp.sqrt())
    }

    /// Largest `|E(t) - E(0)| / max(|E(0)|, 1)` over the samples.
    pub fn max_energy_drift(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| {
                let e0 = energy(s.x0, s.p0, &self.potential, &self.params);
                (energy(s.x, s.p, &self.potential, &self.params) - e0).abs() / e0.abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// `x0,p0,weight,x,p` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x0,p0,weight,x,p\n");
        for a in &self.samples {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_g17(a.x0),
                fmt_g17(a.p0),
                fmt_g17(a.weight),
                fmt_g17(a.x),
                fmt_g17(a.p)
            ));
        }
        s
    }
}

/// Advance independent samples of `W_0` to time `t`.
pub fn evolve_ensemble(
    initial: &[InitialSample],
    potential: &Potential,
    params: &SystemParams,
    t: f64,
    dt: f64,
) -> Result<TrajectoryEnsemble> {
    TrajectoryEnsemble::new(initial, potential, params)?.advance(t, dt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gridding {
    /// Cell-centered bins.
    Histogram,
    /// Isotropic Gaussian kernel in coordinates standardized by the sample
    /// spreads; `None` picks `n^(-1/6)`.
    Kde { bandwidth: Option<f64> },
}

#[derive(Debug, Clone)]
pub struct GriddedEnsemble {
    pub distribution: PhaseDistribution,
    /// Weight fraction of samples outside the grid cells.
    pub out_of_bounds_fraction: f64,
    pub warning: Option<String>,
}

/// Out-of-bounds fractions above this are reported.
pub const OUT_OF_BOUNDS_WARN: f64 = 0.01;
/// Out-of-bounds fractions above this are errors.
pub const OUT_OF_BOUNDS_FAIL: f64 = 0.20;

fn cell_of(grid: &PhaseSpaceGrid, x: f64, p: f64) -> Option<(usize, usize)> {
    let fx = ((x - grid.x(0)) / grid.dx() + 0.5).floor();
    let fp = ((p - grid.p(0)) / grid.dp() + 0.5).floor();
    (fx >= 0.0 && fp >= 0.0 && (fx as usize) < grid.n_x() && (fp as usize) < grid.n_p())
        .then(|| (fx as usize, fp as usize))
}

/// Density of the ensemble on `grid`, normalized over the in-bounds samples.
pub fn ensemble_to_grid(ens: &TrajectoryEnsemble, grid: &PhaseSpaceGrid, method: Gridding) -> Result<GriddedEnsemble> {
    let total = ens.weight_sum();
    let inside: Vec<(&TrajectorySample, (usize, usize))> = ens
        .samples
        .iter()
        .filter_map(|s| cell_of(grid, s.x, s.p).map(|c| (s, c)))
        .collect();
    let kept: f64 = inside.iter().map(|(s, _)| s.weight).sum();
    let oob = (1.0 - kept / total).max(0.0);
    if oob > OUT_OF_BOUNDS_FAIL || kept <= 0.0 {
        return Err(Error::OutOfBounds { fraction: oob });
    }
    let warning = (oob > OUT_OF_BOUNDS_WARN)
        .then(|| format!("{:.2}% of the ensemble weight lies outside the grid", 100.0 * oob));

    let (nx, np) = (grid.n_x(), grid.n_p());
    let acc = match method {
        Gridding::Histogram => {
            let mut acc = vec![0.0; grid.len()];
            for (s, (ix, ip)) in &inside {
                acc[ip * nx + ix] += s.weight;
            }
            acc
        }
        Gridding::Kde { bandwidth } => {
            let h = bandwidth.unwrap_or((ens.len() as f64).powf(-1.0 / 6.0));
            if !(h > 0.0) {
                return Err(Error::Validation(format!("kde bandwidth must be > 0, got {h}")));
            }
            let (sx, sp) = ens.spread();
            let hx = h * if sx > 0.0 { sx } else { grid.dx() };
            let hp = h * if sp > 0.0 { sp } else { grid.dp() };
            let (rx, rp) = ((5.0 * hx / grid.dx()).ceil() as i64, (5.0 * hp / grid.dp()).ceil() as i64);
            // bucket by momentum row, then let each output row gather its
            // neighbours in a fixed order (keeps sums reproducible)
            let mut buckets: Vec<Vec<(&TrajectorySample, usize)>> = vec![Vec::new(); np];
            for (s, (ix, ip)) in &inside {
                buckets[*ip].push((s, *ix));
            }
            let norm = 1.0 / (2.0 * std::f64::consts::PI * hx * hp);
            let rows: Vec<Vec<f64>> = (0..np)
                .into_par_iter()
                .map(|k| {
                    let mut row = vec![0.0; nx];
                    let lo = k.saturating_sub(rp as usize);
                    let hi = (k + rp as usize).min(np - 1);
                    let pk = grid.p(k);
                    for bucket in &buckets[lo..=hi] {
                        for (s, ix) in bucket {
                            let wp = s.weight * norm * (-0.5 * ((pk - s.p) / hp).powi(2)).exp();
                            let a = ix.saturating_sub(rx as usize);
                            let b = (ix + rx as usize).min(nx - 1);
                            for (j, r) in row.iter_mut().enumerate().take(b + 1).skip(a) {
                                *r += wp * (-0.5 * ((grid.x(j) - s.x) / hx).powi(2)).exp();
                            }
                        }
                    }
                    row
                })
                .collect();
            rows.concat()
        }
    };
    let scale = 1.0 / (acc.iter().sum::<f64>() * grid.cell_area());
    let values = acc.into_iter().map(|v| Complex64::new(v * scale, 0.0)).collect();
    Ok(GriddedEnsemble {
        distribution: PhaseDistribution::new(*grid, values, ens.time)?,
        out_of_bounds_fraction: oob,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::grid::{ActionConstant, SpatialGrid};
    use crate::liouville::sampling::{sample_initial, InitialDistribution, SamplingMethod};

    fn grid(n: usize, half: f64) -> PhaseSpaceGrid {
        PhaseSpaceGrid::new(SpatialGrid::centered(half, n).unwrap(), n, ActionConstant::default()).unwrap()
    }

    #[test]
    fn harmonic_period_returns_cloud() {
        let params = SystemParams::default();
        let v = Potential::Harmonic { k: 1.0 };
        let d = InitialDistribution::coherent(1.0, 0.0, 0.5, &params);
        let n = 400;
        let init = sample_initial(&d, n, SamplingMethod::MonteCarlo, 11).unwrap();
        let ens = evolve_ensemble(&init, &v, &params, 2.0 * PI, 1e-3).unwrap();
        let mean_disp = ens
            .samples
            .iter()
            .map(|s| ((s.x - s.x0).powi(2) + (s.p - s.p0).powi(2)).sqrt())
            .sum::<f64>()
            / n as f64;
        assert!(mean_disp < 3.0 * 0.5 / (n as f64).sqrt(), "{mean_disp}");
        assert!((ens.weight_sum() - 1.0).abs() < 1e-12);
        assert!(ens.max_energy_drift() < 1e-5);
    }

    #[test]
    fn free_streaming_means() {
        let params = SystemParams::default();
        let d = InitialDistribution::Gaussian { x0: 0.2, p0: 0.8, sigma_x: 0.5, sigma_p: 0.3 };
        let init = sample_initial(&d, 5000, SamplingMethod::MonteCarlo, 5).unwrap();
        let ens = evolve_ensemble(&init, &Potential::free(), &params, 1.5, 0.1).unwrap();
        let (mx, _) = ens.mean();
        let (mx0, mp0) = init.iter().fold((0.0, 0.0), |(a, b), s| (a + s.x0 * s.weight, b + s.p0 * s.weight));
        assert!((mx - (mx0 + 1.5 * mp0)).abs() < 1e-12);
        assert!((mx - (0.2 + 1.2)).abs() < 4.0 * (0.25f64 + 1.5 * 1.5 * 0.09).sqrt() / (5000f64).sqrt());
    }

    #[test]
    fn single_sample_matches_trajectory() {
        let params = SystemParams::default();
        let v = Potential::Quartic { lambda: 0.3 };
        let init = [InitialSample { x0: 0.4, p0: -1.0, weight: 1.0 }];
        let ens = evolve_ensemble(&init, &v, &params, 3.0, 1e-3).unwrap();
        let (x, p) = integrate_trajectory(0.4, -1.0, &v, &params, 3.0, 1e-3).unwrap();
        assert_eq!((ens.samples[0].x, ens.samples[0].p), (x, p));
    }

    #[test]
    fn histogram_single_cell() {
        let g = grid(32, 4.0);
        let init = [InitialSample { x0: g.x(10), p0: g.p(20), weight: 1.0 }];
        let ens = TrajectoryEnsemble::new(&init, &Potential::free(), &SystemParams::default()).unwrap();
        let w = ensemble_to_grid(&ens, &g, Gridding::Histogram).unwrap().distribution;
        for ip in 0..g.n_p() {
            for ix in 0..g.n_x() {
                let expect = if (ix, ip) == (10, 20) { 1.0 / g.cell_area() } else { 0.0 };
                assert_eq!(w.at(ix, ip).re, expect);
            }
        }
    }

    #[test]
    fn weights_rescaling_is_invisible() {
        let g = grid(32, 4.0);
        let params = SystemParams::default();
        let d = InitialDistribution::coherent(0.0, 0.0, 0.8, &params);
        let init = sample_initial(&d, 300, SamplingMethod::LowDiscrepancy, 2).unwrap();
        let doubled: Vec<_> = init.iter().map(|s| InitialSample { weight: 2.0 * s.weight, ..*s }).collect();
        for m in [Gridding::Histogram, Gridding::Kde { bandwidth: None }] {
            let a = ensemble_to_grid(&TrajectoryEnsemble::new(&init, &Potential::free(), &params).unwrap(), &g, m);
            let b = ensemble_to_grid(&TrajectoryEnsemble::new(&doubled, &Potential::free(), &params).unwrap(), &g, m);
            assert_eq!(a.unwrap().distribution, b.unwrap().distribution);
        }
    }

    #[test]
    fn kde_converges_to_gaussian() {
        let g = grid(64, 5.0);
        let params = SystemParams::default();
        let d = InitialDistribution::coherent(0.3, -0.2, 0.7, &params);
        let err = |n: usize| {
            let init = sample_initial(&d, n, SamplingMethod::LowDiscrepancy, 9).unwrap();
            let ens = TrajectoryEnsemble::new(&init, &Potential::free(), &params).unwrap();
            let w = ensemble_to_grid(&ens, &g, Gridding::Kde { bandwidth: None }).unwrap().distribution;
            let mut worst: f64 = 0.0;
            let mut peak: f64 = 0.0;
            for ip in 0..g.n_p() {
                for ix in 0..g.n_x() {
                    let exact = d.density(g.x(ix), g.p(ip)).unwrap();
                    peak = peak.max(exact);
                    worst = worst.max((w.at(ix, ip).re - exact).abs());
                }
            }
            worst / peak
        };
        let coarse = err(10_000);
        let fine = err(1_000_000);
        assert!(fine < coarse && fine < 0.02, "{coarse} {fine}");
    }

    #[test]
    fn out_of_bounds_limits() {
        let g = grid(16, 2.0);
        let mk = |far: usize| {
            let mut init: Vec<InitialSample> = (0..100 - far).map(|_| InitialSample { x0: 0.0, p0: 0.0, weight: 1.0 }).collect();
            init.extend((0..far).map(|_| InitialSample { x0: 50.0, p0: 0.0, weight: 1.0 }));
            TrajectoryEnsemble::new(&init, &Potential::free(), &SystemParams::default()).unwrap()
        };
        assert!(ensemble_to_grid(&mk(0), &g, Gridding::Histogram).unwrap().warning.is_none());
        let r = ensemble_to_grid(&mk(5), &g, Gridding::Histogram).unwrap();
        assert!(r.warning.is_some() && (r.out_of_bounds_fraction - 0.05).abs() < 1e-12);
        assert!(matches!(ensemble_to_grid(&mk(30), &g, Gridding::Histogram), Err(Error::OutOfBounds { .. })));
    }
}
