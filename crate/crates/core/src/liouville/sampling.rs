use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::field::PhaseDistribution;
use crate::grid::SystemParams;

/// Initial phase-space density `W_0(x0, p0)` to draw trajectory starts from.
#[derive(Debug, Clone)]
pub enum InitialDistribution {
    /// Product of independent normals in `x` and `p`.
    Gaussian { x0: f64, p0: f64, sigma_x: f64, sigma_p: f64 },
    /// Non-negative real density on a grid, sampled cell by cell with uniform jitter.
    Tabulated(PhaseDistribution),
    /// A single phase-space point.
    Point { x0: f64, p0: f64 },
}

impl InitialDistribution {
    /// Density of the transform of a Gaussian packet with position spread `sigma`.
    pub fn coherent(x0: f64, p0: f64, sigma: f64, params: &SystemParams) -> Self {
        Self::Gaussian {
            x0,
            p0,
            sigma_x: sigma,
            sigma_p: params.alpha() / (2.0 * sigma),
        }
    }

    /// Analytic density, where one exists.
    pub fn density(&self, x: f64, p: f64) -> Option<f64> {
        match *self {
            Self::Gaussian { x0, p0, sigma_x, sigma_p } => {
                let (u, v) = ((x - x0) / sigma_x, (p - p0) / sigma_p);
                Some((-(u * u + v * v) / 2.0).exp() / (2.0 * std::f64::consts::PI * sigma_x * sigma_p))
            }
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Gaussian { sigma_x, sigma_p, .. } if !(*sigma_x > 0.0 && *sigma_p > 0.0) => Err(Error::Validation(
                format!("Gaussian spreads must be > 0, got ({sigma_x}, {sigma_p})"),
            )),
            Self::Tabulated(w) => {
                let peak = w.max_abs_re();
                if !(peak > 0.0) {
                    return Err(Error::Validation("tabulated initial density is zero".into()));
                }
                // truncation ripples are clamped when sampling; real negativity is not
                let (neg, abs) = w
                    .values()
                    .iter()
                    .fold((0.0, 0.0), |(n, a), v| (n + (-v.re).max(0.0), a + v.re.abs()));
                if neg > NEGATIVE_MASS_LIMIT * abs {
                    return Err(Error::Validation(format!(
                        "tabulated initial density is not a probability density: {:.3e} of its mass is negative",
                        neg / abs
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Largest share of `|W|` mass a tabulated density may carry on negative cells.
pub const NEGATIVE_MASS_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMethod {
    /// Randomly shifted Halton points mapped through the inverse CDF.
    #[default]
    LowDiscrepancy,
    /// Pseudo-random draws from a seeded ChaCha generator.
    MonteCarlo,
}

impl std::str::FromStr for SamplingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "halton" | "low-discrepancy" => Ok(Self::LowDiscrepancy),
            "mc" | "monte-carlo" => Ok(Self::MonteCarlo),
            _ => Err(Error::Config(format!("unknown sampling method '{s}' (halton | mc)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialSample {
    pub x0: f64,
    pub p0: f64,
    pub weight: f64,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut out) = (inv, 0.0);
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

const HALTON_BASES: [u64; 3] = [2, 3, 5];

/// `n` points in `(0,1)^3`, deterministic for a given seed.
fn unit_points(n: usize, method: SamplingMethod, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clamp = |u: f64| u.clamp(1e-16, 1.0 - 1e-16);
    match method {
        SamplingMethod::LowDiscrepancy => {
            let shift: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            (0..n as u64)
                .map(|i| {
                    let mut u = [0.0; 3];
                    for d in 0..3 {
                        u[d] = clamp((radical_inverse(i + 1, HALTON_BASES[d]) + shift[d]).fract());
                    }
                    u
                })
                .collect()
        }
        SamplingMethod::MonteCarlo => (0..n).map(|_| [0; 3].map(|_| clamp(rng.random()))).collect(),
    }
}

/// Draw `n` equally weighted starts from `dist`.
pub fn sample_initial(
    dist: &InitialDistribution,
    n: usize,
    method: SamplingMethod,
    seed: u64,
) -> Result<Vec<InitialSample>> {
    if n == 0 {
        return Err(Error::Validation("n_samples must be >= 1".into()));
    }
    dist.validate()?;
    let weight = 1.0 / n as f64;
    let out = match dist {
        InitialDistribution::Point { x0, p0 } => vec![
            InitialSample {
                x0: *x0,
                p0: *p0,
                weight
            };
            n
        ],
        InitialDistribution::Gaussian { x0, p0, sigma_x, sigma_p } => match method {
            SamplingMethod::LowDiscrepancy => {
                let std = Normal::standard();
                unit_points(n, method, seed)
                    .into_iter()
                    .map(|u| InitialSample {
                        x0: x0 + sigma_x * std.inverse_cdf(u[0]),
                        p0: p0 + sigma_p * std.inverse_cdf(u[1]),
                        weight,
                    })
                    .collect()
            }
            SamplingMethod::MonteCarlo => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n)
                    .map(|_| {
                        let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                        InitialSample {
                            x0: x0 + sigma_x * a,
                            p0: p0 + sigma_p * b,
                            weight,
                        }
                    })
                    .collect()
            }
        },
        InitialDistribution::Tabulated(w) => {
            let g = w.grid();
            let mut cdf = Vec::with_capacity(g.len());
            let mut acc = 0.0;
            for v in w.values() {
                acc += v.re.max(0.0);
                cdf.push(acc);
            }
            unit_points(n, method, seed)
                .into_iter()
                .map(|u| {
                    let cell = cdf.partition_point(|&c| c < u[0] * acc).min(g.len() - 1);
                    let (ix, ip) = (cell % g.n_x(), cell / g.n_x());
                    InitialSample {
                        x0: g.x(ix) + (u[1] - 0.5) * g.dx(),
                        p0: g.p(ip) + (u[2] - 0.5) * g.dp(),
                        weight,
                    }
                })
                .collect()
        }
    };
    Ok(out)
}
