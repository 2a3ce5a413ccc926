//! Flat `key = value` experiment configuration with dotted sections.
//!
//! Blank lines are ignored and `#` starts a comment. Every key must be
//! known; lists are comma separated.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::basis::{synthesize_amplitude, BasisSet, CoefficientVector};
use crate::error::{Error, Result};
use crate::field::{gaussian_packet, Amplitude};
use crate::grid::{ActionConstant, Boundary, PhaseSpaceGrid, SpatialGrid, SystemParams};
use crate::liouville::{Differencing, Gridding, Interpolation, SamplingMethod};
use crate::potential::{Potential, TabulatedPotential};
use crate::schrodinger::solve_eigenproblem;
use crate::wigner::CoefficientMatrix;

/// Every accepted key with its default (empty means "no default").
const KEYS: &[(&str, &str)] = &[
    ("system.mass", "1"),
    ("system.alpha", "1"),
    ("potential.form", "harmonic"),
    ("potential.k", "1"),
    ("potential.lambda", "0.1"),
    ("potential.a", "1"),
    ("potential.b", "1"),
    ("potential.coeffs", ""),
    ("potential.values", ""),
    ("grid.x_min", "-10"),
    ("grid.x_max", "10"),
    ("grid.n_x", "256"),
    ("grid.n_p", ""),
    ("grid.boundary", "vanishing"),
    ("initial.kind", "gaussian"),
    ("initial.x0", "0"),
    ("initial.p0", "0"),
    ("initial.sigma", "0.7071067811865476"),
    ("initial.n", "0"),
    ("initial.basis", "plane-wave"),
    ("initial.b", ""),
    ("initial.omega", "1"),
    ("initial.n_max", "8"),
    ("initial.coefficients", ""),
    ("initial.states", ""),
    ("solver.dt", "0.001"),
    ("solver.t_final", "1"),
    ("solver.classical", "grid"),
    ("solver.interpolation", "spectral"),
    ("solver.n_samples", "100000"),
    ("solver.seed", "0"),
    ("solver.sampling", "halton"),
    ("solver.gridding", "kde"),
    ("solver.bandwidth", ""),
    ("solver.correction_order", "5"),
    ("solver.differencing", "centered"),
    ("output.snapshots", "100"),
    ("output.dir", "out"),
    ("eigen.n_states", "6"),
    ("sweep.axis", "dt"),
    ("sweep.values", ""),
];

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Gaussian { x0: f64, p0: f64, sigma: f64 },
    /// Eigenstate `n` of the configured potential on the configured grid.
    Eigenstate { n: usize },
    /// Pure state `sum a_n Phi_n`.
    Coefficients { basis: BasisSpec, values: Vec<Complex64> },
    /// Equal-weight incoherent mixture of basis states.
    Mixture { basis: BasisSpec, states: Vec<i64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisSpec {
    PlaneWave { b: f64, n_max: usize },
    Harmonic { omega: f64, n_max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassicalBranch {
    Grid,
    Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Dt,
    Dx,
    NSamples,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dt" => Ok(Self::Dt),
            "dx" => Ok(Self::Dx),
            "n_samples" => Ok(Self::NSamples),
            _ => Err(Error::Config(format!("unknown sweep axis '{s}' (dt | dx | n_samples)"))),
        }
    }
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dt => "dt",
            Self::Dx => "dx",
            Self::NSamples => "n_samples",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub dt: f64,
    pub t_final: f64,
    pub classical: ClassicalBranch,
    pub interpolation: Interpolation,
    pub n_samples: usize,
    pub seed: u64,
    pub sampling: SamplingMethod,
    pub gridding: Gridding,
    pub correction_order: u32,
    pub differencing: Differencing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    pub potential: Potential,
    pub grid: PhaseSpaceGrid,
    pub initial: InitialState,
    pub solver: SolverSettings,
    /// Steps between snapshots.
    pub snapshot_every: usize,
    pub out_dir: PathBuf,
    pub eigen_states: usize,
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<f64>,
    /// Canonical `key = value` text of every setting, defaults included.
    entries: BTreeMap<String, String>,
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Config(format!("{key}: expected a finite number, got '{v}'")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got '{v}'")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|t| parse_f64(key, t)).collect()
}

/// `re` or `re:im` items.
fn parse_complex_list(key: &str, v: &str) -> Result<Vec<Complex64>> {
    v.split(',')
        .map(|t| match t.split_once(':') {
            Some((re, im)) => Ok(Complex64::new(parse_f64(key, re)?, parse_f64(key, im)?)),
            None => Ok(Complex64::new(parse_f64(key, t)?, 0.0)),
        })
        .collect()
}

/// Turn module validation failures into config errors naming the section.
fn in_section<T>(section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(_) => e,
        other => Error::Config(format!("{section}: {other}")),
    })
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut overrides = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(head, _)| head).trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        Self::from_pairs(&overrides)
    }

    /// Build from explicit `(key, value)` pairs over the defaults.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut entries: BTreeMap<String, String> =
            KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        for (k, v) in pairs {
            match entries.get_mut(k) {
                Some(slot) => *slot = v.clone(),
                None => return Err(Error::Config(format!("unknown key '{k}'"))),
            }
        }
        Self::build(entries)
    }

    /// Copy with some keys replaced (validated again).
    pub fn with(&self, pairs: &[(&str, String)]) -> Result<Self> {
        let mut entries = self.entries.clone();
        for (k, v) in pairs {
            match entries.get_mut(*k) {
                Some(slot) => *slot = v.clone(),
                None => return Err(Error::Config(format!("unknown key '{k}'"))),
            }
        }
        Self::build(entries)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Every setting as `key = value` lines, sorted; parses back to an equal config.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    fn build(e: BTreeMap<String, String>) -> Result<Self> {
        let s = |k: &str| e[k].as_str();
        let f = |k: &str| parse_f64(k, &e[k]);
        let u = |k: &str| parse_usize(k, &e[k]);

        let params = in_section("system", SystemParams::new(f("system.mass")?, f("system.alpha")?))?;

        let boundary: Boundary = s("grid.boundary").parse().map_err(|_| {
            Error::Config(format!("grid.boundary: expected periodic | vanishing, got '{}'", s("grid.boundary")))
        })?;
        let n_x = u("grid.n_x")?;
        let n_p = if s("grid.n_p").is_empty() { n_x } else { u("grid.n_p")? };
        let spatial = in_section("grid", SpatialGrid::new(f("grid.x_min")?, f("grid.x_max")?, n_x, boundary))?;
        let grid = in_section(
            "grid",
            ActionConstant::new(params.alpha()).and_then(|a| PhaseSpaceGrid::new(spatial, n_p, a)),
        )?;

        let potential = match s("potential.form") {
            "harmonic" => Potential::Harmonic { k: f("potential.k")? },
            "quartic" => Potential::Quartic { lambda: f("potential.lambda")? },
            "double-well" => Potential::DoubleWell {
                a: f("potential.a")?,
                b: f("potential.b")?,
            },
            "free" => Potential::free(),
            "polynomial" => in_section(
                "potential",
                Potential::polynomial(parse_list("potential.coeffs", s("potential.coeffs"))?),
            )?,
            "tabulated" => Potential::Tabulated(in_section(
                "potential",
                TabulatedPotential::new(spatial, parse_list("potential.values", s("potential.values"))?),
            )?),
            other => {
                return Err(Error::Config(format!(
                    "potential.form: unknown form '{other}' (harmonic | quartic | double-well | free | polynomial | tabulated)"
                )))
            }
        };

        let basis_spec = || -> Result<BasisSpec> {
            let n_max = u("initial.n_max")?;
            match s("initial.basis") {
                "plane-wave" => {
                    let b = if s("initial.b").is_empty() {
                        0.5 * spatial.length()
                    } else {
                        f("initial.b")?
                    };
                    Ok(BasisSpec::PlaneWave { b, n_max })
                }
                "harmonic" => Ok(BasisSpec::Harmonic {
                    omega: f("initial.omega")?,
                    n_max,
                }),
                other => Err(Error::Config(format!("initial.basis: unknown basis '{other}' (plane-wave | harmonic)"))),
            }
        };
        let initial = match s("initial.kind") {
            "gaussian" => {
                let sigma = f("initial.sigma")?;
                if sigma <= 0.0 {
                    return Err(Error::Config("initial.sigma must be > 0".into()));
                }
                InitialState::Gaussian {
                    x0: f("initial.x0")?,
                    p0: f("initial.p0")?,
                    sigma,
                }
            }
            "eigenstate" => InitialState::Eigenstate { n: u("initial.n")? },
            "coefficients" => {
                let basis = basis_spec()?;
                if s("initial.coefficients").is_empty() {
                    return Err(Error::Config("initial.coefficients is required for kind = coefficients".into()));
                }
                InitialState::Coefficients {
                    basis,
                    values: parse_complex_list("initial.coefficients", s("initial.coefficients"))?,
                }
            }
            "mixture" => {
                let basis = basis_spec()?;
                let states = s("initial.states")
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<i64>()
                            .map_err(|_| Error::Config(format!("initial.states: bad index '{t}'")))
                    })
                    .collect::<Result<Vec<i64>>>()?;
                InitialState::Mixture { basis, states }
            }
            other => {
                return Err(Error::Config(format!(
                    "initial.kind: unknown kind '{other}' (gaussian | eigenstate | coefficients | mixture)"
                )))
            }
        };

        let dt = f("solver.dt")?;
        let t_final = f("solver.t_final")?;
        if dt <= 0.0 || t_final < 0.0 {
            return Err(Error::Config(format!("solver: need dt > 0 and t_final >= 0, got {dt}, {t_final}")));
        }
        let classical = match s("solver.classical") {
            "grid" => ClassicalBranch::Grid,
            "ensemble" => ClassicalBranch::Ensemble,
            other => return Err(Error::Config(format!("solver.classical: '{other}' (grid | ensemble)"))),
        };
        let gridding = match s("solver.gridding") {
            "histogram" => Gridding::Histogram,
            "kde" => Gridding::Kde {
                bandwidth: if s("solver.bandwidth").is_empty() {
                    None
                } else {
                    Some(f("solver.bandwidth")?)
                },
            },
            other => return Err(Error::Config(format!("solver.gridding: '{other}' (histogram | kde)"))),
        };
        let correction_order = u("solver.correction_order")? as u32;
        if correction_order != 3 && correction_order != 5 {
            return Err(Error::Config("solver.correction_order must be 3 or 5".into()));
        }
        let n_samples = u("solver.n_samples")?;
        if n_samples == 0 {
            return Err(Error::Config("solver.n_samples must be >= 1".into()));
        }
        let solver = SolverSettings {
            dt,
            t_final,
            classical,
            interpolation: s("solver.interpolation").parse()?,
            n_samples,
            seed: s("solver.seed")
                .parse()
                .map_err(|_| Error::Config(format!("solver.seed: expected u64, got '{}'", s("solver.seed"))))?,
            sampling: s("solver.sampling").parse()?,
            gridding,
            correction_order,
            differencing: s("solver.differencing").parse()?,
        };
        let snapshot_every = u("output.snapshots")?;
        if snapshot_every == 0 {
            return Err(Error::Config("output.snapshots must be >= 1".into()));
        }
        let eigen_states = u("eigen.n_states")?;

        let cfg = Self {
            params,
            potential,
            grid,
            initial,
            solver,
            snapshot_every,
            out_dir: PathBuf::from(s("output.dir")),
            eigen_states,
            sweep_axis: s("sweep.axis").parse()?,
            sweep_values: parse_list("sweep.values", s("sweep.values"))?,
            entries: e.clone(),
        };
        cfg.validate_initial()?;
        Ok(cfg)
    }

    fn validate_initial(&self) -> Result<()> {
        match &self.initial {
            InitialState::Coefficients { basis, values } => {
                let b = in_section("initial", self.basis(basis))?;
                if values.len() > b.len() {
                    return Err(Error::Config(format!(
                        "initial.coefficients: {} values for a basis of {}",
                        values.len(),
                        b.len()
                    )));
                }
                if values.iter().all(|v| v.norm() == 0.0) {
                    return Err(Error::Config("initial.coefficients are all zero".into()));
                }
                Ok(())
            }
            InitialState::Mixture { basis, states } => {
                let b = in_section("initial", self.basis(basis))?;
                if states.is_empty() {
                    return Err(Error::Config("initial.states is empty".into()));
                }
                for &n in states {
                    in_section("initial", b.position(n))?;
                }
                Ok(())
            }
            InitialState::Eigenstate { n } if *n >= self.grid.n_x() / 4 => {
                Err(Error::Config(format!("initial.n = {n} is too high for n_x = {}", self.grid.n_x())))
            }
            _ => Ok(()),
        }
    }

    pub fn basis(&self, spec: &BasisSpec) -> Result<BasisSet> {
        let b = match *spec {
            BasisSpec::PlaneWave { b, n_max } => BasisSet::plane_wave_box(b, n_max)?,
            BasisSpec::Harmonic { omega, n_max } => BasisSet::harmonic(&self.params, omega, n_max)?,
        };
        b.check_grid(self.grid.spatial())?;
        Ok(b)
    }

    /// Initial amplitude; for mixtures, the first listed state.
    pub fn initial_amplitude(&self) -> Result<Amplitude> {
        let spatial = *self.grid.spatial();
        match &self.initial {
            InitialState::Gaussian { x0, p0, sigma } => gaussian_packet(spatial, *x0, *p0, *sigma, self.params.alpha()),
            InitialState::Eigenstate { n } => {
                let sol = solve_eigenproblem(&self.potential, &self.params, spatial, n + 1)?;
                Ok(sol.states[*n].clone())
            }
            InitialState::Coefficients { basis, .. } => {
                let b = self.basis(basis)?;
                Ok(synthesize_amplitude(&self.initial_coefficients()?.unwrap(), &b, spatial)?.amplitude)
            }
            InitialState::Mixture { basis, states } => {
                let b = self.basis(basis)?;
                Amplitude::new(spatial, b.sample(states[0], &spatial)?, 0.0)
            }
        }
    }

    /// Normalized coefficient vector for `kind = coefficients`.
    pub fn initial_coefficients(&self) -> Result<Option<CoefficientVector>> {
        let InitialState::Coefficients { basis, values } = &self.initial else {
            return Ok(None);
        };
        let b = self.basis(basis)?;
        let mut a = CoefficientVector::zeros(&b);
        a.values[..values.len()].copy_from_slice(values);
        let norm = a.norm_sq().sqrt();
        a.values.iter_mut().for_each(|v| *v /= norm);
        Ok(Some(a))
    }

    /// `C_mn` of the initial state when it is given over a basis.
    pub fn initial_matrix(&self) -> Result<Option<(BasisSet, CoefficientMatrix)>> {
        match &self.initial {
            InitialState::Coefficients { basis, .. } => {
                let a = self.initial_coefficients()?.unwrap();
                Ok(Some((self.basis(basis)?, CoefficientMatrix::pure(&a))))
            }
            InitialState::Mixture { basis, states } => {
                let b = self.basis(basis)?;
                let mut c = CoefficientMatrix::zeros(&b);
                let w = 1.0 / states.len() as f64;
                for &n in states {
                    let i = b.position(n)?;
                    c.values[(i, i)] += Complex64::new(w, 0.0);
                }
                Ok(Some((b, c)))
            }
            _ => Ok(None),
        }
    }
}
