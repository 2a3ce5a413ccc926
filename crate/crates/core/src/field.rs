//! Sampled fields: configuration-space amplitudes and phase-space distributions.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Boundary, PhaseSpaceGrid, SpatialGrid};

/// Tolerance on `sum |psi|^2 dx = 1`.
pub const AMPLITUDE_NORM_TOL: f64 = 1e-10;
/// Tolerance on `sum W dx dp = 1`.
pub const DISTRIBUTION_NORM_TOL: f64 = 1e-8;

/// Complex amplitude on a spatial grid.
///
/// Used both for the classical probability amplitude and for solutions of the
/// Schrödinger-type equation; the representation is identical.
#[derive(Debug, Clone, PartialEq)]
pub struct Amplitude {
    grid: SpatialGrid,
    values: Vec<Complex64>,
    time: f64,
}

impl Amplitude {
    /// Wrap already-normalized samples.
    pub fn new(grid: SpatialGrid, values: Vec<Complex64>, time: f64) -> Result<Self> {
        let a = Self::unchecked(grid, values, time)?;
        let n = a.norm_sq();
        if (n - 1.0).abs() > AMPLITUDE_NORM_TOL {
            return Err(Error::NotNormalized(n));
        }
        Ok(a)
    }

    /// Normalize the samples before wrapping them.
    pub fn normalized(grid: SpatialGrid, values: Vec<Complex64>, time: f64) -> Result<Self> {
        let mut a = Self::unchecked(grid, values, time)?;
        let n = a.norm_sq();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Degenerate(format!("cannot normalize amplitude with norm^2 {n}")));
        }
        let s = 1.0 / n.sqrt();
        a.values.iter_mut().for_each(|v| *v *= s);
        Ok(a)
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.x(i))).collect();
        Self::normalized(grid, values, 0.0)
    }

    pub(crate) fn unchecked(grid: SpatialGrid, mut values: Vec<Complex64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Validation("non-finite amplitude sample".into()));
        }
        if grid.boundary() == Boundary::Vanishing {
            values[0] = Complex64::new(0.0, 0.0);
        }
        Ok(Self { grid, values, time })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    /// `<self, other> = sum conj(self) * other * dx`.
    pub fn inner(&self, other: &Amplitude) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.dx()
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Multiply by a global phase `exp(i theta)`.
    pub fn with_phase(mut self, theta: f64) -> Self {
        let f = Complex64::from_polar(1.0, theta);
        self.values.iter_mut().for_each(|v| *v *= f);
        self
    }

    pub fn max_abs_diff(&self, other: &Amplitude) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Gaussian packet with position spread `sigma` centred on `(x0, p0)`.
///
/// `psi ~ exp(-(x-x0)^2 / (4 sigma^2) + i p0 (x - x0) / alpha)`, normalized on the grid.
pub fn gaussian_packet(grid: SpatialGrid, x0: f64, p0: f64, sigma: f64, alpha: f64) -> Result<Amplitude> {
    if !(sigma > 0.0) {
        return Err(Error::Validation(format!("gaussian width must be > 0, got {sigma}")));
    }
    Amplitude::from_fn(grid, |x| {
        let d = x - x0;
        Complex64::from_polar((-d * d / (4.0 * sigma * sigma)).exp(), p0 * d / alpha)
    })
}

/// Phase-space field on a [`PhaseSpaceGrid`], stored complex, row-major with x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDistribution {
    grid: PhaseSpaceGrid,
    values: Vec<Complex64>,
    time: f64,
}

impl PhaseDistribution {
    pub fn new(grid: PhaseSpaceGrid, values: Vec<Complex64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a phase-space grid of {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, time })
    }

    pub fn from_real(grid: PhaseSpaceGrid, values: &[f64], time: f64) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect(), time)
    }

    pub fn from_fn(grid: PhaseSpaceGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for ip in 0..grid.n_p() {
            for ix in 0..grid.n_x() {
                values.push(Complex64::new(f(grid.x(ix), grid.p(ip)), 0.0));
            }
        }
        Self {
            grid,
            values,
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn at(&self, ix: usize, ip: usize) -> Complex64 {
        self.values[self.grid.index(ix, ip)]
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    /// `sum Re(W) dx dp`.
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|v| v.re).sum::<f64>() * self.grid.cell_area()
    }

    pub fn complex_mass(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() * self.grid.cell_area()
    }

    pub fn is_normalized(&self) -> bool {
        (self.mass() - 1.0).abs() < DISTRIBUTION_NORM_TOL
    }

    pub fn max_abs_re(&self) -> f64 {
        self.values.iter().map(|v| v.re.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_im(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Imaginary part below `1e-12` of the real scale.
    pub fn imag_negligible(&self) -> bool {
        self.max_abs_im() < 1e-12 * self.max_abs_re()
    }

    pub fn min_re(&self) -> f64 {
        self.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min)
    }

    /// Configuration-space marginal `sum_p W dp`.
    pub fn x_marginal(&self) -> Vec<f64> {
        let (nx, np) = (self.grid.n_x(), self.grid.n_p());
        let mut out = vec![0.0; nx];
        for ip in 0..np {
            for (ix, o) in out.iter_mut().enumerate() {
                *o += self.values[ip * nx + ix].re;
            }
        }
        let dp = self.grid.dp();
        out.iter_mut().for_each(|v| *v *= dp);
        out
    }

    /// `sqrt(sum |W|^2 dx dp)`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub fn l2_distance(&self, other: &PhaseDistribution) -> f64 {
        (self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            * self.grid.cell_area())
        .sqrt()
    }

    pub fn linf_distance(&self, other: &PhaseDistribution) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Real scalar field on a phase-space grid (residuals, correction terms).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: PhaseSpaceGrid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: PhaseSpaceGrid) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }
}
