//! The alpha-parameterized phase-space transform algebra.
//!
//! Discrete conventions on a [`PhaseSpaceGrid`] with `N` x-samples and box
//! length `L`:
//!
//! * forward: `W(x_i, p_k) = (1/(pi alpha)) sum_j f*(x_i - y_j) g(x_i + y_j) exp(-2i p_k y_j/alpha) h`
//!   with `y_j = j h`, `h = L/M`, `M = max(2N, n_p)`, `j` in `[-M/2, M/2)`.
//!   `f` and `g` are evaluated on the refined lattice of spacing `h` by
//!   band-limited interpolation, so `x_i +- y_j` always lands on the lattice.
//!
//! The boundary of the spatial grid fixes what happens beyond the box. On a
//! periodic grid the functions wrap (the transform lives on a circle, and
//! `pi alpha sum W*_mn W_rs dx dp = delta_mr delta_ns` holds exactly). On a
//! vanishing grid they are zero outside `[x_min, x_max)`, which is the
//! isolated-system transform, free of the periodic ghost image at `x +- L/2`.
//! There the overlap identity carries an extra factor 1/2, see [`overlap_factor`].
//! * inverse: `T(x_i, y_j) = sum_k W(x_i, p_k) exp(2i p_k y_j/alpha) dp` on
//!   `y_j = (j - n_p/2) L/n_p`.
//!
//! For states whose spectrum fits in the momentum window both are exact, and
//! `sum_k W dp = |psi|^2` holds to rounding.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::{BasisSet, CoefficientVector};
use crate::error::{Error, Result};
use crate::field::{Amplitude, PhaseDistribution, AMPLITUDE_NORM_TOL};
use crate::fieldio::fmt_g17;
use crate::grid::{Boundary, PhaseSpaceGrid, SystemParams};
use crate::spectral;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Refined lattice size used by the forward transform.
pub fn lattice_size(grid: &PhaseSpaceGrid) -> usize {
    (2 * grid.n_x()).max(grid.n_p())
}

/// `f(i)` on a lattice of `m` points: wrapped on periodic grids, zero outside otherwise.
#[inline]
fn lattice_at(f: &[Complex64], i: i64, periodic: bool) -> Complex64 {
    let m = f.len() as i64;
    if periodic {
        f[i.rem_euclid(m) as usize]
    } else if (0..m).contains(&i) {
        f[i as usize]
    } else {
        ZERO
    }
}

/// Constant `c` with `c sum W*_mn W_rs dx dp = delta_mr delta_ns`:
/// `pi alpha` on periodic grids, `2 pi alpha` on vanishing ones.
pub fn overlap_factor(grid: &PhaseSpaceGrid) -> f64 {
    let base = std::f64::consts::PI * grid.alpha();
    match grid.spatial().boundary() {
        Boundary::Periodic => base,
        Boundary::Vanishing => 2.0 * base,
    }
}

/// Cross transform of two functions given on the refined lattice.
fn cross_wigner_lattice(f: &[Complex64], g: &[Complex64], grid: &PhaseSpaceGrid) -> Vec<Complex64> {
    let (nx, np) = (grid.n_x(), grid.n_p());
    let m = f.len();
    debug_assert_eq!(m, lattice_size(grid));
    let r = m / nx;
    let periodic = grid.spatial().boundary() == Boundary::Periodic;
    let scale = grid.spatial().length() / m as f64 / (std::f64::consts::PI * grid.alpha());
    let columns: Vec<Vec<Complex64>> = (0..nx)
        .into_par_iter()
        .map(|ix| {
            let c = (ix * r) as i64;
            let half = (m / 2) as i64;
            let mut buf = vec![ZERO; m];
            for j in -half..half {
                buf[j.rem_euclid(m as i64) as usize] =
                    lattice_at(f, c - j, periodic).conj() * lattice_at(g, c + j, periodic);
            }
            spectral::forward(&mut buf);
            (0..np)
                .map(|k| {
                    let q = (k as i64 - (np / 2) as i64).rem_euclid(m as i64) as usize;
                    buf[q] * scale
                })
                .collect()
        })
        .collect();
    let mut out = vec![ZERO; grid.len()];
    for (ix, col) in columns.into_iter().enumerate() {
        for (ip, v) in col.into_iter().enumerate() {
            out[ip * nx + ix] = v;
        }
    }
    out
}

fn check_params(grid: &PhaseSpaceGrid, params: &SystemParams) -> Result<()> {
    grid.check_alpha(params.alpha())
}

/// Wigner-type transform of a normalized amplitude.
pub fn wigner_of_amplitude(psi: &Amplitude, params: &SystemParams, grid: &PhaseSpaceGrid) -> Result<PhaseDistribution> {
    check_params(grid, params)?;
    if !psi.grid().same_as(grid.spatial()) {
        return Err(Error::GridMismatch("amplitude grid differs from the phase-space x axis".into()));
    }
    let n = psi.norm_sq();
    if (n - 1.0).abs() > AMPLITUDE_NORM_TOL {
        return Err(Error::NotNormalized(n));
    }
    let f = spectral::resample_periodic(psi.values(), lattice_size(grid));
    PhaseDistribution::new(*grid, cross_wigner_lattice(&f, &f, grid), psi.time())
}

/// `W_mn(x, p) = (1/(pi alpha)) int Phi_m*(x-y) Phi_n(x+y) exp(-2ipy/alpha) dy`.
pub fn wigner_of_pair(
    basis: &BasisSet,
    m: i64,
    n: i64,
    params: &SystemParams,
    grid: &PhaseSpaceGrid,
) -> Result<PhaseDistribution> {
    check_params(grid, params)?;
    basis.position(m)?;
    basis.position(n)?;
    basis.check_grid(grid.spatial())?;
    let size = lattice_size(grid);
    let f = basis.sample_lattice(m, grid.spatial(), size);
    let g = basis.sample_lattice(n, grid.spatial(), size);
    PhaseDistribution::new(*grid, cross_wigner_lattice(&f, &g, grid), 0.0)
}

/// Expansion coefficients `C_mn` over a basis, laid out like the basis indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    pub indices: Vec<i64>,
    pub values: DMatrix<Complex64>,
    pub time: f64,
}

impl CoefficientMatrix {
    pub fn zeros(basis: &BasisSet) -> Self {
        let indices = basis.indices();
        let d = indices.len();
        Self {
            indices,
            values: DMatrix::from_element(d, d, ZERO),
            time: 0.0,
        }
    }

    /// `C_mn = conj(a_m) a_n`.
    pub fn pure(a: &CoefficientVector) -> Self {
        let d = a.values.len();
        Self {
            indices: a.indices.clone(),
            values: DMatrix::from_fn(d, d, |i, j| a.values[i].conj() * a.values[j]),
            time: a.time,
        }
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn trace(&self) -> Complex64 {
        self.values.trace()
    }

    /// `m,n,re,im` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,n,re,im\n");
        for (i, m) in self.indices.iter().enumerate() {
            for (j, n) in self.indices.iter().enumerate() {
                let v = self.values[(i, j)];
                s.push_str(&format!("{m},{n},{},{}\n", fmt_g17(v.re), fmt_g17(v.im)));
            }
        }
        s
    }
}

/// All `W_mn` of a basis on one grid, for repeated expansion and synthesis.
pub struct WmnTable {
    basis: BasisSet,
    grid: PhaseSpaceGrid,
    /// `functions[i * d + j]` holds `W_{indices[i], indices[j]}`.
    functions: Vec<Vec<Complex64>>,
}

impl WmnTable {
    pub fn new(basis: &BasisSet, params: &SystemParams, grid: &PhaseSpaceGrid) -> Result<Self> {
        check_params(grid, params)?;
        basis.check_grid(grid.spatial())?;
        let size = lattice_size(grid);
        let lattice: Vec<Vec<Complex64>> = basis
            .indices()
            .iter()
            .map(|&n| basis.sample_lattice(n, grid.spatial(), size))
            .collect();
        let d = lattice.len();
        let mut functions = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                functions.push(cross_wigner_lattice(&lattice[i], &lattice[j], grid));
            }
        }
        Ok(Self {
            basis: basis.clone(),
            grid: *grid,
            functions,
        })
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn get(&self, m: i64, n: i64) -> Result<PhaseDistribution> {
        let (i, j) = (self.basis.position(m)?, self.basis.position(n)?);
        PhaseDistribution::new(self.grid, self.functions[i * self.dim() + j].clone(), 0.0)
    }

    /// `C_rs = c sum W*_rs W dx dp` with `c` from [`overlap_factor`].
    pub fn expand(&self, w: &PhaseDistribution) -> Result<CoefficientMatrix> {
        if !w.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch("distribution grid differs from the W_mn table grid".into()));
        }
        let d = self.dim();
        let scale = overlap_factor(&self.grid) * self.grid.cell_area();
        let entries: Vec<Complex64> = self
            .functions
            .par_iter()
            .map(|f| f.iter().zip(w.values()).map(|(a, b)| a.conj() * b).sum::<Complex64>() * scale)
            .collect();
        Ok(CoefficientMatrix {
            indices: self.basis.indices(),
            values: DMatrix::from_fn(d, d, |i, j| entries[i * d + j]),
            time: w.time(),
        })
    }

    /// `W = sum C_mn W_mn`.
    pub fn synthesize(&self, c: &CoefficientMatrix) -> Result<PhaseDistribution> {
        let d = self.dim();
        if c.dim() != d {
            return Err(Error::GridMismatch(format!("coefficient matrix is {}x{0}, basis has {d}", c.dim())));
        }
        let mut out = vec![ZERO; self.grid.len()];
        for i in 0..d {
            for j in 0..d {
                let cij = c.values[(i, j)];
                if cij == ZERO {
                    continue;
                }
                for (o, f) in out.iter_mut().zip(&self.functions[i * d + j]) {
                    *o += cij * f;
                }
            }
        }
        PhaseDistribution::new(self.grid, out, c.time)
    }
}

#[derive(Debug, Clone)]
pub struct Expansion {
    pub coefficients: CoefficientMatrix,
    /// `max |sum C_mn W_mn - W|` over the grid (band-limit residual).
    pub reconstruction_residual: f64,
}

/// Project `W` onto the `W_mn` of `basis`.
pub fn expand_in_wmn(w: &PhaseDistribution, basis: &BasisSet, params: &SystemParams) -> Result<Expansion> {
    let table = WmnTable::new(basis, params, w.grid())?;
    let coefficients = table.expand(w)?;
    let rebuilt = table.synthesize(&coefficients)?;
    Ok(Expansion {
        reconstruction_residual: rebuilt.linf_distance(w),
        coefficients,
    })
}

/// `W = sum C_mn W_mn` on `grid`.
pub fn synthesize_distribution(
    c: &CoefficientMatrix,
    basis: &BasisSet,
    params: &SystemParams,
    grid: &PhaseSpaceGrid,
) -> Result<PhaseDistribution> {
    WmnTable::new(basis, params, grid)?.synthesize(c)
}

/// `max |C_mn - conj(C_nm)|`.
pub fn hermiticity_residual(c: &CoefficientMatrix) -> f64 {
    let d = c.dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            worst = worst.max((c.values[(i, j)] - c.values[(j, i)].conj()).norm());
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct PurityDecomposition {
    /// `sqrt(lambda_max)` times the dominant eigenvector, arranged so `C ~ conj(a) a^T`.
    pub amplitude: CoefficientVector,
    /// `1 - lambda_max / Tr C`.
    pub purity_defect: f64,
}

/// Best rank-one factorization `C_mn ~ conj(a_m) a_n`.
pub fn purity_decomposition(c: &CoefficientMatrix) -> Result<PurityDecomposition> {
    let h = hermiticity_residual(c);
    if h > 1e-8 {
        return Err(Error::NonHermitian(h));
    }
    let sym = (&c.values + c.values.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let (imax, lmax) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Degenerate("empty coefficient matrix".into()))?;
    let trace = c.trace().re;
    if !(trace > 0.0) {
        return Err(Error::Degenerate(format!("coefficient matrix trace {trace} is not positive")));
    }
    // C conj(a) = |a|^2 conj(a), so the eigenvector is conj(a)
    let v = eig.eigenvectors.column(imax);
    let s = lmax.max(0.0).sqrt();
    let mut values: Vec<Complex64> = v.iter().map(|z| z.conj() * s).collect();
    if let Some(big) = values.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) {
        if big.norm() > 0.0 {
            let phase = big.conj() / big.norm();
            values.iter_mut().for_each(|z| *z *= phase);
        }
    }
    Ok(PurityDecomposition {
        amplitude: CoefficientVector {
            indices: c.indices.clone(),
            values,
            time: c.time,
        },
        purity_defect: (1.0 - lmax / trace).max(0.0),
    })
}

/// `T[W](x, y)` on the `y` axis conjugate to `p`, row-major with x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformField {
    grid: PhaseSpaceGrid,
    values: Vec<Complex64>,
    time: f64,
}

impl TransformField {
    pub fn new(grid: PhaseSpaceGrid, values: Vec<Complex64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a transform grid of {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, time })
    }

    /// Axis metadata: `x` from the spatial grid, `y` from [`PhaseSpaceGrid::y`].
    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn at(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[iy * self.grid.n_x() + ix]
    }

    /// `T(x, 0)`: the configuration-space density.
    pub fn diagonal(&self) -> Vec<f64> {
        let j0 = self.grid.n_p() / 2;
        (0..self.grid.n_x()).map(|ix| self.at(ix, j0).re).collect()
    }

    /// Build `Psi*(x - y) Psi(x + y)` directly from an amplitude on the same axes.
    pub fn from_amplitude(psi: &Amplitude, grid: &PhaseSpaceGrid) -> Result<Self> {
        if !psi.grid().same_as(grid.spatial()) {
            return Err(Error::GridMismatch("amplitude grid differs from the transform x axis".into()));
        }
        let lat = PairLattice::new(psi.values(), grid);
        let mut values = vec![ZERO; grid.len()];
        for iy in 0..grid.n_p() {
            for ix in 0..grid.n_x() {
                let (s, r) = lat.pair(ix, iy);
                values[iy * grid.n_x() + ix] = s.conj() * r;
            }
        }
        Self::new(*grid, values, psi.time())
    }

    pub fn max_abs_diff(&self, other: &TransformField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// An amplitude on a lattice fine enough to hold both `x_i` and `x_i +- y_j`.
struct PairLattice {
    values: Vec<Complex64>,
    rx: i64,
    ry: i64,
    half: i64,
    periodic: bool,
}

impl PairLattice {
    fn new(psi: &[Complex64], grid: &PhaseSpaceGrid) -> Self {
        let (nx, ny) = (grid.n_x(), grid.n_p());
        let m = nx.max(ny);
        Self {
            values: spectral::resample_periodic(psi, m),
            rx: (m / nx) as i64,
            ry: (m / ny) as i64,
            half: (ny / 2) as i64,
            periodic: grid.spatial().boundary() == Boundary::Periodic,
        }
    }

    /// `(Psi(x_ix - y_iy), Psi(x_ix + y_iy))`.
    fn pair(&self, ix: usize, iy: usize) -> (Complex64, Complex64) {
        let c = ix as i64 * self.rx;
        let dj = (iy as i64 - self.half) * self.ry;
        (
            lattice_at(&self.values, c - dj, self.periodic),
            lattice_at(&self.values, c + dj, self.periodic),
        )
    }
}

/// `T[W](x, y) = sum_p W(x, p) exp(2ipy/alpha) dp`.
pub fn inverse_transform(w: &PhaseDistribution, params: &SystemParams) -> Result<TransformField> {
    let grid = *w.grid();
    check_params(&grid, params)?;
    let (nx, np) = (grid.n_x(), grid.n_p());
    let dp = grid.dp();
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    let columns: Vec<Vec<Complex64>> = (0..nx)
        .into_par_iter()
        .map(|ix| {
            let mut buf: Vec<Complex64> = (0..np).map(|k| w.at(ix, k) * sign(k)).collect();
            spectral::inverse(&mut buf);
            let s = np as f64 * dp;
            buf.iter_mut().enumerate().for_each(|(j, v)| *v *= s * sign(j));
            buf
        })
        .collect();
    let mut values = vec![ZERO; grid.len()];
    for (ix, col) in columns.into_iter().enumerate() {
        for (iy, v) in col.into_iter().enumerate() {
            values[iy * nx + ix] = v;
        }
    }
    TransformField::new(grid, values, w.time())
}

#[derive(Debug, Clone)]
pub struct Factorization {
    pub amplitude: Amplitude,
    /// `max |T - Psi*(x-y) Psi(x+y)|` where both densities exceed the floor.
    pub residual: f64,
    /// Grid index of the gauge reference point.
    pub reference_index: usize,
    pub density_floor: f64,
}

/// Default density floor relative to the peak of `T(x, 0)`.
pub const DEFAULT_RELATIVE_FLOOR: f64 = 1e-6;

/// Recover `Psi` from `T(x, y) = Psi*(x - y) Psi(x + y)`.
///
/// Uses the diagonal `Psi(x_r + 2y) = T(x_r + y, y) / sqrt(T(x_r, 0))` anchored
/// at the density maximum `x_r` (ties toward smaller x), with `Psi(x_r)` real
/// positive. `T` is interpolated onto the half-spacing lattice in both axes,
/// so every `x_r + y` needed stays inside the box.
/// `density_floor` is absolute; `None` means `1e-6` times the peak density.
pub fn factorize_amplitude(t: &TransformField, density_floor: Option<f64>) -> Result<Factorization> {
    let grid = *t.grid();
    let (nx, ny) = (grid.n_x(), grid.n_p());
    let diag = t.diagonal();
    let (ir, peak) = diag
        .iter()
        .copied()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let floor = density_floor.unwrap_or(DEFAULT_RELATIVE_FLOOR * peak.max(0.0));
    if !(peak > floor) || peak <= 0.0 {
        return Err(Error::Degenerate(format!(
            "density at the reference point ({peak:e}) is below the floor ({floor:e})"
        )));
    }

    let m = 2 * nx;
    // refine along x for every stored y row
    let rows: Vec<Vec<Complex64>> = (0..ny)
        .into_par_iter()
        .map(|iy| spectral::refine_periodic(&t.values()[iy * nx..(iy + 1) * nx], 2))
        .collect();
    // Psi(x_i) = T((x_r + x_i)/2, (x_i - x_r)/2) / sqrt(T(x_r, 0)); on the
    // half-spacing lattice that is x index i + ir and y index i - ir (+ nx)
    let norm = peak.sqrt();
    let psi: Vec<Complex64> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let column: Vec<Complex64> = rows.iter().map(|r| r[i + ir]).collect();
            let fine = spectral::resample_periodic(&column, m);
            fine[(i as i64 - ir as i64 + nx as i64) as usize] / norm
        })
        .collect();
    let amplitude = Amplitude::normalized(*grid.spatial(), psi, t.time())?;

    // residual on the stored samples
    let lat = PairLattice::new(amplitude.values(), &grid);
    let mut residual: f64 = 0.0;
    for iy in 0..ny {
        for ix in 0..nx {
            let (s, r) = lat.pair(ix, iy);
            if s.norm_sqr() > floor && r.norm_sqr() > floor {
                residual = residual.max((t.at(ix, iy) - s.conj() * r).norm());
            }
        }
    }
    Ok(Factorization {
        amplitude,
        residual,
        reference_index: ir,
        density_floor: floor,
    })
}
