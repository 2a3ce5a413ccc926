//! Orthonormal configuration-space function families and projections onto them.
//!
//! Index layout: plane-wave bases store signed indices in the order
//! `0, 1, -1, 2, -2, ...`; eigenfunction bases store `0, 1, ..., n_max`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Amplitude;
use crate::fieldio::fmt_g17;
use crate::grid::{Boundary, SpatialGrid, SystemParams};
use crate::potential::Potential;
use crate::schrodinger::{solve_eigenproblem, EigenSolution};
use crate::spectral;

/// Orthonormality tolerance for basis functions sampled on a grid.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub enum BasisFamily {
    /// `exp(i n pi x / b) / sqrt(2b)` on `[-b, b)`.
    PlaneWaveBox { b: f64 },
    /// Eigenfunctions of `p^2/2M + M omega^2 x^2 / 2`.
    HarmonicEigen { mass: f64, omega: f64, alpha: f64 },
    /// Eigenstates computed on a grid for an arbitrary potential.
    NumericEigen(Arc<EigenSolution>),
}

#[derive(Debug, Clone)]
pub struct BasisSet {
    family: BasisFamily,
    n_max: usize,
}

impl BasisSet {
    pub fn plane_wave_box(b: f64, n_max: usize) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::Validation(format!("box half-width must be > 0, got {b}")));
        }
        Ok(Self {
            family: BasisFamily::PlaneWaveBox { b },
            n_max,
        })
    }

    pub fn harmonic(params: &SystemParams, omega: f64, n_max: usize) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Validation(format!("omega must be > 0, got {omega}")));
        }
        Ok(Self {
            family: BasisFamily::HarmonicEigen {
                mass: params.mass(),
                omega,
                alpha: params.alpha(),
            },
            n_max,
        })
    }

    /// Eigenstates of `potential` on `grid` (indices `0..=n_max`).
    pub fn numeric_eigen(potential: &Potential, params: &SystemParams, grid: SpatialGrid, n_max: usize) -> Result<Self> {
        let sol = solve_eigenproblem(potential, params, grid, n_max + 1)?;
        Ok(Self::from_eigen(Arc::new(sol)))
    }

    pub fn from_eigen(sol: Arc<EigenSolution>) -> Self {
        let n_max = sol.states.len() - 1;
        Self {
            family: BasisFamily::NumericEigen(sol),
            n_max,
        }
    }

    pub fn family(&self) -> &BasisFamily {
        &self.family
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Same family with a smaller cutoff.
    pub fn truncated(&self, n_max: usize) -> Result<Self> {
        if n_max > self.n_max {
            return Err(Error::IndexOutOfRange {
                index: n_max as i64,
                n_max: self.n_max,
            });
        }
        Ok(Self {
            family: self.family.clone(),
            n_max,
        })
    }

    pub fn indices(&self) -> Vec<i64> {
        match self.family {
            BasisFamily::PlaneWaveBox { .. } => {
                let mut v = vec![0];
                for n in 1..=self.n_max as i64 {
                    v.push(n);
                    v.push(-n);
                }
                v
            }
            _ => (0..=self.n_max as i64).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self.family {
            BasisFamily::PlaneWaveBox { .. } => 2 * self.n_max + 1,
            _ => self.n_max + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Storage position of basis index `n`.
    pub fn position(&self, n: i64) -> Result<usize> {
        let oob = Error::IndexOutOfRange { index: n, n_max: self.n_max };
        match self.family {
            BasisFamily::PlaneWaveBox { .. } => {
                if n.unsigned_abs() as usize > self.n_max {
                    Err(oob)
                } else if n == 0 {
                    Ok(0)
                } else if n > 0 {
                    Ok(2 * n as usize - 1)
                } else {
                    Ok(2 * (-n) as usize)
                }
            }
            _ => {
                if n < 0 || n as usize > self.n_max {
                    Err(oob)
                } else {
                    Ok(n as usize)
                }
            }
        }
    }

    /// `Phi_n(x)`.
    pub fn eval(&self, n: i64, x: f64) -> Result<Complex64> {
        self.position(n)?;
        Ok(match &self.family {
            BasisFamily::PlaneWaveBox { b } => {
                Complex64::from_polar(1.0 / (2.0 * b).sqrt(), n as f64 * PI * x / b)
            }
            BasisFamily::HarmonicEigen { mass, omega, alpha } => {
                Complex64::new(hermite_function(n as usize, x, mass * omega / alpha), 0.0)
            }
            BasisFamily::NumericEigen(sol) => {
                let phi = &sol.states[n as usize];
                let g = phi.grid();
                spectral::interpolate_at(phi.values(), g.x_min(), g.length(), x)
            }
        })
    }

    /// Check that this basis can be sampled on `grid`.
    pub fn check_grid(&self, grid: &SpatialGrid) -> Result<()> {
        match &self.family {
            BasisFamily::PlaneWaveBox { b } => {
                let tol = 1e-12 * b.max(1.0);
                if grid.boundary() != Boundary::Periodic
                    || (grid.x_min() + b).abs() > tol
                    || (grid.x_max() - b).abs() > tol
                {
                    return Err(Error::GridMismatch(format!(
                        "plane-wave box needs a periodic grid on [-{b}, {b})"
                    )));
                }
                if 2 * self.n_max >= grid.len() / 2 {
                    return Err(Error::GridMismatch(format!(
                        "cutoff {} is not resolved by {} samples",
                        self.n_max,
                        grid.len()
                    )));
                }
                Ok(())
            }
            BasisFamily::HarmonicEigen { .. } => {
                let defect = self.orthonormality_defect(grid)?;
                if defect > ORTHONORMALITY_TOL {
                    return Err(Error::GridMismatch(format!(
                        "harmonic basis not orthonormal on this grid (defect {defect:e})"
                    )));
                }
                Ok(())
            }
            BasisFamily::NumericEigen(sol) => {
                if sol.grid().same_as(grid) {
                    Ok(())
                } else {
                    Err(Error::GridMismatch("numeric eigenbasis was computed on another grid".into()))
                }
            }
        }
    }

    fn sample_unchecked(&self, n: i64, grid: &SpatialGrid) -> Vec<Complex64> {
        match &self.family {
            BasisFamily::NumericEigen(sol) if sol.grid().same_as(grid) => sol.states[n as usize].values().to_vec(),
            _ => (0..grid.len()).map(|i| self.eval(n, grid.x(i)).unwrap()).collect(),
        }
    }

    /// `Phi_n` sampled on the grid points.
    pub fn sample(&self, n: i64, grid: &SpatialGrid) -> Result<Vec<Complex64>> {
        self.position(n)?;
        self.check_grid(grid)?;
        Ok(self.sample_unchecked(n, grid))
    }

    /// `Phi_n` on the lattice `x_min + j L / m`, `m` a multiple of the grid size.
    pub(crate) fn sample_lattice(&self, n: i64, grid: &SpatialGrid, m: usize) -> Vec<Complex64> {
        match &self.family {
            BasisFamily::NumericEigen(_) => spectral::resample_periodic(&self.sample_unchecked(n, grid), m),
            _ => {
                let h = grid.length() / m as f64;
                (0..m).map(|j| self.eval(n, grid.x_min() + j as f64 * h).unwrap()).collect()
            }
        }
    }

    /// `max |<Phi_m, Phi_n> dx - delta_mn|` over the basis.
    pub fn orthonormality_defect(&self, grid: &SpatialGrid) -> Result<f64> {
        let samples: Vec<Vec<Complex64>> = self.indices().iter().map(|&n| self.sample_unchecked(n, grid)).collect();
        let dx = grid.dx();
        let mut worst: f64 = 0.0;
        for (a, fa) in samples.iter().enumerate() {
            for (b, fb) in samples.iter().enumerate() {
                let g: Complex64 = fa.iter().zip(fb).map(|(u, v)| u.conj() * v).sum::<Complex64>() * dx;
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        Ok(worst)
    }

    /// Key/value descriptor used in experiment configs.
    pub fn descriptor(&self) -> String {
        match &self.family {
            BasisFamily::PlaneWaveBox { b } => format!("basis.family = plane_wave\nbasis.b = {b}\nbasis.n_max = {}\n", self.n_max),
            BasisFamily::HarmonicEigen { omega, .. } => {
                format!("basis.family = harmonic\nbasis.omega = {omega}\nbasis.n_max = {}\n", self.n_max)
            }
            BasisFamily::NumericEigen(sol) => format!(
                "basis.family = numeric\nbasis.potential = {}\nbasis.n_max = {}\n",
                sol.potential.describe(),
                self.n_max
            ),
        }
    }
}

/// Normalized Hermite function `(s/pi)^(1/4) H_n(xi) exp(-xi^2/2) / sqrt(2^n n!)`, `xi = sqrt(s) x`.
fn hermite_function(n: usize, x: f64, s: f64) -> f64 {
    let xi = s.sqrt() * x;
    let h0 = (s / PI).powf(0.25) * (-0.5 * xi * xi).exp();
    if n == 0 {
        return h0;
    }
    let mut prev = h0;
    let mut cur = 2f64.sqrt() * xi * h0;
    for k in 1..n {
        let next = (2.0 / (k + 1) as f64).sqrt() * xi * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Expansion coefficients `a_n`, stored in the basis layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub indices: Vec<i64>,
    pub values: Vec<Complex64>,
    pub time: f64,
}

impl CoefficientVector {
    pub fn zeros(basis: &BasisSet) -> Self {
        let indices = basis.indices();
        Self {
            values: vec![Complex64::new(0.0, 0.0); indices.len()],
            indices,
            time: 0.0,
        }
    }

    /// Unit vector for basis index `n`.
    pub fn unit(basis: &BasisSet, n: i64) -> Result<Self> {
        let mut c = Self::zeros(basis);
        c.values[basis.position(n)?] = Complex64::new(1.0, 0.0);
        Ok(c)
    }

    pub fn get(&self, n: i64) -> Option<Complex64> {
        self.indices.iter().position(|&i| i == n).map(|p| self.values[p])
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// `n,re,im` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,re,im\n");
        for (n, v) in self.indices.iter().zip(&self.values) {
            s.push_str(&format!("{n},{},{}\n", fmt_g17(v.re), fmt_g17(v.im)));
        }
        s
    }
}

/// `a_n = sum conj(Phi_n(x_i)) Psi(x_i) dx`.
pub fn project_amplitude(basis: &BasisSet, psi: &Amplitude) -> Result<CoefficientVector> {
    let grid = psi.grid();
    basis.check_grid(grid)?;
    let dx = grid.dx();
    let indices = basis.indices();
    let values = indices
        .iter()
        .map(|&n| {
            basis
                .sample_unchecked(n, grid)
                .iter()
                .zip(psi.values())
                .map(|(f, p)| f.conj() * p)
                .sum::<Complex64>()
                * dx
        })
        .collect();
    Ok(CoefficientVector {
        indices,
        values,
        time: psi.time(),
    })
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub amplitude: Amplitude,
    /// `sum |Psi|^2 dx` before renormalization, when a correction was applied.
    pub renormalized_from: Option<f64>,
}

/// `Psi(x) = sum_n a_n Phi_n(x)` on `grid`; renormalized only when the norm drifts by more than `1e-12`.
pub fn synthesize_amplitude(coeffs: &CoefficientVector, basis: &BasisSet, grid: SpatialGrid) -> Result<Synthesis> {
    basis.check_grid(&grid)?;
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (&n, &a) in coeffs.indices.iter().zip(&coeffs.values) {
        basis.position(n)?;
        if a == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (v, f) in values.iter_mut().zip(basis.sample_unchecked(n, &grid)) {
            *v += a * f;
        }
    }
    let raw = Amplitude::unchecked(grid, values, coeffs.time)?;
    let norm = raw.norm_sq();
    if (norm - 1.0).abs() > 1e-12 {
        Ok(Synthesis {
            amplitude: Amplitude::normalized(grid, raw.into_values(), coeffs.time)?,
            renormalized_from: Some(norm),
        })
    } else {
        Ok(Synthesis {
            amplitude: raw,
            renormalized_from: None,
        })
    }
}

/// `max_x |sum_{|n| <= n_max} Phi_n <Phi_n, f> - f|` for a test function `f`.
pub fn completeness_residual(basis: &BasisSet, n_max: usize, f: &Amplitude) -> Result<f64> {
    let basis = basis.truncated(n_max)?;
    let grid = f.grid();
    basis.check_grid(grid)?;
    let dx = grid.dx();
    let mut approx = vec![Complex64::new(0.0, 0.0); grid.len()];
    for n in basis.indices() {
        let phi = basis.sample_unchecked(n, grid);
        let c: Complex64 = phi.iter().zip(f.values()).map(|(a, b)| a.conj() * b).sum::<Complex64>() * dx;
        for (v, p) in approx.iter_mut().zip(&phi) {
            *v += c * p;
        }
    }
    Ok(approx
        .iter()
        .zip(f.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_grid() -> SpatialGrid {
        SpatialGrid::centered(1.0, 128).unwrap()
    }

    #[test]
    fn plane_wave_values() {
        let b = BasisSet::plane_wave_box(1.0, 4).unwrap();
        let v = b.eval(0, 0.3).unwrap();
        assert!((v - Complex64::new(0.7071067811865476, 0.0)).norm() < 1e-15);
        let v = b.eval(1, 1.0).unwrap();
        assert!((v - Complex64::new(-0.7071067811865476, 0.0)).norm() < 1e-15);
        assert!(b.eval(5, 0.0).is_err());
        assert_eq!(b.indices(), vec![0, 1, -1, 2, -2, 3, -3, 4, -4]);
        for n in b.indices() {
            assert_eq!(b.indices()[b.position(n).unwrap()], n);
        }
    }

    #[test]
    fn harmonic_odd_state_vanishes_at_origin() {
        let b = BasisSet::harmonic(&SystemParams::default(), 1.0, 6).unwrap();
        assert_eq!(b.eval(1, 0.0).unwrap(), Complex64::new(0.0, 0.0));
        let g = SpatialGrid::centered(10.0, 256).unwrap();
        assert!(b.orthonormality_defect(&g).unwrap() < 1e-8);
    }

    #[test]
    fn plane_waves_are_orthonormal_and_check_grid() {
        let b = BasisSet::plane_wave_box(1.0, 10).unwrap();
        assert!(b.orthonormality_defect(&box_grid()).unwrap() < 1e-12);
        assert!(b.check_grid(&SpatialGrid::centered(2.0, 128).unwrap()).is_err());
    }

    #[test]
    fn projection_of_basis_states() {
        let b = BasisSet::plane_wave_box(1.0, 6).unwrap();
        let g = box_grid();
        let phi3 = Amplitude::new(g, b.sample(3, &g).unwrap(), 0.0).unwrap();
        let a = project_amplitude(&b, &phi3).unwrap();
        for (&n, v) in a.indices.iter().zip(&a.values) {
            let target = if n == 3 { 1.0 } else { 0.0 };
            assert!((v - target).norm() < 1e-12);
        }

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut c = CoefficientVector::zeros(&b);
        c.values[b.position(0).unwrap()] = Complex64::new(s, 0.0);
        c.values[b.position(1).unwrap()] = Complex64::new(s, 0.0);
        let psi = synthesize_amplitude(&c, &b, g).unwrap();
        assert!(psi.renormalized_from.is_none());
        let back = project_amplitude(&b, &psi.amplitude).unwrap();
        for (x, y) in back.values.iter().zip(&c.values) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn superposition_density_matches_expansion() {
        let b = BasisSet::harmonic(&SystemParams::default(), 1.0, 3).unwrap();
        let g = SpatialGrid::centered(10.0, 256).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut c = CoefficientVector::zeros(&b);
        c.values[0] = Complex64::new(s, 0.0);
        c.values[1] = Complex64::new(0.0, s);
        let psi = synthesize_amplitude(&c, &b, g).unwrap().amplitude;
        let p0 = b.sample(0, &g).unwrap();
        let p1 = b.sample(1, &g).unwrap();
        for (i, d) in psi.density().iter().enumerate() {
            // |Phi0 + i Phi1|^2 / 2 expanded term by term
            let cross = 2.0 * (p0[i].conj() * Complex64::new(0.0, 1.0) * p1[i]).re;
            let oracle = (p0[i].norm_sqr() + p1[i].norm_sqr() + cross) / 2.0;
            assert!((d - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn completeness_converges() {
        let b = BasisSet::plane_wave_box(1.0, 32).unwrap();
        let g = SpatialGrid::periodic(-1.0, 1.0, 256).unwrap();
        let phi2 = Amplitude::new(g, b.sample(2, &g).unwrap(), 0.0).unwrap();
        assert!(completeness_residual(&b, 2, &phi2).unwrap() < 1e-10);

        let phi5 = Amplitude::new(g, b.sample(5, &g).unwrap(), 0.0).unwrap();
        let r = completeness_residual(&b, 3, &phi5).unwrap();
        assert!((r - 1.0 / 2f64.sqrt()).abs() < 1e-12);

        let sigma = 0.25;
        let gauss = Amplitude::from_fn(g, |x| Complex64::new((-x * x / (4.0 * sigma * sigma)).exp(), 0.0)).unwrap();
        let r8 = completeness_residual(&b, 8, &gauss).unwrap();
        let r32 = completeness_residual(&b, 32, &gauss).unwrap();
        assert!(r32 < r8, "{r32} !< {r8}");
    }

    #[test]
    fn numeric_basis_matches_grid_states() {
        let g = SpatialGrid::centered(8.0, 128).unwrap();
        let p = SystemParams::default();
        let b = BasisSet::numeric_eigen(&Potential::Harmonic { k: 1.0 }, &p, g, 4).unwrap();
        assert!(b.orthonormality_defect(&g).unwrap() < 1e-8);
        let h = BasisSet::harmonic(&p, 1.0, 4).unwrap();
        for n in 0..=4 {
            let x = 0.37;
            let a = b.eval(n, x).unwrap();
            let e = h.eval(n, x).unwrap();
            // sign conventions differ for odd states
            assert!((a - e).norm().min((a + e).norm()) < 1e-8, "n={n} {a} {e}");
        }
    }
}
