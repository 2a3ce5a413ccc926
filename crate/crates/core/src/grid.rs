//! Uniform discretizations of configuration space and phase space.
//!
//! A [`SpatialGrid`] samples `x_i = x_min + i*dx` for `i = 0..n` with
//! `dx = (x_max - x_min)/n`; the right endpoint is excluded. With
//! [`Boundary::Periodic`] it is identified with `x_min`; with
//! [`Boundary::Vanishing`] both `x_min` and `x_max` are hard walls and sample
//! 0 is pinned to zero.
//!
//! A [`PhaseSpaceGrid`] adds a momentum axis conjugate to the half-offset
//! variable `y` of the kernel `exp(2ipy/alpha)`: `dp = pi*alpha/L`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Constant with dimension of action that sets the transform kernel scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionConstant(f64);

impl ActionConstant {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Validation(format!("alpha must be > 0, got {alpha}")));
        }
        Ok(Self(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for ActionConstant {
    fn default() -> Self {
        Self(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    mass: f64,
    alpha: ActionConstant,
}

impl SystemParams {
    pub fn new(mass: f64, alpha: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Validation(format!("mass must be > 0, got {mass}")));
        }
        Ok(Self {
            mass,
            alpha: ActionConstant::new(alpha)?,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.value()
    }
}

impl Default for SystemParams {
    /// Natural units, `M = 1`, `alpha = 1`.
    fn default() -> Self {
        Self {
            mass: 1.0,
            alpha: ActionConstant::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    Vanishing,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "vanishing" => Ok(Boundary::Vanishing),
            other => Err(Error::Config(format!("unknown boundary `{other}`"))),
        }
    }
}

pub(crate) fn check_power_of_two(n: usize, what: &str) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::Validation(format!(
            "{what} must be a power of two >= 8, got {n}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    n: usize,
    boundary: Boundary,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n: usize, boundary: Boundary) -> Result<Self> {
        check_power_of_two(n, "n_x")?;
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::Validation(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n,
            boundary,
        })
    }

    pub fn periodic(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        Self::new(x_min, x_max, n, Boundary::Periodic)
    }

    pub fn vanishing(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        Self::new(x_min, x_max, n, Boundary::Vanishing)
    }

    /// Symmetric periodic grid on `[-half_width, half_width)`.
    pub fn centered(half_width: f64, n: usize) -> Result<Self> {
        Self::periodic(-half_width, half_width, n)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Index of the sample closest to `x`, if `x` lies within half a cell of the grid.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        let f = ((x - self.x_min) / self.dx()).round();
        if f < 0.0 || f >= self.n as f64 {
            None
        } else {
            Some(f as usize)
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    pub(crate) fn same_as(&self, other: &SpatialGrid) -> bool {
        self.n == other.n
            && self.boundary == other.boundary
            && rel_close(self.x_min, other.x_min)
            && rel_close(self.x_max, other.x_max)
    }
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpaceGrid {
    spatial: SpatialGrid,
    n_p: usize,
    p_max: f64,
    alpha: f64,
}

impl PhaseSpaceGrid {
    pub fn new(spatial: SpatialGrid, n_p: usize, alpha: ActionConstant) -> Result<Self> {
        check_power_of_two(n_p, "n_p")?;
        let dp = PI * alpha.value() / spatial.length();
        Ok(Self {
            spatial,
            n_p,
            p_max: (n_p / 2) as f64 * dp,
            alpha: alpha.value(),
        })
    }

    /// Rebuild from stored axis metadata, deriving alpha from the conjugacy relation.
    pub fn from_axes(spatial: SpatialGrid, n_p: usize, p_min: f64, p_max: f64) -> Result<Self> {
        check_power_of_two(n_p, "n_p")?;
        if !(p_max > 0.0 && p_max.is_finite()) || !rel_close(p_min, -p_max) {
            return Err(Error::Validation(format!(
                "momentum axis must be symmetric about 0, got [{p_min}, {p_max}]"
            )));
        }
        let dp = 2.0 * p_max / n_p as f64;
        let alpha = dp * spatial.length() / PI;
        ActionConstant::new(alpha)?;
        Ok(Self {
            spatial,
            n_p,
            p_max,
            alpha,
        })
    }

    pub fn spatial(&self) -> &SpatialGrid {
        &self.spatial
    }

    pub fn n_x(&self) -> usize {
        self.spatial.len()
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn len(&self) -> usize {
        self.n_x() * self.n_p
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dx(&self) -> f64 {
        self.spatial.dx()
    }

    pub fn dp(&self) -> f64 {
        2.0 * self.p_max / self.n_p as f64
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn p_min(&self) -> f64 {
        -self.p_max
    }

    pub fn x(&self, i: usize) -> f64 {
        self.spatial.x(i)
    }

    pub fn p(&self, k: usize) -> f64 {
        -self.p_max + k as f64 * self.dp()
    }

    /// Row-major flat index, x fastest.
    #[inline]
    pub fn index(&self, ix: usize, ip: usize) -> usize {
        ip * self.n_x() + ix
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dp()
    }

    /// Spacing of the `y` axis conjugate to `p` (`L / n_p`).
    pub fn dy(&self) -> f64 {
        self.spatial.length() / self.n_p as f64
    }

    /// `y_j = (j - n_p/2) * dy`, covering one period `[-L/2, L/2)`.
    pub fn y(&self, j: usize) -> f64 {
        (j as f64 - (self.n_p / 2) as f64) * self.dy()
    }

    pub(crate) fn check_alpha(&self, alpha: f64) -> Result<()> {
        if rel_close(alpha, self.alpha) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "phase-space grid is conjugate for alpha = {}, not {alpha}",
                self.alpha
            )))
        }
    }

    pub(crate) fn same_as(&self, other: &PhaseSpaceGrid) -> bool {
        self.n_p == other.n_p && self.spatial.same_as(&other.spatial) && rel_close(self.p_max, other.p_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(SpatialGrid::periodic(-1.0, 1.0, 6).is_err());
        assert!(SpatialGrid::periodic(-1.0, 1.0, 48).is_err());
        assert!(SpatialGrid::periodic(1.0, 1.0, 64).is_err());
        assert!(ActionConstant::new(0.0).is_err());
        assert!(SystemParams::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn conjugacy_holds() {
        for &(l, alpha, n_p) in &[(20.0, 1.0, 256usize), (3.7, 0.05, 64), (1e3, 2.5, 8)] {
            let s = SpatialGrid::centered(l / 2.0, 128).unwrap();
            let g = PhaseSpaceGrid::new(s, n_p, ActionConstant::new(alpha).unwrap()).unwrap();
            let lhs = g.dp() * s.length();
            assert!((lhs - PI * alpha).abs() < 1e-13 * PI * alpha);
            assert_eq!(g.p_max(), -g.p_min());
            assert!((g.p_max() - (n_p / 2) as f64 * g.dp()).abs() < 1e-12 * g.p_max());
        }
    }

    #[test]
    fn from_axes_recovers_alpha() {
        let s = SpatialGrid::centered(10.0, 64).unwrap();
        let g = PhaseSpaceGrid::new(s, 32, ActionConstant::new(0.7).unwrap()).unwrap();
        let h = PhaseSpaceGrid::from_axes(s, 32, g.p_min(), g.p_max()).unwrap();
        assert!((h.alpha() - 0.7).abs() < 1e-14);
        assert!(PhaseSpaceGrid::from_axes(s, 32, -1.0, 2.0).is_err());
    }

    #[test]
    fn zero_is_a_sample_of_centered_grids() {
        let s = SpatialGrid::centered(10.0, 256).unwrap();
        assert_eq!(s.x(128), 0.0);
        let g = PhaseSpaceGrid::new(s, 256, ActionConstant::default()).unwrap();
        assert_eq!(g.p(128), 0.0);
        assert_eq!(g.y(128), 0.0);
    }
}
