//! Potentials `V(x)` with derivatives up to fifth order.

use crate::error::{Error, Result};
use crate::grid::{Boundary, SpatialGrid};

/// Highest derivative order every potential supplies.
pub const MAX_DERIVATIVE: u32 = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    /// `V = k x^2 / 2`
    Harmonic { k: f64 },
    /// `V = lambda x^4`
    Quartic { lambda: f64 },
    /// `V = a (x^2 - b^2)^2`
    DoubleWell { a: f64, b: f64 },
    /// `V = sum_k c_k x^k`, degree at most 8.
    Polynomial(Vec<f64>),
    Tabulated(TabulatedPotential),
}

impl Potential {
    pub fn free() -> Self {
        Potential::Polynomial(vec![0.0])
    }

    pub fn constant(c: f64) -> Self {
        Potential::Polynomial(vec![c])
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > 9 {
            return Err(Error::Validation(format!(
                "polynomial potential needs 1..=9 coefficients, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("non-finite polynomial coefficient".into()));
        }
        Ok(Potential::Polynomial(coeffs))
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }

    /// Force `F = -dV/dx`.
    pub fn force(&self, x: f64) -> f64 {
        -self.derivative(1, x)
    }

    /// `d^order V / dx^order` at `x`.
    ///
    /// Panics if `order > MAX_DERIVATIVE`.
    pub fn derivative(&self, order: u32, x: f64) -> f64 {
        assert!(order <= MAX_DERIVATIVE, "derivative order {order} > {MAX_DERIVATIVE}");
        match self {
            Potential::Harmonic { k } => match order {
                0 => 0.5 * k * x * x,
                1 => k * x,
                2 => *k,
                _ => 0.0,
            },
            Potential::Quartic { lambda } => lambda * falling_power(4, order, x),
            Potential::DoubleWell { a, b } => {
                // a x^4 - 2 a b^2 x^2 + a b^4
                let b2 = b * b;
                a * (falling_power(4, order, x) - 2.0 * b2 * falling_power(2, order, x)
                    + b2 * b2 * falling_power(0, order, x))
            }
            Potential::Polynomial(c) => c
                .iter()
                .enumerate()
                .map(|(k, ck)| ck * falling_power(k as u32, order, x))
                .sum(),
            Potential::Tabulated(t) => t.derivative(order, x),
        }
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self, Potential::Tabulated(_))
    }

    /// True when every derivative beyond the second vanishes identically.
    pub fn is_quadratic(&self) -> bool {
        match self {
            Potential::Harmonic { .. } => true,
            Potential::Quartic { lambda } => *lambda == 0.0,
            Potential::DoubleWell { a, .. } => *a == 0.0,
            Potential::Polynomial(c) => c.iter().skip(3).all(|&v| v == 0.0),
            Potential::Tabulated(_) => false,
        }
    }

    pub fn sample(&self, grid: &SpatialGrid) -> Vec<f64> {
        (0..grid.len()).map(|i| self.value(grid.x(i))).collect()
    }

    /// Short descriptor used in report provenance.
    pub fn describe(&self) -> String {
        match self {
            Potential::Harmonic { k } => format!("harmonic(k={k})"),
            Potential::Quartic { lambda } => format!("quartic(lambda={lambda})"),
            Potential::DoubleWell { a, b } => format!("double_well(a={a},b={b})"),
            Potential::Polynomial(c) => format!("polynomial({c:?})"),
            Potential::Tabulated(t) => format!("tabulated(n={})", t.values.len()),
        }
    }
}

/// `d^order/dx^order x^power`.
fn falling_power(power: u32, order: u32, x: f64) -> f64 {
    if order > power {
        return 0.0;
    }
    let coeff: f64 = (0..order).map(|j| (power - j) as f64).product();
    coeff * x.powi((power - order) as i32)
}

/// Potential sampled on a spatial grid.
///
/// Derivatives come from centered difference stencils on the nodes and are
/// then interpolated like the values. Every order is only `O(dx^2)` accurate,
/// and orders above two amplify sampling noise strongly.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPotential {
    grid: SpatialGrid,
    values: Vec<f64>,
    nodal: Vec<Vec<f64>>,
}

impl TabulatedPotential {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} tabulated values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite tabulated potential value".into()));
        }
        let h = grid.dx();
        let periodic = grid.boundary() == Boundary::Periodic;
        let n = values.len() as isize;
        let at = |i: isize| -> f64 {
            if periodic {
                values[i.rem_euclid(n) as usize]
            } else {
                values[i.clamp(0, n - 1) as usize]
            }
        };
        // centered stencils, orders 1..=5
        let stencils: [&[(isize, f64)]; 5] = [
            &[(-1, -0.5), (1, 0.5)],
            &[(-1, 1.0), (0, -2.0), (1, 1.0)],
            &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
            &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
            &[(-3, -0.5), (-2, 2.0), (-1, -2.5), (1, 2.5), (2, -2.0), (3, 0.5)],
        ];
        let mut nodal = vec![values.clone()];
        for (k, st) in stencils.iter().enumerate() {
            let scale = h.powi(k as i32 + 1);
            nodal.push(
                (0..n)
                    .map(|i| st.iter().map(|&(o, w)| w * at(i + o)).sum::<f64>() / scale)
                    .collect(),
            );
        }
        Ok(Self {
            grid,
            values,
            nodal,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn derivative(&self, order: u32, x: f64) -> f64 {
        let data = &self.nodal[order as usize];
        let n = data.len() as isize;
        let periodic = self.grid.boundary() == Boundary::Periodic;
        let mut s = (x - self.grid.x_min()) / self.grid.dx();
        if !periodic {
            s = s.clamp(0.0, (n - 1) as f64);
        }
        let i0 = s.floor() as isize;
        let t = s - i0 as f64;
        let at = |i: isize| -> f64 {
            if periodic {
                data[i.rem_euclid(n) as usize]
            } else {
                data[i.clamp(0, n - 1) as usize]
            }
        };
        catmull_rom(at(i0 - 1), at(i0), at(i0 + 1), at(i0 + 2), t)
    }
}

/// Cubic convolution (Keys, a = -1/2) between `p1` and `p2` at fraction `t`.
pub(crate) fn catmull_rom(p0: f64, p1: f64, p2: f64, p3: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    0.5 * ((2.0 * p1)
        + (-p0 + p2) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2
        + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3)
}
