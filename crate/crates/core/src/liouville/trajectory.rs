use crate::error::{Error, Result};
use crate::grid::SystemParams;
use crate::potential::Potential;

/// Default step for trajectory integration.
pub const DEFAULT_TRAJECTORY_DT: f64 = 1e-4;

/// One velocity-Verlet step of size `h`.
#[inline]
pub fn verlet_step(x: f64, p: f64, h: f64, potential: &Potential, mass: f64) -> (f64, f64) {
    let p_half = p + 0.5 * h * potential.force(x);
    let x1 = x + h * p_half / mass;
    (x1, p_half + 0.5 * h * potential.force(x1))
}

/// Number of steps and the adjusted step that lands exactly on `t`.
pub fn step_plan(t: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Validation(format!("dt must be > 0, got {dt}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Validation(format!("t must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok((0, dt));
    }
    let n = (t / dt - 1e-9).ceil().max(1.0) as usize;
    Ok((n, t / n as f64))
}

/// Velocity-Verlet solution of `M x'' = F(x)` at time `t`.
///
/// `dt` is an upper bound: the step is shrunk so that a whole number of
/// steps reaches `t` exactly.
pub fn integrate_trajectory(
    x0: f64,
    p0: f64,
    potential: &Potential,
    params: &SystemParams,
    t: f64,
    dt: f64,
) -> Result<(f64, f64)> {
    let (n, h) = step_plan(t, dt)?;
    let m = params.mass();
    let (mut x, mut p) = (x0, p0);
    for s in 0..n {
        let (x1, p1) = verlet_step(x, p, h, potential, m);
        if !(x1.is_finite() && p1.is_finite()) {
            return Err(Error::Divergence {
                time: s as f64 * h,
                detail: format!("trajectory left finite values; last state (x, p) = ({x}, {p})"),
            });
        }
        (x, p) = (x1, p1);
    }
    Ok((x, p))
}

pub fn energy(x: f64, p: f64, potential: &Potential, params: &SystemParams) -> f64 {
    p * p / (2.0 * params.mass()) + potential.value(x)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn free_particle_is_exact() {
        let (x, p) = integrate_trajectory(0.0, 1.0, &Potential::free(), &SystemParams::default(), 2.0, 0.1).unwrap();
        assert!((x - 2.0).abs() < 1e-14 && p == 1.0);
    }

    #[test]
    fn harmonic_half_period() {
        let v = Potential::Harmonic { k: 1.0 };
        let (x, p) = integrate_trajectory(1.0, 0.0, &v, &SystemParams::default(), PI, 1e-4).unwrap();
        assert!((x + 1.0).abs() < 1e-6 && p.abs() < 1e-6, "{x} {p}");
    }

    #[test]
    fn quartic_energy_drift() {
        let v = Potential::Quartic { lambda: 1.0 };
        let params = SystemParams::default();
        let (x, p) = integrate_trajectory(1.0, 0.0, &v, &params, 10.0, DEFAULT_TRAJECTORY_DT).unwrap();
        let e0 = energy(1.0, 0.0, &v, &params);
        let drift = (energy(x, p, &v, &params) - e0).abs() / e0.abs().max(1.0);
        assert!(drift < 1e-8, "{drift}");
    }

    #[test]
    fn second_order_in_dt() {
        let v = Potential::Harmonic { k: 1.0 };
        let params = SystemParams::default();
        let err = |dt: f64| {
            let (x, p) = integrate_trajectory(1.0, 0.0, &v, &params, 2.0, dt).unwrap();
            ((x - 2f64.cos()).powi(2) + (p + 2f64.sin()).powi(2)).sqrt()
        };
        let slope = (err(0.01) / err(0.005)).log2();
        assert!((slope - 2.0).abs() < 0.1, "{slope}");
    }

    #[test]
    fn bad_arguments() {
        let v = Potential::free();
        let p = SystemParams::default();
        assert!(integrate_trajectory(0.0, 0.0, &v, &p, 1.0, 0.0).is_err());
        assert!(integrate_trajectory(0.0, 0.0, &v, &p, -1.0, 0.1).is_err());
        assert_eq!(integrate_trajectory(0.3, 0.2, &v, &p, 0.0, 0.1).unwrap(), (0.3, 0.2));
    }
}
