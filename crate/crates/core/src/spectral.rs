//! FFT helpers shared by the transform kernels and propagators.
//!
//! Forward transforms are unnormalized; [`inverse`] divides by `n`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

pub fn forward(data: &mut [Complex64]) {
    plan(data.len(), true).process(data);
}

pub fn inverse(data: &mut [Complex64]) {
    let n = data.len();
    plan(n, false).process(data);
    let s = 1.0 / n as f64;
    data.iter_mut().for_each(|v| *v *= s);
}

/// Signed frequency index of FFT bin `j`; the Nyquist bin maps to `-n/2`.
#[inline]
pub fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Angular wavenumbers `2*pi*m/length` in FFT order.
pub fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    (0..n)
        .map(|j| 2.0 * PI * signed_index(j, n) as f64 / length)
        .collect()
}

/// Band-limited (trigonometric) interpolation of a periodic sequence onto a
/// lattice `factor` times finer. The Nyquist coefficient is split evenly.
pub fn refine_periodic(values: &[Complex64], factor: usize) -> Vec<Complex64> {
    let n = values.len();
    if factor == 1 {
        return values.to_vec();
    }
    let m = n * factor;
    let mut spec = values.to_vec();
    forward(&mut spec);
    let mut padded = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..n / 2 {
        padded[j] = spec[j];
    }
    for j in n / 2 + 1..n {
        padded[m - n + j] = spec[j];
    }
    let nyq = spec[n / 2] * 0.5;
    padded[n / 2] = nyq;
    padded[m - n / 2] = nyq;
    inverse(&mut padded);
    let s = factor as f64;
    padded.iter_mut().for_each(|v| *v *= s);
    padded
}

/// Keep every `stride`-th sample.
pub fn subsample(values: &[Complex64], stride: usize) -> Vec<Complex64> {
    values.iter().step_by(stride).copied().collect()
}

/// Resample a periodic sequence to `target` points (refining or subsampling).
pub fn resample_periodic(values: &[Complex64], target: usize) -> Vec<Complex64> {
    let n = values.len();
    if target >= n {
        refine_periodic(values, target / n)
    } else {
        subsample(values, n / target)
    }
}

/// Evaluate `f(x - shift)` for a periodic sequence sampled with spacing
/// `length/n` (`k` from [`wavenumbers`]), exactly for band-limited data. The Nyquist mode uses a real
/// factor so real input stays real.
pub fn shift_periodic(values: &mut [Complex64], shift: f64, k: &[f64]) {
    let n = values.len();
    forward(values);
    for (j, v) in values.iter_mut().enumerate() {
        let phase = k[j] * shift;
        if j == n / 2 {
            *v *= phase.cos();
        } else {
            *v *= Complex64::from_polar(1.0, -phase);
        }
    }
    inverse(values);
}

/// Spectral derivative of order `order` of a periodic sequence.
pub fn derivative_periodic(values: &[Complex64], order: u32, length: f64) -> Vec<Complex64> {
    let n = values.len();
    let k = wavenumbers(n, length);
    let mut spec = values.to_vec();
    forward(&mut spec);
    let i = Complex64::new(0.0, 1.0);
    for (j, v) in spec.iter_mut().enumerate() {
        if j == n / 2 && order % 2 == 1 {
            *v = Complex64::new(0.0, 0.0);
        } else {
            *v *= (i * k[j]).powu(order);
        }
    }
    inverse(&mut spec);
    spec
}

/// Evaluate the trigonometric interpolant of periodic samples at an arbitrary point.
pub fn interpolate_at(values: &[Complex64], x_min: f64, length: f64, x: f64) -> Complex64 {
    let n = values.len();
    let mut spec = values.to_vec();
    forward(&mut spec);
    let k = wavenumbers(n, length);
    let s = x - x_min;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        if j == n / 2 {
            acc += spec[j] * (k[j] * s).cos();
        } else {
            acc += spec[j] * Complex64::from_polar(1.0, k[j] * s);
        }
    }
    acc / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize, f: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        (0..n).map(|i| f(2.0 * PI * i as f64 / n as f64)).collect()
    }

    #[test]
    fn refinement_is_exact_for_trig_polynomials() {
        let f = |x: f64| Complex64::new((3.0 * x).cos(), (2.0 * x).sin()) + Complex64::from_polar(0.3, -5.0 * x);
        let coarse = samples(16, f);
        let fine = refine_periodic(&coarse, 4);
        let exact = samples(64, f);
        for (a, b) in fine.iter().zip(&exact) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn shift_and_derivative() {
        let n = 32;
        let f = |x: f64| Complex64::new((2.0 * x).sin() + 0.5 * (x).cos(), 0.0);
        let k = wavenumbers(n, 2.0 * PI);
        let mut v = samples(n, f);
        shift_periodic(&mut v, 0.37, &k);
        let exact = samples(n, |x| f(x - 0.37));
        for (a, b) in v.iter().zip(&exact) {
            assert!((a - b).norm() < 1e-13);
        }
        let d = derivative_periodic(&samples(n, f), 3, 2.0 * PI);
        let exact = samples(n, |x| Complex64::new(-8.0 * (2.0 * x).cos() + 0.5 * x.sin(), 0.0));
        for (a, b) in d.iter().zip(&exact) {
            assert!((a - b).norm() < 1e-11);
        }
        let at = interpolate_at(&samples(n, f), 0.0, 2.0 * PI, 1.234);
        assert!((at - f(1.234)).norm() < 1e-13);
    }
}
