//! Butterworth low-pass design and zero-phase application.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::Scalar;

/// Second-order section `(b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad<T> {
    pub b: [T; 3],
    pub a: [T; 2],
}

impl<T: Scalar> Biquad<T> {
    pub fn dc_gain(&self) -> T {
        (self.b[0] + self.b[1] + self.b[2]) / (T::one() + self.a[0] + self.a[1])
    }

    /// Transposed direct-form II state that holds a unit step in steady state.
    fn step_state(&self) -> [T; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[1] * g;
        let z1 = self.b[1] - self.a[0] * g + z2;
        [z1, z2]
    }
}

/// Cascade of biquads realizing a digital Butterworth low-pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Butterworth<T> {
    pub sections: Vec<Biquad<T>>,
}

impl<T: Scalar> Butterworth<T> {
    /// Bilinear-transform design with pre-warped cutoff.
    pub fn lowpass(order: usize, cutoff_hz: f64, rate_hz: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::Parameter("filter order must be at least 1".into()));
        }
        if !(cutoff_hz > 0.0 && cutoff_hz < rate_hz / 2.0) {
            return Err(Error::Parameter(format!(
                "cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
                rate_hz / 2.0
            )));
        }
        let k = (PI * cutoff_hz / rate_hz).tan();
        let k2 = k * k;
        let mut sections = Vec::new();
        for i in 0..order / 2 {
            // analog pole pair s² + c·s + 1
            let c = 2.0 * (PI * (2 * i + 1) as f64 / (2 * order) as f64).sin();
            let a0 = 1.0 + c * k + k2;
            sections.push(Biquad {
                b: [T::lit(k2 / a0), T::lit(2.0 * k2 / a0), T::lit(k2 / a0)],
                a: [T::lit(2.0 * (k2 - 1.0) / a0), T::lit((1.0 - c * k + k2) / a0)],
            });
        }
        if order % 2 == 1 {
            let a0 = 1.0 + k;
            sections.push(Biquad {
                b: [T::lit(k / a0), T::lit(k / a0), T::zero()],
                a: [T::lit((k - 1.0) / a0), T::zero()],
            });
        }
        Ok(Self { sections })
    }

    /// Magnitude response at `freq_hz` for one pass.
    pub fn magnitude(&self, freq_hz: f64, rate_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / rate_hz;
        let (c1, s1, c2, s2) = (w.cos(), -w.sin(), (2.0 * w).cos(), -(2.0 * w).sin());
        self.sections
            .iter()
            .map(|s| {
                let f = |v: T| v.to_f64_lossy();
                let (nr, ni) = (f(s.b[0]) + f(s.b[1]) * c1 + f(s.b[2]) * c2, f(s.b[1]) * s1 + f(s.b[2]) * s2);
                let (dr, di) = (1.0 + f(s.a[0]) * c1 + f(s.a[1]) * c2, f(s.a[0]) * s1 + f(s.a[1]) * s2);
                ((nr * nr + ni * ni) / (dr * dr + di * di)).sqrt()
            })
            .product()
    }

    fn padlen(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }
}

/// Causal cascade filtering; `initial` scales each section's step steady state.
pub fn sosfilt<T: Scalar>(filter: &Butterworth<T>, x: &[T], initial: Option<T>) -> Vec<T> {
    let mut y = x.to_vec();
    let mut level = initial;
    for s in &filter.sections {
        let [mut z1, mut z2] = match level {
            Some(l) => s.step_state().map(|z| z * l),
            None => [T::zero(), T::zero()],
        };
        for v in y.iter_mut() {
            let input = *v;
            let out = s.b[0] * input + z1;
            z1 = s.b[1] * input - s.a[0] * out + z2;
            z2 = s.b[2] * input - s.a[1] * out;
            *v = out;
        }
        level = level.map(|l| l * s.dc_gain());
    }
    y
}

/// Forward–backward (zero-phase) filtering with odd-reflection edge padding
/// and steady-state initial conditions.
pub fn filtfilt<T: Scalar>(filter: &Butterworth<T>, x: &[T]) -> Vec<T> {
    if x.is_empty() {
        return Vec::new();
    }
    let n = x.len();
    let pad = filter.padlen().min(n - 1);
    let two = T::lit(2.0);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| two * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| two * x[n - 1] - x[n - 1 - i]));

    let fwd = sosfilt(filter, &ext, Some(ext[0]));
    let mut rev: Vec<T> = fwd.into_iter().rev().collect();
    let first = rev[0];
    rev = sosfilt(filter, &rev, Some(first));
    rev.reverse();
    rev[pad..pad + n].to_vec()
}
