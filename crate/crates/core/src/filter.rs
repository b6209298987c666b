//! First-order discrete sections obtained by the bilinear transform with
//! frequency prewarping, so the analog corner maps exactly onto the digital one.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `y[n] = b0·x[n] + b1·x[n-1] - a1·y[n-1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrder {
    b0: f64,
    b1: f64,
    a1: f64,
    x1: f64,
    y1: f64,
}

fn prewarp(corner: f64, fs: f64) -> Result<f64> {
    if !(corner > 0.0 && corner < fs / 2.0) {
        return Err(Error::invalid("cutoff", corner, "0 < cutoff < fs/2"));
    }
    Ok((PI * corner / fs).tan())
}

impl FirstOrder {
    fn from_coefficients(b0: f64, b1: f64, a1: f64) -> Self {
        Self {
            b0,
            b1,
            a1,
            x1: 0.0,
            y1: 0.0,
        }
    }

    /// Single-pole low-pass with unity DC gain.
    pub fn low_pass(cutoff: f64, fs: f64) -> Result<Self> {
        let k = prewarp(cutoff, fs)?;
        Ok(Self::from_coefficients(
            k / (1.0 + k),
            k / (1.0 + k),
            (k - 1.0) / (k + 1.0),
        ))
    }

    /// Single-pole high-pass: zero DC gain, unity gain at Nyquist.
    pub fn high_pass(cutoff: f64, fs: f64) -> Result<Self> {
        let k = prewarp(cutoff, fs)?;
        Ok(Self::from_coefficients(
            1.0 / (1.0 + k),
            -1.0 / (1.0 + k),
            (k - 1.0) / (k + 1.0),
        ))
    }

    /// Unity-magnitude phase-lead section `(s - ωa)/(s + ωa)`: inverting at DC,
    /// +90° at `center`, 0° at Nyquist.
    pub fn all_pass_lead(center: f64, fs: f64) -> Result<Self> {
        let k = prewarp(center, fs)?;
        Ok(Self::from_coefficients(
            (1.0 - k) / (1.0 + k),
            -1.0,
            (k - 1.0) / (k + 1.0),
        ))
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.b1 * self.x1 - self.a1 * self.y1;
        self.x1 = x;
        self.y1 = y;
        y
    }

    pub fn reset(&mut self) {
        self.x1 = 0.0;
        self.y1 = 0.0;
    }

    /// Previous input and output `(x[n-1], y[n-1])`.
    pub fn state(&self) -> (f64, f64) {
        (self.x1, self.y1)
    }

    pub fn set_state(&mut self, prev_input: f64, prev_output: f64) {
        self.x1 = prev_input;
        self.y1 = prev_output;
    }

    /// Output of the previous call to `process`.
    pub fn last_output(&self) -> f64 {
        self.y1
    }

    /// Complex frequency response at `f` for sample rate `fs`.
    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
        (self.b0 + self.b1 * z_inv) / (1.0 + self.a1 * z_inv)
    }
}
