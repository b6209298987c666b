//! Welch power spectral density estimation for checking simulated records.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex64, FftPlanner};

use crate::error::{Error, Result};

/// One-sided PSD on a uniform grid `k·resolution`, k = 0..=segment/2.
#[derive(Debug, Clone)]
pub struct Psd {
    pub resolution: f64,
    pub density: Vec<f64>,
}

impl Psd {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.resolution
    }

    /// Mean density over bins with centre in `[f1, f2]`.
    pub fn mean_density(&self, f1: f64, f2: f64) -> f64 {
        let (sum, n) = self
            .bins_in(f1, f2)
            .fold((0.0, 0usize), |(s, n), k| (s + self.density[k], n + 1));
        sum / n.max(1) as f64
    }

    /// Integrated power over bins with centre in `[f1, f2]` (V²).
    pub fn band_power(&self, f1: f64, f2: f64) -> f64 {
        self.bins_in(f1, f2).map(|k| self.density[k]).sum::<f64>() * self.resolution
    }

    /// Least-squares slope of log10(PSD) against log10(f) over `[f1, f2]`.
    pub fn log_slope(&self, f1: f64, f2: f64) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .bins_in(f1, f2)
            .filter(|&k| k > 0 && self.density[k] > 0.0)
            .map(|k| (self.frequency(k).log10(), self.density[k].log10()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    fn bins_in(&self, f1: f64, f2: f64) -> impl Iterator<Item = usize> + '_ {
        let lo = (f1 / self.resolution).ceil().max(0.0) as usize;
        let hi =
            ((f2 / self.resolution).floor() as usize).min(self.density.len().saturating_sub(1));
        lo..=hi
    }
}

/// Welch estimate with a Hann window, 50 % overlap and per-segment mean removal.
pub fn welch_psd(x: &[f64], fs: f64, segment: usize) -> Result<Psd> {
    if segment < 8 || !segment.is_power_of_two() {
        return Err(Error::invalid("segment", segment, "power of two >= 8"));
    }
    if x.len() < segment {
        return Err(Error::SignalTooShort {
            have: x.len(),
            need: segment,
        });
    }
    let window: Vec<f64> = (0..segment)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / segment as f64).cos())
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();

    let fft = FftPlanner::new().plan_fft_forward(segment);
    let mut buf = vec![Complex64::new(0.0, 0.0); segment];
    let half = segment / 2;
    let mut acc = vec![0.0; half + 1];
    let hop = segment / 2;
    let mut count = 0usize;
    let mut start = 0;
    while start + segment <= x.len() {
        let seg = &x[start..start + segment];
        let mean = seg.iter().sum::<f64>() / segment as f64;
        for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += hop;
    }

    let scale = 1.0 / (fs * window_power * count as f64);
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let one_sided = if k == 0 || k == half { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    Ok(Psd {
        resolution: fs / segment as f64,
        density,
    })
}
