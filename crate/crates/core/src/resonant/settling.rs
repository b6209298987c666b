use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Outcome of settling detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settling {
    pub settled: bool,
    /// Half the mean peak-to-peak swing over the settled window.
    pub amplitude: f64,
    /// Start of the first settled window (s).
    pub time: f64,
}

/// Tracks per-cycle peak-to-peak swing, with cycles delimited by rising zero
/// crossings, and reports the first run of `n_cycles` consecutive cycles whose
/// swings all lie within `±band` of their mean.
#[derive(Debug, Clone)]
pub struct CycleEnvelope {
    band: f64,
    n_cycles: usize,
    prev: Option<f64>,
    cycle_start: Option<f64>,
    hi: f64,
    lo: f64,
    window: VecDeque<(f64, f64)>,
    result: Option<Settling>,
}

impl CycleEnvelope {
    pub fn new(band: f64, n_cycles: usize) -> Result<Self> {
        if !(band > 0.0 && band <= 0.2) {
            return Err(Error::invalid("band", band, "0 < band <= 0.2"));
        }
        if n_cycles < 10 {
            return Err(Error::invalid("n_cycles", n_cycles, "n_cycles >= 10"));
        }
        Ok(Self {
            band,
            n_cycles,
            prev: None,
            cycle_start: None,
            hi: f64::NEG_INFINITY,
            lo: f64::INFINITY,
            window: VecDeque::with_capacity(n_cycles + 1),
            result: None,
        })
    }

    pub fn settled(&self) -> Option<Settling> {
        self.result
    }

    /// Feeds sample `x` taken at time `t`. Returns the settling result on the
    /// sample where it is first detected.
    #[inline]
    pub fn push(&mut self, x: f64, t: f64) -> Option<Settling> {
        if self.result.is_some() {
            return None;
        }
        let rising = matches!(self.prev, Some(p) if p < 0.0 && x >= 0.0);
        self.prev = Some(x);
        if rising {
            if let Some(start) = self.cycle_start {
                self.window.push_back((start, self.hi - self.lo));
                if self.window.len() > self.n_cycles {
                    self.window.pop_front();
                }
                if self.window.len() == self.n_cycles {
                    self.result = self.check_window();
                }
            }
            self.cycle_start = Some(t);
            self.hi = x;
            self.lo = x;
            return self.result;
        }
        if self.cycle_start.is_some() {
            self.hi = self.hi.max(x);
            self.lo = self.lo.min(x);
        }
        None
    }

    fn check_window(&self) -> Option<Settling> {
        let mean = self.window.iter().map(|w| w.1).sum::<f64>() / self.window.len() as f64;
        if !(mean > 0.0) {
            return None;
        }
        let tol = self.band * mean;
        self.window
            .iter()
            .all(|w| (w.1 - mean).abs() <= tol)
            .then(|| Settling {
                settled: true,
                amplitude: mean / 2.0,
                time: self.window[0].0,
            })
    }
}

/// Settling detection over a sampled record.
pub fn detect_settling(signal: &[f64], fs: f64, band: f64, n_cycles: usize) -> Result<Settling> {
    let mut env = CycleEnvelope::new(band, n_cycles)?;
    for (i, &x) in signal.iter().enumerate() {
        if let Some(s) = env.push(x, i as f64 / fs) {
            return Ok(s);
        }
    }
    Ok(Settling {
        settled: false,
        amplitude: 0.0,
        time: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Uniform};
    use std::f64::consts::PI;

    const FS: f64 = 1e6;
    const F: f64 = 10e3;

    #[test]
    fn constant_sine_settles_at_first_window() {
        let x: Vec<f64> = (0..100_000)
            .map(|i| 2.5 * (2.0 * PI * F * i as f64 / FS + 0.1).sin())
            .collect();
        let s = detect_settling(&x, FS, 0.01, 20).unwrap();
        assert!(s.settled);
        assert!((s.amplitude - 2.5).abs() < 2.5e-3, "{}", s.amplitude);
        // First rising crossing is one period minus the phase offset in.
        assert!(s.time < 1.0 / F, "{}", s.time);
    }

    #[test]
    fn growing_signal_never_settles() {
        let x: Vec<f64> = (0..200_000)
            .map(|i| {
                let t = i as f64 / FS;
                (t * F * 0.05).exp() * (2.0 * PI * F * t).sin()
            })
            .collect();
        assert!(!detect_settling(&x, FS, 0.02, 10).unwrap().settled);
    }

    #[test]
    fn jittered_sine_settles() {
        // Amplitude redrawn each cycle within ±0.5 %.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let jitter = Uniform::new_inclusive(-0.005, 0.005).unwrap();
        let per = (FS / F) as usize;
        let mut x = Vec::new();
        for _ in 0..500 {
            let a = 1.0 + jitter.sample(&mut rng);
            x.extend((0..per).map(|i| a * (2.0 * PI * i as f64 / per as f64 + 0.2).sin()));
        }
        let s = detect_settling(&x, FS, 0.02, 50).unwrap();
        assert!(s.settled);
        assert!((s.amplitude - 1.0).abs() < 0.01);
    }

    #[test]
    fn parameter_bounds() {
        assert!(detect_settling(&[], FS, 0.0, 10).is_err());
        assert!(detect_settling(&[], FS, 0.3, 10).is_err());
        assert!(detect_settling(&[], FS, 0.1, 9).is_err());
    }
}
