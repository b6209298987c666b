//! Digital frequency readout by rising-edge counting.
//!
//! A hysteresis comparator arms below `-h/2` and fires above `+h/2`. The gate
//! opens at the first rising edge it sees and stays open for `round(T_g·fs)`
//! samples, so a gated count is within one cycle of `f·T_g`. Reciprocal mode
//! times the complete periods inside the same gate, with edge instants
//! interpolated linearly between samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violations};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterMode {
    GatedCount,
    Reciprocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterConfig {
    /// Gate time (s).
    pub gate_time: f64,
    pub mode: CounterMode,
    /// Comparator hysteresis width (signal units).
    pub hysteresis: f64,
}

impl Default for CounterConfig {
    fn default() -> Self {
        Self {
            gate_time: 0.1,
            mode: CounterMode::Reciprocal,
            hysteresis: 0.0,
        }
    }
}

impl CounterConfig {
    pub fn check(&self, prefix: &str, out: &mut Violations) {
        out.require(
            self.gate_time > 0.0 && self.gate_time.is_finite(),
            prefix,
            "gate_time",
            self.gate_time,
            "> 0",
        );
        out.require(
            self.hysteresis >= 0.0,
            prefix,
            "hysteresis",
            self.hysteresis,
            ">= 0",
        );
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Violations::new();
        self.check("", &mut v);
        v.into_result()
    }

    pub fn gate_samples(&self, fs: f64) -> usize {
        (self.gate_time * fs).round() as usize
    }
}

/// Rising-edge comparator with hysteresis.
#[derive(Debug, Clone)]
pub struct EdgeDetector {
    low: f64,
    high: f64,
    armed: bool,
    prev: Option<f64>,
    index: usize,
}

impl EdgeDetector {
    pub fn new(hysteresis: f64) -> Self {
        Self {
            low: -hysteresis / 2.0,
            high: hysteresis / 2.0,
            armed: false,
            prev: None,
            index: 0,
        }
    }

    /// Feeds one sample; returns the edge position in fractional sample index.
    #[inline]
    pub fn push(&mut self, x: f64) -> Option<f64> {
        let n = self.index;
        self.index += 1;
        let prev = self.prev.replace(x);
        if x < self.low {
            self.armed = true;
            return None;
        }
        if self.armed && x >= self.high {
            self.armed = false;
            // `armed` implies a previous sample below `high`.
            let p = prev.unwrap_or(self.low);
            let frac = if x > p {
                (self.high - p) / (x - p)
            } else {
                1.0
            };
            return Some(n as f64 - 1.0 + frac.clamp(0.0, 1.0));
        }
        None
    }
}

/// Result of one gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyReading {
    pub frequency: f64,
    /// Complete cycles inside the gate.
    pub count: u64,
    pub gate_time: f64,
}

/// Streaming gated counter; see [`measure_frequency`].
#[derive(Debug, Clone)]
pub struct GateCounter {
    cfg: CounterConfig,
    fs: f64,
    detector: EdgeDetector,
    gate_samples: usize,
    index: usize,
    first: Option<(usize, f64)>,
    last_edge: f64,
    count: u64,
    complete: bool,
}

impl GateCounter {
    pub fn new(cfg: CounterConfig, fs: f64) -> Result<Self> {
        cfg.validate()?;
        if !(fs > 0.0) {
            return Err(Error::invalid("fs", fs, "fs > 0"));
        }
        let gate_samples = cfg.gate_samples(fs);
        if gate_samples == 0 {
            return Err(Error::invalid(
                "gate_time",
                cfg.gate_time,
                "gate_time*fs >= 1",
            ));
        }
        Ok(Self {
            detector: EdgeDetector::new(cfg.hysteresis),
            cfg,
            fs,
            gate_samples,
            index: 0,
            first: None,
            last_edge: 0.0,
            count: 0,
            complete: false,
        })
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        if self.complete {
            return;
        }
        let n = self.index;
        self.index += 1;
        let edge = self.detector.push(x);
        match self.first {
            None => {
                if let Some(pos) = edge {
                    self.first = Some((n, pos));
                    self.last_edge = pos;
                }
            }
            Some((start, _)) => {
                if let Some(pos) = edge {
                    self.count += 1;
                    self.last_edge = pos;
                }
                if n >= start + self.gate_samples {
                    self.complete = true;
                }
            }
        }
    }

    /// Reading for a closed gate.
    pub fn reading(&self) -> Result<FrequencyReading> {
        let Some((start, first_pos)) = self.first else {
            return Err(Error::NoSignal);
        };
        if !self.complete {
            return Err(Error::SignalTooShort {
                have: self.index,
                need: start + self.gate_samples + 1,
            });
        }
        if self.count == 0 {
            return Err(Error::NoSignal);
        }
        let gate_time = self.gate_samples as f64 / self.fs;
        let frequency = match self.cfg.mode {
            CounterMode::GatedCount => self.count as f64 / gate_time,
            CounterMode::Reciprocal => self.count as f64 * self.fs / (self.last_edge - first_pos),
        };
        Ok(FrequencyReading {
            frequency,
            count: self.count,
            gate_time,
        })
    }
}

impl GateCounter {
    /// Reading over whatever part of the gate has elapsed; equals
    /// [`GateCounter::reading`] once the gate has closed.
    pub fn reading_so_far(&self) -> Result<FrequencyReading> {
        if self.complete {
            return self.reading();
        }
        let Some((start, first_pos)) = self.first else {
            return Err(Error::NoSignal);
        };
        if self.count == 0 {
            return Err(Error::NoSignal);
        }
        let gate_time = (self.index - 1 - start) as f64 / self.fs;
        let frequency = match self.cfg.mode {
            CounterMode::GatedCount => self.count as f64 / gate_time,
            CounterMode::Reciprocal => self.count as f64 * self.fs / (self.last_edge - first_pos),
        };
        Ok(FrequencyReading {
            frequency,
            count: self.count,
            gate_time,
        })
    }
}

/// Measures the frequency of `signal` sampled at `fs`.
///
/// The record must extend one gate beyond the first rising edge.
pub fn measure_frequency(signal: &[f64], fs: f64, cfg: &CounterConfig) -> Result<FrequencyReading> {
    let mut counter = GateCounter::new(*cfg, fs)?;
    let need = counter.gate_samples;
    if signal.len() < need {
        return Err(Error::SignalTooShort {
            have: signal.len(),
            need,
        });
    }
    for &x in signal {
        counter.push(x);
        if counter.is_complete() {
            break;
        }
    }
    counter.reading()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(f: f64, fs: f64, seconds: f64, phase: f64) -> Vec<f64> {
        let n = (seconds * fs) as usize;
        (0..n)
            .map(|i| (2.0 * PI * f * i as f64 / fs + phase).sin())
            .collect()
    }

    #[test]
    fn gated_count_integer_frequency() {
        let fs = 1e6;
        let x = sine(27513.0, fs, 1.001, 0.3);
        let cfg = CounterConfig {
            gate_time: 1.0,
            mode: CounterMode::GatedCount,
            hysteresis: 0.0,
        };
        let r = measure_frequency(&x, fs, &cfg).unwrap();
        assert_eq!(r.count, 27513);
        assert_eq!(r.frequency, 27513.0);
    }

    #[test]
    fn zero_signal_is_no_signal() {
        let x = vec![0.0; 100_000];
        let cfg = CounterConfig::default();
        assert_eq!(
            measure_frequency(&x, 1e6, &cfg).unwrap_err(),
            Error::NoSignal
        );
    }

    #[test]
    fn short_record_rejected() {
        let x = sine(1000.0, 1e5, 0.05, 0.0);
        let cfg = CounterConfig::default();
        assert!(matches!(
            measure_frequency(&x, 1e5, &cfg).unwrap_err(),
            Error::SignalTooShort { .. }
        ));
    }

    #[test]
    fn reciprocal_resolves_fraction_of_hertz() {
        let fs = 10e6;
        let f = 27500.7;
        let x = sine(f, fs, 0.1001, 1.0);
        let mut cfg = CounterConfig {
            gate_time: 0.1,
            mode: CounterMode::GatedCount,
            hysteresis: 0.0,
        };
        let gated = measure_frequency(&x, fs, &cfg).unwrap();
        assert!((gated.frequency - f).abs() <= 10.0, "{}", gated.frequency);
        cfg.mode = CounterMode::Reciprocal;
        let recip = measure_frequency(&x, fs, &cfg).unwrap();
        assert!((recip.frequency - f).abs() <= 0.1, "{}", recip.frequency);
    }

    #[test]
    fn edge_interpolation() {
        let mut d = EdgeDetector::new(0.0);
        assert_eq!(d.push(-1.0), None);
        let pos = d.push(3.0).unwrap();
        assert!((pos - 0.25).abs() < 1e-15);
        // Must re-arm before firing again.
        assert_eq!(d.push(5.0), None);
    }
}
