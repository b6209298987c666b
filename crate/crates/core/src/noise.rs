//! Time-domain realization of the bridge noise spectrum.
//!
//! The white floor is a Gaussian sequence. The 1/f part is a sum of
//! first-order low-pass filtered Gaussian sources whose poles are spaced one
//! per octave across `[1/(n·dt), 1/(2·dt)]`; each source carries equal power,
//! which makes the sum flat in power per decade.

use std::f64::consts::{LN_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bridge::BridgeConfig;
use crate::error::{Error, Result};

/// One noise sample split into its white and flicker parts (V).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BridgeNoise {
    pub white: f64,
    pub flicker: f64,
}

impl BridgeNoise {
    pub fn total(&self) -> f64 {
        self.white + self.flicker
    }
}

#[derive(Debug, Clone)]
struct Pole {
    alpha: f64,
    beta: f64,
    state: f64,
}

/// Seeded streaming generator for [`BridgeNoise`] samples.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
    white_std: f64,
    poles: Vec<Pole>,
    silent: bool,
}

impl NoiseSource {
    /// `n` is the planned record length; it fixes the lowest pole at `1/(n·dt)`.
    pub fn new(cfg: &BridgeConfig, dt: f64, n: usize, seed: u64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", dt, "dt > 0"));
        }
        if n == 0 {
            return Err(Error::invalid("n", n, "n > 0"));
        }
        let sw = cfg.white_noise_density;
        let white_std = (sw / (2.0 * dt)).sqrt();

        let mut poles = Vec::new();
        if sw > 0.0 && cfg.flicker_corner > 0.0 {
            // Per-octave plateau height a/p gives S_w·f_c/f in aggregate.
            let a = sw * cfg.flicker_corner * 2.0 * LN_2 / PI;
            let p_max = 0.5 / dt;
            let mut p = 1.0 / (n as f64 * dt);
            while p <= p_max * (1.0 + 1e-12) {
                let alpha = (-2.0 * PI * p * dt).exp();
                let plateau = a / p;
                poles.push(Pole {
                    alpha,
                    beta: (1.0 - alpha) * (plateau / (2.0 * dt)).sqrt(),
                    state: 0.0,
                });
                p *= 2.0;
            }
        }

        let mut src = Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            white_std,
            poles,
            silent: sw == 0.0,
        };
        src.prime();
        Ok(src)
    }

    /// Draws each source's initial state from its stationary distribution so
    /// the record has no start-up transient.
    fn prime(&mut self) {
        for p in &mut self.poles {
            let w: f64 = StandardNormal.sample(&mut self.rng);
            p.state = w * p.beta / (1.0 - p.alpha * p.alpha).sqrt();
        }
    }

    pub fn pole_count(&self) -> usize {
        self.poles.len()
    }

    #[inline]
    pub fn next_sample(&mut self) -> BridgeNoise {
        if self.silent {
            return BridgeNoise::default();
        }
        let w: f64 = StandardNormal.sample(&mut self.rng);
        let white = self.white_std * w;
        let mut flicker = 0.0;
        for p in &mut self.poles {
            let w: f64 = StandardNormal.sample(&mut self.rng);
            p.state = p.alpha * p.state + p.beta * w;
            flicker += p.state;
        }
        BridgeNoise { white, flicker }
    }
}

/// `n` samples of total bridge noise at spacing `dt`, reproducible from `seed`.
pub fn sample_noise(cfg: &BridgeConfig, dt: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut src = NoiseSource::new(cfg, dt, n, seed)?;
    Ok((0..n).map(|_| src.next_sample().total()).collect())
}
