//! Readout path of the static (surface-stress) sensor array.
//!
//! Four cantilevers share one chain through an analog multiplexer. The
//! chopper-stabilized first stage is modeled parametrically: its input offset
//! and the flicker noise below the chopping frequency are attenuated by
//! `chop_suppression_db`, the white floor passes unchanged. A single-pole
//! low-pass follows, then the offset-compensation DAC (injected at the first
//! stage output, midscale = no correction) and two fixed gain stages.

use serde::{Deserialize, Serialize};

use crate::bridge::{bridge_output, BridgeConfig};
use crate::error::{Error, Result, Violations};
use crate::filter::FirstOrder;
use crate::mech::{clamp_strain, CantileverDevice, ClampLoad};
use crate::noise::{BridgeNoise, NoiseSource};

pub const CHANNEL_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticChainConfig {
    #[serde(default = "channel_count")]
    pub n_channels: usize,
    /// Chopping frequency (Hz).
    pub chop_frequency: f64,
    pub first_stage_gain: f64,
    /// Input-referred offset of the first stage before chopping (V).
    pub input_offset: f64,
    pub chop_suppression_db: f64,
    pub lpf_cutoff: f64,
    pub dac_bits: u32,
    /// Span of the compensation DAC at the first stage output (V).
    pub dac_full_scale: f64,
    pub gain2: f64,
    pub gain3: f64,
    /// Discrete-time rate; `None` means 100 × chop frequency.
    #[serde(default)]
    pub sample_rate: Option<f64>,
}

fn channel_count() -> usize {
    CHANNEL_COUNT
}

impl Default for StaticChainConfig {
    fn default() -> Self {
        Self {
            n_channels: CHANNEL_COUNT,
            chop_frequency: 1e3,
            first_stage_gain: 100.0,
            input_offset: 0.5e-3,
            chop_suppression_db: 40.0,
            lpf_cutoff: 10.0,
            dac_bits: 14,
            dac_full_scale: 10e-3,
            gain2: 10f64.sqrt(),
            gain3: 10f64.sqrt(),
            sample_rate: None,
        }
    }
}

impl StaticChainConfig {
    pub fn check(&self, prefix: &str, out: &mut Violations) {
        out.require(
            self.n_channels == CHANNEL_COUNT,
            prefix,
            "n_channels",
            self.n_channels,
            "== 4",
        );
        out.require(
            self.lpf_cutoff > 0.0,
            prefix,
            "lpf_cutoff",
            self.lpf_cutoff,
            "> 0",
        );
        out.require(
            self.chop_frequency > 10.0 * self.lpf_cutoff,
            prefix,
            "chop_frequency",
            self.chop_frequency,
            "chop_frequency > 10*lpf_cutoff",
        );
        out.require(
            self.first_stage_gain > 0.0,
            prefix,
            "first_stage_gain",
            self.first_stage_gain,
            "> 0",
        );
        out.require(self.gain2 > 0.0, prefix, "gain2", self.gain2, "> 0");
        out.require(self.gain3 > 0.0, prefix, "gain3", self.gain3, "> 0");
        out.require(
            (4..=16).contains(&self.dac_bits),
            prefix,
            "dac_bits",
            self.dac_bits,
            "4 <= dac_bits <= 16",
        );
        out.require(
            self.dac_full_scale > 0.0,
            prefix,
            "dac_full_scale",
            self.dac_full_scale,
            "> 0",
        );
        out.require(
            self.chop_suppression_db >= 0.0,
            prefix,
            "chop_suppression_db",
            self.chop_suppression_db,
            ">= 0",
        );
        out.require(
            self.input_offset.is_finite(),
            prefix,
            "input_offset",
            self.input_offset,
            "finite",
        );
        if let Some(fs) = self.sample_rate {
            out.require(
                fs > 2.0 * self.chop_frequency,
                prefix,
                "sample_rate",
                fs,
                "sample_rate > 2*chop_frequency",
            );
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Violations::new();
        self.check("", &mut v);
        v.into_result()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate.unwrap_or(100.0 * self.chop_frequency)
    }

    pub fn suppression_factor(&self) -> f64 {
        10f64.powf(-self.chop_suppression_db / 20.0)
    }

    /// First stage offset left after chopping, input-referred (V).
    pub fn residual_offset(&self) -> f64 {
        self.input_offset * self.suppression_factor()
    }

    pub fn dc_gain(&self) -> f64 {
        self.first_stage_gain * self.gain2 * self.gain3
    }

    pub fn dac_codes(&self) -> u32 {
        1 << self.dac_bits
    }

    pub fn midscale_code(&self) -> u32 {
        1 << (self.dac_bits - 1)
    }

    /// Correction subtracted at the first stage output for `code` (V).
    pub fn dac_offset(&self, code: u32) -> f64 {
        code as f64 / self.dac_codes() as f64 * self.dac_full_scale - self.dac_full_scale / 2.0
    }

    /// One DAC step referred to the chain output (V).
    pub fn output_lsb(&self) -> f64 {
        self.dac_full_scale / self.dac_codes() as f64 * self.gain2 * self.gain3
    }

    /// LPF time constant in samples, times ten.
    pub fn settle_samples(&self) -> usize {
        let tau = 1.0 / (2.0 * std::f64::consts::PI * self.lpf_cutoff);
        (10.0 * tau * self.sample_rate()).ceil() as usize
    }
}

/// Observable state of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainState {
    pub selected_channel: usize,
    pub dac_code: u32,
}

/// A bridge sample presented to the multiplexer input.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChainInput {
    pub voltage: f64,
    pub noise: BridgeNoise,
}

#[derive(Debug, Clone)]
pub struct StaticChain {
    cfg: StaticChainConfig,
    state: ChainState,
    lpf: FirstOrder,
    flicker_split: FirstOrder,
    suppression: f64,
}

impl StaticChain {
    pub fn new(cfg: StaticChainConfig) -> Result<Self> {
        cfg.validate()?;
        let fs = cfg.sample_rate();
        Ok(Self {
            state: ChainState {
                selected_channel: 0,
                dac_code: cfg.midscale_code(),
            },
            lpf: FirstOrder::low_pass(cfg.lpf_cutoff, fs)?,
            flicker_split: FirstOrder::low_pass(cfg.chop_frequency, fs)?,
            suppression: cfg.suppression_factor(),
            cfg,
        })
    }

    pub fn config(&self) -> &StaticChainConfig {
        &self.cfg
    }

    pub fn state(&self) -> ChainState {
        self.state
    }

    /// Current low-pass filter output (V, first stage referred).
    pub fn lpf_state(&self) -> f64 {
        self.lpf.last_output()
    }

    /// Routes cantilever `ch` to the chain and restarts filter settling.
    pub fn select_channel(&mut self, ch: usize) -> Result<()> {
        if ch >= CHANNEL_COUNT {
            return Err(Error::invalid("channel", ch, "channel < 4"));
        }
        self.state.selected_channel = ch;
        self.reset_filters();
        Ok(())
    }

    pub fn set_dac_code(&mut self, code: u32) -> Result<()> {
        if code >= self.cfg.dac_codes() {
            return Err(Error::invalid("dac_code", code, "dac_code < 2^dac_bits"));
        }
        self.state.dac_code = code;
        Ok(())
    }

    fn reset_filters(&mut self) {
        self.lpf.reset();
        self.flicker_split.reset();
    }

    /// Processes one sample from the selected cantilever.
    pub fn process_sample(&mut self, bridge_voltage: f64, noise: BridgeNoise) -> f64 {
        let low_flicker = self.flicker_split.process(noise.flicker);
        let shaped = noise.white + (noise.flicker - low_flicker) + self.suppression * low_flicker;
        let stage1 =
            self.cfg.first_stage_gain * (bridge_voltage + shaped + self.cfg.residual_offset());
        let filtered = self.lpf.process(stage1);
        self.cfg.gain3 * self.cfg.gain2 * (filtered - self.cfg.dac_offset(self.state.dac_code))
    }

    /// Processes one multiplexer frame, reading only the selected channel.
    pub fn process_frame(&mut self, frame: &[ChainInput; CHANNEL_COUNT]) -> f64 {
        let input = frame[self.state.selected_channel];
        self.process_sample(input.voltage, input.noise)
    }

    /// Settled noise-free output for a DC bridge voltage.
    pub fn dc_output(&self, bridge_voltage: f64) -> f64 {
        let c = &self.cfg;
        c.gain3
            * c.gain2
            * (c.first_stage_gain * (bridge_voltage + c.residual_offset())
                - c.dac_offset(self.state.dac_code))
    }

    fn mean_settled_output(&mut self, code: u32, quiet: &[ChainInput]) -> f64 {
        self.state.dac_code = code;
        self.reset_filters();
        let skip = self.cfg.settle_samples();
        let mut sum = 0.0;
        for (i, s) in quiet.iter().enumerate() {
            let y = self.process_sample(s.voltage, s.noise);
            if i >= skip {
                sum += y;
            }
        }
        sum / (quiet.len() - skip) as f64
    }

    /// Finds the DAC code that nulls the mean settled output for the quiet
    /// (unloaded) record, stores it, and returns it.
    ///
    /// The output falls monotonically with the code, so the zero crossing is
    /// located by bisection and the better of the two bracketing codes is kept.
    pub fn calibrate_offset(&mut self, quiet: &[ChainInput]) -> Result<u32> {
        let need = self.cfg.settle_samples() + 1;
        if quiet.len() < need {
            return Err(Error::SignalTooShort {
                have: quiet.len(),
                need,
            });
        }
        let max_code = self.cfg.dac_codes() - 1;
        let (mut lo, mut hi) = (0u32, max_code);
        let best = if self.mean_settled_output(lo, quiet) <= 0.0 {
            lo
        } else if self.mean_settled_output(hi, quiet) >= 0.0 {
            hi
        } else {
            // Invariant: mean(lo) > 0 > mean(hi).
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if self.mean_settled_output(mid, quiet) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let r_lo = self.mean_settled_output(lo, quiet).abs();
            let r_hi = self.mean_settled_output(hi, quiet).abs();
            if r_lo <= r_hi {
                lo
            } else {
                hi
            }
        };

        let residual = self.mean_settled_output(best, quiet).abs();
        self.reset_filters();
        let limit = self.cfg.output_lsb();
        if residual > limit {
            return Err(Error::OffsetOutOfRange { residual, limit });
        }
        self.state.dac_code = best;
        Ok(best)
    }
}

/// A static-mode measurement: four cantilevers under given surface stress,
/// one of them routed through the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticExperiment {
    pub device: CantileverDevice,
    pub bridge: BridgeConfig,
    pub chain: StaticChainConfig,
    /// Differential surface stress on each cantilever (N/m).
    pub surface_stress: [f64; CHANNEL_COUNT],
    pub channel: usize,
    pub duration: f64,
    /// Null the offset on an unloaded record before measuring.
    pub calibrate: bool,
}

/// Output record of [`run_static`].
#[derive(Debug, Clone, PartialEq)]
pub struct StaticTrace {
    pub sample_rate: f64,
    /// Chain output, one value per sample (V).
    pub output: Vec<f64>,
    /// Noise-free bridge voltage of the selected cantilever (V).
    pub bridge_voltage: f64,
    /// Mean output after ten LPF time constants (V).
    pub settled_output: f64,
    pub dac_code: u32,
}

impl StaticExperiment {
    pub fn check(&self, out: &mut Violations) {
        self.device.check("device", out);
        self.bridge.check("bridge", out);
        self.chain.check("chain", out);
        out.require(
            self.channel < CHANNEL_COUNT,
            "",
            "channel",
            self.channel,
            "channel < 4",
        );
        for (i, s) in self.surface_stress.iter().enumerate() {
            out.require(
                s.is_finite(),
                "",
                &format!("surface_stress[{i}]"),
                s,
                "finite",
            );
        }
        let min = self.chain.settle_samples() as f64 / self.chain.sample_rate();
        out.require(
            self.duration > min,
            "",
            "duration",
            self.duration,
            "duration > 10 LPF time constants",
        );
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Violations::new();
        self.check(&mut v);
        v.into_result()
    }

    /// Noise-free bridge voltage for cantilever `ch`.
    pub fn bridge_voltage(&self, ch: usize) -> Result<f64> {
        let g = &self.device.geometry;
        let m = &self.device.material;
        let strain = clamp_strain(g, m, ClampLoad::SurfaceStress(self.surface_stress[ch]));
        bridge_output(&self.bridge, strain)
    }
}

/// Runs a static measurement. The calibration record uses a noise stream
/// derived from `seed` but distinct from the measurement's.
pub fn run_static(exp: &StaticExperiment, seed: u64) -> Result<StaticTrace> {
    exp.validate()?;
    let fs = exp.chain.sample_rate();
    let dt = 1.0 / fs;
    let mut chain = StaticChain::new(exp.chain)?;
    chain.select_channel(exp.channel)?;

    if exp.calibrate {
        let n = 2 * exp.chain.settle_samples();
        let mut noise = NoiseSource::new(&exp.bridge, dt, n, seed ^ CALIBRATION_STREAM)?;
        let quiet: Vec<ChainInput> = (0..n)
            .map(|_| ChainInput {
                voltage: 0.0,
                noise: noise.next_sample(),
            })
            .collect();
        chain.calibrate_offset(&quiet)?;
    }

    let voltages = [
        exp.bridge_voltage(0)?,
        exp.bridge_voltage(1)?,
        exp.bridge_voltage(2)?,
        exp.bridge_voltage(3)?,
    ];
    let n = (exp.duration * fs).ceil() as usize;
    let mut noise = NoiseSource::new(&exp.bridge, dt, n, seed)?;
    let mut output = Vec::with_capacity(n);
    for _ in 0..n {
        // Only the selected cantilever's noise reaches the chain.
        let mut frame = [ChainInput::default(); CHANNEL_COUNT];
        for (f, v) in frame.iter_mut().zip(voltages) {
            f.voltage = v;
        }
        frame[exp.channel].noise = noise.next_sample();
        output.push(chain.process_frame(&frame));
    }
    let skip = exp.chain.settle_samples();
    let settled = &output[skip.min(output.len())..];
    let settled_output = settled.iter().sum::<f64>() / settled.len().max(1) as f64;
    Ok(StaticTrace {
        sample_rate: fs,
        bridge_voltage: voltages[exp.channel],
        settled_output,
        dac_code: chain.state().dac_code,
        output,
    })
}

const CALIBRATION_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
