//! Closed-loop model of the resonant cantilever system.
//!
//! Signal path per sample: clamp strain → bridge (+ noise, + optional DC
//! disturbance) → instrumentation amplifier → high-pass cascade → phase
//! shifter → variable gain → amplitude limiter → class-AB buffer → coil
//! current → Lorentz force → resonator. All blocks run synchronously at the
//! loop sample rate.

mod analysis;
mod settling;
mod sim;

pub use analysis::LoopAnalysis;
pub use settling::{detect_settling, CycleEnvelope, Settling};
pub use sim::{run_oscillator, simulate_loop, LoopTrace, ResonantSystem, SettledMetrics};

use serde::{Deserialize, Serialize};

use crate::error::{Result, Violations};
use crate::filter::FirstOrder;

/// Amplitude-limiting characteristic of the nonlinear amplifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimiterKind {
    /// `V_lim·tanh(x/V_lim)`.
    Tanh,
    /// `clamp(x, ±V_lim)`.
    HardClip,
    /// No limiting; only the buffer current clamp bounds the loop.
    Off,
}

/// Node whose rising edges the frequency counter sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterTap {
    /// Bridge output including noise and disturbance.
    Bridge,
    /// High-pass cascade output.
    Filtered,
    /// Mechanical tip displacement.
    Displacement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    /// Instrumentation amplifier gain (V/V).
    pub dda_gain: f64,
    /// First-order high-pass corners (Hz); empty bypasses the cascade.
    pub hpf_cutoffs: Vec<f64>,
    /// Enables the all-pass section that supplies the +90° the loop needs at
    /// resonance, since the bridge senses displacement.
    #[serde(default = "yes")]
    pub phase_shifter: bool,
    /// Phase shifter centre (Hz); `None` tunes it to the unloaded resonance.
    #[serde(default)]
    pub phase_center: Option<f64>,
    pub vga_gain: f64,
    pub limiter: LimiterKind,
    /// Limiter output level (V).
    pub limiter_level: f64,
    /// Buffer output current limit (A).
    pub buffer_current_limit: f64,
    /// Coil resistance (Ω).
    pub coil_resistance: f64,
    /// Coil length perpendicular to the field that carries the force (m).
    pub coil_length: f64,
    /// Permanent-magnet flux density (T).
    pub field: f64,
    pub sample_rate: f64,
    /// DC step added at the bridge output from t = 0 (V).
    #[serde(default)]
    pub disturbance: f64,
    #[serde(default = "default_tap")]
    pub counter_tap: CounterTap,
    /// Relative envelope band for settling detection.
    #[serde(default = "default_band")]
    pub settle_band: f64,
    #[serde(default = "default_cycles")]
    pub settle_cycles: usize,
    /// Keep every n-th sample in the stored trace.
    #[serde(default = "default_decimation")]
    pub trace_decimation: usize,
}

fn yes() -> bool {
    true
}
fn default_tap() -> CounterTap {
    CounterTap::Bridge
}
fn default_band() -> f64 {
    0.02
}
fn default_cycles() -> usize {
    200
}
fn default_decimation() -> usize {
    100
}

impl LoopConfig {
    /// Defaults for a resonator at `f0`: two high-pass sections at `f0/100`,
    /// gain 10 instrumentation amplifier, 2 mV tanh limiter, 20 Ω coil,
    /// 100 µm force-carrying coil segment, 0.1 T magnet, fs = 3 MHz. The VGA
    /// is left at 1 and is normally set from [`LoopAnalysis::critical_vga_gain`].
    pub fn for_resonance(f0: f64) -> Self {
        Self {
            dda_gain: 10.0,
            hpf_cutoffs: vec![f0 / 100.0, f0 / 100.0],
            phase_shifter: true,
            phase_center: None,
            vga_gain: 1.0,
            limiter: LimiterKind::Tanh,
            limiter_level: 2e-3,
            buffer_current_limit: 1e-3,
            coil_resistance: 20.0,
            coil_length: 100e-6,
            field: 0.1,
            sample_rate: 3e6,
            disturbance: 0.0,
            counter_tap: CounterTap::Bridge,
            settle_band: default_band(),
            settle_cycles: default_cycles(),
            trace_decimation: default_decimation(),
        }
    }

    /// Checks the block parameters against resonance `f0`.
    pub fn check(&self, prefix: &str, f0: f64, out: &mut Violations) {
        for (i, &fc) in self.hpf_cutoffs.iter().enumerate() {
            out.require(
                fc > 0.0 && fc < f0 / 10.0,
                prefix,
                &format!("hpf_cutoffs[{i}]"),
                fc,
                "0 < hpf_cutoff < f0/10",
            );
        }
        out.require(
            self.sample_rate >= 100.0 * f0,
            prefix,
            "sample_rate",
            self.sample_rate,
            "sample_rate >= 100*f0",
        );
        out.require(
            self.dda_gain > 0.0,
            prefix,
            "dda_gain",
            self.dda_gain,
            "> 0",
        );
        out.require(
            self.vga_gain >= 0.0,
            prefix,
            "vga_gain",
            self.vga_gain,
            ">= 0",
        );
        out.require(
            self.limiter_level > 0.0,
            prefix,
            "limiter_level",
            self.limiter_level,
            "> 0",
        );
        out.require(
            self.buffer_current_limit > 0.0,
            prefix,
            "buffer_current_limit",
            self.buffer_current_limit,
            "> 0",
        );
        out.require(
            self.coil_resistance > 0.0,
            prefix,
            "coil_resistance",
            self.coil_resistance,
            "> 0",
        );
        out.require(
            self.coil_length > 0.0,
            prefix,
            "coil_length",
            self.coil_length,
            "> 0",
        );
        out.require(self.field > 0.0, prefix, "field", self.field, "> 0");
        if let Some(c) = self.phase_center {
            out.require(
                c > 0.0 && c < self.sample_rate / 2.0,
                prefix,
                "phase_center",
                c,
                "0 < phase_center < sample_rate/2",
            );
        }
        out.require(
            self.disturbance.is_finite(),
            prefix,
            "disturbance",
            self.disturbance,
            "finite",
        );
        out.require(
            self.settle_band > 0.0 && self.settle_band <= 0.2,
            prefix,
            "settle_band",
            self.settle_band,
            "0 < settle_band <= 0.2",
        );
        out.require(
            self.settle_cycles >= 10,
            prefix,
            "settle_cycles",
            self.settle_cycles,
            ">= 10",
        );
        out.require(
            self.trace_decimation >= 1,
            prefix,
            "trace_decimation",
            self.trace_decimation,
            ">= 1",
        );
    }

    pub fn validate(&self, f0: f64) -> Result<()> {
        let mut v = Violations::new();
        self.check("", f0, &mut v);
        v.into_result()
    }

    #[inline]
    pub fn apply_limiter(&self, x: f64) -> f64 {
        match self.limiter {
            LimiterKind::Tanh => limiter(x, self.limiter_level),
            LimiterKind::HardClip => x.clamp(-self.limiter_level, self.limiter_level),
            LimiterKind::Off => x,
        }
    }

    pub fn hpf_sections(&self) -> Result<Vec<FirstOrder>> {
        self.hpf_cutoffs
            .iter()
            .map(|&fc| FirstOrder::high_pass(fc, self.sample_rate))
            .collect()
    }

    /// Force per ampere of coil current (N/A).
    pub fn force_per_amp(&self) -> f64 {
        lorentz_force(1.0, self.field, self.coil_length)
    }
}

/// Lorentz force `B·I·L` on the coil segment (N).
#[inline]
pub fn lorentz_force(current: f64, field: f64, length: f64) -> f64 {
    field * current * length
}

/// Smooth saturating amplifier `V_lim·tanh(x/V_lim)`, unit slope at zero.
#[inline]
pub fn limiter(x: f64, level: f64) -> f64 {
    level * (x / level).tanh()
}

/// Class-AB buffer into the coil: `clamp(v/R, ±I_max)` (A).
#[inline]
pub fn buffer_drive(v: f64, cfg: &LoopConfig) -> f64 {
    (v / cfg.coil_resistance).clamp(-cfg.buffer_current_limit, cfg.buffer_current_limit)
}

/// Previous input and output of a first-order high-pass section.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HpfState {
    pub prev_input: f64,
    pub prev_output: f64,
}

/// One sample of a first-order bilinear high-pass at `cutoff`.
pub fn hpf_step(state: HpfState, x: f64, cutoff: f64, fs: f64) -> Result<(HpfState, f64)> {
    let mut f = FirstOrder::high_pass(cutoff, fs)?;
    f.set_state(state.prev_input, state.prev_output);
    let y = f.process(x);
    Ok((
        HpfState {
            prev_input: x,
            prev_output: y,
        },
        y,
    ))
}
