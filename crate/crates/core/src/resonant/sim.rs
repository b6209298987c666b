use crate::bridge::{bridge_output, BridgeConfig};
use crate::counter::{CounterConfig, FrequencyReading, GateCounter};
use crate::error::{Error, Result, Violations};
use crate::mech::{
    dynamic_strain_per_displacement, CantileverDevice, ModalModel, OscState, Resonator,
};
use crate::noise::NoiseSource;

use super::settling::CycleEnvelope;
use super::{buffer_drive, lorentz_force, CounterTap, LoopConfig};

/// Initial tip displacement when the bridge is noiseless (m).
pub const STARTUP_KICK: f64 = 1e-12;

/// Everything a closed-loop run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonantSystem {
    pub device: CantileverDevice,
    /// Resonator actually simulated; differs from the device's own modal
    /// model when mass has been added.
    pub modal: ModalModel,
    pub bridge: BridgeConfig,
    pub loop_cfg: LoopConfig,
    pub counter: CounterConfig,
}

impl ResonantSystem {
    pub fn new(
        device: CantileverDevice,
        bridge: BridgeConfig,
        loop_cfg: LoopConfig,
        counter: CounterConfig,
    ) -> Result<Self> {
        let sys = Self {
            modal: device.modal_model()?,
            device,
            bridge,
            loop_cfg,
            counter,
        };
        sys.validate()?;
        Ok(sys)
    }

    /// Same system with `bound_mass` captured on the beam.
    pub fn with_added_mass(&self, bound_mass: f64) -> Result<Self> {
        let unloaded = self.device.modal_model()?;
        Ok(Self {
            modal: unloaded.with_added_mass(self.device.tip_equivalent_mass(bound_mass))?,
            ..self.clone()
        })
    }

    pub fn check(&self, out: &mut Violations) {
        self.device.check("device", out);
        self.bridge.check("bridge", out);
        self.loop_cfg
            .check("loop", self.modal.natural_frequency, out);
        self.counter.check("counter", out);
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Violations::new();
        self.check(&mut v);
        v.into_result()
    }

    /// Phase shifter centre: configured value or the unloaded resonance.
    pub fn phase_center(&self) -> Result<f64> {
        match self.loop_cfg.phase_center {
            Some(c) => Ok(c),
            None => Ok(self.device.modal_model()?.natural_frequency),
        }
    }

    /// Sets the VGA so the small-signal loop gain at resonance is `gain`.
    pub fn set_loop_gain(&mut self, gain: f64) -> Result<()> {
        let critical = super::LoopAnalysis::new(self)?.critical_vga_gain();
        self.loop_cfg.vga_gain = gain * critical;
        Ok(())
    }
}

/// Steady-state figures of a settled oscillation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettledMetrics {
    /// Tip displacement amplitude (m).
    pub amplitude: f64,
    /// Start of the first settled envelope window (s).
    pub startup_time: f64,
    /// Counter reading taken from the moment settling is detected.
    pub frequency: Option<FrequencyReading>,
    /// Work done by the coil force during the counter gate (J).
    pub energy_in: f64,
    /// Energy lost to viscous damping during the counter gate (J).
    pub energy_dissipated: f64,
}

/// Record of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoopTrace {
    pub sample_rate: f64,
    pub decimation: usize,
    pub time: Vec<f64>,
    pub displacement: Vec<f64>,
    pub bridge_voltage: Vec<f64>,
    pub coil_current: Vec<f64>,
    pub settled: Option<SettledMetrics>,
    /// Largest noise-free bridge signal seen (V).
    pub peak_bridge_signal: f64,
    /// RMS bridge noise plus, when noiseless, the start-up kick signal (V).
    pub noise_floor: f64,
    /// Largest coil current magnitude over every simulated sample (A).
    pub peak_coil_current: f64,
    pub final_state: OscState,
}

impl LoopTrace {
    pub fn settled_frequency(&self) -> Option<f64> {
        self.settled.and_then(|s| s.frequency).map(|r| r.frequency)
    }

    pub fn settled_amplitude(&self) -> Option<f64> {
        self.settled.map(|s| s.amplitude)
    }
}

/// Runs the loop for `duration` seconds without judging the outcome.
pub fn simulate_loop(sys: &ResonantSystem, duration: f64, seed: u64) -> Result<LoopTrace> {
    sys.validate()?;
    let lc = &sys.loop_cfg;
    let f0 = sys.modal.natural_frequency;
    if !(duration >= 100.0 / f0) {
        return Err(Error::invalid("duration", duration, "duration >= 100/f0"));
    }

    let fs = lc.sample_rate;
    let dt = 1.0 / fs;
    let n_total = (duration * fs).ceil() as usize;
    let resonator = Resonator::new(&sys.modal, dt)?;
    let damping = sys.modal.damping();
    let strain_per_z = dynamic_strain_per_displacement(&sys.device.geometry);
    let mut noise = NoiseSource::new(&sys.bridge, dt, n_total, seed)?;
    let noiseless = sys.bridge.white_noise_density == 0.0;

    let mut hpfs = lc.hpf_sections()?;
    let mut phase = match lc.phase_shifter {
        true => Some(crate::filter::FirstOrder::all_pass_lead(
            sys.phase_center()?,
            fs,
        )?),
        false => None,
    };
    let mut envelope = CycleEnvelope::new(lc.settle_band, lc.settle_cycles)?;
    let mut counter: Option<GateCounter> = None;
    let mut settling = None;
    let (mut energy_in, mut energy_diss) = (0.0, 0.0);

    let mut osc = if noiseless {
        OscState::displaced(STARTUP_KICK)
    } else {
        OscState::at_rest()
    };

    let keep = lc.trace_decimation;
    let cap = n_total / keep + 1;
    let mut trace = LoopTrace {
        sample_rate: fs,
        decimation: keep,
        time: Vec::with_capacity(cap),
        displacement: Vec::with_capacity(cap),
        bridge_voltage: Vec::with_capacity(cap),
        coil_current: Vec::with_capacity(cap),
        ..Default::default()
    };
    let mut noise_sq = 0.0;

    for n in 0..n_total {
        let z = osc.displacement;
        let signal = bridge_output(&sys.bridge, strain_per_z * z)?;
        let nz = noise.next_sample().total();
        let v_bridge = signal + nz + lc.disturbance;

        let mut x = lc.dda_gain * v_bridge;
        for h in &mut hpfs {
            x = h.process(x);
        }
        let filtered = x;
        if let Some(p) = &mut phase {
            x = p.process(x);
        }
        let current = buffer_drive(lc.apply_limiter(lc.vga_gain * x), lc);
        let force = lorentz_force(current, lc.field, lc.coil_length);

        trace.peak_bridge_signal = trace.peak_bridge_signal.max(signal.abs());
        trace.peak_coil_current = trace.peak_coil_current.max(current.abs());
        noise_sq += nz * nz;

        let t = n as f64 * dt;
        if n % keep == 0 {
            trace.time.push(t);
            trace.displacement.push(z);
            trace.bridge_voltage.push(v_bridge);
            trace.coil_current.push(current);
        }

        if settling.is_none() {
            if let Some(s) = envelope.push(z, t) {
                settling = Some(s);
                counter = Some(GateCounter::new(sys.counter, fs)?);
            }
        }

        let next = resonator.step(&osc, force);
        if let Some(c) = counter.as_mut().filter(|c| !c.is_complete()) {
            c.push(match lc.counter_tap {
                CounterTap::Bridge => v_bridge,
                CounterTap::Filtered => filtered,
                CounterTap::Displacement => z,
            });
            // Constant force over the step: work is F·Δz exactly.
            energy_in += force * (next.displacement - z);
            energy_diss += damping * 0.5 * (osc.velocity.powi(2) + next.velocity.powi(2)) * dt;
        }
        osc = next;
    }

    let noise_rms = (noise_sq / n_total as f64).sqrt();
    let kick_signal = if noiseless {
        sys.bridge.sensitivity() * strain_per_z * STARTUP_KICK
    } else {
        0.0
    };
    trace.noise_floor = noise_rms + kick_signal;
    trace.final_state = osc;
    trace.settled = settling.map(|s| SettledMetrics {
        amplitude: s.amplitude,
        startup_time: s.time,
        frequency: counter.as_ref().and_then(|c| c.reading_so_far().ok()),
        energy_in,
        energy_dissipated: energy_diss,
    });
    Ok(trace)
}

/// Runs the loop and classifies the outcome.
///
/// Fails with [`Error::NoOscillation`] if the bridge signal never rises above
/// ten times the noise floor, and with [`Error::NotSettled`] if it does but
/// the envelope never settles within `duration`.
pub fn run_oscillator(sys: &ResonantSystem, duration: f64, seed: u64) -> Result<LoopTrace> {
    let trace = simulate_loop(sys, duration, seed)?;
    if trace.peak_bridge_signal <= 10.0 * trace.noise_floor {
        return Err(Error::NoOscillation {
            peak: trace.peak_bridge_signal,
            floor: trace.noise_floor,
        });
    }
    if trace.settled.is_none() {
        return Err(Error::NotSettled { duration });
    }
    Ok(trace)
}
