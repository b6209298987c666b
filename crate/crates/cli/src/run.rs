//! Mode runners. Each produces an optional trace table and a one-row summary.

use cantilever_core::assay::{coverage_to_load, equilibrium_coverage, simulate_binding};
use cantilever_core::bridge::bridge_output;
use cantilever_core::mech::{
    clamp_strain, dynamic_strain_per_displacement, mass_loaded_frequency, stoney_tip_deflection,
};
use cantilever_core::resonant::{run_oscillator, LoopAnalysis};
use cantilever_core::static_chain::{run_static, StaticExperiment};
use cantilever_core::{
    AssayConfig, AssayState, CantileverDevice, ChainInput, ClampLoad, Error, ResonantSystem,
    StaticChain,
};

use crate::spec::{ExperimentSpec, Mode};

/// A CSV table held as formatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Cell in `row` under `column`.
    pub fn get(&self, row: usize, column: &str) -> Option<&str> {
        let c = self.header.iter().position(|h| h == column)?;
        self.rows.get(row).map(|r| r[c].as_str())
    }

    /// Parsed numeric cell; `None` for blanks and text.
    pub fn number(&self, row: usize, column: &str) -> Option<f64> {
        self.get(row, column)?.parse().ok()
    }
}

/// Shortest round-trip representation, so equal values print identically.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Option<Table>,
    pub summary: Table,
}

/// Runs the spec's mode. The spec is assumed validated.
pub fn run_spec(spec: &ExperimentSpec) -> Result<RunOutput, Error> {
    match spec.mode {
        Mode::Characterize => characterize(spec),
        Mode::Static => run_static_mode(spec),
        Mode::Resonant => run_resonant_mode(spec),
        Mode::AssayStatic | Mode::AssayResonant => run_assay_mode(spec),
    }
}

fn section<T: Clone>(s: &Option<T>, name: &str) -> Result<T, Error> {
    s.clone().ok_or_else(|| {
        Error::Invalid(cantilever_core::Violations(vec![
            cantilever_core::Violation::new(name, "missing", "section required for this mode"),
        ]))
    })
}

fn characterize(spec: &ExperimentSpec) -> Result<RunOutput, Error> {
    let device: CantileverDevice = section(&spec.device, "device")?;
    let bridge = section(&spec.bridge, "bridge")?;
    let m = device.modal_model()?;
    let g = &device.geometry;
    let mat = &device.material;
    let strain_per_stress = clamp_strain(g, mat, ClampLoad::SurfaceStress(1.0));
    let mut summary = Table::new(&[
        "spring_constant_n_per_m",
        "effective_mass_kg",
        "f0_hz",
        "quality_factor",
        "stoney_responsivity_m_per_n_per_m",
        "clamp_strain_per_n_per_m",
        "dynamic_strain_per_m",
        "bridge_sensitivity_v_per_strain",
        "static_bridge_responsivity_v_per_n_per_m",
        "mass_responsivity_hz_per_kg",
    ]);
    summary.push(vec![
        num(m.spring_constant),
        num(m.effective_mass),
        num(m.natural_frequency),
        num(m.quality_factor),
        num(stoney_tip_deflection(g, mat, 1.0)),
        num(strain_per_stress),
        num(dynamic_strain_per_displacement(g)),
        num(bridge.sensitivity()),
        num(bridge.sensitivity() * strain_per_stress),
        num(-m.natural_frequency / (2.0 * m.effective_mass) * device.mass_placement_factor),
    ]);
    Ok(RunOutput {
        trace: None,
        summary,
    })
}

fn run_static_mode(spec: &ExperimentSpec) -> Result<RunOutput, Error> {
    let exp = StaticExperiment {
        device: section(&spec.device, "device")?,
        bridge: section(&spec.bridge, "bridge")?,
        chain: section(&spec.chain, "chain")?,
        surface_stress: spec.stimulus.surface_stress,
        channel: spec.stimulus.channel,
        duration: spec.duration,
        calibrate: spec.stimulus.calibrate,
    };
    let t = run_static(&exp, spec.seed)?;
    let mut trace = Table::new(&["time_s", "output_v"]);
    let dt = 1.0 / t.sample_rate;
    for (i, y) in t.output.iter().enumerate().step_by(spec.output.decimate) {
        trace.push(vec![num(i as f64 * dt), num(*y)]);
    }
    let mut summary = Table::new(&[
        "channel",
        "surface_stress_n_per_m",
        "bridge_voltage_v",
        "expected_output_v",
        "settled_output_v",
        "dac_code",
    ]);
    summary.push(vec![
        exp.channel.to_string(),
        num(exp.surface_stress[exp.channel]),
        num(t.bridge_voltage),
        num(exp.chain.dc_gain() * t.bridge_voltage),
        num(t.settled_output),
        t.dac_code.to_string(),
    ]);
    Ok(RunOutput {
        trace: Some(trace),
        summary,
    })
}

/// Resonant system described by the spec, loop gain applied before loading.
pub fn resonant_system(spec: &ExperimentSpec) -> Result<ResonantSystem, Error> {
    let mut loop_cfg = section(&spec.loop_cfg, "loop")?;
    loop_cfg.trace_decimation = spec.output.decimate;
    let mut sys = ResonantSystem::new(
        section(&spec.device, "device")?,
        section(&spec.bridge, "bridge")?,
        loop_cfg,
        section(&spec.counter, "counter")?,
    )?;
    if let Some(g) = spec.stimulus.loop_gain {
        sys.set_loop_gain(g)?;
    }
    sys.with_added_mass(spec.stimulus.added_mass)
}

fn run_resonant_mode(spec: &ExperimentSpec) -> Result<RunOutput, Error> {
    let sys = resonant_system(spec)?;
    let analysis = LoopAnalysis::new(&sys)?;
    let t = run_oscillator(&sys, spec.duration, spec.seed)?;

    let mut trace = Table::new(&[
        "time_s",
        "displacement_m",
        "bridge_voltage_v",
        "coil_current_a",
    ]);
    for i in 0..t.time.len() {
        trace.push(vec![
            num(t.time[i]),
            num(t.displacement[i]),
            num(t.bridge_voltage[i]),
            num(t.coil_current[i]),
        ]);
    }

    let settled = t.settled.expect("run_oscillator returns settled traces");
    let reading = settled.frequency;
    let mut summary = Table::new(&[
        "added_mass_kg",
        "vga_gain",
        "loop_gain",
        "loaded_f0_hz",
        "predicted_frequency_hz",
        "frequency_hz",
        "count",
        "gate_time_s",
        "amplitude_m",
        "startup_time_s",
        "peak_coil_current_a",
        "energy_in_j",
        "energy_dissipated_j",
    ]);
    summary.push(vec![
        num(spec.stimulus.added_mass),
        num(sys.loop_cfg.vga_gain),
        num(analysis.loop_gain_at_resonance()),
        num(sys.modal.natural_frequency),
        opt(analysis.predicted_frequency()),
        opt(reading.map(|r| r.frequency)),
        reading.map(|r| r.count.to_string()).unwrap_or_default(),
        opt(reading.map(|r| r.gate_time)),
        num(settled.amplitude),
        num(settled.startup_time),
        num(t.peak_coil_current),
        num(settled.energy_in),
        num(settled.energy_dissipated),
    ]);
    Ok(RunOutput {
        trace: Some(trace),
        summary,
    })
}

/// Coverage on an even time grid over the spec duration, starting empty.
pub fn binding_curve(
    cfg: &AssayConfig,
    duration: f64,
    points: usize,
) -> Result<Vec<AssayState>, Error> {
    let h = duration / (points - 1) as f64;
    let sub = (h / cfg.max_step()).ceil().max(1.0) as usize;
    let dt = h / sub as f64;
    let mut out = simulate_binding(AssayState::default(), cfg, h * (points - 1) as f64, dt, sub)?;
    out.truncate(points);
    // Report exact grid times rather than the accumulated sum of steps.
    for (i, s) in out.iter_mut().enumerate() {
        s.time = i as f64 * h;
    }
    Ok(out)
}

fn run_assay_mode(spec: &ExperimentSpec) -> Result<RunOutput, Error> {
    let device: CantileverDevice = section(&spec.device, "device")?;
    let assay: AssayConfig = section(&spec.assay, "assay")?;
    device.validate()?;
    assay.validate()?;
    let curve = binding_curve(&assay, spec.duration, spec.stimulus.assay_points)?;
    let eq = equilibrium_coverage(&assay).ok();

    // Quasi-static: the binding time scale is far longer than any
    // electrical or mechanical settling time.
    let sensor: Box<dyn Fn(f64, f64) -> Result<f64, Error>> = match spec.mode {
        Mode::AssayStatic => {
            let bridge = section(&spec.bridge, "bridge")?;
            let mut chain = StaticChain::new(section(&spec.chain, "chain")?)?;
            chain.select_channel(spec.stimulus.channel)?;
            if spec.stimulus.calibrate {
                let quiet = vec![ChainInput::default(); 2 * chain.config().settle_samples()];
                chain.calibrate_offset(&quiet)?;
            }
            Box::new(move |_, stress| {
                let strain = clamp_strain(
                    &device.geometry,
                    &device.material,
                    ClampLoad::SurfaceStress(stress),
                );
                Ok(chain.dc_output(bridge_output(&bridge, strain)?))
            })
        }
        _ => {
            let modal = device.modal_model()?;
            Box::new(move |mass, _| mass_loaded_frequency(&modal, device.tip_equivalent_mass(mass)))
        }
    };
    let (col, shift_col) = match spec.mode {
        Mode::AssayStatic => ("output_v", "output_shift_v"),
        _ => ("frequency_hz", "frequency_shift_hz"),
    };

    let mut trace = Table::new(&[
        "time_s",
        "coverage",
        "added_mass_kg",
        "surface_stress_n_per_m",
        col,
    ]);
    let baseline = sensor(0.0, 0.0)?;
    let mut last = (0.0, baseline);
    for s in &curve {
        let load = coverage_to_load(s.coverage, &assay)?;
        let y = sensor(load.added_mass, load.surface_stress)?;
        trace.push(vec![
            num(s.time),
            num(s.coverage),
            num(load.added_mass),
            num(load.surface_stress),
            num(y),
        ]);
        last = (s.coverage, y);
    }
    let mut summary = Table::new(&[
        "concentration_m",
        "equilibrium_coverage",
        "final_coverage",
        &format!("baseline_{col}"),
        &format!("final_{col}"),
        shift_col,
    ]);
    summary.push(vec![
        num(assay.concentration),
        opt(eq),
        num(last.0),
        num(baseline),
        num(last.1),
        num(last.1 - baseline),
    ]);
    Ok(RunOutput {
        trace: Some(trace),
        summary,
    })
}
