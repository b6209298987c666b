//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always print.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use cantilever_cli::{run_experiment, ExperimentSpec, Mode, Sweep};
use cantilever_core::assay::{equilibrium_coverage, simulate_binding};
use cantilever_core::bridge::{bridge_output, noise_psd};
use cantilever_core::counter::{measure_frequency, CounterConfig, CounterMode};
use cantilever_core::mech::{clamp_strain, ModalModel, OscState, Resonator};
use cantilever_core::noise::sample_noise;
use cantilever_core::resonant::{run_oscillator, CounterTap, LoopAnalysis, LoopConfig};
use cantilever_core::spectrum::welch_psd;
use cantilever_core::static_chain::{run_static, StaticExperiment};
use cantilever_core::sweep::{resonance_peak, ring_down_rate};
use cantilever_core::{
    AssayConfig, AssayState, BridgeConfig, CantileverDevice, ClampLoad, Error, ResistorKind,
    ResonantSystem, StaticChainConfig,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn modal(q: f64) -> ModalModel {
    CantileverDevice::reference()
        .with_quality_factor(q)
        .modal_model()
        .unwrap()
}

fn resonant_system(gain: f64, gate: f64) -> ResonantSystem {
    let device = CantileverDevice::reference();
    let f0 = device.modal_model().unwrap().natural_frequency;
    let mut sys = ResonantSystem::new(
        device,
        BridgeConfig::new(ResistorKind::PmosLinear),
        LoopConfig::for_resonance(f0),
        CounterConfig {
            gate_time: gate,
            ..Default::default()
        },
    )
    .unwrap();
    sys.set_loop_gain(gain).unwrap();
    sys
}

fn static_experiment(stress: f64) -> StaticExperiment {
    StaticExperiment {
        device: CantileverDevice::reference(),
        bridge: BridgeConfig::new(ResistorKind::Diffused),
        chain: StaticChainConfig::default(),
        surface_stress: [stress, 0.0, 0.0, 0.0],
        channel: 0,
        duration: 1.0,
        calibrate: true,
    }
}

fn c1_driven_peak() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for q in [50.0, 1000.0] {
        let m = modal(q);
        let peak = resonance_peak(&m, 64).map_err(|e| e.to_string())?;
        let rel = (peak - m.natural_frequency) / m.natural_frequency;
        ok &= rel.abs() < 0.005;
        parts.push(format!("Q={q}: {peak:.3} Hz ({:+.2e})", rel));
    }
    check(
        ok,
        format!(
            "f0 = {:.3} Hz; {}",
            modal(50.0).natural_frequency,
            parts.join(", ")
        ),
    )
}

fn c2_ring_down() -> Outcome {
    let m = modal(100.0);
    let expected = m.angular_frequency() / (2.0 * m.quality_factor);
    let got = ring_down_rate(&m, 1e-9, 100, 300).map_err(|e| e.to_string())?;
    let rel = (got - expected) / expected;
    check(
        rel.abs() < 0.02,
        format!("decay {got:.2} 1/s vs {expected:.2} 1/s ({rel:+.2e})"),
    )
}

fn c3_rk4_order() -> Outcome {
    let m = modal(100.0);
    let w0 = m.angular_frequency();
    let gamma = w0 / (2.0 * m.quality_factor);
    let wd = (w0 * w0 - gamma * gamma).sqrt();
    let period = 1.0 / m.natural_frequency;
    let err = |steps: usize| {
        let r = Resonator::new(&m, period / steps as f64).unwrap();
        let mut s = OscState::displaced(1e-9);
        for _ in 0..steps {
            s = r.step(&s, 0.0);
        }
        let d = (-gamma * period).exp();
        let z = 1e-9 * d * ((wd * period).cos() + gamma / wd * (wd * period).sin());
        let v = -1e-9 * d * w0 * w0 / wd * (wd * period).sin();
        ((s.displacement - z).powi(2) + ((s.velocity - v) / w0).powi(2)).sqrt()
    };
    let ratio = err(50) / err(100);
    check(
        (12.0..=20.0).contains(&ratio),
        format!("error ratio {ratio:.2} for 50 -> 100 steps/period"),
    )
}

fn c4_mass_loading() -> Outcome {
    let gate = 1.0;
    let sys = resonant_system(3.0, gate);
    let m = sys.modal;
    let dm = 7.07e-4 * m.effective_mass;
    let loaded = sys.with_added_mass(dm).map_err(|e| e.to_string())?;
    let freq = |s: &ResonantSystem| -> Result<f64, String> {
        run_oscillator(s, 1.25, 4)
            .map_err(|e| e.to_string())?
            .settled_frequency()
            .ok_or("no counter reading".into())
    };
    let shift = freq(&loaded)? - freq(&sys)?;
    let expected = -m.natural_frequency * dm / (2.0 * m.effective_mass);
    let tol = 1.0 / gate + 0.005 * expected.abs();
    check(
        (shift - expected).abs() <= tol,
        format!("shift {shift:.4} Hz vs {expected:.4} Hz, tolerance {tol:.3} Hz"),
    )
}

fn c5_static_end_to_end() -> Outcome {
    let exp = static_experiment(5e-3);
    let dev = &exp.device;
    let strain = clamp_strain(&dev.geometry, &dev.material, ClampLoad::SurfaceStress(5e-3));
    let oracle =
        exp.chain.dc_gain() * bridge_output(&exp.bridge, strain).map_err(|e| e.to_string())?;
    let t = run_static(&exp, 17).map_err(|e| e.to_string())?;
    let y = t.settled_output;
    let ok = (exp.chain.dc_gain() - 1000.0).abs() < 1e-9
        && (y / 3.33e-3 - 1.0).abs() <= 0.01
        && (y / oracle - 1.0).abs() <= 0.01;
    check(
        ok,
        format!(
            "settled {:.4} mV, oracle {:.4} mV, chain gain {:.1}",
            y * 1e3,
            oracle * 1e3,
            exp.chain.dc_gain()
        ),
    )
}

fn c6_startup() -> Outcome {
    let sys = resonant_system(3.0, 0.1);
    let lc = &sys.loop_cfg;
    let t = run_oscillator(&sys, 0.3, 11).map_err(|e| e.to_string())?;
    let started = t.settled.is_some() && t.peak_coil_current < lc.buffer_current_limit;
    let critical = LoopAnalysis::new(&sys).unwrap().critical_vga_gain();
    let mut weak = sys.clone();
    weak.loop_cfg.vga_gain = 0.1 * critical;
    let silent = matches!(
        run_oscillator(&weak, 0.3, 11),
        Err(Error::NoOscillation { .. })
    );
    check(
        started && silent,
        format!(
            "gain 3: settled at {:.1} ms, peak coil current {:.3} mA (limit {:.1} mA); 10% of critical: {}",
            t.settled.map_or(f64::NAN, |s| s.startup_time * 1e3),
            t.peak_coil_current * 1e3,
            lc.buffer_current_limit * 1e3,
            if silent { "no oscillation" } else { "oscillated" },
        ),
    )
}

fn c7_chopper() -> Outcome {
    let band = |db: f64| -> Result<f64, String> {
        let mut exp = static_experiment(0.0);
        exp.bridge = BridgeConfig::new(ResistorKind::PmosLinear);
        exp.chain.chop_suppression_db = db;
        exp.chain.input_offset = 0.0;
        exp.calibrate = false;
        exp.duration = 22.0;
        let t = run_static(&exp, 99).map_err(|e| e.to_string())?;
        let psd = welch_psd(&t.output, t.sample_rate, 1 << 20).map_err(|e| e.to_string())?;
        Ok(psd.band_power(0.1, 100.0))
    };
    let ratio_db = 10.0 * (band(0.0)? / band(40.0)?).log10();
    check(
        ratio_db >= 20.0,
        format!("[0.1, 100] Hz output noise drops {ratio_db:.1} dB"),
    )
}

fn c8_hpf() -> Outcome {
    let run = |hpf: bool| {
        let mut sys = resonant_system(3.0, 0.05);
        sys.loop_cfg.disturbance = 10e-3;
        sys.loop_cfg.counter_tap = CounterTap::Displacement;
        if !hpf {
            sys.loop_cfg.hpf_cutoffs.clear();
        }
        let f0 = sys.modal.natural_frequency;
        match run_oscillator(&sys, 0.3, 9) {
            Ok(t) => t
                .settled_frequency()
                .map_or(f64::INFINITY, |f| (f - f0).abs()),
            Err(_) => f64::INFINITY,
        }
    };
    let (with, without) = (run(true), run(false));
    check(
        with.is_finite() && with < without,
        format!(
            "frequency error {with:.3} Hz with HPF, {without:.3} Hz bypassed (inf = loop failed)"
        ),
    )
}

fn c9_counter() -> Outcome {
    let fs = 2.0e6;
    let mut worst_ratio: f64 = 0.0;
    let (mut se_g, mut se_r) = (0.0, 0.0);
    let mut n = 0;
    for (i, f) in [20_001.3, 24_999.97, 27_500.7, 27_513.0, 31_234.567]
        .into_iter()
        .enumerate()
    {
        for (j, tg) in [0.01, 0.02, 0.05, 0.1].into_iter().enumerate() {
            let len = ((tg + 2.0 / f) * fs) as usize + 2;
            let phase = 0.37 * (4 * i + j) as f64;
            let x: Vec<f64> = (0..len)
                .map(|k| (2.0 * PI * f * k as f64 / fs + phase).sin())
                .collect();
            let read = |mode| {
                let cfg = CounterConfig {
                    gate_time: tg,
                    mode,
                    hysteresis: 0.0,
                };
                measure_frequency(&x, fs, &cfg).map(|r| r.frequency)
            };
            let g = read(CounterMode::GatedCount).map_err(|e| e.to_string())?;
            let r = read(CounterMode::Reciprocal).map_err(|e| e.to_string())?;
            worst_ratio = worst_ratio.max((g - f).abs() * tg);
            se_g += (g - f).powi(2);
            se_r += (r - f).powi(2);
            n += 1;
        }
    }
    let gain = (se_g / se_r).sqrt();
    check(
        n == 20 && worst_ratio <= 1.0 && gain >= 10.0,
        format!("{n} pairs, worst gated error {worst_ratio:.3} counts, reciprocal RMS {gain:.0}x better"),
    )
}

fn c10_langmuir() -> Outcome {
    let cfg = AssayConfig::default();
    let tau = 1.0 / cfg.observed_rate();
    let eq = equilibrium_coverage(&cfg).map_err(|e| e.to_string())?;
    let trace = simulate_binding(AssayState::default(), &cfg, 6.0 * tau, cfg.max_step(), 1)
        .map_err(|e| e.to_string())?;
    let worst = trace
        .iter()
        .map(|s| (s.coverage - eq * (1.0 - (-s.time / tau).exp())).abs())
        .fold(0.0, f64::max);
    let kd = cfg.dissociation_constant();
    let eq_err = [0.0, 0.1, 1.0, 9.0, 1e3]
        .iter()
        .map(|&r| {
            let c = AssayConfig {
                concentration: r * kd,
                ..cfg
            };
            (equilibrium_coverage(&c).unwrap() - r / (r + 1.0)).abs()
        })
        .fold(0.0, f64::max);
    check(
        worst < 1e-6 && eq_err < 1e-12,
        format!("max trajectory error {worst:.2e}, equilibrium error {eq_err:.1e}"),
    )
}

fn c11_flicker() -> Outcome {
    let cfg = BridgeConfig::new(ResistorKind::PmosLinear);
    let fs = 1e6;
    let x = sample_noise(&cfg, 1.0 / fs, 1 << 20, 6).map_err(|e| e.to_string())?;
    let psd = welch_psd(&x, fs, 1 << 16).map_err(|e| e.to_string())?;
    let fc = cfg.flicker_corner;
    let slope = psd.log_slope(fc / 100.0, fc / 10.0);
    let level = 10.0 * (psd.mean_density(90.0, 110.0) / noise_psd(&cfg, 100.0).unwrap()).log10();
    check(
        (-1.3..=-0.7).contains(&slope),
        format!(
            "slope {slope:.3} over [{}, {}] Hz, level at 100 Hz {level:+.2} dB",
            fc / 100.0,
            fc / 10.0
        ),
    )
}

fn c12_determinism() -> Outcome {
    let mut specs = Vec::new();
    for mode in [
        Mode::Static,
        Mode::AssayStatic,
        Mode::AssayResonant,
        Mode::Characterize,
    ] {
        specs.push(ExperimentSpec::reference(mode));
    }
    let mut res = ExperimentSpec::reference(Mode::Resonant);
    res.duration = 0.15;
    res.counter.as_mut().unwrap().gate_time = 0.02;
    specs.push(res.clone());
    res.sweep = Some(Sweep {
        parameter: "stimulus.added_mass".into(),
        values: vec![0.0, 1e-13],
    });
    specs.push(res);

    let run = |spec: &ExperimentSpec| -> Result<Vec<(String, Vec<u8>)>, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let files = run_experiment(spec, dir.path()).map_err(|e| e.to_string())?;
        files
            .iter()
            .map(|p| {
                let name = p.file_name().unwrap().to_string_lossy().into_owned();
                fs::read(p).map(|b| (name, b)).map_err(|e| e.to_string())
            })
            .collect()
    };
    let mut files = 0;
    let mut bytes = 0;
    for spec in &specs {
        let a = run(spec)?;
        let b = run(spec)?;
        if a != b {
            return Err(format!(
                "{} output differs between identical runs",
                spec.mode.name()
            ));
        }
        files += a.len();
        bytes += a.iter().map(|(_, b)| b.len()).sum::<usize>();
    }
    check(
        true,
        format!("{files} CSV files ({bytes} bytes) identical across repeated runs"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("mechanics oracle", c1_driven_peak),
        ("ring-down", c2_ring_down),
        ("RK4 order", c3_rk4_order),
        ("mass loading", c4_mass_loading),
        ("static end-to-end", c5_static_end_to_end),
        ("oscillator startup", c6_startup),
        ("chopper benefit", c7_chopper),
        ("HPF benefit", c8_hpf),
        ("counter laws", c9_counter),
        ("Langmuir", c10_langmuir),
        ("1/f noise", c11_flicker),
        ("determinism", c12_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
