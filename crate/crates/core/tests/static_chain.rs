use approx::assert_relative_eq;
use cantilever_core::bridge::{BridgeConfig, ResistorKind};
use cantilever_core::mech::CantileverDevice;
use cantilever_core::noise::BridgeNoise;
use cantilever_core::spectrum::welch_psd;
use cantilever_core::static_chain::*;

fn experiment(stress: f64) -> StaticExperiment {
    StaticExperiment {
        device: CantileverDevice::reference(),
        bridge: BridgeConfig::new(ResistorKind::PmosLinear),
        chain: StaticChainConfig::default(),
        surface_stress: [stress, 0.0, 0.0, 0.0],
        channel: 0,
        duration: 0.5,
        calibrate: true,
    }
}

#[test]
fn dc_gain_after_offset_null() {
    let cfg = StaticChainConfig::default();
    let mut chain = StaticChain::new(cfg).unwrap();
    chain
        .calibrate_offset(&vec![ChainInput::default(); 2 * cfg.settle_samples()])
        .unwrap();
    let baseline = chain.dc_output(0.0);
    let v = 2e-6;
    let mut y = 0.0;
    for _ in 0..cfg.settle_samples() + 10 {
        y = chain.process_sample(v, BridgeNoise::default());
    }
    let gain = (y - baseline) / v;
    assert_relative_eq!(gain, cfg.dc_gain(), max_relative = 1e-3);
    assert_relative_eq!(cfg.dc_gain(), 1000.0, max_relative = 1e-12);
}

#[test]
fn noiseless_surface_stress_end_to_end() {
    let mut exp = experiment(5e-3);
    exp.bridge = exp.bridge.noiseless();
    let trace = run_static(&exp, 1).unwrap();
    // Strain 3·σ·(1−ν)/(E·t), bridge 5 V · 0.5 · 100, chain ×1000.
    let strain = 3.0 * 5e-3 * 0.75 / (169e9 * 5e-6);
    let expected = strain * 250.0 * 1000.0;
    assert_relative_eq!(expected, 3.328e-3, max_relative = 1e-3);
    let tol = exp.chain.output_lsb() / 2.0 + 1e-3 * expected;
    assert!(
        (trace.settled_output - expected).abs() <= tol,
        "{}",
        trace.settled_output
    );
}

#[test]
fn chopper_suppresses_low_frequency_noise() {
    let band_power = |db: f64| {
        let mut exp = experiment(0.0);
        exp.chain.chop_suppression_db = db;
        exp.chain.input_offset = 0.0;
        exp.calibrate = false;
        exp.duration = 22.0;
        let t = run_static(&exp, 99).unwrap();
        let psd = welch_psd(&t.output, t.sample_rate, 1 << 20).unwrap();
        psd.band_power(0.1, 100.0)
    };
    let ratio_db = 10.0 * (band_power(0.0) / band_power(40.0)).log10();
    assert!(ratio_db >= 20.0, "{ratio_db} dB");
}

#[test]
fn channel_switching_does_not_leak() {
    let cfg = StaticChainConfig::default();
    let run = |others: f64| {
        let mut chain = StaticChain::new(cfg).unwrap();
        chain.select_channel(1).unwrap();
        for _ in 0..5000 {
            let frame = [ChainInput {
                voltage: 1e-5,
                ..Default::default()
            }; 4];
            chain.process_frame(&frame);
        }
        chain.select_channel(2).unwrap();
        (0..5000)
            .map(|i| {
                let mut frame = [ChainInput {
                    voltage: others * (i as f64).sin(),
                    ..Default::default()
                }; 4];
                frame[2].voltage = 3e-6;
                chain.process_frame(&frame)
            })
            .collect::<Vec<_>>()
    };
    let a = run(1e-3);
    let b = run(-7e-4);
    assert_eq!(a, b);
    // Restarted from zero: nothing of channel 1's history remains.
    let mut fresh = StaticChain::new(cfg).unwrap();
    fresh.select_channel(2).unwrap();
    let first = fresh.process_sample(3e-6, BridgeNoise::default());
    assert_eq!(a[0], first);
}

#[test]
fn calibration_residual_within_half_lsb() {
    let mut exp = experiment(0.0);
    exp.bridge = exp.bridge.noiseless();
    exp.chain.input_offset = 0.8e-3;
    let t = run_static(&exp, 3).unwrap();
    assert!(
        t.settled_output.abs() <= exp.chain.output_lsb() / 2.0,
        "{}",
        t.settled_output
    );
    assert_ne!(t.dac_code, exp.chain.midscale_code());
}

#[test]
fn offset_beyond_dac_span_is_reported() {
    let mut exp = experiment(0.0);
    exp.chain.input_offset = 0.2;
    assert!(matches!(
        run_static(&exp, 3).unwrap_err(),
        cantilever_core::Error::OffsetOutOfRange { .. }
    ));
}
