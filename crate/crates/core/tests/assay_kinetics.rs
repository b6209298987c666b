use cantilever_core::assay::*;
use cantilever_core::bridge::{bridge_output, BridgeConfig, ResistorKind};
use cantilever_core::mech::{clamp_strain, mass_loaded_frequency, CantileverDevice, ClampLoad};
use cantilever_core::static_chain::{StaticChain, StaticChainConfig};
use proptest::prelude::*;

#[test]
fn matches_closed_form_binding_curve() {
    for c in [1e-9, 1e-8, 1e-7] {
        let cfg = AssayConfig {
            concentration: c,
            ..Default::default()
        };
        let tau = 1.0 / cfg.observed_rate();
        let eq = equilibrium_coverage(&cfg).unwrap();
        let dt = cfg.max_step();
        let trace = simulate_binding(AssayState::default(), &cfg, 6.0 * tau, dt, 1).unwrap();
        let worst = trace
            .iter()
            .map(|s| (s.coverage - eq * (1.0 - (-s.time / tau).exp())).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "C={c}: {worst}");
    }
}

#[test]
fn equilibrium_formula_is_exact() {
    let base = AssayConfig::default();
    let kd = base.dissociation_constant();
    for (c, want) in [(0.0, 0.0), (9.0 * kd, 0.9), (kd, 0.5)] {
        let cfg = AssayConfig {
            concentration: c,
            ..base
        };
        assert!((equilibrium_coverage(&cfg).unwrap() - want).abs() < 1e-12);
    }
    let irreversible = AssayConfig { k_off: 0.0, ..base };
    assert_eq!(equilibrium_coverage(&irreversible).unwrap(), 1.0);
    let dead = AssayConfig {
        k_off: 0.0,
        concentration: 0.0,
        ..base
    };
    assert!(equilibrium_coverage(&dead).is_err());
}

#[test]
fn reference_antibody_load() {
    let cfg = AssayConfig {
        molecule_mass: 2.5e-22,
        ..Default::default()
    };
    let full = coverage_to_load(1.0, &cfg).unwrap();
    assert!((full.added_mass - 1.25e-13).abs() < 1e-25);
    let half = coverage_to_load(0.5, &cfg).unwrap();
    assert_eq!(half.surface_stress, 0.5 * cfg.max_surface_stress);
    assert_eq!(coverage_to_load(0.0, &cfg).unwrap(), SurfaceLoad::default());
    assert!(coverage_to_load(1.5, &cfg).is_err());
}

#[test]
fn oversized_step_is_rejected() {
    let cfg = AssayConfig::default();
    assert!(langmuir_step(&AssayState::default(), &cfg, 2.0 * cfg.max_step()).is_err());
}

#[test]
fn higher_concentration_gives_larger_response() {
    let device = CantileverDevice::reference();
    let modal = device.modal_model().unwrap();
    let bridge = BridgeConfig::new(ResistorKind::Diffused);
    let chain = StaticChain::new(StaticChainConfig::default()).unwrap();
    let mut last = (0.0, 0.0);
    for c in [1e-10, 1e-9, 1e-8, 1e-7] {
        let cfg = AssayConfig {
            concentration: c,
            ..Default::default()
        };
        let load = coverage_to_load(equilibrium_coverage(&cfg).unwrap(), &cfg).unwrap();
        let df = mass_loaded_frequency(&modal, device.tip_equivalent_mass(load.added_mass))
            .unwrap()
            - modal.natural_frequency;
        let strain = clamp_strain(
            &device.geometry,
            &device.material,
            ClampLoad::SurfaceStress(load.surface_stress),
        );
        let out = chain.dc_output(bridge_output(&bridge, strain).unwrap()) - chain.dc_output(0.0);
        assert!(df.abs() > last.0 && out.abs() > last.1, "C={c}");
        last = (df.abs(), out.abs());
    }
}

proptest! {
    #[test]
    fn coverage_is_monotone_and_bounded(
        log_c in -11.0f64..-6.0,
        k_off in 0.0f64..1e-2,
        theta0 in 0.0f64..=1.0,
    ) {
        let cfg = AssayConfig {
            concentration: 10f64.powf(log_c),
            k_off,
            ..Default::default()
        };
        let eq = equilibrium_coverage(&cfg).unwrap();
        let dt = cfg.max_step();
        let mut s = AssayState { coverage: theta0, time: 0.0 };
        for _ in 0..500 {
            let next = langmuir_step(&s, &cfg, dt).unwrap();
            prop_assert!((0.0..=1.0).contains(&next.coverage));
            if theta0 < eq {
                prop_assert!(next.coverage >= s.coverage);
            } else {
                prop_assert!(next.coverage <= s.coverage);
            }
            s = next;
        }
    }
}
