//! Benchmark fixtures shared by the criterion targets.

use cantilever_core::resonant::LoopConfig;
use cantilever_core::{
    BridgeConfig, CantileverDevice, CounterConfig, ResistorKind, ResonantSystem,
};

/// Reference resonant system at loop gain 3.
pub fn reference_loop(gate_time: f64) -> ResonantSystem {
    let device = CantileverDevice::reference();
    let f0 = device
        .modal_model()
        .expect("reference device")
        .natural_frequency;
    let mut sys = ResonantSystem::new(
        device,
        BridgeConfig::new(ResistorKind::PmosLinear),
        LoopConfig::for_resonance(f0),
        CounterConfig {
            gate_time,
            ..Default::default()
        },
    )
    .expect("reference loop validates");
    sys.set_loop_gain(3.0).expect("loop analysis");
    sys
}
