//! Behavioral simulation of CMOS-integrated cantilever biosensors.
//!
//! Two sensing modes share the mechanical and transduction models:
//!
//! * static: analyte-induced surface stress bends the beam; the clamp strain
//!   is read by a piezoresistive bridge and a chopper-stabilized chain
//!   ([`static_chain`]);
//! * resonant: the beam is kept oscillating by a Lorentz-force feedback loop
//!   ([`resonant`]) and captured mass lowers the frequency measured by a
//!   digital counter ([`counter`]).
//!
//! Binding kinetics ([`assay`]) supply the mass and stress loads.

// `!(x > 0.0)` is used on purpose so NaN fails the guard.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assay;
pub mod bridge;
pub mod counter;
pub mod error;
pub mod filter;
pub mod mech;
pub mod noise;
pub mod resonant;
pub mod spectrum;
pub mod static_chain;
pub mod sweep;

pub use assay::{AssayConfig, AssayState, SurfaceLoad};
pub use bridge::{BridgeConfig, ResistorKind};
pub use counter::{CounterConfig, CounterMode, FrequencyReading};
pub use error::{Error, Result, Violation, Violations};
pub use mech::{CantileverDevice, ClampLoad, Geometry, Material, ModalModel, OscState};
pub use noise::{BridgeNoise, NoiseSource};
pub use resonant::{LimiterKind, LoopConfig, LoopTrace, ResonantSystem};
pub use static_chain::{ChainInput, StaticChain, StaticChainConfig};
