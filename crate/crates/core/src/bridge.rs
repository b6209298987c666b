//! Piezoresistive Wheatstone bridge: strain to differential voltage, plus the
//! input-referred noise model of the bridge resistors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violations};

/// Largest strain magnitude treated as small-signal.
pub const MAX_LINEAR_STRAIN: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResistorKind {
    /// Diffused silicon resistors.
    Diffused,
    /// p-channel MOS transistors biased in the linear region.
    PmosLinear,
}

impl ResistorKind {
    pub fn default_flicker_corner(self) -> f64 {
        match self {
            ResistorKind::Diffused => 1e3,
            ResistorKind::PmosLinear => 10e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    /// Bridge supply (V).
    pub bias_voltage: f64,
    pub gauge_factor: f64,
    /// Share of the full-bridge response realized by the strain-active arms.
    pub active_fraction: f64,
    pub resistor_kind: ResistorKind,
    /// Input-referred white noise density (V²/Hz, one-sided).
    pub white_noise_density: f64,
    /// Corner where flicker noise equals the white floor (Hz).
    pub flicker_corner: f64,
}

impl BridgeConfig {
    /// 5 V half-active bridge, GF 100, 10 nV/√Hz white floor and the kind's
    /// default flicker corner.
    pub fn new(kind: ResistorKind) -> Self {
        Self {
            bias_voltage: 5.0,
            gauge_factor: 100.0,
            active_fraction: 0.5,
            resistor_kind: kind,
            white_noise_density: 1e-16,
            flicker_corner: kind.default_flicker_corner(),
        }
    }

    pub fn noiseless(mut self) -> Self {
        self.white_noise_density = 0.0;
        self
    }

    pub fn check(&self, prefix: &str, out: &mut Violations) {
        out.require(
            self.bias_voltage > 0.0,
            prefix,
            "bias_voltage",
            self.bias_voltage,
            "> 0",
        );
        out.require(
            self.gauge_factor > 0.0,
            prefix,
            "gauge_factor",
            self.gauge_factor,
            "> 0",
        );
        out.require(
            self.active_fraction > 0.0 && self.active_fraction <= 1.0,
            prefix,
            "active_fraction",
            self.active_fraction,
            "0 < active_fraction <= 1",
        );
        out.require(
            self.white_noise_density >= 0.0 && self.white_noise_density.is_finite(),
            prefix,
            "white_noise_density",
            self.white_noise_density,
            ">= 0",
        );
        out.require(
            self.flicker_corner >= 0.0 && self.flicker_corner.is_finite(),
            prefix,
            "flicker_corner",
            self.flicker_corner,
            ">= 0",
        );
        if self.resistor_kind == ResistorKind::PmosLinear {
            let min = ResistorKind::Diffused.default_flicker_corner();
            out.require(
                self.flicker_corner >= min,
                prefix,
                "flicker_corner",
                self.flicker_corner,
                "pmos_linear flicker_corner >= 1000 Hz (diffused default)",
            );
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Violations::new();
        self.check("", &mut v);
        v.into_result()
    }

    /// Output voltage per unit strain (V).
    pub fn sensitivity(&self) -> f64 {
        self.bias_voltage * self.active_fraction * self.gauge_factor
    }
}

/// Noise-free bridge output for clamp `strain`.
pub fn bridge_output(cfg: &BridgeConfig, strain: f64) -> Result<f64> {
    if !(strain.abs() < MAX_LINEAR_STRAIN) {
        return Err(Error::invalid("strain", strain, "|strain| < 1e-2"));
    }
    Ok(cfg.sensitivity() * strain)
}

/// One-sided input-referred noise density `S_w·(1 + f_c/f)`.
pub fn noise_psd(cfg: &BridgeConfig, f: f64) -> Result<f64> {
    if !(f > 0.0) {
        return Err(Error::invalid("f", f, "f > 0"));
    }
    Ok(cfg.white_noise_density * (1.0 + cfg.flicker_corner / f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn output_cases() {
        let cfg = BridgeConfig::new(ResistorKind::PmosLinear);
        assert_eq!(bridge_output(&cfg, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            bridge_output(&cfg, 1.331e-8).unwrap(),
            3.3275e-6,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            bridge_output(&cfg, 3.0e-7).unwrap(),
            75e-6,
            max_relative = 1e-12
        );
        assert!(bridge_output(&cfg, 1e-2).is_err());
        assert!(bridge_output(&cfg, -0.02).is_err());
    }

    #[test]
    fn psd_cases() {
        let cfg = BridgeConfig::new(ResistorKind::PmosLinear);
        assert_relative_eq!(noise_psd(&cfg, 10e3).unwrap(), 2e-16, max_relative = 1e-15);
        assert_relative_eq!(
            noise_psd(&cfg, 100.0).unwrap(),
            1.01e-14,
            max_relative = 1e-12
        );
        assert_relative_eq!(noise_psd(&cfg, 1e12).unwrap(), 1e-16, max_relative = 1e-7);
        assert!(noise_psd(&cfg, 0.0).is_err());
    }

    #[test]
    fn pmos_corner_floor() {
        let mut cfg = BridgeConfig::new(ResistorKind::PmosLinear);
        cfg.flicker_corner = 500.0;
        assert!(cfg.validate().is_err());
        let mut cfg = BridgeConfig::new(ResistorKind::Diffused);
        cfg.flicker_corner = 500.0;
        assert!(cfg.validate().is_ok());
    }
}
