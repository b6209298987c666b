//! Langmuir binding kinetics of the analyte on the receptor layer, and the
//! mapping from fractional coverage to added mass and surface stress.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violations};

/// Avogadro constant (1/mol).
pub const AVOGADRO: f64 = 6.022_140_76e23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssayConfig {
    /// Association rate (1/(M·s)).
    pub k_on: f64,
    /// Dissociation rate (1/s).
    pub k_off: f64,
    /// Analyte concentration at the surface (M).
    pub concentration: f64,
    /// Receptor sites per area (1/m²).
    pub site_density: f64,
    /// Mass per bound molecule (kg).
    pub molecule_mass: f64,
    /// Differential surface stress at full coverage (N/m).
    pub max_surface_stress: f64,
    /// Functionalized area (m²).
    pub active_area: f64,
}

impl Default for AssayConfig {
    /// IgG-like antibody/antigen pair on the reference top face.
    fn default() -> Self {
        Self {
            k_on: 1e5,
            k_off: 1e-4,
            concentration: 10e-9,
            site_density: 1e16,
            molecule_mass: 150e3 * 1e-3 / AVOGADRO,
            max_surface_stress: 5e-3,
            active_area: 5e-8,
        }
    }
}

impl AssayConfig {
    pub fn check(&self, prefix: &str, out: &mut Violations) {
        out.require(self.k_on > 0.0, prefix, "k_on", self.k_on, "> 0");
        out.require(self.k_off >= 0.0, prefix, "k_off", self.k_off, ">= 0");
        out.require(
            self.concentration >= 0.0,
            prefix,
            "concentration",
            self.concentration,
            ">= 0",
        );
        out.require(
            self.site_density > 0.0,
            prefix,
            "site_density",
            self.site_density,
            "> 0",
        );
        out.require(
            self.molecule_mass > 0.0,
            prefix,
            "molecule_mass",
            self.molecule_mass,
            "> 0",
        );
        out.require(
            self.active_area > 0.0,
            prefix,
            "active_area",
            self.active_area,
            "> 0",
        );
        out.require(
            self.max_surface_stress.is_finite(),
            prefix,
            "max_surface_stress",
            self.max_surface_stress,
            "finite",
        );
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Violations::new();
        self.check("", &mut v);
        v.into_result()
    }

    /// Equilibrium dissociation constant `k_off/k_on` (M).
    pub fn dissociation_constant(&self) -> f64 {
        self.k_off / self.k_on
    }

    /// Relaxation rate `k_on·C + k_off` (1/s).
    pub fn observed_rate(&self) -> f64 {
        self.k_on * self.concentration + self.k_off
    }

    /// Largest accepted integration step.
    pub fn max_step(&self) -> f64 {
        0.001 / self.observed_rate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AssayState {
    /// Fractional coverage θ.
    pub coverage: f64,
    pub time: f64,
}

/// Advances `dθ/dt = k_on·C·(1−θ) − k_off·θ` by one RK4 step.
pub fn langmuir_step(state: &AssayState, cfg: &AssayConfig, dt: f64) -> Result<AssayState> {
    let rate = cfg.observed_rate();
    if !(rate > 0.0) {
        // Nothing binds and nothing leaves.
        return Ok(AssayState {
            coverage: state.coverage,
            time: state.time + dt,
        });
    }
    if !(dt > 0.0 && dt <= cfg.max_step()) {
        return Err(Error::invalid("dt", dt, "0 < dt <= 0.001/(k_on*C + k_off)"));
    }
    let drive = cfg.k_on * cfg.concentration;
    let f = |theta: f64| drive * (1.0 - theta) - cfg.k_off * theta;
    let th = state.coverage;
    let k1 = f(th);
    let k2 = f(th + 0.5 * dt * k1);
    let k3 = f(th + 0.5 * dt * k2);
    let k4 = f(th + dt * k3);
    let next = th + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    Ok(AssayState {
        coverage: next.clamp(0.0, 1.0),
        time: state.time + dt,
    })
}

/// `C / (C + K_d)`.
pub fn equilibrium_coverage(cfg: &AssayConfig) -> Result<f64> {
    if !(cfg.observed_rate() > 0.0) {
        return Err(Error::invalid("k_on*C + k_off", cfg.observed_rate(), "> 0"));
    }
    Ok(cfg.concentration / (cfg.concentration + cfg.dissociation_constant()))
}

/// Mechanical load produced by coverage `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurfaceLoad {
    /// Bound mass (kg).
    pub added_mass: f64,
    /// Differential surface stress (N/m).
    pub surface_stress: f64,
}

pub fn coverage_to_load(theta: f64, cfg: &AssayConfig) -> Result<SurfaceLoad> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid("coverage", theta, "0 <= coverage <= 1"));
    }
    Ok(SurfaceLoad {
        added_mass: theta * cfg.site_density * cfg.active_area * cfg.molecule_mass,
        surface_stress: theta * cfg.max_surface_stress,
    })
}

/// Integrates from `state` over `duration`, recording every `record_every`-th step.
pub fn simulate_binding(
    state: AssayState,
    cfg: &AssayConfig,
    duration: f64,
    dt: f64,
    record_every: usize,
) -> Result<Vec<AssayState>> {
    let steps = (duration / dt).round() as usize;
    let every = record_every.max(1);
    let mut out = vec![state];
    let mut s = state;
    for i in 1..=steps {
        s = langmuir_step(&s, cfg, dt)?;
        if i % every == 0 || i == steps {
            out.push(s);
        }
    }
    Ok(out)
}
