//! Closed-form cantilever mechanics and the damped resonator integrator.
//!
//! The beam is a rectangular single-clamped plate `L x w x t`. Static bending
//! under differential surface stress follows the Stoney relation; the
//! fundamental flexural mode is reduced to a lumped spring-mass-damper with a
//! tip-equivalent effective mass.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violations};

/// Tip-equivalent mass fraction of the fundamental flexural mode.
pub const EFFECTIVE_MASS_FACTOR: f64 = 0.2427;

/// Largest thickness-to-length ratio accepted for thin-beam theory.
pub const MAX_ASPECT_RATIO: f64 = 0.1;

/// Elastic and inertial constants of the structural layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Young's modulus (Pa).
    pub youngs_modulus: f64,
    /// Mass density (kg/m³).
    pub density: f64,
    pub poisson_ratio: f64,
}

impl Material {
    /// Single-crystal silicon along <110>.
    pub const SILICON: Material = Material {
        youngs_modulus: 169e9,
        density: 2330.0,
        poisson_ratio: 0.25,
    };

    pub fn check(&self, prefix: &str, out: &mut Violations) {
        out.require(
            self.youngs_modulus > 0.0,
            prefix,
            "youngs_modulus",
            self.youngs_modulus,
            "> 0",
        );
        out.require(self.density > 0.0, prefix, "density", self.density, "> 0");
        out.require(
            (0.0..0.5).contains(&self.poisson_ratio),
            prefix,
            "poisson_ratio",
            self.poisson_ratio,
            "0 <= nu < 0.5",
        );
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Violations::new();
        self.check("", &mut v);
        v.into_result()
    }
}

/// Beam dimensions (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
}

impl Geometry {
    pub fn check(&self, prefix: &str, out: &mut Violations) {
        out.require(self.length > 0.0, prefix, "length", self.length, "> 0");
        out.require(self.width > 0.0, prefix, "width", self.width, "> 0");
        out.require(
            self.thickness > 0.0,
            prefix,
            "thickness",
            self.thickness,
            "> 0",
        );
        if self.length > 0.0 && self.thickness > 0.0 {
            out.require(
                self.thickness / self.length <= MAX_ASPECT_RATIO,
                prefix,
                "thickness",
                self.thickness,
                "thickness/length <= 0.1",
            );
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Violations::new();
        self.check("", &mut v);
        v.into_result()
    }

    pub fn volume(&self) -> f64 {
        self.length * self.width * self.thickness
    }

    /// Area of one face, where the receptor layer sits.
    pub fn top_area(&self) -> f64 {
        self.length * self.width
    }
}

/// A cantilever with its environment: geometry, material, damping and how
/// captured mass maps onto the tip-equivalent load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CantileverDevice {
    pub geometry: Geometry,
    pub material: Material,
    /// Quality factor of the fundamental mode in the surrounding fluid.
    pub quality_factor: f64,
    /// Multiplier from bound mass to tip-equivalent added mass (1.0 = tip-lumped).
    #[serde(default = "one")]
    pub mass_placement_factor: f64,
}

fn one() -> f64 {
    1.0
}

impl CantileverDevice {
    /// 500 x 100 x 5 µm silicon beam used throughout the tests and docs.
    pub fn reference() -> Self {
        Self {
            geometry: Geometry {
                length: 500e-6,
                width: 100e-6,
                thickness: 5e-6,
            },
            material: Material::SILICON,
            quality_factor: 1000.0,
            mass_placement_factor: 1.0,
        }
    }

    pub fn with_quality_factor(mut self, q: f64) -> Self {
        self.quality_factor = q;
        self
    }

    pub fn check(&self, prefix: &str, out: &mut Violations) {
        self.geometry
            .check(&crate::error::join_path(prefix, "geometry"), out);
        self.material
            .check(&crate::error::join_path(prefix, "material"), out);
        out.require(
            self.quality_factor > 0.0,
            prefix,
            "quality_factor",
            self.quality_factor,
            "> 0",
        );
        out.require(
            self.mass_placement_factor > 0.0 && self.mass_placement_factor.is_finite(),
            prefix,
            "mass_placement_factor",
            self.mass_placement_factor,
            "finite and > 0",
        );
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Violations::new();
        self.check("", &mut v);
        v.into_result()
    }

    pub fn spring_constant(&self) -> f64 {
        spring_constant(&self.geometry, &self.material)
    }

    pub fn effective_mass(&self) -> f64 {
        effective_mass(&self.geometry, &self.material)
    }

    pub fn modal_model(&self) -> Result<ModalModel> {
        self.validate()?;
        ModalModel::new(
            self.spring_constant(),
            self.effective_mass(),
            self.quality_factor,
        )
    }

    /// Tip-equivalent added mass for a bound mass `bound_mass`.
    pub fn tip_equivalent_mass(&self, bound_mass: f64) -> f64 {
        bound_mass * self.mass_placement_factor
    }
}

/// Lumped model of the fundamental flexural mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalModel {
    pub spring_constant: f64,
    pub effective_mass: f64,
    pub natural_frequency: f64,
    /// May be `f64::INFINITY` for an undamped resonator.
    pub quality_factor: f64,
}

impl ModalModel {
    pub fn new(spring_constant: f64, effective_mass: f64, quality_factor: f64) -> Result<Self> {
        let mut v = Violations::new();
        v.require(
            spring_constant > 0.0 && spring_constant.is_finite(),
            "modal",
            "spring_constant",
            spring_constant,
            "finite and > 0",
        );
        v.require(
            effective_mass > 0.0 && effective_mass.is_finite(),
            "modal",
            "effective_mass",
            effective_mass,
            "finite and > 0",
        );
        v.require(
            quality_factor > 0.0,
            "modal",
            "quality_factor",
            quality_factor,
            "> 0",
        );
        v.into_result()?;
        Ok(Self {
            spring_constant,
            effective_mass,
            natural_frequency: (spring_constant / effective_mass).sqrt() / (2.0 * PI),
            quality_factor,
        })
    }

    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI * self.natural_frequency
    }

    /// Viscous damping coefficient `m·ω0/Q` (N·s/m).
    pub fn damping(&self) -> f64 {
        self.effective_mass * self.angular_frequency() / self.quality_factor
    }

    /// Same spring and Q, with `delta_m` of tip-equivalent mass added.
    pub fn with_added_mass(&self, delta_m: f64) -> Result<Self> {
        check_added_mass(self, delta_m)?;
        ModalModel::new(
            self.spring_constant,
            self.effective_mass + delta_m,
            self.quality_factor,
        )
    }

    pub fn energy(&self, state: &OscState) -> f64 {
        0.5 * self.spring_constant * state.displacement * state.displacement
            + 0.5 * self.effective_mass * state.velocity * state.velocity
    }
}

/// Tip state of the resonator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OscState {
    /// Tip displacement (m).
    pub displacement: f64,
    /// Tip velocity (m/s).
    pub velocity: f64,
    pub time: f64,
}

impl OscState {
    pub fn at_rest() -> Self {
        Self::default()
    }

    pub fn displaced(z: f64) -> Self {
        Self {
            displacement: z,
            ..Self::default()
        }
    }
}

/// `k = E·w·t³ / (4·L³)`.
pub fn spring_constant(geom: &Geometry, mat: &Material) -> f64 {
    mat.youngs_modulus * geom.width * geom.thickness.powi(3) / (4.0 * geom.length.powi(3))
}

/// Tip-equivalent mass of the fundamental mode.
pub fn effective_mass(geom: &Geometry, mat: &Material) -> f64 {
    EFFECTIVE_MASS_FACTOR * mat.density * geom.volume()
}

fn check_added_mass(model: &ModalModel, delta_m: f64) -> Result<()> {
    if !(delta_m > -model.effective_mass) || !delta_m.is_finite() {
        return Err(Error::invalid(
            "delta_m",
            delta_m,
            "delta_m > -effective_mass",
        ));
    }
    Ok(())
}

/// Resonant frequency after adding `delta_m` of tip-equivalent mass.
pub fn mass_loaded_frequency(model: &ModalModel, delta_m: f64) -> Result<f64> {
    check_added_mass(model, delta_m)?;
    Ok((model.spring_constant / (model.effective_mass + delta_m)).sqrt() / (2.0 * PI))
}

/// Stoney tip deflection for differential surface stress `dsigma_s` (N/m).
///
/// Positive stress (compressive on the functionalized face) gives positive
/// (downward) deflection.
pub fn stoney_tip_deflection(geom: &Geometry, mat: &Material, dsigma_s: f64) -> f64 {
    3.0 * dsigma_s * (1.0 - mat.poisson_ratio) * geom.length.powi(2)
        / (mat.youngs_modulus * geom.thickness.powi(2))
}

/// Load applied to the beam when evaluating strain at the clamped edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClampLoad {
    /// Differential surface stress (N/m).
    SurfaceStress(f64),
    /// Tip displacement (m) of a dynamically deflected beam.
    TipDisplacement(f64),
}

/// Surface strain at the clamped edge, where the bridge sits.
///
/// The dynamic variant uses the static tip-load profile (`3·t·z / (2·L²)`),
/// about 10 % off the exact first-mode constant.
pub fn clamp_strain(geom: &Geometry, mat: &Material, load: ClampLoad) -> f64 {
    match load {
        ClampLoad::SurfaceStress(s) => {
            3.0 * s * (1.0 - mat.poisson_ratio) / (mat.youngs_modulus * geom.thickness)
        }
        ClampLoad::TipDisplacement(z) => dynamic_strain_per_displacement(geom) * z,
    }
}

/// Clamp strain per metre of tip displacement.
pub fn dynamic_strain_per_displacement(geom: &Geometry) -> f64 {
    3.0 * geom.thickness / (2.0 * geom.length * geom.length)
}

/// Fixed-step RK4 integrator for `m·z'' + c·z' + k·z = F` with the force held
/// over each step.
#[derive(Debug, Clone, Copy)]
pub struct Resonator {
    stiffness_over_mass: f64,
    damping_over_mass: f64,
    inv_mass: f64,
    dt: f64,
}

impl Resonator {
    pub fn new(model: &ModalModel, dt: f64) -> Result<Self> {
        let max_dt = 1.0 / (50.0 * model.natural_frequency);
        if !(dt > 0.0 && dt <= max_dt) {
            return Err(Error::invalid("dt", dt, "0 < dt <= 1/(50*f0)"));
        }
        Ok(Self {
            stiffness_over_mass: model.spring_constant / model.effective_mass,
            damping_over_mass: model.damping() / model.effective_mass,
            inv_mass: 1.0 / model.effective_mass,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    fn accel(&self, z: f64, v: f64, force: f64) -> f64 {
        force * self.inv_mass - self.damping_over_mass * v - self.stiffness_over_mass * z
    }

    #[inline]
    pub fn step(&self, s: &OscState, force: f64) -> OscState {
        let h = self.dt;
        let (z, v) = (s.displacement, s.velocity);

        let k1z = v;
        let k1v = self.accel(z, v, force);
        let k2z = v + 0.5 * h * k1v;
        let k2v = self.accel(z + 0.5 * h * k1z, v + 0.5 * h * k1v, force);
        let k3z = v + 0.5 * h * k2v;
        let k3v = self.accel(z + 0.5 * h * k2z, v + 0.5 * h * k2v, force);
        let k4z = v + h * k3v;
        let k4v = self.accel(z + h * k3z, v + h * k3v, force);

        OscState {
            displacement: z + h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z),
            velocity: v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
            time: s.time + h,
        }
    }
}

/// Advances the resonator by one RK4 step of length `dt` under constant `force`.
pub fn oscillator_step(
    state: &OscState,
    model: &ModalModel,
    force: f64,
    dt: f64,
) -> Result<OscState> {
    Ok(Resonator::new(model, dt)?.step(state, force))
}
