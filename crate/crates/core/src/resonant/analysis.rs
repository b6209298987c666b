use std::f64::consts::PI;

use num_complex::Complex64;

use super::sim::ResonantSystem;
use crate::error::Result;
use crate::filter::FirstOrder;
use crate::mech::dynamic_strain_per_displacement;

/// Small-signal open-loop transfer of the resonant loop.
///
/// The electronic sections are evaluated as the discrete filters the
/// simulator runs. The resonator is the continuous second-order response,
/// and the zero-order hold of the force adds half a sample of delay. The
/// limiter enters with its small-signal slope of one and the buffer with
/// `1/R_coil`.
#[derive(Debug, Clone)]
pub struct LoopAnalysis {
    hpfs: Vec<FirstOrder>,
    phase: Option<FirstOrder>,
    fs: f64,
    /// Real gain from tip displacement to coil force, excluding the VGA.
    flat_gain: f64,
    vga_gain: f64,
    stiffness: f64,
    mass: f64,
    damping: f64,
    f0: f64,
}

impl LoopAnalysis {
    pub fn new(sys: &ResonantSystem) -> Result<Self> {
        let lc = &sys.loop_cfg;
        let fs = lc.sample_rate;
        let phase = match lc.phase_shifter {
            true => Some(FirstOrder::all_pass_lead(sys.phase_center()?, fs)?),
            false => None,
        };
        let flat_gain = dynamic_strain_per_displacement(&sys.device.geometry)
            * sys.bridge.sensitivity()
            * lc.dda_gain
            / lc.coil_resistance
            * lc.force_per_amp();
        Ok(Self {
            hpfs: lc.hpf_sections()?,
            phase,
            fs,
            flat_gain,
            vga_gain: lc.vga_gain,
            stiffness: sys.modal.spring_constant,
            mass: sys.modal.effective_mass,
            damping: sys.modal.damping(),
            f0: sys.modal.natural_frequency,
        })
    }

    /// Displacement per unit force of the resonator (m/N).
    pub fn mechanical_response(&self, f: f64) -> Complex64 {
        let w = 2.0 * PI * f;
        1.0 / Complex64::new(self.stiffness - self.mass * w * w, self.damping * w)
    }

    /// Open-loop gain around the loop at `f`.
    pub fn open_loop(&self, f: f64) -> Complex64 {
        let mut h = Complex64::new(self.flat_gain * self.vga_gain, 0.0);
        for s in &self.hpfs {
            h *= s.response(f, self.fs);
        }
        if let Some(p) = &self.phase {
            h *= p.response(f, self.fs);
        }
        h * self.mechanical_response(f) * Complex64::from_polar(1.0, -PI * f / self.fs)
    }

    /// `|L(f0)|`, the small-signal loop gain at the mechanical resonance.
    pub fn loop_gain_at_resonance(&self) -> f64 {
        self.open_loop(self.f0).norm()
    }

    /// VGA setting that makes `|L(f0)| = 1`.
    pub fn critical_vga_gain(&self) -> f64 {
        let mut unit = self.clone();
        unit.vga_gain = 1.0;
        1.0 / unit.loop_gain_at_resonance()
    }

    /// Frequency within ±5 % of `f0` where the loop phase is zero, i.e. where
    /// a sustained oscillation runs. `None` if the phase has no zero there.
    pub fn predicted_frequency(&self) -> Option<f64> {
        let phase = |f: f64| self.open_loop(f).arg();
        let (mut lo, mut hi) = (0.95 * self.f0, 1.05 * self.f0);
        let (plo, phi) = (phase(lo), phase(hi));
        if !(plo > 0.0 && phi < 0.0) {
            return None;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if phase(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}
