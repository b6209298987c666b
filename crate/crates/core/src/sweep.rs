//! Measurement procedures run on the simulated resonator: stepped-sine
//! sweeps and ring-down decay fits.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mech::{ModalModel, OscState, Resonator};

/// Steady-state displacement amplitude under a sinusoidal force of
/// amplitude `force` at `f`, measured by projecting the response onto the
/// drive over `measure_cycles` after `settle_time`.
pub fn driven_amplitude(
    model: &ModalModel,
    force: f64,
    f: f64,
    steps_per_cycle: usize,
    settle_time: f64,
    measure_cycles: usize,
) -> Result<f64> {
    let dt = 1.0 / (f * steps_per_cycle as f64);
    let r = Resonator::new(model, dt)?;
    let settle_steps =
        ((settle_time / dt).ceil() as usize).div_ceil(steps_per_cycle) * steps_per_cycle;
    let measure_steps = measure_cycles * steps_per_cycle;
    let w = 2.0 * PI * f;
    let mut s = OscState::at_rest();
    let (mut in_phase, mut quad) = (0.0, 0.0);
    for n in 0..settle_steps + measure_steps {
        let t = n as f64 * dt;
        s = r.step(&s, force * (w * t).sin());
        if n >= settle_steps {
            let t1 = t + dt;
            in_phase += s.displacement * (w * t1).sin();
            quad += s.displacement * (w * t1).cos();
        }
    }
    let scale = 2.0 / measure_steps as f64;
    Ok(scale * (in_phase * in_phase + quad * quad).sqrt())
}

/// Frequency of peak displacement response found by a two-stage stepped
/// sweep around `model.natural_frequency` with parabolic refinement.
pub fn resonance_peak(model: &ModalModel, steps_per_cycle: usize) -> Result<f64> {
    let f0 = model.natural_frequency;
    let q = model.quality_factor;
    if !q.is_finite() {
        return Err(Error::invalid(
            "quality_factor",
            q,
            "finite for a driven sweep",
        ));
    }
    // Ten amplitude time constants.
    let settle = 10.0 * 2.0 * q / (2.0 * PI * f0);
    let amp = |f: f64| driven_amplitude(model, 1e-9, f, steps_per_cycle, settle, 20);

    let coarse: Vec<f64> = (-10..=10).map(|i| f0 * (1.0 + 0.005 * i as f64)).collect();
    let mut best = (coarse[0], 0.0);
    for &f in &coarse {
        let a = amp(f)?;
        if a > best.1 {
            best = (f, a);
        }
    }
    let centre = best.0;
    let step = (0.5 * f0 / q).min(0.0005 * f0);
    let fine: Vec<f64> = (-10..=10).map(|i| centre + step * i as f64).collect();
    let amps: Vec<f64> = fine.iter().map(|&f| amp(f)).collect::<Result<_>>()?;
    let k = amps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(10)
        .clamp(1, fine.len() - 2);
    let (y0, y1, y2) = (amps[k - 1], amps[k], amps[k + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let offset = if denom != 0.0 {
        0.5 * (y0 - y2) / denom
    } else {
        0.0
    };
    Ok(fine[k] + offset * step)
}

/// Free decay from `z0` over `cycles` periods; returns the fitted exponential
/// decay rate (1/s) of the displacement envelope.
///
/// Each positive peak is located by a parabola through the three samples
/// around a local maximum, and `ln(peak)` is fitted against peak time.
pub fn ring_down_rate(
    model: &ModalModel,
    z0: f64,
    steps_per_cycle: usize,
    cycles: usize,
) -> Result<f64> {
    let dt = 1.0 / (model.natural_frequency * steps_per_cycle as f64);
    let r = Resonator::new(model, dt)?;
    let mut s = OscState::displaced(z0);
    let mut z = vec![s.displacement];
    for _ in 0..steps_per_cycle * cycles {
        s = r.step(&s, 0.0);
        z.push(s.displacement);
    }
    let mut pts = Vec::new();
    for i in 1..z.len() - 1 {
        if z[i] > z[i - 1] && z[i] >= z[i + 1] && z[i] > 0.0 {
            let (a, b, c) = (z[i - 1], z[i], z[i + 1]);
            let denom = a - 2.0 * b + c;
            let off = if denom != 0.0 {
                0.5 * (a - c) / denom
            } else {
                0.0
            };
            let peak = b - 0.25 * (a - c) * off;
            pts.push(((i as f64 + off) * dt, peak.ln()));
        }
    }
    if pts.len() < 3 {
        return Err(Error::invalid(
            "cycles",
            cycles,
            "enough cycles for at least three peaks",
        ));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stl: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Ok(-stl / stt)
}
