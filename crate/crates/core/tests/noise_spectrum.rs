use cantilever_core::bridge::{noise_psd, BridgeConfig, ResistorKind};
use cantilever_core::noise::sample_noise;
use cantilever_core::spectrum::welch_psd;

const FS: f64 = 1e6;
const N: usize = 1 << 20;

fn pmos() -> BridgeConfig {
    BridgeConfig::new(ResistorKind::PmosLinear)
}

#[test]
fn welch_level_at_100_hz() {
    let cfg = pmos();
    let x = sample_noise(&cfg, 1.0 / FS, N, 5).unwrap();
    let psd = welch_psd(&x, FS, 1 << 16).unwrap();
    let got = psd.mean_density(90.0, 110.0);
    let want = noise_psd(&cfg, 100.0).unwrap();
    let db = 10.0 * (got / want).log10();
    assert!(db.abs() <= 3.0, "{db} dB");
}

#[test]
fn flicker_slope_in_corner_decade_below() {
    let cfg = pmos();
    let x = sample_noise(&cfg, 1.0 / FS, N, 6).unwrap();
    let psd = welch_psd(&x, FS, 1 << 16).unwrap();
    let fc = cfg.flicker_corner;
    let slope = psd.log_slope(fc / 100.0, fc / 10.0);
    assert!((-1.3..=-0.7).contains(&slope), "{slope}");
}

#[test]
fn band_variance_matches_integrated_psd() {
    let cfg = pmos();
    let x = sample_noise(&cfg, 1.0 / FS, N, 7).unwrap();
    let psd = welch_psd(&x, FS, 1 << 14).unwrap();
    for (f1, f2) in [(100.0, 10e3), (1e3, 100e3), (10e3, 400e3)] {
        let got = psd.band_power(f1, f2);
        // ∫ S_w (1 + f_c/f) df
        let sw = cfg.white_noise_density;
        let want = sw * ((f2 - f1) + cfg.flicker_corner * (f2 / f1).ln());
        let rel = got / want - 1.0;
        assert!(rel.abs() <= 0.3, "[{f1}, {f2}]: {rel}");
    }
}

#[test]
fn white_floor_of_diffused_bridge() {
    let cfg = BridgeConfig::new(ResistorKind::Diffused);
    let x = sample_noise(&cfg, 1.0 / FS, 1 << 18, 8).unwrap();
    let psd = welch_psd(&x, FS, 1 << 12).unwrap();
    let got = psd.mean_density(100e3, 300e3);
    let want = cfg.white_noise_density * (1.0 + cfg.flicker_corner / 200e3);
    assert!((got / want - 1.0).abs() < 0.05, "{got} vs {want}");
}
