//! Experiment description files.
//!
//! A spec is a TOML document with a `schema_version`, a `mode`, run-level
//! scalars and one section per module configuration. Validation collects
//! every problem before reporting.

use cantilever_core::bridge::ResistorKind;
use cantilever_core::counter::CounterConfig;
use cantilever_core::mech::CantileverDevice;
use cantilever_core::resonant::LoopConfig;
use cantilever_core::static_chain::CHANNEL_COUNT;
use cantilever_core::{AssayConfig, BridgeConfig, StaticChainConfig, Violation, Violations};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Static,
    Resonant,
    AssayStatic,
    AssayResonant,
    Characterize,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Static => "static",
            Mode::Resonant => "resonant",
            Mode::AssayStatic => "assay_static",
            Mode::AssayResonant => "assay_resonant",
            Mode::Characterize => "characterize",
        }
    }

    /// Sections that must be present for this mode.
    pub fn required_sections(self) -> &'static [&'static str] {
        match self {
            Mode::Characterize => &["device", "bridge"],
            Mode::Static => &["device", "bridge", "chain"],
            Mode::Resonant => &["device", "bridge", "loop", "counter"],
            Mode::AssayStatic => &["device", "bridge", "chain", "assay"],
            Mode::AssayResonant => &["device", "assay"],
        }
    }
}

/// Per-run inputs that are not module configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stimulus {
    /// Surface stress on each static cantilever (N/m).
    pub surface_stress: [f64; CHANNEL_COUNT],
    /// Multiplexer channel read in static modes; also the cantilever
    /// receiving the assay load.
    pub channel: usize,
    /// Null the chain offset before measuring.
    pub calibrate: bool,
    /// Bound mass on the resonant cantilever (kg).
    pub added_mass: f64,
    /// When set, overrides `loop.vga_gain` so the small-signal loop gain at
    /// resonance equals this value.
    pub loop_gain: Option<f64>,
    /// Points on the assay time grid.
    pub assay_points: usize,
}

impl Default for Stimulus {
    fn default() -> Self {
        Self {
            surface_stress: [0.0; CHANNEL_COUNT],
            channel: 0,
            calibrate: true,
            added_mass: 0.0,
            loop_gain: None,
            assay_points: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// Dotted path of a numeric field, e.g. `stimulus.added_mass` or
    /// `loop.hpf_cutoffs.0`.
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub dir: String,
    /// File name stem for the trace and summary files.
    pub name: String,
    /// Keep every n-th trace sample.
    pub decimate: usize,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            name: "run".into(),
            decimate: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub schema_version: i64,
    pub mode: Mode,
    /// Simulated time (s).
    pub duration: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<CantileverDevice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bridge: Option<BridgeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<StaticChainConfig>,
    #[serde(rename = "loop", default, skip_serializing_if = "Option::is_none")]
    pub loop_cfg: Option<LoopConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counter: Option<CounterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assay: Option<AssayConfig>,
    #[serde(default)]
    pub stimulus: Stimulus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub output: Output,
}

const TOP_LEVEL: &[&str] = &[
    "schema_version",
    "mode",
    "duration",
    "seed",
    "device",
    "bridge",
    "chain",
    "loop",
    "counter",
    "assay",
    "stimulus",
    "sweep",
    "output",
];

impl ExperimentSpec {
    /// Reference spec for `mode` with every section filled in.
    pub fn reference(mode: Mode) -> Self {
        let device = CantileverDevice::reference();
        let f0 = device
            .modal_model()
            .expect("reference device")
            .natural_frequency;
        let (bridge, duration, stimulus) = match mode {
            Mode::Resonant => (
                BridgeConfig::new(ResistorKind::PmosLinear),
                0.4,
                Stimulus {
                    loop_gain: Some(3.0),
                    ..Default::default()
                },
            ),
            Mode::AssayStatic | Mode::AssayResonant => (
                BridgeConfig::new(ResistorKind::Diffused),
                3600.0,
                Stimulus::default(),
            ),
            _ => (
                BridgeConfig::new(ResistorKind::Diffused),
                0.5,
                Stimulus {
                    surface_stress: [5e-3, 0.0, 0.0, 0.0],
                    ..Default::default()
                },
            ),
        };
        Self {
            schema_version: SCHEMA_VERSION,
            mode,
            duration,
            seed: 1,
            device: Some(device),
            bridge: Some(bridge),
            chain: Some(StaticChainConfig::default()),
            loop_cfg: Some(LoopConfig::for_resonance(f0)),
            counter: Some(CounterConfig::default()),
            assay: Some(AssayConfig::default()),
            stimulus,
            sweep: None,
            output: Output::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn to_value(&self) -> Value {
        Value::try_from(self).expect("spec serializes")
    }

    pub fn check(&self, out: &mut Violations) {
        out.require(
            self.schema_version == SCHEMA_VERSION,
            "",
            "schema_version",
            self.schema_version,
            "schema_version == 1",
        );
        out.require(
            self.duration > 0.0 && self.duration.is_finite(),
            "",
            "duration",
            self.duration,
            "duration > 0",
        );
        for &name in self.mode.required_sections() {
            if !self.has_section(name) {
                out.push(Violation::new(
                    name,
                    "missing",
                    format!("section [{name}] in {} mode", self.mode.name()),
                ));
            }
        }

        let mut f0 = None;
        if let Some(d) = &self.device {
            let before = out.len();
            d.check("device", out);
            if out.len() == before {
                f0 = d.modal_model().ok().map(|m| m.natural_frequency);
            }
        }
        if let Some(b) = &self.bridge {
            b.check("bridge", out);
        }
        if let Some(c) = &self.chain {
            c.check("chain", out);
        }
        if let (Some(l), Some(f0)) = (&self.loop_cfg, f0) {
            l.check("loop", f0, out);
        }
        if let Some(c) = &self.counter {
            c.check("counter", out);
        }
        if let Some(a) = &self.assay {
            a.check("assay", out);
        }
        self.check_stimulus(out);
        self.check_output(out);
        self.check_mode_duration(f0, out);
        if let Some(s) = &self.sweep {
            check_sweep(s, &self.to_value(), out);
        }
    }

    fn has_section(&self, name: &str) -> bool {
        match name {
            "device" => self.device.is_some(),
            "bridge" => self.bridge.is_some(),
            "chain" => self.chain.is_some(),
            "loop" => self.loop_cfg.is_some(),
            "counter" => self.counter.is_some(),
            "assay" => self.assay.is_some(),
            _ => true,
        }
    }

    fn check_stimulus(&self, out: &mut Violations) {
        let s = &self.stimulus;
        let p = "stimulus";
        out.require(
            s.channel < CHANNEL_COUNT,
            p,
            "channel",
            s.channel,
            "channel < 4",
        );
        for (i, v) in s.surface_stress.iter().enumerate() {
            out.require(
                v.is_finite(),
                p,
                &format!("surface_stress.{i}"),
                v,
                "finite",
            );
        }
        out.require(
            s.added_mass.is_finite() && s.added_mass >= 0.0,
            p,
            "added_mass",
            s.added_mass,
            "added_mass >= 0",
        );
        if let Some(g) = s.loop_gain {
            out.require(
                g >= 0.0 && g.is_finite(),
                p,
                "loop_gain",
                g,
                "loop_gain >= 0",
            );
        }
        out.require(
            s.assay_points >= 2,
            p,
            "assay_points",
            s.assay_points,
            "assay_points >= 2",
        );
    }

    fn check_output(&self, out: &mut Violations) {
        let o = &self.output;
        out.require(
            o.decimate >= 1,
            "output",
            "decimate",
            o.decimate,
            "decimate >= 1",
        );
        let plain = !o.name.is_empty()
            && o.name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        out.require(plain, "output", "name", &o.name, "non-empty [A-Za-z0-9_-]");
    }

    fn check_mode_duration(&self, f0: Option<f64>, out: &mut Violations) {
        match self.mode {
            Mode::Resonant => {
                if let Some(f0) = f0 {
                    out.require(
                        self.duration >= 100.0 / f0,
                        "",
                        "duration",
                        self.duration,
                        "duration >= 100/f0",
                    );
                }
            }
            Mode::Static => {
                if let Some(c) = &self.chain {
                    let min = c.settle_samples() as f64 / c.sample_rate();
                    out.require(
                        self.duration > min,
                        "",
                        "duration",
                        self.duration,
                        "duration > 10 LPF time constants",
                    );
                }
            }
            _ => {}
        }
    }
}

fn check_sweep(s: &Sweep, doc: &Value, out: &mut Violations) {
    if s.values.is_empty() {
        out.push(Violation::new("sweep.values", "[]", "at least one value"));
    }
    for (i, v) in s.values.iter().enumerate() {
        out.require(v.is_finite(), "sweep", &format!("values.{i}"), v, "finite");
    }
    if s.parameter.starts_with("sweep") {
        out.push(Violation::new(
            "sweep.parameter",
            &s.parameter,
            "must not point into [sweep]",
        ));
        return;
    }
    match lookup(doc, &s.parameter) {
        Some(Value::Float(_)) | Some(Value::Integer(_)) => {}
        _ => out.push(Violation::new(
            "sweep.parameter",
            &s.parameter,
            "path must resolve to a numeric field",
        )),
    }
}

/// Accepts `a.b[1]` as well as `a.b.1`.
fn segments(path: &str) -> impl Iterator<Item = &str> {
    path.split(['.', '[', ']']).filter(|s| !s.is_empty())
}

/// Follows a dotted path; numeric segments index arrays.
pub fn lookup<'a>(doc: &'a Value, path: &str) -> Option<&'a Value> {
    segments(path).try_fold(doc, |v, key| match v {
        Value::Table(t) => t.get(key),
        Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get(i)),
        _ => None,
    })
}

/// Replaces the numeric field at `path`, keeping integers integral.
pub fn set_numeric(doc: &mut Value, path: &str, x: f64) -> Result<(), Violation> {
    let bad = || Violation::new(path, x, "path must resolve to a numeric field");
    let slot = segments(path).try_fold(doc, |v, key| match v {
        Value::Table(t) => t.get_mut(key),
        Value::Array(a) => key.parse::<usize>().ok().and_then(move |i| a.get_mut(i)),
        _ => None,
    });
    match slot {
        Some(v @ Value::Float(_)) => *v = Value::Float(x),
        Some(v @ Value::Integer(_)) => {
            if x.fract() != 0.0 || x.abs() > i64::MAX as f64 {
                return Err(Violation::new(
                    path,
                    x,
                    "integer field needs an integral value",
                ));
            }
            *v = Value::Integer(x as i64);
        }
        _ => return Err(bad()),
    }
    Ok(())
}

fn section<T: DeserializeOwned>(table: &Table, key: &str, out: &mut Violations) -> Option<T> {
    let v = table.get(key)?;
    match v.clone().try_into::<T>() {
        Ok(t) => Some(t),
        Err(e) => {
            out.push(Violation::new(
                key,
                short(v),
                e.message().trim().to_string(),
            ));
            None
        }
    }
}

fn short(v: &Value) -> String {
    match v {
        Value::Table(_) => "{...}".into(),
        Value::Array(_) => "[...]".into(),
        other => other.to_string(),
    }
}

/// Parses and checks a spec, reporting every problem found.
pub fn validate_spec(text: &str) -> Result<ExperimentSpec, Violations> {
    let mut out = Violations::new();
    let table: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            out.push(Violation::new(
                "<document>",
                "unparsable",
                e.message().trim().to_string(),
            ));
            return Err(out);
        }
    };
    validate_table(table)
}

/// As [`validate_spec`] for an already parsed document.
pub fn validate_table(table: Table) -> Result<ExperimentSpec, Violations> {
    let mut out = Violations::new();
    for key in table.keys() {
        if !TOP_LEVEL.contains(&key.as_str()) {
            out.push(Violation::new(
                key.as_str(),
                "present",
                "a known top-level key",
            ));
        }
    }
    let required = |key: &str, out: &mut Violations| {
        if !table.contains_key(key) {
            out.push(Violation::new(key, "missing", "a value"));
        }
    };
    for key in ["schema_version", "mode", "duration", "seed"] {
        required(key, &mut out);
    }

    let schema_version: Option<i64> = section(&table, "schema_version", &mut out);
    let mode: Option<Mode> = section(&table, "mode", &mut out);
    let duration: Option<f64> = section::<Value>(&table, "duration", &mut out).and_then(|v| {
        let x = v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
        if x.is_none() {
            out.push(Violation::new("duration", short(&v), "a number of seconds"));
        }
        x
    });
    let seed: Option<u64> = section(&table, "seed", &mut out);
    let device = section(&table, "device", &mut out);
    let bridge = section(&table, "bridge", &mut out);
    let chain = section(&table, "chain", &mut out);
    let loop_cfg = section(&table, "loop", &mut out);
    let counter = section(&table, "counter", &mut out);
    let assay = section(&table, "assay", &mut out);
    let stimulus = section(&table, "stimulus", &mut out);
    let sweep = section(&table, "sweep", &mut out);
    let output = section(&table, "output", &mut out);

    let (Some(schema_version), Some(mode), Some(duration), Some(seed)) =
        (schema_version, mode, duration, seed)
    else {
        return Err(out);
    };
    let spec = ExperimentSpec {
        schema_version,
        mode,
        duration,
        seed,
        device,
        bridge,
        chain,
        loop_cfg,
        counter,
        assay,
        stimulus: stimulus.unwrap_or_default(),
        sweep,
        output: output.unwrap_or_default(),
    };
    // Sections that failed to deserialize are reported above; the semantic
    // pass would only add "missing section" noise for them.
    let failed: Vec<String> = out.iter().map(|v| v.path.clone()).collect();
    let mut semantic = Violations::new();
    spec.check(&mut semantic);
    for v in semantic.0 {
        if !failed.contains(&v.path) {
            out.push(v);
        }
    }
    if out.is_empty() {
        Ok(spec)
    } else {
        Err(out)
    }
}
