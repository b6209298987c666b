use std::path::PathBuf;
use std::process::ExitCode;

use cantilever_cli::spec::validate_table;
use cantilever_cli::{run_experiment, ExperimentSpec, Mode};
use clap::{Args, Parser, Subcommand, ValueEnum};
use toml::{Table, Value};

#[derive(Parser)]
#[command(name = "cantilever", version, about = "Cantilever biosensor simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment spec (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the spec seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Parallel sweep workers (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Keep every n-th trace sample; overrides `output.decimate`.
    #[arg(long)]
    decimate: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Static,
    Resonant,
    AssayStatic,
    AssayResonant,
    Characterize,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Static => Mode::Static,
            ModeArg::Resonant => Mode::Resonant,
            ModeArg::AssayStatic => Mode::AssayStatic,
            ModeArg::AssayResonant => Mode::AssayResonant,
            ModeArg::Characterize => Mode::Characterize,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate k, m_eff, f0 and responsivities of the device.
    Characterize(Common),
    /// Static surface-stress measurement through the readout chain.
    SimulateStatic(Common),
    /// Closed-loop resonant run with frequency counter.
    SimulateResonant(Common),
    /// Binding kinetics read out statically, or resonantly when the spec
    /// mode is `assay_resonant`.
    SimulateAssay(Common),
    /// Run the spec's `[sweep]`, one summary row per value.
    Sweep(Common),
    /// Check a spec and list every problem.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print a complete reference spec.
    DefaultConfig {
        #[arg(long, value_enum, default_value = "resonant")]
        mode: ModeArg,
    },
}

enum Failure {
    Validation(String),
    Simulation(String),
}

fn read_table(path: &PathBuf) -> Result<Table, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    text.parse::<Table>()
        .map_err(|e| Failure::Validation(format!("{}: {}", path.display(), e.message().trim())))
}

fn validated(table: Table) -> Result<ExperimentSpec, Failure> {
    validate_table(table).map_err(|errs| {
        Failure::Validation(
            errs.iter()
                .map(|v| format!("  {v}\n"))
                .collect::<String>()
                .trim_end()
                .to_string(),
        )
    })
}

/// Applies flag overrides and the subcommand's mode, then validates.
fn prepare(c: &Common, mode: Option<Mode>, keep_sweep: bool) -> Result<ExperimentSpec, Failure> {
    let mut t = read_table(&c.config)?;
    if let Some(m) = mode {
        t.insert("mode".into(), Value::String(m.name().into()));
    }
    if !keep_sweep {
        t.remove("sweep");
    } else if !t.contains_key("sweep") {
        return Err(Failure::Validation(
            "  sweep = missing: requires a [sweep] section for the sweep command".into(),
        ));
    }
    if let Some(seed) = c.seed {
        let seed = i64::try_from(seed)
            .map_err(|_| Failure::Validation("  seed: must fit in i64".into()))?;
        t.insert("seed".into(), Value::Integer(seed));
    }
    if let Some(d) = c.decimate {
        let out = t
            .entry("output")
            .or_insert_with(|| Value::Table(Table::new()));
        if let Value::Table(o) = out {
            o.insert("decimate".into(), Value::Integer(d as i64));
        }
    }
    validated(t)
}

fn execute(c: &Common, spec: &ExperimentSpec) -> Result<(), Failure> {
    let out = c
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&spec.output.dir));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(c.workers.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Simulation(e.to_string()))?;
    match pool.install(|| run_experiment(spec, &out)) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Err(e) => {
            let msg = e.to_string();
            Err(match e.exit_code() {
                1 => Failure::Validation(msg),
                _ => Failure::Simulation(msg),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { config } => read_table(config).and_then(validated).map(|s| {
            println!("ok: {} spec", s.mode.name());
        }),
        Command::DefaultConfig { mode } => {
            print!("{}", ExperimentSpec::reference((*mode).into()).to_toml());
            Ok(())
        }
        Command::Characterize(c) => {
            prepare(c, Some(Mode::Characterize), false).and_then(|s| execute(c, &s))
        }
        Command::SimulateStatic(c) => {
            prepare(c, Some(Mode::Static), false).and_then(|s| execute(c, &s))
        }
        Command::SimulateResonant(c) => {
            prepare(c, Some(Mode::Resonant), false).and_then(|s| execute(c, &s))
        }
        Command::SimulateAssay(c) => read_table(&c.config)
            .map(|t| match t.get("mode").and_then(Value::as_str) {
                Some("assay_resonant") => Mode::AssayResonant,
                _ => Mode::AssayStatic,
            })
            .and_then(|m| prepare(c, Some(m), false))
            .and_then(|s| execute(c, &s)),
        Command::Sweep(c) => prepare(c, None, true).and_then(|s| execute(c, &s)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("validation failed:\n{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Simulation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
