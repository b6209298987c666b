use std::fs;
use std::path::{Path, PathBuf};

use cantilever_core::{Error, Violations};
use rayon::prelude::*;

use crate::run::{run_spec, RunOutput, Table};
use crate::spec::{set_numeric, validate_table, ExperimentSpec, Sweep};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid spec: {0}")]
    Invalid(Violations),
    #[error("simulation failed: {0}")]
    Simulation(Error),
    #[error("{0} of {1} sweep points failed; see the status column")]
    SweepPoints(usize, usize, bool),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Invalid(_) => 1,
            RunError::SweepPoints(_, _, invalid) if *invalid => 1,
            _ => 2,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Invalid(v) => RunError::Invalid(v),
            other => RunError::Simulation(other),
        }
    }
}

fn write_table(path: &Path, t: &Table) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&t.header).map_err(std::io::Error::other)?;
    for r in &t.rows {
        w.write_record(r).map_err(std::io::Error::other)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Runs a validated spec and writes `<name>_trace.csv` (when the mode has
/// a trace) and `<name>_summary.csv` into `out_dir`. Specs with a sweep
/// run every point; see [`run_sweep`].
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    if let Some(sweep) = &spec.sweep {
        return run_sweep(spec, sweep, out_dir);
    }
    let result = run_spec(spec)?;
    fs::create_dir_all(out_dir)?;
    write_run(&result, out_dir, &spec.output.name)
}

fn write_run(r: &RunOutput, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, RunError> {
    let mut files = Vec::new();
    if let Some(t) = &r.trace {
        let p = dir.join(format!("{stem}_trace.csv"));
        write_table(&p, t)?;
        files.push(p);
    }
    let p = dir.join(format!("{stem}_summary.csv"));
    write_table(&p, &r.summary)?;
    files.push(p);
    Ok(files)
}

/// Spec for one sweep point: the swept field replaced and the whole
/// document revalidated.
pub fn sweep_point(
    spec: &ExperimentSpec,
    parameter: &str,
    value: f64,
) -> Result<ExperimentSpec, Violations> {
    let mut base = spec.clone();
    base.sweep = None;
    let mut doc = base.to_value();
    set_numeric(&mut doc, parameter, value).map_err(|v| Violations(vec![v]))?;
    let toml::Value::Table(table) = doc else {
        unreachable!("spec serializes to a table")
    };
    validate_table(table)
}

enum PointOutcome {
    Done(RunOutput),
    Invalid(Violations),
    Failed(Error),
}

/// Runs each sweep value as an independent experiment on the rayon pool.
///
/// Each point writes `<name>_point<i>_trace.csv`; one `<name>_sweep.csv`
/// holds a summary row per value with a `status` column. Every point uses
/// the spec's seed.
pub fn run_sweep(
    spec: &ExperimentSpec,
    sweep: &Sweep,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(out_dir)?;
    let stem = &spec.output.name;
    let outcomes: Vec<(PointOutcome, Option<PathBuf>)> = sweep
        .values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let outcome = match sweep_point(spec, &sweep.parameter, v) {
                Err(e) => PointOutcome::Invalid(e),
                Ok(point) => match run_spec(&point) {
                    Ok(r) => PointOutcome::Done(r),
                    Err(Error::Invalid(e)) => PointOutcome::Invalid(e),
                    Err(e) => PointOutcome::Failed(e),
                },
            };
            let mut file = None;
            if let PointOutcome::Done(RunOutput { trace: Some(t), .. }) = &outcome {
                let p = out_dir.join(format!("{stem}_point{i:03}_trace.csv"));
                write_table(&p, t)?;
                file = Some(p);
            }
            Ok((outcome, file))
        })
        .collect::<std::io::Result<_>>()?;

    let columns = outcomes.iter().find_map(|(o, _)| match o {
        PointOutcome::Done(r) => Some(r.summary.header.clone()),
        _ => None,
    });
    let columns = columns.unwrap_or_default();
    let mut table = Table {
        header: ["point", sweep.parameter.as_str(), "status"]
            .iter()
            .map(|s| s.to_string())
            .chain(columns.iter().cloned())
            .collect(),
        rows: Vec::new(),
    };
    let (mut failed, mut invalid) = (0, false);
    let mut files = Vec::new();
    for (i, ((outcome, file), v)) in outcomes.into_iter().zip(&sweep.values).enumerate() {
        let mut row = vec![i.to_string(), crate::run::num(*v)];
        match outcome {
            PointOutcome::Done(r) => {
                row.push("ok".into());
                row.extend(r.summary.rows.into_iter().next().unwrap_or_default());
            }
            PointOutcome::Invalid(e) => {
                failed += 1;
                invalid = true;
                row.push(format!("invalid: {e}"));
                row.resize(table.header.len(), String::new());
            }
            PointOutcome::Failed(e) => {
                failed += 1;
                row.push(e.to_string());
                row.resize(table.header.len(), String::new());
            }
        }
        table.rows.push(row);
        files.extend(file);
    }
    let p = out_dir.join(format!("{stem}_sweep.csv"));
    write_table(&p, &table)?;
    files.push(p);
    if failed > 0 {
        return Err(RunError::SweepPoints(failed, sweep.values.len(), invalid));
    }
    Ok(files)
}
