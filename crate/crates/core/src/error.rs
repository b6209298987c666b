use std::fmt;

/// A single violated constraint, identified by the path of the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub value: String,
    pub constraint: String,
}

impl Violation {
    pub fn new(
        path: impl Into<String>,
        value: impl fmt::Display,
        constraint: impl Into<String>,
    ) -> Self {
        Self {
            path: path.into(),
            value: value.to_string(),
            constraint: constraint.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} = {}: requires {}",
            self.path, self.value, self.constraint
        )
    }
}

/// Collects violations without failing fast.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Violations(pub Vec<Violation>);

impl Violations {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a violation at `prefix.field` unless `ok` holds.
    pub fn require(
        &mut self,
        ok: bool,
        prefix: &str,
        field: &str,
        value: impl fmt::Display,
        constraint: &str,
    ) {
        if !ok {
            self.0
                .push(Violation::new(join_path(prefix, field), value, constraint));
        }
    }

    pub fn push(&mut self, v: Violation) {
        self.0.push(v);
    }

    pub fn extend(&mut self, other: Violations) {
        self.0.extend(other.0);
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Violation> {
        self.0.iter()
    }

    pub fn into_result(self) -> Result<(), Error> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(self))
        }
    }
}

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub(crate) fn join_path(prefix: &str, field: &str) -> String {
    if prefix.is_empty() {
        field.to_string()
    } else {
        format!("{prefix}.{field}")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Invalid(Violations),

    #[error("no signal: fewer than two threshold crossings inside the gate")]
    NoSignal,

    #[error("signal too short: {have} samples, gate needs {need}")]
    SignalTooShort { have: usize, need: usize },

    #[error("no oscillation: peak bridge signal {peak:.3e} V never exceeded 10x noise floor {floor:.3e} V")]
    NoOscillation { peak: f64, floor: f64 },

    #[error("not settled: oscillation amplitude did not settle within {duration} s")]
    NotSettled { duration: f64 },

    #[error("offset out of DAC range: best residual {residual:.3e} V exceeds {limit:.3e} V")]
    OffsetOutOfRange { residual: f64, limit: f64 },
}

impl Error {
    pub(crate) fn invalid(path: &str, value: impl fmt::Display, constraint: &str) -> Self {
        Error::Invalid(Violations(vec![Violation::new(path, value, constraint)]))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
