use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::args::{Format, Output};

/// What went wrong, and which exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flag, config or dimension; exit 2.
    Usage { field: String, message: String },
    /// The computation itself failed (no convergence, LP failure); exit 1.
    Failure(String),
}

impl CliError {
    pub fn usage(field: impl Into<String>, message: impl fmt::Display) -> Self {
        CliError::Usage {
            field: field.into(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage { field, message } => write!(f, "invalid `{field}`: {message}"),
            CliError::Failure(m) => write!(f, "{m}"),
        }
    }
}

impl From<hmono_core::Error> for CliError {
    fn from(e: hmono_core::Error) -> Self {
        use hmono_core::Error as E;
        let field = match &e {
            E::InvalidArgument { name, .. } | E::NonFinite(name) => (*name).to_string(),
            E::DimensionMismatch { .. } => "n".into(),
            E::GaugeDimension(_) => "op.n".into(),
            E::EmptySet => "op".into(),
            E::NotHorizontal { .. } | E::InvalidChain(_) | E::DegenerateChain => "chain".into(),
            E::AngleOutOfRange { .. } => "theta".into(),
            E::LemmaHypothesis(_) => "eta_prime".into(),
            E::NonConvergence { .. } | E::SetValuedIterate(_) | E::Internal(_) | E::Lp(_) => {
                return CliError::Failure(e.to_string())
            }
        };
        CliError::usage(field, e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Flat table for the grid-scan subcommands' CSV output.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: impl IntoIterator<Item = String>) {
        self.rows.push(row.into_iter().collect());
    }
}

pub struct Report {
    pub command: &'static str,
    pub config: Value,
    pub ok: bool,
    pub result: Value,
    pub table: Option<Table>,
}

impl Report {
    pub fn new(command: &'static str, config: Value, ok: bool, result: impl Serialize) -> CliResult<Self> {
        let result = serde_json::to_value(result).map_err(|e| CliError::Failure(e.to_string()))?;
        Ok(Report {
            command,
            config,
            ok,
            result,
            table: None,
        })
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    fn render(&self, format: Format) -> CliResult<Vec<u8>> {
        match format {
            Format::Json => {
                #[derive(Serialize)]
                struct Doc<'a> {
                    command: &'a str,
                    config: &'a Value,
                    ok: bool,
                    result: &'a Value,
                }
                let doc = Doc {
                    command: self.command,
                    config: &self.config,
                    ok: self.ok,
                    result: &self.result,
                };
                let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Failure(e.to_string()))?;
                out.push(b'\n');
                Ok(out)
            }
            Format::Csv => {
                let Some(table) = &self.table else {
                    return Err(CliError::usage(
                        "format",
                        format!("`{}` has no tabular output; use --format json", self.command),
                    ));
                };
                let mut out = Vec::new();
                writeln!(out, "# command: {}", self.command).unwrap();
                writeln!(out, "# config: {}", self.config).unwrap();
                writeln!(out, "# ok: {}", self.ok).unwrap();
                let mut w = csv::Writer::from_writer(out);
                let io = |e: csv::Error| CliError::Failure(e.to_string());
                w.write_record(&table.header).map_err(io)?;
                for row in &table.rows {
                    w.write_record(row).map_err(io)?;
                }
                w.into_inner().map_err(|e| CliError::Failure(e.to_string()))
            }
        }
    }

    pub fn emit(&self, output: &Output) -> CliResult<()> {
        let bytes = self.render(output.format)?;
        match &output.out {
            Some(path) => write_file(path, &bytes),
            None => std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| CliError::Failure(format!("writing stdout: {e}"))),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::usage("out", format!("{}: {e}", path.display())))
}

/// Shortest round-trip formatting, so CSV cells match the JSON numbers.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}
