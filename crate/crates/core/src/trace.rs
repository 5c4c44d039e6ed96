//! Per-iteration solver records and their JSON/CSV serialization.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::counters::CounterSnapshot;
use crate::error::{Error, Result};

pub const TRACE_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Damped,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
}

/// State at iteration `k` and the step taken from it. The last record of a
/// run carries `alpha = 0`. Counters are cumulative since the solve started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    /// `F(xᵏ)`.
    pub f: f64,
    pub lambda: f64,
    pub beta: f64,
    pub alpha: f64,
    /// Scalar metric `L_k` (gradient methods); absent for Newton-type methods.
    pub l: Option<f64>,
    pub n_chol: u64,
    pub n_matmul: u64,
    pub n_prox: u64,
    pub n_feval: u64,
    /// Factorizations spent inside objective evaluations (line searches).
    #[serde(default)]
    pub n_chol_feval: u64,
    pub wall_ms: f64,
    #[serde(default)]
    pub phase: Option<Phase>,
    /// Certified decrease for the step taken (`ω(λ)` or `ω(β²/λ)`).
    #[serde(default)]
    pub guaranteed_decrease: Option<f64>,
    #[serde(default)]
    pub ergodic_f: Option<f64>,
    #[serde(default)]
    pub inner_iters: Option<u64>,
    /// Objective evaluations spent selecting this step.
    #[serde(default)]
    pub step_evals: Option<u64>,
    /// Length `‖dᵏ‖₂` of the search direction.
    #[serde(default)]
    pub d_norm: Option<f64>,
}

impl TraceRecord {
    pub fn new(k: usize, f: f64, lambda: f64, beta: f64, c: &CounterSnapshot, wall_ms: f64) -> Self {
        Self {
            k,
            f,
            lambda,
            beta,
            alpha: 0.0,
            l: None,
            n_chol: c.chol,
            n_matmul: c.matmul,
            n_prox: c.prox,
            n_feval: c.feval,
            n_chol_feval: 0,
            wall_ms,
            phase: None,
            guaranteed_decrease: None,
            ergodic_f: None,
            inner_iters: None,
            step_evals: None,
            d_norm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub schema: u32,
    pub method: String,
    pub status: Status,
    pub records: Vec<TraceRecord>,
    /// Observed violations of properties the theory predicts (logged, not fatal).
    #[serde(default)]
    pub anomalies: Vec<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
    /// Run constants (thresholds, tolerances) worth keeping next to the data.
    #[serde(default)]
    pub meta: BTreeMap<String, f64>,
}

impl SolverTrace {
    pub fn new(method: impl Into<String>) -> Self {
        Self {
            schema: TRACE_SCHEMA,
            method: method.into(),
            status: Status::MaxIter,
            records: Vec::new(),
            anomalies: Vec::new(),
            warnings: Vec::new(),
            meta: BTreeMap::new(),
        }
    }

    /// Number of steps taken.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: SolverTrace = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if t.schema != TRACE_SCHEMA {
            return Err(Error::Parse(format!("unsupported trace schema {}", t.schema)));
        }
        Ok(t)
    }
}

/// Writes the records as a headered CSV table (empty optional fields stay empty).
pub fn records_to_csv<W: Write>(records: &[TraceRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        w.serialize(CsvRow::from(r)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn records_from_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rd.deserialize::<CsvRow>() {
        out.push(row.map_err(csv_err)?.into());
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

const CSV_HEADER: [&str; 18] = [
    "k",
    "f",
    "lambda",
    "beta",
    "alpha",
    "l",
    "n_chol",
    "n_matmul",
    "n_prox",
    "n_feval",
    "n_chol_feval",
    "wall_ms",
    "phase",
    "guaranteed_decrease",
    "ergodic_f",
    "inner_iters",
    "step_evals",
    "d_norm",
];

/// Flat mirror of [`TraceRecord`]; the csv crate cannot nest enums in options.
#[derive(Serialize, Deserialize)]
struct CsvRow {
    k: usize,
    f: f64,
    lambda: f64,
    beta: f64,
    alpha: f64,
    l: Option<f64>,
    n_chol: u64,
    n_matmul: u64,
    n_prox: u64,
    n_feval: u64,
    n_chol_feval: u64,
    wall_ms: f64,
    phase: Option<String>,
    guaranteed_decrease: Option<f64>,
    ergodic_f: Option<f64>,
    inner_iters: Option<u64>,
    step_evals: Option<u64>,
    d_norm: Option<f64>,
}

impl From<&TraceRecord> for CsvRow {
    fn from(r: &TraceRecord) -> Self {
        Self {
            k: r.k,
            f: r.f,
            lambda: r.lambda,
            beta: r.beta,
            alpha: r.alpha,
            l: r.l,
            n_chol: r.n_chol,
            n_matmul: r.n_matmul,
            n_prox: r.n_prox,
            n_feval: r.n_feval,
            n_chol_feval: r.n_chol_feval,
            wall_ms: r.wall_ms,
            phase: r.phase.map(|p| match p {
                Phase::Damped => "damped".to_string(),
                Phase::Full => "full".to_string(),
            }),
            guaranteed_decrease: r.guaranteed_decrease,
            ergodic_f: r.ergodic_f,
            inner_iters: r.inner_iters,
            step_evals: r.step_evals,
            d_norm: r.d_norm,
        }
    }
}

impl From<CsvRow> for TraceRecord {
    fn from(r: CsvRow) -> Self {
        Self {
            k: r.k,
            f: r.f,
            lambda: r.lambda,
            beta: r.beta,
            alpha: r.alpha,
            l: r.l,
            n_chol: r.n_chol,
            n_matmul: r.n_matmul,
            n_prox: r.n_prox,
            n_feval: r.n_feval,
            n_chol_feval: r.n_chol_feval,
            wall_ms: r.wall_ms,
            phase: r.phase.as_deref().and_then(|p| match p {
                "damped" => Some(Phase::Damped),
                "full" => Some(Phase::Full),
                _ => None,
            }),
            guaranteed_decrease: r.guaranteed_decrease,
            ergodic_f: r.ergodic_f,
            inner_iters: r.inner_iters,
            step_evals: r.step_evals,
            d_norm: r.d_norm,
        }
    }
}
