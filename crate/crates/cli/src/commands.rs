use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use scomp::prox_newton::LineSearch;
use scomp::trace::{records_from_csv, records_to_csv, SolverTrace, Status};

use crate::error::{CliError, CliResult};
use crate::instance::{build, check_method, open_input, run, Instance, Method, ProblemKind, Settings, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub struct SolveRequest {
    pub problem: ProblemKind,
    pub method: Method,
    pub source: Source,
    pub rho: f64,
    pub seed: Option<u64>,
    pub settings: Settings,
    pub out: Option<PathBuf>,
    pub format: Format,
}

/// Runs one solve. Returns whether it converged.
pub fn cmd_solve(req: &SolveRequest) -> CliResult<bool> {
    check_method(req.problem, req.method)?;
    let inst = build(req.problem, &req.source, req.rho, req.seed)?;
    let trace = run(&inst, req.method, &req.settings)?;
    if let Some(path) = &req.out {
        write_trace(&trace, req.format, &mut create(path)?)?;
    }
    println!("{}", summary_line(&trace));
    Ok(trace.converged())
}

pub fn summary_line(t: &SolverTrace) -> String {
    let status = match t.status {
        Status::Converged => "converged",
        Status::MaxIter => "max-iter",
    };
    let mut s = format!("method={} status={status} iter={}", t.method, t.iterations());
    if let Some(r) = t.last() {
        s += &format!(
            " f={:.10e} lambda={:.3e} chol={} matmul={} prox={} feval={} wall_ms={:.3}",
            r.f, r.lambda, r.n_chol, r.n_matmul, r.n_prox, r.n_feval, r.wall_ms
        );
        if let Some(d) = r.d_norm {
            s += &format!(" d_norm={d:.3e}");
        }
    }
    if !t.anomalies.is_empty() {
        s += &format!(" anomalies={}", t.anomalies.len());
    }
    s
}

fn create(path: &Path) -> CliResult<fs::File> {
    fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_trace(t: &SolverTrace, format: Format, out: &mut dyn Write) -> CliResult<()> {
    match format {
        Format::Json => {
            out.write_all(t.to_json()?.as_bytes())?;
            out.write_all(b"\n")?;
        }
        Format::Csv => records_to_csv(&t.records, out)?,
    }
    Ok(())
}

/// `a..b`, `a..=b` or a comma list.
pub fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::Usage(format!("bad seed set '{s}' (expected a..b, a..=b or a,b,c)"));
    let num = |v: &str| v.trim().parse::<u64>().map_err(|_| bad());
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<CliResult<_>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

pub fn parse_strategies(s: &str) -> CliResult<Vec<LineSearch>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let ls: LineSearch = part.parse().map_err(|e: scomp::Error| CliError::Usage(e.to_string()))?;
        if out.contains(&ls) {
            return Err(CliError::Usage(format!("strategy {ls} listed twice")));
        }
        out.push(ls);
    }
    Ok(out)
}

/// Thread pool sized by `SCOMP_THREADS` (unset: rayon's default).
fn pool() -> CliResult<rayon::ThreadPool> {
    let n = match std::env::var("SCOMP_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("SCOMP_THREADS must be a positive integer, got '{v}'")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::Io(e.to_string()))
}

/// Per-run numbers read off the final trace record.
#[derive(Debug, Clone, Copy)]
struct RunStats {
    iter: f64,
    chol: f64,
    chol_loop: f64,
    matmul: f64,
    prox: f64,
    feval: f64,
    wall_ms: f64,
    f: f64,
}

fn stats(t: &SolverTrace) -> Option<RunStats> {
    let r = t.last()?;
    Some(RunStats {
        iter: t.iterations() as f64,
        chol: r.n_chol as f64,
        chol_loop: (r.n_chol - r.n_chol_feval) as f64,
        matmul: r.n_matmul as f64,
        prox: r.n_prox as f64,
        feval: r.n_feval as f64,
        wall_ms: r.wall_ms,
        f: r.f,
    })
}

/// A run counts as failed when it errors or stops on the iteration cap.
type RunOutcome = Result<RunStats, String>;

fn outcome(r: CliResult<SolverTrace>) -> RunOutcome {
    match r {
        Ok(t) if t.converged() => stats(&t).ok_or_else(|| "empty trace".into()),
        Ok(_) => Err("max-iter".into()),
        Err(e) => Err(e.to_string()),
    }
}

pub struct SweepRequest {
    pub problem: ProblemKind,
    pub source: Source,
    pub rho: f64,
    pub seeds: Vec<u64>,
    pub settings: Settings,
    pub out: Option<PathBuf>,
}

impl SweepRequest {
    /// One instance per seed; a file source gives a single instance.
    fn instances(&self) -> CliResult<Vec<Instance>> {
        if self.problem != ProblemKind::Graphlasso {
            return Err(CliError::Usage("comparisons run on --problem graphlasso".into()));
        }
        match &self.source {
            Source::File(_) => Ok(vec![build(self.problem, &self.source, self.rho, None)?]),
            Source::Synthetic(_) => self.seeds.iter().map(|&s| build(self.problem, &self.source, self.rho, Some(s))).collect(),
        }
    }
}

/// Runs every `(config, instance)` pair in parallel; results are indexed
/// `[config][instance]` regardless of scheduling.
fn sweep<C: Sync>(configs: &[C], insts: &[Instance], f: impl Fn(&C, &Instance) -> CliResult<SolverTrace> + Sync) -> CliResult<Vec<Vec<RunOutcome>>> {
    let jobs: Vec<(usize, usize)> = (0..configs.len()).flat_map(|c| (0..insts.len()).map(move |i| (c, i))).collect();
    let flat: Vec<RunOutcome> = pool()?.install(|| jobs.par_iter().map(|&(c, i)| outcome(f(&configs[c], &insts[i]))).collect());
    Ok(flat.chunks(insts.len()).map(<[RunOutcome]>::to_vec).collect())
}

fn mean(runs: &[RunOutcome], field: impl Fn(&RunStats) -> f64) -> f64 {
    let ok: Vec<f64> = runs.iter().filter_map(|r| r.as_ref().ok()).map(field).collect();
    if ok.is_empty() {
        f64::NAN
    } else {
        ok.iter().sum::<f64>() / ok.len() as f64
    }
}

fn report_failures(label: &str, runs: &[RunOutcome]) {
    for (i, r) in runs.iter().enumerate() {
        if let Err(e) = r {
            eprintln!("warning: {label} run {i} failed: {e}");
        }
    }
}

fn table_writer(out: &Option<PathBuf>) -> CliResult<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

pub fn cmd_compare_ls(req: &SweepRequest, method: Method, strategies: &[LineSearch]) -> CliResult<()> {
    if strategies.len() < 2 {
        return Err(CliError::Usage("compare-ls needs at least two strategies".into()));
    }
    if !method.uses_strategy() {
        return Err(CliError::Usage(format!("compare-ls needs a Newton method (newton|dpngs), got '{}'", method.name())));
    }
    check_method(req.problem, method)?;
    let insts = req.instances()?;
    let results = sweep(strategies, &insts, |&ls, inst| run(inst, method, &Settings { strategy: ls, ..req.settings }))?;

    let mut w = table_writer(&req.out)?;
    w.write_record(["strategy", "runs", "failures", "iter", "chol", "chol_loop", "matmul", "feval", "wall_ms"])?;
    for (ls, runs) in strategies.iter().zip(&results) {
        report_failures(&ls.to_string(), runs);
        let failures = runs.iter().filter(|r| r.is_err()).count();
        w.write_record([
            ls.to_string(),
            runs.len().to_string(),
            failures.to_string(),
            mean(runs, |s| s.iter).to_string(),
            mean(runs, |s| s.chol).to_string(),
            mean(runs, |s| s.chol_loop).to_string(),
            mean(runs, |s| s.matmul).to_string(),
            mean(runs, |s| s.feval).to_string(),
            mean(runs, |s| s.wall_ms).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Compares graph-lasso solvers; `f_gap` is the mean excess of the final
/// objective over the best method on the same instance.
pub fn cmd_compare_sub(req: &SweepRequest, methods: &[Method]) -> CliResult<()> {
    if methods.len() < 2 {
        return Err(CliError::Usage("compare-sub needs at least two methods".into()));
    }
    for &m in methods {
        check_method(req.problem, m)?;
    }
    let insts = req.instances()?;
    let results = sweep(methods, &insts, |&m, inst| run(inst, m, &req.settings))?;

    let best: Vec<f64> = (0..insts.len())
        .map(|i| results.iter().filter_map(|runs| runs[i].as_ref().ok()).map(|s| s.f).fold(f64::INFINITY, f64::min))
        .collect();

    let mut w = table_writer(&req.out)?;
    w.write_record(["method", "runs", "failures", "iter", "chol", "chol_loop", "matmul", "prox", "feval", "wall_ms", "f_gap"])?;
    for (m, runs) in methods.iter().zip(&results) {
        report_failures(m.name(), runs);
        let failures = runs.iter().filter(|r| r.is_err()).count();
        let gaps: Vec<RunOutcome> = runs
            .iter()
            .zip(&best)
            .map(|(r, &b)| r.clone().map(|s| RunStats { f: s.f - b, ..s }))
            .collect();
        w.write_record([
            m.name().to_string(),
            runs.len().to_string(),
            failures.to_string(),
            mean(runs, |s| s.iter).to_string(),
            mean(runs, |s| s.chol).to_string(),
            mean(runs, |s| s.chol_loop).to_string(),
            mean(runs, |s| s.matmul).to_string(),
            mean(runs, |s| s.prox).to_string(),
            mean(runs, |s| s.feval).to_string(),
            mean(runs, |s| s.wall_ms).to_string(),
            mean(&gaps, |s| s.f).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Converts a trace between JSON and CSV. The source format is taken from
/// the extension, or sniffed from the first byte when there is none.
pub fn cmd_export(input: &Path, format: Format, method: &str, out: &Option<PathBuf>) -> CliResult<()> {
    let mut text = String::new();
    open_input(input)?
        .read_to_string(&mut text)
        .map_err(|e| CliError::MalformedTrace(format!("{}: {e}", input.display())))?;
    let is_json = match input.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("json") => true,
        Some("csv") => false,
        _ => text.trim_start().starts_with('{'),
    };
    let bad = |e: scomp::Error| CliError::MalformedTrace(format!("{}: {e}", input.display()));
    let trace = if is_json {
        SolverTrace::from_json(&text).map_err(bad)?
    } else {
        let mut t = SolverTrace::new(method);
        t.records = records_from_csv(text.as_bytes()).map_err(bad)?;
        t
    };
    let mut sink: Box<dyn Write> = match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout()),
    };
    write_trace(&trace, format, &mut sink)?;
    sink.flush()?;
    Ok(())
}
