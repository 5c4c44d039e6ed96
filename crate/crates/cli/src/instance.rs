//! Problem construction (files or synthetic generators) and method dispatch.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, ErrorKind};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use ndarray::{Array1, Array2, Axis};
use scomp::apps::{
    blur_matrix, dpngs_solve, hetlasso_solve, newton_graph_solve, poisson_solve, proxgrad_graph_solve, synth_gmrf,
    synth_hetlasso, synth_poisson, Blur, GraphProblem, HetLassoProblem, PoissonConfig, PoissonProblem,
};
use scomp::io::{read_csv_table, read_matrix_market, read_pgm};
use scomp::problem::ProblemInstance;
use scomp::prox_grad::{solve_grad, GradConfig};
use scomp::prox_newton::{LineSearch, NewtonConfig};
use scomp::trace::SolverTrace;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    Graphlasso,
    Poisson,
    Hetlasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum)]
pub enum Method {
    Newton,
    Grad,
    Dpngs,
    Proxgrad1,
    Proxgrad2,
    Proxgrad2g,
    Hetlasso,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Newton => "newton",
            Method::Grad => "grad",
            Method::Dpngs => "dpngs",
            Method::Proxgrad1 => "proxgrad1",
            Method::Proxgrad2 => "proxgrad2",
            Method::Proxgrad2g => "proxgrad2g",
            Method::Hetlasso => "hetlasso",
        }
    }

    pub fn uses_strategy(self) -> bool {
        matches!(self, Method::Newton | Method::Dpngs)
    }
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Graphlasso => "graphlasso",
            ProblemKind::Poisson => "poisson",
            ProblemKind::Hetlasso => "hetlasso",
        }
    }

    pub fn methods(self) -> &'static [Method] {
        match self {
            ProblemKind::Graphlasso => &[Method::Newton, Method::Dpngs, Method::Grad, Method::Proxgrad1],
            ProblemKind::Poisson => &[Method::Proxgrad2, Method::Proxgrad2g, Method::Grad],
            ProblemKind::Hetlasso => &[Method::Hetlasso, Method::Grad],
        }
    }

    pub fn default_method(self) -> Method {
        self.methods()[0]
    }

    pub fn default_rho(self) -> f64 {
        match self {
            ProblemKind::Graphlasso => 0.01,
            ProblemKind::Poisson => 2.5e-5,
            ProblemKind::Hetlasso => 0.1,
        }
    }

    fn synthetic_keys(self) -> &'static [&'static str] {
        match self {
            ProblemKind::Graphlasso => &["p", "density", "samples", "seed"],
            ProblemKind::Poisson => &["h", "w", "blur", "radius", "sigma", "intensity", "seed"],
            ProblemKind::Hetlasso => &["n", "p", "k", "noise", "seed"],
        }
    }
}

pub fn check_method(problem: ProblemKind, method: Method) -> CliResult<()> {
    if problem.methods().contains(&method) {
        return Ok(());
    }
    let allowed: Vec<&str> = problem.methods().iter().map(|m| m.name()).collect();
    Err(CliError::Usage(format!(
        "method '{}' does not apply to problem '{}' (allowed: {})",
        method.name(),
        problem.name(),
        allowed.join("|")
    )))
}

/// Parsed `k=v,...` list.
#[derive(Debug, Clone, Default)]
pub struct Synthetic(BTreeMap<String, String>);

impl Synthetic {
    pub fn parse(s: &str) -> CliResult<Self> {
        let mut map = BTreeMap::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("synthetic entry '{part}' is not key=value")))?;
            if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("synthetic key '{}' given twice", k.trim())));
            }
        }
        Ok(Self(map))
    }

    fn check_keys(&self, problem: ProblemKind) -> CliResult<()> {
        let allowed = problem.synthetic_keys();
        for k in self.0.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(CliError::Usage(format!(
                    "unknown synthetic key '{k}' for {} (allowed: {})",
                    problem.name(),
                    allowed.join(",")
                )));
            }
        }
        Ok(())
    }

    fn get<V: std::str::FromStr>(&self, key: &str, default: V) -> CliResult<V> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| CliError::Usage(format!("bad value '{v}' for synthetic key '{key}'"))),
        }
    }

    fn get_str<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.0.get(key).map(String::as_str).unwrap_or(default)
    }
}

/// Where the data comes from.
#[derive(Debug, Clone)]
pub enum Source {
    File(PathBuf),
    Synthetic(Synthetic),
}

#[derive(Debug, Clone)]
pub enum Instance {
    Graph(GraphProblem<f64>),
    Poisson(PoissonProblem<f64>),
    HetLasso(HetLassoProblem<f64>),
}

/// Builds the instance; `seed` overrides a `seed=` synthetic key.
pub fn build(problem: ProblemKind, source: &Source, rho: f64, seed: Option<u64>) -> CliResult<Instance> {
    match source {
        Source::File(path) => load_file(problem, path, rho),
        Source::Synthetic(syn) => {
            syn.check_keys(problem)?;
            let seed = match seed {
                Some(s) => s,
                None => syn.get("seed", 0u64)?,
            };
            synthetic(problem, syn, rho, seed)
        }
    }
}

fn synthetic(problem: ProblemKind, syn: &Synthetic, rho: f64, seed: u64) -> CliResult<Instance> {
    Ok(match problem {
        ProblemKind::Graphlasso => {
            let gm = synth_gmrf::<f64>(syn.get("p", 10)?, syn.get("density", 0.2)?, syn.get("samples", 100)?, seed)?;
            Instance::Graph(gm.problem(rho)?)
        }
        ProblemKind::Poisson => {
            let blur = parse_blur(syn.get_str("blur", "box"), syn.get("radius", 1)?, syn.get("sigma", 1.0)?)?;
            let sp = synth_poisson::<f64>(None, syn.get("h", 32)?, syn.get("w", 32)?, blur, syn.get("intensity", 100.0)?, seed)?;
            Instance::Poisson(sp.problem(rho)?)
        }
        ProblemKind::Hetlasso => {
            let sh = synth_hetlasso::<f64>(
                syn.get("n", 100)?,
                syn.get("p", 300)?,
                syn.get("k", 10)?,
                syn.get("noise", 0.5)?,
                seed,
            )?;
            Instance::HetLasso(sh.problem(rho)?)
        }
    })
}

fn parse_blur(kind: &str, radius: usize, sigma: f64) -> CliResult<Blur> {
    match kind {
        "identity" | "none" => Ok(Blur::Identity),
        "box" => Ok(Blur::Box(radius)),
        "gauss" | "gaussian" => Ok(Blur::Gaussian { sigma, radius }),
        other => Err(CliError::Usage(format!("unknown blur '{other}' (expected identity|box|gauss)"))),
    }
}

pub fn open_input(path: &Path) -> CliResult<BufReader<File>> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == ErrorKind::NotFound => Err(CliError::InputNotFound(path.display().to_string())),
        Err(e) => Err(CliError::Io(format!("{}: {e}", path.display()))),
    }
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

fn malformed(path: &Path, e: scomp::Error) -> CliError {
    CliError::MalformedInput(format!("{}: {e}", path.display()))
}

/// Graph lasso: `.mtx` holds `Σ̂`, `.csv` holds samples (one per row).
/// Poisson: `.pgm` holds observed counts under a radius-1 box blur.
/// Het-LASSO: `.csv` with a `y` column; every other column is a feature.
fn load_file(problem: ProblemKind, path: &Path, rho: f64) -> CliResult<Instance> {
    let rd = open_input(path)?;
    let ext = extension(path);
    match (problem, ext.as_str()) {
        (ProblemKind::Graphlasso, "mtx") => {
            let s = read_matrix_market(rd).map_err(|e| malformed(path, e))?;
            Ok(Instance::Graph(GraphProblem::new(s, rho)?))
        }
        (ProblemKind::Graphlasso, "csv") => {
            let t = read_csv_table(rd).map_err(|e| malformed(path, e))?;
            Ok(Instance::Graph(GraphProblem::new(sample_covariance(&t.data)?, rho)?))
        }
        (ProblemKind::Poisson, "pgm") => {
            let img = read_pgm(rd).map_err(|e| malformed(path, e))?;
            let y = Array1::from_iter(img.data.iter().map(|&v| f64::from(v)));
            let a = blur_matrix::<f64>(img.height, img.width, Blur::Box(1));
            Ok(Instance::Poisson(PoissonProblem::new(a, y, rho, img.height, img.width)?))
        }
        (ProblemKind::Hetlasso, "csv") => {
            let t = read_csv_table(rd).map_err(|e| malformed(path, e))?;
            let y = t
                .column("y")
                .ok_or_else(|| CliError::MalformedInput(format!("{}: no 'y' column", path.display())))?;
            Ok(Instance::HetLasso(HetLassoProblem::new(t.without("y"), y, rho)?))
        }
        _ => Err(CliError::Usage(format!(
            "unsupported input '{}' for {} (graphlasso: .mtx|.csv, poisson: .pgm, hetlasso: .csv)",
            path.display(),
            problem.name()
        ))),
    }
}

fn sample_covariance(x: &Array2<f64>) -> CliResult<Array2<f64>> {
    let n = x.nrows();
    if n < 2 {
        return Err(CliError::MalformedInput("need at least two samples".into()));
    }
    let mean = x.mean_axis(Axis(0)).expect("nonempty");
    let c = x - &mean;
    Ok(c.t().dot(&c) / n as f64)
}

/// Solver settings shared by all methods; `None` keeps the library default.
#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub eps: Option<f64>,
    pub max_iter: Option<usize>,
    pub strategy: LineSearch,
}

impl Settings {
    fn newton(&self) -> NewtonConfig<f64> {
        let mut c = NewtonConfig { strategy: self.strategy, ..Default::default() };
        if let Some(e) = self.eps {
            c.eps = e;
        }
        if let Some(m) = self.max_iter {
            c.max_iter = m;
        }
        c
    }

    fn grad(&self, base: GradConfig<f64>) -> GradConfig<f64> {
        let mut c = base;
        if let Some(e) = self.eps {
            c.eps = e;
        }
        if let Some(m) = self.max_iter {
            c.max_iter = m;
        }
        c
    }
}

/// Runs `method` on the instance. The pair must have passed `check_method`.
pub fn run(inst: &Instance, method: Method, st: &Settings) -> CliResult<SolverTrace> {
    let trace = match (inst, method) {
        (Instance::Graph(p), Method::Dpngs) => dpngs_solve(p, &st.newton())?.trace,
        (Instance::Graph(p), Method::Newton) => newton_graph_solve(p, &st.newton())?.trace,
        (Instance::Graph(p), Method::Proxgrad1) => proxgrad_graph_solve(p, &st.grad(GradConfig::default()))?.trace,
        (Instance::Graph(p), Method::Grad) => {
            let o = p.oracle()?;
            let reg = p.regularizer();
            let pi = ProblemInstance::new(&o, &reg, Array1::from_iter(p.theta0.iter().copied()))?;
            solve_grad(&pi, &st.grad(GradConfig::default()))?.trace
        }
        (Instance::Poisson(p), Method::Proxgrad2 | Method::Proxgrad2g | Method::Grad) => {
            let mut cfg = PoissonConfig::default();
            cfg.grad = st.grad(cfg.grad);
            cfg.grad.greedy = method == Method::Proxgrad2g;
            poisson_solve(p, &cfg)?.trace
        }
        (Instance::HetLasso(p), Method::Hetlasso | Method::Grad) => {
            hetlasso_solve(p, &st.grad(GradConfig::default()))?.trace
        }
        _ => return Err(CliError::Usage(format!("method '{}' does not apply to this instance", method.name()))),
    };
    Ok(trace)
}
