//! Proximal Newton method with analytic damped steps, a switch to full steps
//! inside the quadratic convergence region, optional line searches, and the
//! dense BFGS metric update.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::counters::Counters;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm2, symmetrize};
use crate::problem::ProblemInstance;
use crate::prox_ops::{ProxWorkspace, Regularizer};
use crate::scalar::{lit, Scalar};
use crate::sc_core::{local_norm_at, omega, SmoothOracle};
use crate::subsolver::{solve_primal_fista, HessianMetric, InnerConfig};
use crate::trace::{Phase, SolverTrace, Status, TraceRecord};

/// Largest admissible switching radius `(5 − √17)/4`.
pub fn sigma_max() -> f64 {
    (5.0 - 17f64.sqrt()) / 4.0
}

/// Radius `√5 − 2` of quadratic convergence for damped steps.
pub fn sigma_bar_damped() -> f64 {
    5f64.sqrt() - 2.0
}

/// Contraction constant in `λ_{k+1} ≤ c·λ_k²` for `σ = 0.2`.
pub const CONTRACTION_C: f64 = 3.57;

/// Step-size selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LineSearch {
    /// Analytic step only.
    NoLS,
    /// Armijo backtracking from 1.
    BtkLS,
    /// Backtracking restricted to `(α*, 1]`, falling back to `α*`.
    EBtkLS,
    /// Forward search from `α*` toward 1.
    FwLS,
}

impl LineSearch {
    pub const ALL: [LineSearch; 4] = [LineSearch::NoLS, LineSearch::BtkLS, LineSearch::EBtkLS, LineSearch::FwLS];
}

impl fmt::Display for LineSearch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LineSearch::NoLS => "NoLS",
            LineSearch::BtkLS => "BtkLS",
            LineSearch::EBtkLS => "E-BtkLS",
            LineSearch::FwLS => "FwLS",
        })
    }
}

impl FromStr for LineSearch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "nols" | "no-ls" | "none" => Ok(LineSearch::NoLS),
            "btkls" | "btk" | "backtracking" => Ok(LineSearch::BtkLS),
            "e-btkls" | "ebtkls" | "e-btk" => Ok(LineSearch::EBtkLS),
            "fwls" | "fw" | "forward" => Ok(LineSearch::FwLS),
            other => Err(Error::Config(format!("unknown strategy '{other}' (expected nols|btkls|e-btkls|fwls)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonConfig<T> {
    /// Switching radius between damped and full steps.
    pub sigma: T,
    /// Tolerance on the decrement `λ`.
    pub eps: T,
    pub max_iter: usize,
    pub strategy: LineSearch,
    pub inner: InnerConfig<T>,
    pub backtrack_factor: T,
    pub armijo: T,
    pub max_backtracks: usize,
    pub forward_factor: T,
    pub forward_max_probes: usize,
}

impl<T: Scalar> Default for NewtonConfig<T> {
    fn default() -> Self {
        Self {
            sigma: lit(0.2),
            eps: lit(1e-6),
            max_iter: 200,
            strategy: LineSearch::NoLS,
            inner: InnerConfig::default(),
            backtrack_factor: lit(0.5),
            armijo: lit(1e-4),
            max_backtracks: 30,
            forward_factor: lit(2.0),
            forward_max_probes: 6,
        }
    }
}

impl<T: Scalar> NewtonConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > T::zero()) || self.sigma.as_f64() > sigma_max() + 1e-15 {
            return Err(Error::Config(format!("sigma must lie in (0, {:.6}], got {}", sigma_max(), self.sigma)));
        }
        if !(self.eps > T::zero() && self.eps < self.sigma) {
            return Err(Error::Config(format!("eps must lie in (0, sigma), got {}", self.eps)));
        }
        if !(self.backtrack_factor > T::zero() && self.backtrack_factor < T::one()) {
            return Err(Error::Config("backtrack factor must lie in (0, 1)".into()));
        }
        if !(self.forward_factor > T::one()) || self.forward_max_probes == 0 {
            return Err(Error::Config("forward search needs factor > 1 and at least one probe".into()));
        }
        Ok(())
    }
}

/// Output of one direction computation.
#[derive(Debug, Clone)]
pub struct SearchDirection<T> {
    pub s: Array1<T>,
    pub d: Array1<T>,
    /// `λ = ‖d‖ₓ`.
    pub lambda: T,
    /// `β = ‖d‖_H`; equals `λ` when `H` is the Hessian.
    pub beta: T,
    pub inner_iters: usize,
    pub residual: T,
}

/// Produces the proximal Newton direction at a point. The default uses the
/// primal accelerated subsolver; structured problems plug in their own.
pub trait NewtonDirection<T: Scalar> {
    fn compute(&mut self, x: ArrayView1<T>, ctr: &Counters) -> Result<SearchDirection<T>>;

    /// Non-fatal notes produced since the last call (moved into the trace).
    fn take_warnings(&mut self) -> Vec<String> {
        Vec::new()
    }
}

/// Direction from the primal model problem with `H = ∇²f(xᵏ)`, warm started
/// from the previous solution.
pub struct PrimalNewtonDirection<'a, T: Scalar> {
    oracle: &'a dyn SmoothOracle<T>,
    reg: &'a dyn Regularizer<T>,
    inner: InnerConfig<T>,
    warm: Option<Array1<T>>,
    ws: ProxWorkspace<T>,
}

impl<'a, T: Scalar> PrimalNewtonDirection<'a, T> {
    pub fn new(oracle: &'a dyn SmoothOracle<T>, reg: &'a dyn Regularizer<T>, inner: InnerConfig<T>) -> Self {
        Self { oracle, reg, inner, warm: None, ws: ProxWorkspace::new() }
    }
}

impl<T: Scalar> NewtonDirection<T> for PrimalNewtonDirection<'_, T> {
    fn compute(&mut self, x: ArrayView1<T>, ctr: &Counters) -> Result<SearchDirection<T>> {
        let dir = newton_direction(self.oracle, self.reg, x, &self.inner, self.warm.as_ref().map(|w| w.view()), &mut self.ws, ctr)?;
        self.warm = Some(dir.s.clone());
        Ok(dir)
    }
}

/// `sᵏ = argmin ∇f(xᵏ)ᵀ(s − xᵏ) + ½‖s − xᵏ‖²_{xᵏ} + g(s)`, `d = s − xᵏ`,
/// `λ = ‖d‖_{xᵏ}`.
pub fn newton_direction<T: Scalar>(
    oracle: &dyn SmoothOracle<T>,
    reg: &dyn Regularizer<T>,
    x: ArrayView1<T>,
    inner: &InnerConfig<T>,
    warm: Option<ArrayView1<T>>,
    ws: &mut ProxWorkspace<T>,
    ctr: &Counters,
) -> Result<SearchDirection<T>> {
    let model = oracle.local(x, ctr)?;
    let sub = solve_primal_fista(&HessianMetric { model: model.as_ref() }, model.grad(), x, reg, inner, warm, ws, ctr)?;
    let lambda = local_norm_at(model.as_ref(), sub.d.view()).map_err(|e| match e {
        Error::OracleConsistency(m) => Error::IndefiniteMetric(format!("Hessian not positive semidefinite: {m}")),
        other => other,
    })?;
    Ok(SearchDirection { s: sub.s, d: sub.d, lambda, beta: lambda, inner_iters: sub.inner_iters, residual: sub.residual })
}

/// `α = 1/(1 + λ)`.
pub fn analytic_damped_step<T: Scalar>(lambda: T) -> T {
    T::one() / (T::one() + lambda)
}

#[derive(Debug, Clone, Copy)]
pub struct StepChoice<T> {
    pub alpha: T,
    /// Objective evaluations spent.
    pub evals: usize,
    /// Set when no probe in the strategy's range decreased `F` and the
    /// analytic step was used as a fallback.
    pub degraded: bool,
    /// `F(x + αd)` when it was evaluated along the way.
    pub f_new: Option<T>,
}

/// Chooses the step along `d` from `x` according to `cfg.strategy`.
///
/// `f_cur` is `F(x)` if already known; strategies that need it and do not
/// have it spend one evaluation.
pub fn select_step<T: Scalar>(
    problem: &ProblemInstance<'_, T>,
    cfg: &NewtonConfig<T>,
    x: ArrayView1<T>,
    d: ArrayView1<T>,
    lambda: T,
    f_cur: Option<T>,
    ctr: &Counters,
) -> StepChoice<T> {
    let alpha_star = if lambda > cfg.sigma { analytic_damped_step(lambda) } else { T::one() };
    let mut evals = 0;
    let mut eval = |a: T| {
        evals += 1;
        let xa = &x + &(&d * a);
        problem.value(xa.view(), ctr)
    };
    let fixed = |alpha: T, evals: usize, degraded: bool| StepChoice { alpha, evals, degraded, f_new: None };
    match cfg.strategy {
        LineSearch::NoLS => fixed(alpha_star, 0, false),
        LineSearch::BtkLS => {
            let f0 = f_cur.unwrap_or_else(|| eval(T::zero()));
            let mut a = T::one();
            for _ in 0..=cfg.max_backtracks {
                let fa = eval(a);
                if fa.is_finite() && fa <= f0 - cfg.armijo * a * lambda * lambda {
                    return StepChoice { alpha: a, evals, degraded: false, f_new: Some(fa) };
                }
                a *= cfg.backtrack_factor;
            }
            fixed(alpha_star, evals, true)
        }
        LineSearch::EBtkLS => {
            if lambda <= cfg.sigma {
                return fixed(T::one(), 0, false);
            }
            let f0 = f_cur.unwrap_or_else(|| eval(T::zero()));
            let mut a = T::one();
            let mut tries = 0;
            while a > alpha_star && tries < cfg.max_backtracks {
                tries += 1;
                let fa = eval(a);
                if fa.is_finite() && fa <= f0 - cfg.armijo * a * lambda * lambda {
                    return StepChoice { alpha: a, evals, degraded: false, f_new: Some(fa) };
                }
                a *= cfg.backtrack_factor;
            }
            fixed(alpha_star, evals, false)
        }
        LineSearch::FwLS => {
            if lambda <= cfg.sigma {
                return fixed(T::one(), 0, false);
            }
            let f_star = eval(alpha_star);
            if !f_star.is_finite() {
                return fixed(alpha_star, evals, true);
            }
            let (mut best_a, mut best_f) = (alpha_star, f_star);
            let mut probes = 1;
            while best_a < T::one() && probes < cfg.forward_max_probes {
                let a = (best_a * cfg.forward_factor).min(T::one());
                let fa = eval(a);
                probes += 1;
                if fa.is_finite() && fa < best_f {
                    best_a = a;
                    best_f = fa;
                } else {
                    break;
                }
            }
            StepChoice { alpha: best_a, evals, degraded: false, f_new: Some(best_f) }
        }
    }
}

/// Result of a solve: final point and the full trace.
#[derive(Debug, Clone)]
pub struct SolveOutcome<T> {
    pub x: Array1<T>,
    pub trace: SolverTrace,
}

impl<T> SolveOutcome<T> {
    pub fn converged(&self) -> bool {
        self.trace.status == Status::Converged
    }
}

/// Proximal Newton with the primal subsolver.
pub fn solve_newton<T: Scalar>(problem: &ProblemInstance<'_, T>, cfg: &NewtonConfig<T>) -> Result<SolveOutcome<T>> {
    let mut dir = PrimalNewtonDirection::new(problem.oracle, problem.reg, cfg.inner);
    solve_newton_with(problem, cfg, &mut dir, "newton")
}

/// Proximal Newton driven by an arbitrary direction provider.
pub fn solve_newton_with<T: Scalar>(
    problem: &ProblemInstance<'_, T>,
    cfg: &NewtonConfig<T>,
    provider: &mut dyn NewtonDirection<T>,
    method: &str,
) -> Result<SolveOutcome<T>> {
    cfg.validate()?;
    let ctr = Counters::new();
    let start = Instant::now();
    let mut trace = SolverTrace::new(method);
    trace.meta.insert("sigma".into(), cfg.sigma.as_f64());
    trace.meta.insert("sigma_max".into(), sigma_max());
    trace.meta.insert("sigma_bar_damped".into(), sigma_bar_damped());
    trace.meta.insert("eps".into(), cfg.eps.as_f64());
    let check_c = (cfg.sigma.as_f64() - 0.2).abs() < 1e-12;
    let mut x = problem.x0.clone();
    let mut f_known: Option<T> = None;
    let mut chol_feval = 0u64;
    let mut prev: Option<(f64, bool)> = None;
    let mut entered_full = false;
    for k in 0.. {
        let f_x = problem.value_uncounted(x.view());
        if !f_x.is_finite() {
            return Err(Error::DomainEscape(format!("iterate {k} left dom F")));
        }
        let dir = provider.compute(x.view(), &ctr)?;
        trace.warnings.extend(provider.take_warnings().into_iter().map(|w| format!("k={k}: {w}")));
        let lam = dir.lambda;
        let lam64 = lam.as_f64();
        if let Some((lp, full)) = prev {
            if full {
                if check_c && lam64 > CONTRACTION_C * lp * lp + 1e-7 {
                    trace.anomalies.push(format!("k={k}: lambda {lam64:e} exceeds {CONTRACTION_C}*{lp:e}^2"));
                }
                let den = 1.0 - 4.0 * lp + 2.0 * lp * lp;
                if den > 0.0 && lam64 > lp * lp / den + 1e-7 {
                    trace.anomalies.push(format!("k={k}: lambda {lam64:e} exceeds full-step bound from {lp:e}"));
                }
                if lp <= sigma_max() && lam64 > lp + 1e-12 {
                    trace.anomalies.push(format!("k={k}: decrement increased in full phase ({lp:e} -> {lam64:e})"));
                }
            }
        }
        if entered_full && lam > cfg.sigma {
            trace.anomalies.push(format!("k={k}: re-entered damped phase with lambda {lam64:e}"));
        }
        let snap = ctr.snapshot();
        let mut rec = TraceRecord::new(k, f_x.as_f64(), lam64, dir.beta.as_f64(), &snap, start.elapsed().as_secs_f64() * 1e3);
        rec.n_chol_feval = chol_feval;
        rec.inner_iters = Some(dir.inner_iters as u64);
        rec.d_norm = Some(norm2(dir.d.view()).as_f64());
        if lam <= cfg.eps {
            trace.status = Status::Converged;
            trace.records.push(rec);
            break;
        }
        if k >= cfg.max_iter {
            trace.status = Status::MaxIter;
            trace.records.push(rec);
            break;
        }
        let damped = lam > cfg.sigma;
        if !damped {
            entered_full = true;
        }
        let chol_before = ctr.snapshot().chol;
        let choice = select_step(problem, cfg, x.view(), dir.d.view(), lam, f_known, &ctr);
        chol_feval += ctr.snapshot().chol - chol_before;
        if choice.degraded {
            trace.warnings.push(format!("k={k}: no decrease found by {}, used analytic step", cfg.strategy));
        }
        rec.alpha = choice.alpha.as_f64();
        rec.phase = Some(if damped { Phase::Damped } else { Phase::Full });
        if damped {
            rec.guaranteed_decrease = Some(omega(lam)?.as_f64());
        }
        rec.step_evals = Some(choice.evals as u64);
        trace.records.push(rec);
        x = &x + &(&dir.d * choice.alpha);
        f_known = choice.f_new;
        prev = Some((lam64, choice.alpha == T::one()));
    }
    Ok(SolveOutcome { x, trace })
}

/// Dense BFGS update `H⁺ = H + yyᵀ/(yᵀz) − (Hz)(Hz)ᵀ/(zᵀHz)`.
pub fn bfgs_update<T: Scalar>(h: ArrayView2<T>, z: ArrayView1<T>, y: ArrayView1<T>) -> Result<Array2<T>> {
    let n = h.nrows();
    check_dim(n, h.ncols())?;
    check_dim(n, z.len())?;
    check_dim(n, y.len())?;
    let yz = y.dot(&z);
    if !(yz > lit::<T>(1e-12) * norm2(y) * norm2(z)) {
        return Err(Error::Curvature(yz.as_f64()));
    }
    let hz = h.dot(&z);
    let zhz = z.dot(&hz);
    if !(zhz > T::zero()) {
        return Err(Error::IndefiniteMetric(format!("z'Hz = {zhz}")));
    }
    let mut out = h.to_owned();
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] += y[i] * y[j] / yz - hz[i] * hz[j] / zhz;
        }
    }
    Ok(symmetrize(&out))
}
