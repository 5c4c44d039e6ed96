//! Proximal gradient with a scalar metric `D_k = L_k·I`, the analytic step
//! `α = β²/(λ(λ + β²))`, objective-free selection of `L_k`, the greedy
//! variant and ergodic averaging.

use std::time::Instant;

use ndarray::{Array1, ArrayView1};

use crate::counters::Counters;
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::problem::ProblemInstance;
use crate::prox_ops::{ProxWorkspace, Regularizer};
use crate::scalar::{lit, Scalar};
use crate::sc_core::{omega, LocalModel, SmoothOracle};
use crate::subsolver::power_method_max_eig;
use crate::trace::{Phase, SolverTrace, Status, TraceRecord};

/// How the first probe of `L_k` is chosen each iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LInit<T> {
    /// `(Δg·Δx)/‖Δx‖²` from the last two iterates, clamped to `[L_min, L_max]`;
    /// the first iteration uses the largest Hessian eigenvalue at `x⁰`.
    BarzilaiBorwein,
    /// `factor × λ_max(∇²f(xᵏ))` by power iteration, every iteration.
    HessianNorm(T),
    /// Fixed value.
    Fixed(T),
}

#[derive(Debug, Clone)]
pub struct GradConfig<T> {
    pub eps: T,
    /// Stop on `‖d‖ ≤ eps·max(1, ‖x‖)` when set, on `‖d‖ ≤ eps` otherwise.
    pub relative_eps: bool,
    pub max_iter: usize,
    pub l_min: T,
    pub l_max: T,
    pub l_init: LInit<T>,
    pub greedy: bool,
    pub max_halvings: usize,
    pub power_iters: usize,
    /// Keep `(x, d, L)` of every iteration for diagnostics.
    pub record_iterates: bool,
    /// Relative slack for the per-iteration descent check.
    pub descent_slack: T,
}

impl<T: Scalar> Default for GradConfig<T> {
    fn default() -> Self {
        Self {
            eps: lit(1e-6),
            relative_eps: true,
            max_iter: 1000,
            l_min: lit(1e-10),
            l_max: lit(1e12),
            l_init: LInit::BarzilaiBorwein,
            greedy: false,
            max_halvings: 40,
            power_iters: 30,
            record_iterates: false,
            descent_slack: lit(1e-8),
        }
    }
}

impl<T: Scalar> GradConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_min > T::zero()) || !(self.l_max >= self.l_min) {
            return Err(Error::Config("need 0 < l_min <= l_max".into()));
        }
        if !(self.eps > T::zero()) {
            return Err(Error::Config("eps must be positive".into()));
        }
        Ok(())
    }
}

/// `min(β²/(λ(λ + β²)), 1)`.
pub fn grad_step_size<T: Scalar>(beta: T, lambda: T) -> Result<T> {
    if !(lambda > T::zero()) {
        return Err(Error::Domain { what: "step size needs lambda > 0", value: lambda.as_f64() });
    }
    let b2 = beta * beta;
    Ok((b2 / (lambda * (lambda + b2))).min(T::one()))
}

/// `λ ≥ 1` or `λ²/β² + λ ≥ 1`, with a tiny tolerance for the boundary case.
pub fn step_condition_holds<T: Scalar>(lambda: T, beta: T) -> bool {
    let tol = lit::<T>(1e-12);
    lambda >= T::one() || beta == T::zero() || lambda * lambda / (beta * beta) + lambda >= T::one() - tol
}

#[derive(Debug, Clone)]
pub struct GradDirection<T> {
    pub s: Array1<T>,
    pub d: Array1<T>,
    pub lambda: T,
    pub beta: T,
    pub l: T,
    pub halvings: usize,
}

/// Finds `L_k` by halving from `l_init` until the step condition holds, and
/// returns the direction at that metric. Uses no objective evaluations.
pub fn choose_lk<T: Scalar>(
    model: &dyn LocalModel<T>,
    reg: &dyn Regularizer<T>,
    l_init: T,
    cfg: &GradConfig<T>,
    ws: &mut ProxWorkspace<T>,
    ctr: &Counters,
) -> Result<GradDirection<T>> {
    if !(l_init > T::zero()) {
        return Err(Error::Config(format!("initial L must be positive, got {l_init}")));
    }
    let x = model.point();
    let grad = model.grad();
    let mut l = l_init.max(cfg.l_min);
    let mut halvings = 0;
    loop {
        let u = &x * l - grad;
        let dvec = Array1::from_elem(x.len(), l);
        ctr.add_prox();
        let s = reg.prox_diag(u.view(), dvec.view(), ws)?;
        let d = &s - &x;
        let beta = l.sqrt() * norm2(d.view());
        let q = model.norm_sq(d.view());
        if q < -lit::<T>(1e-12) * (T::one() + d.dot(&d)) {
            return Err(Error::OracleConsistency(format!("negative curvature {q}")));
        }
        let lambda = q.max(T::zero()).sqrt();
        if beta == T::zero() || step_condition_holds(lambda, beta) {
            return Ok(GradDirection { s, d, lambda, beta, l, halvings });
        }
        if halvings >= cfg.max_halvings || l <= cfg.l_min {
            return Err(Error::StepCondition { lambda: lambda.as_f64(), beta: beta.as_f64(), l: l.as_f64() });
        }
        l = (l / lit(2.0)).max(cfg.l_min);
        halvings += 1;
    }
}

/// `sᵏ` if it lies in `dom F` and `F(sᵏ) < F(x̂)`, else `x̂ = xᵏ + α(sᵏ − xᵏ)`.
/// Returns the point and the number of objective evaluations used.
pub fn greedy_update<T: Scalar>(
    x: ArrayView1<T>,
    s: ArrayView1<T>,
    alpha: T,
    eval: &mut dyn FnMut(ArrayView1<T>) -> T,
) -> (Array1<T>, usize) {
    if alpha >= T::one() {
        return (s.to_owned(), 0);
    }
    let x_hat = &x + &((&s - &x) * alpha);
    let fs = eval(s);
    if !fs.is_finite() {
        return (x_hat, 1);
    }
    let fh = eval(x_hat.view());
    if fs < fh {
        (s.to_owned(), 2)
    } else {
        (x_hat, 2)
    }
}

/// Step-weighted running average of the iterates.
#[derive(Debug, Clone)]
pub struct ErgodicAverage<T> {
    sum: Array1<T>,
    weight: T,
}

impl<T: Scalar> ErgodicAverage<T> {
    pub fn new(n: usize) -> Self {
        Self { sum: Array1::zeros(n), weight: T::zero() }
    }

    pub fn push(&mut self, x: ArrayView1<T>, alpha: T) {
        self.sum.scaled_add(alpha, &x);
        self.weight += alpha;
    }

    /// `S_k`.
    pub fn weight(&self) -> T {
        self.weight
    }

    pub fn mean(&self) -> Option<Array1<T>> {
        (self.weight > T::zero()).then(|| &self.sum / self.weight)
    }
}

/// Point, direction and metric of one iteration.
#[derive(Debug, Clone)]
pub struct GradIterate<T> {
    pub x: Array1<T>,
    pub d: Array1<T>,
    pub l: T,
    pub alpha: T,
}

#[derive(Debug, Clone)]
pub struct GradOutcome<T> {
    pub x: Array1<T>,
    pub trace: SolverTrace,
    /// Ergodic average `x̄ᵏ = S_k⁻¹ Σ_{j≤k} αⱼxʲ` over the steps taken
    /// (equals `x⁰` if none was).
    pub ergodic: Array1<T>,
    pub ergodic_weight: T,
    pub max_l: T,
    pub iterates: Vec<GradIterate<T>>,
}

impl<T> GradOutcome<T> {
    pub fn converged(&self) -> bool {
        self.trace.status == Status::Converged
    }
}

fn hessian_max_eig<T: Scalar>(model: &dyn LocalModel<T>, iters: usize) -> T {
    power_method_max_eig(&|v: ArrayView1<T>| model.hess_vec(v), model.point().len(), iters)
}

/// Proximal gradient with the analytic step.
pub fn solve_grad<T: Scalar>(problem: &ProblemInstance<'_, T>, cfg: &GradConfig<T>) -> Result<GradOutcome<T>> {
    solve_grad_named(problem, cfg, if cfg.greedy { "grad-greedy" } else { "grad" })
}

pub fn solve_grad_named<T: Scalar>(
    problem: &ProblemInstance<'_, T>,
    cfg: &GradConfig<T>,
    method: &str,
) -> Result<GradOutcome<T>> {
    cfg.validate()?;
    let oracle: &dyn SmoothOracle<T> = problem.oracle;
    let ctr = Counters::new();
    let start = Instant::now();
    let mut trace = SolverTrace::new(method);
    trace.meta.insert("eps".into(), cfg.eps.as_f64());
    trace.meta.insert("l_min".into(), cfg.l_min.as_f64());
    let mut ws = ProxWorkspace::new();
    let mut x = problem.x0.clone();
    let mut avg = ErgodicAverage::new(x.len());
    let mut prev: Option<(Array1<T>, Array1<T>)> = None;
    let mut prev_l: Option<T> = None;
    let mut max_l = T::zero();
    let mut iterates = Vec::new();
    for k in 0.. {
        let f_x = problem.value_uncounted(x.view());
        if !f_x.is_finite() {
            return Err(Error::DomainEscape(format!("iterate {k} left dom F")));
        }
        let model = oracle.local(x.view(), &ctr)?;
        let l0 = match cfg.l_init {
            LInit::Fixed(v) => v,
            LInit::HessianNorm(c) => c * hessian_max_eig(model.as_ref(), cfg.power_iters),
            LInit::BarzilaiBorwein => match (&prev, prev_l) {
                (Some((xp, gp)), Some(lp)) => {
                    let dx = &x - xp;
                    let dg = &model.grad() - gp;
                    let num = dg.dot(&dx);
                    let den = dx.dot(&dx);
                    if num > T::zero() && den > T::zero() {
                        (num / den).max(cfg.l_min).min(cfg.l_max)
                    } else {
                        lp
                    }
                }
                _ => hessian_max_eig(model.as_ref(), cfg.power_iters).max(cfg.l_min).min(cfg.l_max),
            },
        };
        let dir = choose_lk(model.as_ref(), problem.reg, l0, cfg, &mut ws, &ctr)?;
        let grad = model.grad().to_owned();
        drop(model);
        let snap = ctr.snapshot();
        let mut rec = TraceRecord::new(
            k,
            f_x.as_f64(),
            dir.lambda.as_f64(),
            dir.beta.as_f64(),
            &snap,
            start.elapsed().as_secs_f64() * 1e3,
        );
        rec.l = Some(dir.l.as_f64());
        let e = norm2(dir.d.view());
        rec.d_norm = Some(e.as_f64());
        if let Some(xb) = avg.mean() {
            rec.ergodic_f = Some(problem.value_uncounted(xb.view()).as_f64());
        }
        let thresh = if cfg.relative_eps { cfg.eps * norm2(x.view()).max(T::one()) } else { cfg.eps };
        if e <= thresh {
            trace.status = Status::Converged;
            trace.records.push(rec);
            break;
        }
        if k >= cfg.max_iter {
            trace.status = Status::MaxIter;
            trace.records.push(rec);
            break;
        }
        // A direction the Hessian does not see (λ = 0) is a linear direction of f.
        let alpha = if dir.lambda > T::zero() { grad_step_size(dir.beta, dir.lambda)? } else { T::one() };
        if alpha * dir.lambda >= T::one() {
            trace.anomalies.push(format!("k={k}: step leaves the Dikin ball (alpha*lambda = {})", alpha * dir.lambda));
        }
        let guaranteed = if dir.lambda > T::zero() { omega(dir.beta * dir.beta / dir.lambda)? } else { T::zero() };
        let (x_next, evals) = if cfg.greedy {
            greedy_update(x.view(), dir.s.view(), alpha, &mut |z| problem.value(z, &ctr))
        } else {
            (&x + &(&dir.d * alpha), 0)
        };
        let f_next = problem.value_uncounted(x_next.view());
        if !f_next.is_finite() {
            return Err(Error::DomainEscape(format!("step {k} left dom F (alpha {alpha})")));
        }
        let slack = cfg.descent_slack * (T::one() + f_x.abs());
        if f_next > f_x - guaranteed + slack {
            trace.anomalies.push(format!(
                "k={k}: decrease {:e} below guaranteed {:e}",
                (f_x - f_next).as_f64(),
                guaranteed.as_f64()
            ));
        }
        rec.alpha = alpha.as_f64();
        rec.phase = Some(if alpha < T::one() { Phase::Damped } else { Phase::Full });
        rec.guaranteed_decrease = Some(guaranteed.as_f64());
        rec.inner_iters = Some(ws.last_inner_iters as u64);
        rec.step_evals = Some(evals as u64);
        trace.records.push(rec);
        max_l = max_l.max(dir.l);
        if cfg.record_iterates {
            iterates.push(GradIterate { x: x.clone(), d: dir.d.clone(), l: dir.l, alpha });
        }
        avg.push(x.view(), alpha);
        prev = Some((x, grad));
        prev_l = Some(dir.l);
        x = x_next;
    }
    let ergodic = avg.mean().unwrap_or_else(|| x.clone());
    Ok(GradOutcome { x, trace, ergodic, ergodic_weight: avg.weight(), max_l, iterates })
}

/// `‖x − P_L(x − ∇f(x)/L)‖ / max(1, ‖x‖)`: the relative prox fixed-point
/// residual at metric `L·I`.
pub fn prox_fixed_point_residual<T: Scalar>(
    oracle: &dyn SmoothOracle<T>,
    reg: &dyn Regularizer<T>,
    x: ArrayView1<T>,
    l: T,
) -> Result<T> {
    let ctr = Counters::new();
    let model = oracle.local(x, &ctr)?;
    let u = &x * l - model.grad();
    let s = reg.prox_diag(u.view(), Array1::from_elem(x.len(), l).view(), &mut ProxWorkspace::new())?;
    Ok(norm2((&s - &x).view()) / norm2(x).max(T::one()))
}

/// Local-rate diagnostics against a reference solution `x*`.
#[derive(Debug, Clone)]
pub struct LinearRateReport {
    /// `‖(L_k·I − ∇²f(x*))dᵏ‖*_{x*} / ‖dᵏ‖_{x*}` per iteration.
    pub c_res: Vec<f64>,
    /// `‖x^{k+1} − x*‖_{x*} / ‖xᵏ − x*‖_{x*}` per iteration.
    pub contraction: Vec<f64>,
}

impl LinearRateReport {
    pub fn median_c_res(&self) -> Option<f64> {
        median(&self.c_res)
    }
}

fn median(v: &[f64]) -> Option<f64> {
    let mut w: Vec<f64> = v.iter().copied().filter(|a| a.is_finite()).collect();
    if w.is_empty() {
        return None;
    }
    w.sort_by(|a, b| a.total_cmp(b));
    Some(w[w.len() / 2])
}

/// Computes the restricted approximation gap and the observed contraction
/// over the recorded iterates. Purely diagnostic.
pub fn local_linear_diagnostic<T: Scalar>(
    oracle: &dyn SmoothOracle<T>,
    x_star: ArrayView1<T>,
    iterates: &[GradIterate<T>],
) -> Result<LinearRateReport> {
    let ctr = Counters::new();
    let model = oracle.local(x_star, &ctr)?;
    let mut c_res = Vec::with_capacity(iterates.len());
    let mut contraction = Vec::new();
    let star_norm = |v: ArrayView1<T>| model.norm_sq(v).max(T::zero()).sqrt().as_f64();
    for it in iterates {
        let dn = star_norm(it.d.view());
        if dn > 0.0 {
            let r = &it.d * it.l - &model.hess_vec(it.d.view());
            let sol = model.hess_solve(r.view())?;
            c_res.push(r.dot(&sol).max(T::zero()).sqrt().as_f64() / dn);
        }
    }
    for w in iterates.windows(2) {
        let a = star_norm((&w[0].x - &x_star).view());
        let b = star_norm((&w[1].x - &x_star).view());
        if a > 0.0 {
            contraction.push(b / a);
        }
    }
    Ok(LinearRateReport { c_res, contraction })
}
