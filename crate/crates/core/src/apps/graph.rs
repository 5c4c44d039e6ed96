use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::counters::Counters;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{symmetrize, Cholesky};
use crate::problem::ProblemInstance;
use crate::prox_grad::{solve_grad_named, GradConfig, LInit};
use crate::prox_newton::{solve_newton, solve_newton_with, NewtonConfig, NewtonDirection, SearchDirection};
use crate::prox_ops::L1Reg;
use crate::scalar::{lit, Scalar};
use crate::sc_core::LogDetOracle;
use crate::subsolver::{recover_primal_direction, solve_dual_graph, InnerConfig};
use crate::trace::SolverTrace;

/// `min −log det Θ + tr(Σ̂Θ) + ρ‖vec Θ‖₁` over `Θ ≻ 0`.
#[derive(Debug, Clone)]
pub struct GraphProblem<T> {
    pub sigma_hat: Array2<T>,
    pub rho: T,
    pub theta0: Array2<T>,
}

#[derive(Debug, Clone)]
pub struct GraphSolution<T> {
    pub theta: Array2<T>,
    pub trace: SolverTrace,
}

impl<T: Scalar> GraphProblem<T> {
    /// Starts from `Θ₀ = diag(1/(Σ̂ᵢᵢ + ρ))`.
    pub fn new(sigma_hat: Array2<T>, rho: T) -> Result<Self> {
        let p = sigma_hat.nrows();
        check_dim(p, sigma_hat.ncols())?;
        if !(rho > T::zero()) {
            return Err(Error::Domain { what: "rho must be positive", value: rho.as_f64() });
        }
        let mut theta0 = Array2::zeros((p, p));
        for i in 0..p {
            let v = sigma_hat[[i, i]] + rho;
            if !(v > T::zero()) {
                return Err(Error::Config(format!("diagonal entry {i} of the covariance is too negative")));
            }
            theta0[[i, i]] = T::one() / v;
        }
        Ok(Self { sigma_hat, rho, theta0 })
    }

    pub fn with_theta0(mut self, theta0: Array2<T>) -> Result<Self> {
        check_dim(self.p(), theta0.nrows())?;
        check_dim(self.p(), theta0.ncols())?;
        self.theta0 = theta0;
        Ok(self)
    }

    pub fn p(&self) -> usize {
        self.sigma_hat.nrows()
    }

    pub fn oracle(&self) -> Result<LogDetOracle<T>> {
        LogDetOracle::new(self.sigma_hat.clone())
    }

    pub fn regularizer(&self) -> L1Reg<T> {
        L1Reg::new(self.rho).expect("rho validated at construction")
    }

    /// `F(Θ)`; `+inf` when `Θ` is not positive definite.
    pub fn objective(&self, theta: ArrayView2<T>) -> T {
        let Ok(ch) = Cholesky::factor(symmetrize(&theta.to_owned()).view()) else {
            return T::infinity();
        };
        let tr = (&self.sigma_hat * &theta).sum();
        -ch.log_det() + tr + self.rho * theta.iter().fold(T::zero(), |a, v| a + v.abs())
    }

    /// Max-norm distance of `−∇f(Θ) = Θ⁻¹ − Σ̂` from `ρ·∂‖Θ‖₁`.
    pub fn kkt_residual(&self, theta: ArrayView2<T>) -> Result<T> {
        let ch = Cholesky::factor(symmetrize(&theta.to_owned()).view())?;
        let grad = &self.sigma_hat - &ch.inverse();
        Ok(self.regularizer().kkt_residual(flatten(theta).view(), flatten(grad.view()).view()))
    }
}

pub(crate) fn flatten<T: Scalar>(a: ArrayView2<T>) -> Array1<T> {
    Array1::from_iter(a.iter().copied())
}

pub(crate) fn unflatten<T: Scalar>(v: ArrayView1<T>, p: usize) -> Array2<T> {
    Array2::from_shape_vec((p, p), v.iter().copied().collect()).expect("p*p entries")
}

/// `λ = √tr((W − I)²)` with `W = Θ(Σ̂ + ρU)`, which equals `‖Δ‖_Θ` for the
/// direction recovered from `U`.
pub fn dual_decrement_sq<T: Scalar>(theta: ArrayView2<T>, sigma_hat: ArrayView2<T>, rho: T, u: ArrayView2<T>, ctr: &Counters) -> T {
    let mut e = theta.dot(&(&sigma_hat + &(&u * rho)));
    ctr.add_matmul(1);
    for i in 0..e.nrows() {
        e[[i, i]] -= T::one();
    }
    crate::linalg::trace_of_product(e.view(), e.view())
}

/// Direction provider solving the dual subproblem; no factorization of `Θ`.
pub struct DpngsDirection<'a, T: Scalar> {
    sigma_hat: &'a Array2<T>,
    rho: T,
    inner: InnerConfig<T>,
    warm: Option<Array2<T>>,
    warnings: Vec<String>,
}

impl<'a, T: Scalar> DpngsDirection<'a, T> {
    pub fn new(sigma_hat: &'a Array2<T>, rho: T, inner: InnerConfig<T>) -> Self {
        Self { sigma_hat, rho, inner, warm: None, warnings: Vec::new() }
    }
}

impl<T: Scalar> NewtonDirection<T> for DpngsDirection<'_, T> {
    fn compute(&mut self, x: ArrayView1<T>, ctr: &Counters) -> Result<SearchDirection<T>> {
        let p = self.sigma_hat.nrows();
        let theta = unflatten(x, p);
        let dual = solve_dual_graph(theta.view(), self.sigma_hat.view(), self.rho, &self.inner, self.warm.as_ref().map(|w| w.view()), ctr)?;
        let delta = recover_primal_direction(theta.view(), self.sigma_hat.view(), self.rho, dual.u.view(), ctr);
        let mut lam2 = dual_decrement_sq(theta.view(), self.sigma_hat.view(), self.rho, dual.u.view(), ctr);
        if lam2 < T::zero() {
            if lam2 < -lit::<T>(1e-10) {
                self.warnings.push(format!("negative squared decrement {lam2} clamped to 0"));
            }
            lam2 = T::zero();
        }
        let lambda = lam2.sqrt();
        let d = flatten(delta.view());
        self.warm = Some(dual.u);
        Ok(SearchDirection { s: &x + &d, d, lambda, beta: lambda, inner_iters: dual.inner_iters, residual: dual.residual })
    }

    fn take_warnings(&mut self) -> Vec<String> {
        std::mem::take(&mut self.warnings)
    }
}

/// Dual proximal Newton for graph selection.
pub fn dpngs_solve<T: Scalar>(prob: &GraphProblem<T>, cfg: &NewtonConfig<T>) -> Result<GraphSolution<T>> {
    let oracle = prob.oracle()?;
    let reg = prob.regularizer();
    let inst = ProblemInstance::new(&oracle, &reg, flatten(prob.theta0.view()))?;
    let mut dir = DpngsDirection::new(&prob.sigma_hat, prob.rho, cfg.inner);
    let out = solve_newton_with(&inst, cfg, &mut dir, "dpngs")?;
    Ok(GraphSolution { theta: symmetrize(&unflatten(out.x.view(), prob.p())), trace: out.trace })
}

/// Proximal Newton for graph selection with the primal subsolver.
pub fn newton_graph_solve<T: Scalar>(prob: &GraphProblem<T>, cfg: &NewtonConfig<T>) -> Result<GraphSolution<T>> {
    let oracle = prob.oracle()?;
    let reg = prob.regularizer();
    let inst = ProblemInstance::new(&oracle, &reg, flatten(prob.theta0.view()))?;
    let out = solve_newton(&inst, cfg)?;
    Ok(GraphSolution { theta: symmetrize(&unflatten(out.x.view(), prob.p())), trace: out.trace })
}

/// Proximal gradient for graph selection; `L_i` starts at `½‖Θᵢ⁻¹‖₂²`.
pub fn proxgrad_graph_solve<T: Scalar>(prob: &GraphProblem<T>, cfg: &GradConfig<T>) -> Result<GraphSolution<T>> {
    let oracle = prob.oracle()?;
    let reg = prob.regularizer();
    let inst = ProblemInstance::new(&oracle, &reg, flatten(prob.theta0.view()))?;
    let mut cfg = cfg.clone();
    cfg.l_init = LInit::HessianNorm(lit(0.5));
    let out = solve_grad_named(&inst, &cfg, "proxgrad1")?;
    Ok(GraphSolution { theta: symmetrize(&unflatten(out.x.view(), prob.p())), trace: out.trace })
}
