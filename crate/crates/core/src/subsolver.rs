//! Solvers for the per-iteration model problem
//! `min_s ∇f(xᵏ)ᵀ(s − xᵏ) + ½(s − xᵏ)ᵀH(s − xᵏ) + g(s)`
//! and the spectral helpers they rely on.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::counters::Counters;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{frobenius, norm2, symmetrize};
use crate::prox_ops::{ProxWorkspace, Regularizer};
use crate::scalar::{lit, Scalar};
use crate::sc_core::LocalModel;

/// Symmetric positive semidefinite metric `H` of the model problem.
pub trait MetricOperator<T: Scalar> {
    fn dim(&self) -> usize;

    fn apply(&self, v: ArrayView1<T>) -> Array1<T>;

    /// `H⁻¹r`, when the metric supports it.
    fn solve(&self, _r: ArrayView1<T>) -> Result<Array1<T>> {
        Err(Error::SolveUnavailable)
    }

    /// Diagonal of `H` when `H` is known to be diagonal.
    fn diag_hint(&self) -> Option<Array1<T>> {
        None
    }
}

/// Explicit dense symmetric matrix.
#[derive(Debug, Clone)]
pub struct DenseMetric<T> {
    pub h: Array2<T>,
}

impl<T: Scalar> MetricOperator<T> for DenseMetric<T> {
    fn dim(&self) -> usize {
        self.h.nrows()
    }

    fn apply(&self, v: ArrayView1<T>) -> Array1<T> {
        self.h.dot(&v)
    }

    fn solve(&self, r: ArrayView1<T>) -> Result<Array1<T>> {
        Ok(crate::linalg::Cholesky::factor(self.h.view())?.solve(r))
    }
}

/// `c·I`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledIdentity<T> {
    pub c: T,
    pub n: usize,
}

impl<T: Scalar> MetricOperator<T> for ScaledIdentity<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, v: ArrayView1<T>) -> Array1<T> {
        &v * self.c
    }

    fn solve(&self, r: ArrayView1<T>) -> Result<Array1<T>> {
        Ok(&r / self.c)
    }

    fn diag_hint(&self) -> Option<Array1<T>> {
        Some(Array1::from_elem(self.n, self.c))
    }
}

/// `diag(d)`.
#[derive(Debug, Clone)]
pub struct DiagonalMetric<T> {
    pub d: Array1<T>,
}

impl<T: Scalar> MetricOperator<T> for DiagonalMetric<T> {
    fn dim(&self) -> usize {
        self.d.len()
    }

    fn apply(&self, v: ArrayView1<T>) -> Array1<T> {
        &v * &self.d
    }

    fn solve(&self, r: ArrayView1<T>) -> Result<Array1<T>> {
        Ok(&r / &self.d)
    }

    fn diag_hint(&self) -> Option<Array1<T>> {
        Some(self.d.clone())
    }
}

/// `∇²f(xᵏ)` served by an evaluated local model.
pub struct HessianMetric<'m, 'a, T> {
    pub model: &'m (dyn LocalModel<T> + 'a),
}

impl<T: Scalar> MetricOperator<T> for HessianMetric<'_, '_, T> {
    fn dim(&self) -> usize {
        self.model.point().len()
    }

    fn apply(&self, v: ArrayView1<T>) -> Array1<T> {
        self.model.hess_vec(v)
    }

    fn solve(&self, r: ArrayView1<T>) -> Result<Array1<T>> {
        self.model.hess_solve(r)
    }
}

/// Solution of one model problem.
#[derive(Debug, Clone)]
pub struct SubproblemResult<T> {
    /// Minimizer `sᵏ`.
    pub s: Array1<T>,
    /// `dᵏ = sᵏ − xᵏ`.
    pub d: Array1<T>,
    pub inner_iters: usize,
    /// Final stopping metric.
    pub residual: T,
    /// Carry-over for the next solve (the previous `s` or dual variable, flattened).
    pub warm: Array1<T>,
}

/// Controls for the accelerated inner solvers.
#[derive(Debug, Clone, Copy)]
pub struct InnerConfig<T> {
    pub tol: T,
    pub max_iter: usize,
    pub power_iters: usize,
}

impl<T: Scalar> Default for InnerConfig<T> {
    fn default() -> Self {
        Self { tol: lit(1e-8), max_iter: 1000, power_iters: 20 }
    }
}

impl<T: Scalar> InnerConfig<T> {
    pub fn with_tol(tol: T) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Largest eigenvalue of a symmetric PSD operator by power iteration from a
/// fixed pseudo-random start; returns the final Rayleigh quotient.
pub fn power_method_max_eig<T: Scalar>(op: &dyn Fn(ArrayView1<T>) -> Array1<T>, n: usize, iters: usize) -> T {
    if n == 0 {
        return T::zero();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_9a11);
    let mut v: Array1<T> = (0..n).map(|_| lit::<T>(rng.random_range(0.5..1.5))).collect();
    let nv = norm2(v.view());
    v /= nv;
    let mut rq = T::zero();
    for _ in 0..iters.max(1) {
        let w = op(v.view());
        rq = v.dot(&w);
        let nw = norm2(w.view());
        if nw == T::zero() || !nw.is_finite() {
            return T::zero();
        }
        v = w / nw;
    }
    let w = op(v.view());
    rq.max(v.dot(&w)).max(T::zero())
}

/// Elementwise clamp to `[−1, 1]`.
pub fn project_linf_ball<T: Scalar>(u: ArrayView2<T>) -> Array2<T> {
    u.mapv(|v| v.max(-T::one()).min(T::one()))
}

/// Objective increases below this are rounding noise, not divergence.
fn noise_floor<T: Scalar>(v: T) -> T {
    lit::<T>(16.0) * T::epsilon() * (T::one() + v.abs())
}

fn model_value<T: Scalar>(
    h: &dyn MetricOperator<T>,
    grad: ArrayView1<T>,
    x_k: ArrayView1<T>,
    reg: &dyn Regularizer<T>,
    s: ArrayView1<T>,
) -> T {
    let d = &s - &x_k;
    grad.dot(&d) + d.dot(&h.apply(d.view())) / lit(2.0) + reg.eval(s)
}

/// Accelerated proximal gradient with function-value restart on the model
/// problem. Stops when the prox fixed-point residual
/// `‖s_{j+1} − y_j‖ ≤ tol·max(‖s_{j+1}‖, 1)`.
#[allow(clippy::too_many_arguments)]
pub fn solve_primal_fista<T: Scalar>(
    h: &dyn MetricOperator<T>,
    grad: ArrayView1<T>,
    x_k: ArrayView1<T>,
    reg: &dyn Regularizer<T>,
    cfg: &InnerConfig<T>,
    warm: Option<ArrayView1<T>>,
    ws: &mut ProxWorkspace<T>,
    ctr: &Counters,
) -> Result<SubproblemResult<T>> {
    let n = x_k.len();
    check_dim(n, grad.len())?;
    check_dim(n, h.dim())?;
    if let Some(diag) = h.diag_hint() {
        if diag.iter().any(|v| !(*v > T::zero())) {
            return Err(Error::IndefiniteMetric("diagonal metric has a nonpositive entry".into()));
        }
        // separable closed form: s = P(Hxᵏ − ∇f)
        let u = &(&x_k * &diag) - &grad;
        ctr.add_prox();
        let s = reg.prox_diag(u.view(), diag.view(), ws)?;
        let d = &s - &x_k;
        return Ok(SubproblemResult { warm: s.clone(), s, d, inner_iters: 1, residual: T::zero() });
    }
    let lmax = power_method_max_eig(&|v| h.apply(v), n, cfg.power_iters);
    if !(lmax > T::zero()) || !lmax.is_finite() {
        return Err(Error::IndefiniteMetric(format!("largest eigenvalue estimate {lmax}")));
    }
    let l0 = lmax * lit(1.05);
    let mut l = l0;
    let mut s = match warm {
        Some(w) if w.len() == n => w.to_owned(),
        _ => x_k.to_owned(),
    };
    let mut q_s = model_value(h, grad, x_k, reg, s.view());
    let mut y = s.clone();
    let mut t = T::one();
    let mut just_restarted = false;
    let mut residual = T::infinity();
    for j in 1..=cfg.max_iter {
        let gq = &grad + &h.apply((&y - &x_k).view());
        let v = &y - &(gq / l);
        ctr.add_prox();
        let s_new = reg.prox_scalar(v.view(), l, ws)?;
        // measured in units of the initial step so that doubling L cannot shrink it
        residual = norm2((&s_new - &y).view()) * (l / l0) / norm2(s_new.view()).max(T::one());
        if residual <= cfg.tol {
            let d = &s_new - &x_k;
            return Ok(SubproblemResult { warm: s_new.clone(), s: s_new, d, inner_iters: j, residual });
        }
        let q_new = model_value(h, grad, x_k, reg, s_new.view());
        if q_new > q_s + noise_floor(q_s) {
            if just_restarted {
                // a plain prox-gradient step increased the model: L is too small
                l *= lit(2.0);
            }
            t = T::one();
            y = s.clone();
            just_restarted = true;
            continue;
        }
        just_restarted = false;
        let t_new = (T::one() + (T::one() + lit::<T>(4.0) * t * t).sqrt()) / lit(2.0);
        y = &s_new + &((&s_new - &s) * ((t - T::one()) / t_new));
        t = t_new;
        s = s_new;
        q_s = q_new;
    }
    Err(Error::SubsolverFailure { iters: cfg.max_iter, residual: residual.as_f64() })
}

/// Dual of the graph-selection model problem at `Θ`:
/// `min_{|Uᵢⱼ| ≤ 1} ½tr((ΘU)²) + tr(Q̃U)` with `Q̃ = ρ⁻¹(ΘΣ̂Θ − 2Θ)`.
#[derive(Debug, Clone)]
pub struct DualGraphResult<T> {
    pub u: Array2<T>,
    pub inner_iters: usize,
    pub residual: T,
    /// Step constant used (power-method `γ_max(Θ)²` inflated by 1.05, possibly doubled).
    pub lipschitz: T,
}

/// Projected accelerated gradient on the graph-selection dual.
pub fn solve_dual_graph<T: Scalar>(
    theta: ArrayView2<T>,
    sigma_hat: ArrayView2<T>,
    rho: T,
    cfg: &InnerConfig<T>,
    warm: Option<ArrayView2<T>>,
    ctr: &Counters,
) -> Result<DualGraphResult<T>> {
    let p = theta.nrows();
    check_dim(p, theta.ncols())?;
    check_dim(p, sigma_hat.nrows())?;
    if !(rho > T::zero()) {
        return Err(Error::Domain { what: "dual graph subproblem needs rho > 0", value: rho.as_f64() });
    }
    let ts = theta.dot(&sigma_hat);
    let q = symmetrize(&((ts.dot(&theta) - &theta * lit::<T>(2.0)) / rho));
    ctr.add_matmul(2);
    let gmax = power_method_max_eig(&|v| theta.dot(&v), p, cfg.power_iters.max(30));
    let l0 = gmax * gmax * lit(1.05);
    let mut l = l0;
    if !(l > T::zero()) {
        return Err(Error::IndefiniteMetric(format!("theta spectral estimate {gmax}")));
    }
    // objective from ΘU: ½tr((ΘU)²) + tr(Q̃U)
    let objective = |tu: &Array2<T>, u: &Array2<T>| -> T {
        let quad = tu.iter().zip(tu.t().iter()).fold(T::zero(), |a, (x, y)| a + *x * *y);
        quad / lit(2.0) + (&q * u).sum()
    };
    let mut u = match warm {
        Some(w) if w.dim() == (p, p) => project_linf_ball(w),
        _ => Array2::zeros((p, p)),
    };
    let tu0 = theta.dot(&u);
    ctr.add_matmul(1);
    let mut phi = objective(&tu0, &u);
    let mut y = u.clone();
    let mut t = T::one();
    let mut just_restarted = false;
    let mut residual = T::infinity();
    for j in 1..=cfg.max_iter {
        let ty = theta.dot(&y);
        let gy = symmetrize(&ty.dot(&theta)) + &q;
        let u_new = project_linf_ball((&y - &(gy / l)).view());
        let tun = theta.dot(&u_new);
        ctr.add_matmul(3);
        residual = frobenius((&u_new - &y).view()) * (l / l0) / frobenius(u_new.view()).max(T::one());
        if residual <= cfg.tol {
            return Ok(DualGraphResult { u: u_new, inner_iters: j, residual, lipschitz: l });
        }
        let phi_new = objective(&tun, &u_new);
        if phi_new > phi + noise_floor(phi) {
            if just_restarted {
                l *= lit(2.0);
            }
            t = T::one();
            y = u.clone();
            just_restarted = true;
            continue;
        }
        just_restarted = false;
        let t_new = (T::one() + (T::one() + lit::<T>(4.0) * t * t).sqrt()) / lit(2.0);
        y = &u_new + &((&u_new - &u) * ((t - T::one()) / t_new));
        t = t_new;
        u = u_new;
        phi = phi_new;
    }
    Err(Error::SubsolverFailure { iters: cfg.max_iter, residual: residual.as_f64() })
}

/// `Δ = −((ΘΣ̂ − I)Θ + ρΘUΘ)`, symmetrized.
pub fn recover_primal_direction<T: Scalar>(
    theta: ArrayView2<T>,
    sigma_hat: ArrayView2<T>,
    rho: T,
    u: ArrayView2<T>,
    ctr: &Counters,
) -> Array2<T> {
    let ts = theta.dot(&sigma_hat);
    let first = ts.dot(&theta) - theta;
    let second = theta.dot(&u).dot(&theta) * rho;
    ctr.add_matmul(4);
    symmetrize(&(-(first + second)))
}
