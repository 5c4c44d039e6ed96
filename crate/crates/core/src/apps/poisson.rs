use ndarray::{Array1, ArrayView1};

use crate::error::{check_dim, Error, Result};
use crate::linalg::CsrMatrix;
use crate::problem::ProblemInstance;
use crate::prox_grad::{solve_grad_named, GradConfig};
use crate::prox_ops::{TVNonnegReg, TvControl};
use crate::scalar::{lit, Scalar};
use crate::sc_core::PoissonOracle;
use crate::trace::SolverTrace;

/// `min Σᵢ (aᵢᵀx − yᵢ log aᵢᵀx) + ρ‖Dx‖₁` over nonnegative images.
#[derive(Debug, Clone)]
pub struct PoissonProblem<T> {
    pub a: CsrMatrix<T>,
    pub y: Array1<T>,
    pub rho: T,
    pub height: usize,
    pub width: usize,
    pub x0: Array1<T>,
}

#[derive(Debug, Clone)]
pub struct PoissonConfig<T> {
    pub grad: GradConfig<T>,
    pub tv: TvControl<T>,
}

impl<T: Scalar> Default for PoissonConfig<T> {
    fn default() -> Self {
        let grad = GradConfig { eps: lit(1e-5), max_iter: 500, descent_slack: lit(1e-6), ..GradConfig::default() };
        Self { grad, tv: TvControl::default() }
    }
}

#[derive(Debug, Clone)]
pub struct PoissonSolution<T> {
    pub x: Array1<T>,
    pub trace: SolverTrace,
    /// Metric `L_k` of the last direction computed.
    pub last_l: T,
}

impl<T: Scalar> PoissonProblem<T> {
    pub fn new(a: CsrMatrix<T>, y: Array1<T>, rho: T, height: usize, width: usize) -> Result<Self> {
        check_dim(height * width, a.ncols())?;
        check_dim(a.nrows(), y.len())?;
        if !(rho >= T::zero()) {
            return Err(Error::Domain { what: "rho must be nonnegative", value: rho.as_f64() });
        }
        let x0 = default_start(&a, y.view());
        Ok(Self { a, y, rho, height, width, x0 })
    }

    pub fn oracle(&self) -> Result<PoissonOracle<T>> {
        PoissonOracle::new(self.a.clone(), self.y.clone())
    }

    /// Regularizer on the standardized scale: `(M²/4)·ρ·TV` plus `x ≥ 0`.
    pub fn regularizer(&self, scale: T, tv: TvControl<T>) -> Result<TVNonnegReg<T>> {
        Ok(TVNonnegReg::new(self.rho * scale, self.height, self.width)?.with_control(tv))
    }

    /// Objective on the original (unstandardized) scale.
    pub fn objective(&self, x: ArrayView1<T>) -> T {
        if x.iter().any(|v| *v < T::zero()) {
            return T::infinity();
        }
        let ax = self.a.mul_vec(x);
        let mut s = T::zero();
        for (&axi, &yi) in ax.iter().zip(self.y.iter()) {
            if yi > T::zero() {
                if !(axi > T::zero()) {
                    return T::infinity();
                }
                s += axi - yi * axi.ln();
            } else {
                s += axi;
            }
        }
        let reg = TVNonnegReg::new(T::one(), self.height, self.width).expect("grid matches");
        s + self.rho * reg.tv(x)
    }
}

/// Positive part of a few conjugate-gradient steps on `‖Ax − y‖²`, shifted
/// up so every pixel is strictly positive.
pub fn default_start<T: Scalar>(a: &CsrMatrix<T>, y: ArrayView1<T>) -> Array1<T> {
    let n = a.ncols();
    let mut x = Array1::<T>::zeros(n);
    let mut r = y.to_owned();
    let mut z = a.tmul_vec(r.view());
    let mut p = z.clone();
    let mut zz = z.dot(&z);
    for _ in 0..25 {
        if zz <= T::epsilon() * T::epsilon() {
            break;
        }
        let w = a.mul_vec(p.view());
        let ww = w.dot(&w);
        if !(ww > T::zero()) {
            break;
        }
        let step = zz / ww;
        x.scaled_add(step, &p);
        r.scaled_add(-step, &w);
        z = a.tmul_vec(r.view());
        let zz_new = z.dot(&z);
        p = &z + &(&p * (zz_new / zz));
        zz = zz_new;
    }
    let pos = x.mapv(|v| v.max(T::zero()));
    let n_t = T::from_usize(n.max(1)).unwrap();
    let mean = pos.sum() / n_t;
    let shift = (lit::<T>(1e-2) * mean).max(lit(1e-3));
    pos.mapv(|v| v + shift)
}

/// Proximal gradient with TV-nonnegative prox; `greedy` selects the greedy variant.
pub fn poisson_solve<T: Scalar>(prob: &PoissonProblem<T>, cfg: &PoissonConfig<T>) -> Result<PoissonSolution<T>> {
    let oracle = prob.oracle()?;
    let reg = prob.regularizer(oracle.scale(), cfg.tv)?;
    let inst = ProblemInstance::new(&oracle, &reg, prob.x0.clone())?;
    let name = if cfg.grad.greedy { "proxgrad2g" } else { "proxgrad2" };
    let out = solve_grad_named(&inst, &cfg.grad, name)?;
    let mut trace = out.trace;
    trace.meta.insert("scale".into(), oracle.scale().as_f64());
    trace.meta.insert("m".into(), oracle.m_constant().as_f64());
    let last_l = trace.last().and_then(|r| r.l).map(lit).unwrap_or_else(T::one);
    Ok(PoissonSolution { x: out.x, trace, last_l })
}

/// `‖x − P(x − ∇f(x)/L)‖ / max(1, ‖x‖)` on the standardized problem.
pub fn poisson_fixed_point_residual<T: Scalar>(prob: &PoissonProblem<T>, tv: TvControl<T>, x: ArrayView1<T>, l: T) -> Result<T> {
    let oracle = prob.oracle()?;
    let reg = prob.regularizer(oracle.scale(), tv)?;
    crate::prox_grad::prox_fixed_point_residual(&oracle, &reg, x, l)
}
