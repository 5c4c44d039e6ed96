use ndarray::{s, Array1, Array2, ArrayView1};

use crate::error::{check_dim, Error, Result};
use crate::problem::ProblemInstance;
use crate::prox_grad::{solve_grad_named, GradConfig};
use crate::prox_ops::L1Reg;
use crate::scalar::Scalar;
use crate::sc_core::HetLassoOracle;
use crate::trace::SolverTrace;

/// `min −log σ + (1/2n)‖Xβ − σy‖² + ρ‖β‖₁` over `σ > 0`.
#[derive(Debug, Clone)]
pub struct HetLassoProblem<T> {
    pub x: Array2<T>,
    pub y: Array1<T>,
    pub rho: T,
    pub beta0: Array1<T>,
    pub sigma0: T,
}

#[derive(Debug, Clone)]
pub struct HetLassoSolution<T> {
    pub beta: Array1<T>,
    pub sigma: T,
    pub trace: SolverTrace,
}

impl<T: Scalar> HetLassoProblem<T> {
    /// Starts from `β = 0` and `σ` equal to the standard deviation of `y`
    /// (or 1 when `y` is constant).
    pub fn new(x: Array2<T>, y: Array1<T>, rho: T) -> Result<Self> {
        check_dim(x.nrows(), y.len())?;
        if y.is_empty() {
            return Err(Error::Config("no observations".into()));
        }
        if !(rho >= T::zero()) {
            return Err(Error::Domain { what: "rho must be nonnegative", value: rho.as_f64() });
        }
        let sd = y.std(T::zero());
        let sigma0 = if sd > T::zero() { sd } else { T::one() };
        let beta0 = Array1::zeros(x.ncols());
        Ok(Self { x, y, rho, beta0, sigma0 })
    }

    pub fn with_start(mut self, beta0: Array1<T>, sigma0: T) -> Result<Self> {
        check_dim(self.x.ncols(), beta0.len())?;
        if !(sigma0 > T::zero()) {
            return Err(Error::Domain { what: "sigma0 must be positive", value: sigma0.as_f64() });
        }
        self.beta0 = beta0;
        self.sigma0 = sigma0;
        Ok(self)
    }

    pub fn oracle(&self) -> Result<HetLassoOracle<T>> {
        HetLassoOracle::new(self.x.clone(), self.y.clone())
    }

    /// `ρ‖β‖₁`; the `σ` coordinate is left unpenalized.
    pub fn regularizer(&self) -> Result<L1Reg<T>> {
        let p = self.x.ncols();
        let mut mask = vec![false; p + 1];
        mask[p] = true;
        L1Reg::with_mask(self.rho, mask)
    }

    pub fn start(&self) -> Array1<T> {
        let p = self.x.ncols();
        let mut x0 = Array1::zeros(p + 1);
        x0.slice_mut(s![..p]).assign(&self.beta0);
        x0[p] = self.sigma0;
        x0
    }

    pub fn objective(&self, beta: ArrayView1<T>, sigma: T) -> T {
        if !(sigma > T::zero()) {
            return T::infinity();
        }
        let n = T::from_usize(self.y.len()).unwrap();
        let r = self.x.dot(&beta) - &self.y * sigma;
        -sigma.ln() + r.dot(&r) / (n + n) + self.rho * beta.iter().fold(T::zero(), |a, v| a + v.abs())
    }
}

/// Proximal gradient on the joint variable `(β, σ)`.
pub fn hetlasso_solve<T: Scalar>(prob: &HetLassoProblem<T>, cfg: &GradConfig<T>) -> Result<HetLassoSolution<T>> {
    let oracle = prob.oracle()?;
    let reg = prob.regularizer()?;
    let inst = ProblemInstance::new(&oracle, &reg, prob.start())?;
    let out = solve_grad_named(&inst, cfg, "hetlasso")?;
    let p = prob.x.ncols();
    let sigma = out.x[p];
    if !(sigma > T::zero()) {
        return Err(Error::DomainEscape(format!("sigma became {sigma}")));
    }
    Ok(HetLassoSolution { beta: out.x.slice(s![..p]).to_owned(), sigma, trace: out.trace })
}
