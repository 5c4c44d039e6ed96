use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::{LocalModel, SmoothOracle};
use crate::counters::Counters;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{symmetrize, trace_of_product, Cholesky};
use crate::scalar::{lit, Scalar};

/// `f(Θ) = −log det Θ + tr(Σ̂Θ)` on symmetric positive definite matrices.
///
/// The flat variable is `vec(Θ)` in row-major order (`dim = p²`). Only the
/// symmetric part of `Θ` enters the log-determinant, so the Hessian acts as
/// `V ↦ Θ⁻¹ sym(V) Θ⁻¹` and is singular on antisymmetric directions.
#[derive(Debug, Clone)]
pub struct LogDetOracle<T> {
    sigma_hat: Array2<T>,
}

impl<T: Scalar> LogDetOracle<T> {
    pub fn new(sigma_hat: Array2<T>) -> Result<Self> {
        let p = sigma_hat.nrows();
        check_dim(p, sigma_hat.ncols())?;
        if p == 0 {
            return Err(Error::Config("empty covariance matrix".into()));
        }
        let tol = lit::<T>(1e-10);
        for i in 0..p {
            for j in 0..i {
                let (a, b) = (sigma_hat[[i, j]], sigma_hat[[j, i]]);
                if (a - b).abs() > tol * (T::one() + a.abs().max(b.abs())) {
                    return Err(Error::Config(format!("covariance not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { sigma_hat })
    }

    pub fn p(&self) -> usize {
        self.sigma_hat.nrows()
    }

    pub fn sigma_hat(&self) -> &Array2<T> {
        &self.sigma_hat
    }

    /// Attempts the single Cholesky factorization that decides membership.
    pub fn factor(&self, theta: ArrayView2<T>, ctr: &Counters) -> Option<Cholesky<T>> {
        ctr.add_chol();
        let sym = symmetrize(&theta.to_owned());
        Cholesky::factor(sym.view()).ok()
    }

    pub fn value_mat(&self, theta: ArrayView2<T>, ctr: &Counters) -> T {
        match self.factor(theta, ctr) {
            Some(ch) => -ch.log_det() + trace_of_product(self.sigma_hat.view(), theta),
            None => T::infinity(),
        }
    }

    /// Local model at a matrix point; one Cholesky factorization.
    pub fn local_mat<'a>(&'a self, theta: ArrayView2<T>, ctr: &'a Counters) -> Result<LogDetLocal<'a, T>> {
        let p = self.p();
        check_dim(p, theta.nrows())?;
        check_dim(p, theta.ncols())?;
        let ch = self.factor(theta, ctr).ok_or(Error::OutOfDomain)?;
        let theta_inv = ch.inverse();
        let value = -ch.log_det() + trace_of_product(self.sigma_hat.view(), theta);
        let grad = &self.sigma_hat - &theta_inv;
        let flat_point = Array1::from_iter(theta.iter().copied());
        let flat_grad = Array1::from_iter(grad.iter().copied());
        Ok(LogDetLocal {
            theta: theta.to_owned(),
            theta_inv,
            flat_point,
            flat_grad,
            value,
            ctr,
        })
    }

    /// `∇f(Θ) = Σ̂ − Θ⁻¹`.
    pub fn grad_mat(&self, theta: ArrayView2<T>, ctr: &Counters) -> Result<Array2<T>> {
        Ok(self.local_mat(theta, ctr)?.grad_mat())
    }
}

pub(crate) fn as_square<T: Scalar>(v: ArrayView1<T>, p: usize) -> Array2<T> {
    Array2::from_shape_vec((p, p), v.iter().copied().collect()).expect("p*p entries")
}

impl<T: Scalar> SmoothOracle<T> for LogDetOracle<T> {
    fn dim(&self) -> usize {
        self.p() * self.p()
    }

    fn value(&self, x: ArrayView1<T>, ctr: &Counters) -> T {
        if x.len() != self.dim() {
            return T::infinity();
        }
        self.value_mat(as_square(x, self.p()).view(), ctr)
    }

    fn local<'a>(&'a self, x: ArrayView1<T>, ctr: &'a Counters) -> Result<Box<dyn LocalModel<T> + 'a>> {
        check_dim(self.dim(), x.len())?;
        Ok(Box::new(self.local_mat(as_square(x, self.p()).view(), ctr)?))
    }
}

/// Point handle for [`LogDetOracle`]; carries `Θ⁻¹` from the cached factorization.
#[derive(Debug)]
pub struct LogDetLocal<'a, T> {
    theta: Array2<T>,
    theta_inv: Array2<T>,
    flat_point: Array1<T>,
    flat_grad: Array1<T>,
    value: T,
    ctr: &'a Counters,
}

impl<T: Scalar> LogDetLocal<'_, T> {
    pub fn theta(&self) -> &Array2<T> {
        &self.theta
    }

    pub fn theta_inv(&self) -> &Array2<T> {
        &self.theta_inv
    }

    pub fn grad_mat(&self) -> Array2<T> {
        as_square(self.flat_grad.view(), self.theta.nrows())
    }

    /// `Θ⁻¹ sym(V) Θ⁻¹`.
    pub fn hess_mat(&self, v: ArrayView2<T>) -> Array2<T> {
        self.ctr.add_hess_vec();
        self.ctr.add_matmul(2);
        let sv = symmetrize(&v.to_owned());
        self.theta_inv.dot(&sv).dot(&self.theta_inv)
    }

    /// `Θ sym(R) Θ`, the inverse on the symmetric subspace.
    pub fn hess_solve_mat(&self, r: ArrayView2<T>) -> Array2<T> {
        self.ctr.add_matmul(2);
        let sr = symmetrize(&r.to_owned());
        self.theta.dot(&sr).dot(&self.theta)
    }

    /// `tr(Θ⁻¹VΘ⁻¹V)` for symmetric part of `V`.
    pub fn norm_sq_mat(&self, v: ArrayView2<T>) -> T {
        self.ctr.add_matmul(1);
        let sv = symmetrize(&v.to_owned());
        let a = self.theta_inv.dot(&sv);
        trace_of_product(a.view(), a.view())
    }
}

impl<T: Scalar> LocalModel<T> for LogDetLocal<'_, T> {
    fn point(&self) -> ArrayView1<'_, T> {
        self.flat_point.view()
    }

    fn value(&self) -> T {
        self.value
    }

    fn grad(&self) -> ArrayView1<'_, T> {
        self.flat_grad.view()
    }

    fn hess_vec(&self, v: ArrayView1<T>) -> Array1<T> {
        let p = self.theta.nrows();
        let out = self.hess_mat(as_square(v, p).view());
        Array1::from_iter(out.iter().copied())
    }

    fn hess_solve(&self, r: ArrayView1<T>) -> Result<Array1<T>> {
        let p = self.theta.nrows();
        let out = self.hess_solve_mat(as_square(r, p).view());
        Ok(Array1::from_iter(out.iter().copied()))
    }

    fn norm_sq(&self, v: ArrayView1<T>) -> T {
        let p = self.theta.nrows();
        self.norm_sq_mat(as_square(v, p).view())
    }
}
