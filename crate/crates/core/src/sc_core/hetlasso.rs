use ndarray::{s, Array1, Array2, ArrayView1};

use super::{LazyHessianFactor, LocalModel, SmoothOracle};
use crate::counters::Counters;
use crate::error::{check_dim, Error, Result};
use crate::scalar::{lit, Scalar};

/// `f(β, σ) = −log σ + (1/2n)‖Xβ − σy‖²` on `σ > 0`; variable `x = (β, σ)`.
#[derive(Debug, Clone)]
pub struct HetLassoOracle<T> {
    x: Array2<T>,
    y: Array1<T>,
    yty: T,
}

impl<T: Scalar> HetLassoOracle<T> {
    pub fn new(design: Array2<T>, y: Array1<T>) -> Result<Self> {
        check_dim(design.nrows(), y.len())?;
        if y.is_empty() {
            return Err(Error::Config("no observations".into()));
        }
        let yty = y.dot(&y);
        Ok(Self { x: design, y, yty })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn design(&self) -> &Array2<T> {
        &self.x
    }

    pub fn response(&self) -> &Array1<T> {
        &self.y
    }

    fn inv_n(&self) -> T {
        T::one() / T::from_usize(self.n()).unwrap()
    }

    /// Closed-form `λ² = (σ⁻² + yᵀy/n)d_σ² + zᵀz/n − 2d_σ yᵀz/n` with `z = X d_β`.
    pub fn decrement_sq(&self, sigma: T, d: ArrayView1<T>) -> T {
        let p = self.p();
        let z = self.x.dot(&d.slice(s![..p]));
        let ds = d[p];
        let inv_n = self.inv_n();
        (T::one() / (sigma * sigma) + self.yty * inv_n) * ds * ds + z.dot(&z) * inv_n
            - lit::<T>(2.0) * ds * self.y.dot(&z) * inv_n
    }
}

impl<T: Scalar> SmoothOracle<T> for HetLassoOracle<T> {
    fn dim(&self) -> usize {
        self.p() + 1
    }

    fn value(&self, x: ArrayView1<T>, _ctr: &Counters) -> T {
        if x.len() != self.dim() {
            return T::infinity();
        }
        let p = self.p();
        let sigma = x[p];
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return T::infinity();
        }
        let z = self.x.dot(&x.slice(s![..p])) - &self.y * sigma;
        -sigma.ln() + z.dot(&z) * self.inv_n() / lit(2.0)
    }

    fn local<'a>(&'a self, x: ArrayView1<T>, ctr: &'a Counters) -> Result<Box<dyn LocalModel<T> + 'a>> {
        check_dim(self.dim(), x.len())?;
        let p = self.p();
        let sigma = x[p];
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::OutOfDomain);
        }
        let inv_n = self.inv_n();
        let z = self.x.dot(&x.slice(s![..p])) - &self.y * sigma;
        let value = -sigma.ln() + z.dot(&z) * inv_n / lit(2.0);
        let mut grad = Array1::zeros(p + 1);
        grad.slice_mut(s![..p]).assign(&(self.x.t().dot(&z) * inv_n));
        grad[p] = -T::one() / sigma - self.y.dot(&z) * inv_n;
        Ok(Box::new(HetLassoLocal {
            oracle: self,
            point: x.to_owned(),
            value,
            grad,
            factor: LazyHessianFactor::new(),
            ctr,
        }))
    }
}

struct HetLassoLocal<'a, T> {
    oracle: &'a HetLassoOracle<T>,
    point: Array1<T>,
    value: T,
    grad: Array1<T>,
    factor: LazyHessianFactor<T>,
    ctr: &'a Counters,
}

impl<T: Scalar> LocalModel<T> for HetLassoLocal<'_, T> {
    fn point(&self) -> ArrayView1<'_, T> {
        self.point.view()
    }

    fn value(&self) -> T {
        self.value
    }

    fn grad(&self) -> ArrayView1<'_, T> {
        self.grad.view()
    }

    fn hess_vec(&self, v: ArrayView1<T>) -> Array1<T> {
        self.ctr.add_hess_vec();
        let o = self.oracle;
        let p = o.p();
        let sigma = self.point[p];
        let inv_n = o.inv_n();
        let vs = v[p];
        let w = o.x.dot(&v.slice(s![..p])) - &o.y * vs;
        let mut out = Array1::zeros(p + 1);
        out.slice_mut(s![..p]).assign(&(o.x.t().dot(&w) * inv_n));
        out[p] = vs / (sigma * sigma) - o.y.dot(&w) * inv_n;
        out
    }

    fn hess_solve(&self, r: ArrayView1<T>) -> Result<Array1<T>> {
        self.factor.solve(self, self.point.len(), self.ctr, r)
    }

    fn norm_sq(&self, v: ArrayView1<T>) -> T {
        let p = self.oracle.p();
        self.oracle.decrement_sq(self.point[p], v)
    }
}
