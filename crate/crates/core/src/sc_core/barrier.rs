use ndarray::{Array1, Array2, ArrayView1};

use super::{LazyHessianFactor, LocalModel, SmoothOracle};
use crate::counters::Counters;
use crate::error::{check_dim, Error, Result};
use crate::scalar::{lit, Scalar};

/// Barrier of a concave quadratic: `f(x) = −t·log(σ² − ‖Ax − y‖²)`.
///
/// The weight must satisfy `t ≥ 1` so that `f` stays standard self-concordant.
#[derive(Debug, Clone)]
pub struct BarrierQuadOracle<T> {
    a: Array2<T>,
    y: Array1<T>,
    sigma2: T,
    t: T,
}

impl<T: Scalar> BarrierQuadOracle<T> {
    pub fn new(a: Array2<T>, y: Array1<T>, sigma2: T, t: T) -> Result<Self> {
        check_dim(a.nrows(), y.len())?;
        if !(sigma2 > T::zero()) {
            return Err(Error::Domain { what: "noise level sigma^2 must be > 0", value: sigma2.as_f64() });
        }
        if !(t >= T::one()) {
            return Err(Error::Domain { what: "barrier weight t must be >= 1", value: t.as_f64() });
        }
        Ok(Self { a, y, sigma2, t })
    }

    fn slack(&self, x: ArrayView1<T>) -> (Array1<T>, T) {
        let r = self.a.dot(&x) - &self.y;
        let s = self.sigma2 - r.dot(&r);
        (r, s)
    }
}

impl<T: Scalar> SmoothOracle<T> for BarrierQuadOracle<T> {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: ArrayView1<T>, _ctr: &Counters) -> T {
        if x.len() != self.dim() {
            return T::infinity();
        }
        let (_, s) = self.slack(x);
        if s > T::zero() {
            -self.t * s.ln()
        } else {
            T::infinity()
        }
    }

    fn local<'a>(&'a self, x: ArrayView1<T>, ctr: &'a Counters) -> Result<Box<dyn LocalModel<T> + 'a>> {
        check_dim(self.dim(), x.len())?;
        let (r, s) = self.slack(x);
        if !(s > T::zero()) {
            return Err(Error::OutOfDomain);
        }
        let atr = self.a.t().dot(&r);
        let grad = &atr * (lit::<T>(2.0) * self.t / s);
        Ok(Box::new(BarrierLocal {
            oracle: self,
            point: x.to_owned(),
            value: -self.t * s.ln(),
            grad,
            r,
            s,
            factor: LazyHessianFactor::new(),
            ctr,
        }))
    }
}

struct BarrierLocal<'a, T> {
    oracle: &'a BarrierQuadOracle<T>,
    point: Array1<T>,
    value: T,
    grad: Array1<T>,
    r: Array1<T>,
    s: T,
    factor: LazyHessianFactor<T>,
    ctr: &'a Counters,
}

impl<T: Scalar> LocalModel<T> for BarrierLocal<'_, T> {
    fn point(&self) -> ArrayView1<'_, T> {
        self.point.view()
    }

    fn value(&self) -> T {
        self.value
    }

    fn grad(&self) -> ArrayView1<'_, T> {
        self.grad.view()
    }

    /// `t[2Aᵀ(Av)/s + 4Aᵀr (rᵀAv)/s²]`.
    fn hess_vec(&self, v: ArrayView1<T>) -> Array1<T> {
        self.ctr.add_hess_vec();
        let o = self.oracle;
        let av = o.a.dot(&v);
        let rav = self.r.dot(&av);
        let two = lit::<T>(2.0);
        let comb = &av * (two / self.s) + &self.r * (two * two * rav / (self.s * self.s));
        o.a.t().dot(&comb) * o.t
    }

    fn hess_solve(&self, r: ArrayView1<T>) -> Result<Array1<T>> {
        self.factor.solve(self, self.point.len(), self.ctr, r)
    }
}
