use std::marker::PhantomData;

use ndarray::{Array1, ArrayView1};

use super::{LocalModel, SmoothOracle};
use crate::counters::Counters;
use crate::error::Result;
use crate::scalar::Scalar;

/// `c·f` for a positive constant `c`; same domain as `f`.
#[derive(Debug, Clone)]
pub struct ScaledOracle<T, O> {
    inner: O,
    factor: T,
    _marker: PhantomData<T>,
}

impl<T: Scalar, O: SmoothOracle<T>> ScaledOracle<T, O> {
    pub fn new(inner: O, factor: T) -> Self {
        Self { inner, factor, _marker: PhantomData }
    }

    pub fn factor(&self) -> T {
        self.factor
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<T: Scalar, O: SmoothOracle<T>> SmoothOracle<T> for ScaledOracle<T, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: ArrayView1<T>, ctr: &Counters) -> T {
        self.inner.value(x, ctr) * self.factor
    }

    fn in_domain(&self, x: ArrayView1<T>, ctr: &Counters) -> bool {
        self.inner.in_domain(x, ctr)
    }

    fn local<'a>(&'a self, x: ArrayView1<T>, ctr: &'a Counters) -> Result<Box<dyn LocalModel<T> + 'a>> {
        let inner = self.inner.local(x, ctr)?;
        let grad = inner.grad().to_owned() * self.factor;
        Ok(Box::new(ScaledLocal { inner, factor: self.factor, grad }))
    }
}

struct ScaledLocal<'a, T> {
    inner: Box<dyn LocalModel<T> + 'a>,
    factor: T,
    grad: Array1<T>,
}

impl<T: Scalar> LocalModel<T> for ScaledLocal<'_, T> {
    fn point(&self) -> ArrayView1<'_, T> {
        self.inner.point()
    }

    fn value(&self) -> T {
        self.inner.value() * self.factor
    }

    fn grad(&self) -> ArrayView1<'_, T> {
        self.grad.view()
    }

    fn hess_vec(&self, v: ArrayView1<T>) -> Array1<T> {
        self.inner.hess_vec(v) * self.factor
    }

    fn hess_solve(&self, r: ArrayView1<T>) -> Result<Array1<T>> {
        Ok(self.inner.hess_solve(r)? / self.factor)
    }

    fn norm_sq(&self, v: ArrayView1<T>) -> T {
        self.inner.norm_sq(v) * self.factor
    }
}
