//! Composite objective `F = f + g` and the problem bundle handed to solvers.

use ndarray::{Array1, ArrayView1};

use crate::counters::Counters;
use crate::error::{check_dim, Error, Result};
use crate::prox_ops::Regularizer;
use crate::scalar::Scalar;
use crate::sc_core::SmoothOracle;

/// Smooth part, regularizer and a starting point in `dom F`.
pub struct ProblemInstance<'a, T: Scalar> {
    pub oracle: &'a dyn SmoothOracle<T>,
    pub reg: &'a dyn Regularizer<T>,
    pub x0: Array1<T>,
}

impl<'a, T: Scalar> ProblemInstance<'a, T> {
    pub fn new(oracle: &'a dyn SmoothOracle<T>, reg: &'a dyn Regularizer<T>, x0: Array1<T>) -> Result<Self> {
        check_dim(oracle.dim(), x0.len())?;
        let p = Self { oracle, reg, x0 };
        if !p.value_uncounted(p.x0.view()).is_finite() {
            return Err(Error::OutOfDomain);
        }
        Ok(p)
    }

    /// `F(x)`, counted as one objective evaluation.
    pub fn value(&self, x: ArrayView1<T>, ctr: &Counters) -> T {
        composite_value(self.oracle, self.reg, x, ctr)
    }

    /// `F(x)` without touching the solve's counters (used for trace logging).
    pub fn value_uncounted(&self, x: ArrayView1<T>) -> T {
        composite_value(self.oracle, self.reg, x, &Counters::new())
    }
}

/// `f(x) + g(x)`; `+inf` outside `dom F`. Counts one objective evaluation.
pub fn composite_value<T: Scalar>(
    oracle: &dyn SmoothOracle<T>,
    reg: &dyn Regularizer<T>,
    x: ArrayView1<T>,
    ctr: &Counters,
) -> T {
    ctr.add_feval();
    let g = reg.eval(x);
    if !g.is_finite() {
        return T::infinity();
    }
    let f = oracle.value(x, ctr);
    if f.is_finite() {
        f + g
    } else {
        T::infinity()
    }
}
