use ndarray::{Array1, ArrayView1};

use super::{LazyHessianFactor, LocalModel, SmoothOracle};
use crate::counters::Counters;
use crate::error::{check_dim, Error, Result};
use crate::linalg::CsrMatrix;
use crate::scalar::{lit, Scalar};

/// Standardized Poisson negative log-likelihood
/// `f(x) = (M²/4) Σᵢ (aᵢᵀx − yᵢ log aᵢᵀx)` with `M = 2·max{1/√yᵢ : yᵢ > 0}`.
///
/// Rows with `yᵢ = 0` contribute only their linear term and impose no
/// positivity constraint.
#[derive(Debug, Clone)]
pub struct PoissonOracle<T> {
    a: CsrMatrix<T>,
    y: Array1<T>,
    m: T,
    scale: T,
}

/// `M = 2·max{1/√yᵢ : yᵢ > 0}`; `None` when every count is zero.
pub fn poisson_sc_constant<T: Scalar>(y: ArrayView1<T>) -> Option<T> {
    let min_pos = y.iter().copied().filter(|&v| v > T::zero()).reduce(|a, b| a.min(b))?;
    Some(lit::<T>(2.0) / min_pos.sqrt())
}

impl<T: Scalar> PoissonOracle<T> {
    pub fn new(a: CsrMatrix<T>, y: Array1<T>) -> Result<Self> {
        check_dim(a.nrows(), y.len())?;
        if let Some(neg) = y.iter().find(|v| !(**v >= T::zero()) || !v.is_finite()) {
            return Err(Error::Domain { what: "counts must be nonnegative", value: neg.as_f64() });
        }
        if let Some(mv) = a.min_value() {
            if mv < T::zero() {
                return Err(Error::Domain { what: "design matrix must be nonnegative", value: mv.as_f64() });
            }
        }
        let m = poisson_sc_constant(y.view())
            .ok_or_else(|| Error::Config("all counts are zero; self-concordance constant undefined".into()))?;
        for i in 0..a.nrows() {
            if y[i] > T::zero() && a.row(i).all(|(_, v)| v == T::zero()) {
                return Err(Error::Config(format!("row {i} has positive count but no support")));
            }
        }
        Ok(Self { a, y, m, scale: m * m / lit(4.0) })
    }

    /// Self-concordance constant of the unscaled likelihood.
    pub fn m_constant(&self) -> T {
        self.m
    }

    /// `M²/4`.
    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn design(&self) -> &CsrMatrix<T> {
        &self.a
    }

    pub fn counts(&self) -> &Array1<T> {
        &self.y
    }

    fn value_from_ax(&self, ax: &Array1<T>) -> T {
        let mut s = T::zero();
        for (i, (&axi, &yi)) in ax.iter().zip(self.y.iter()).enumerate() {
            if !axi.is_finite() {
                return T::infinity();
            }
            if yi > T::zero() {
                if !(axi > T::zero()) {
                    return T::infinity();
                }
                s += axi - yi * axi.ln();
            } else {
                let _ = i;
                s += axi;
            }
        }
        self.scale * s
    }
}

impl<T: Scalar> SmoothOracle<T> for PoissonOracle<T> {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: ArrayView1<T>, _ctr: &Counters) -> T {
        if x.len() != self.dim() {
            return T::infinity();
        }
        let ax = self.a.mul_vec(x);
        self.value_from_ax(&ax)
    }

    fn local<'a>(&'a self, x: ArrayView1<T>, ctr: &'a Counters) -> Result<Box<dyn LocalModel<T> + 'a>> {
        check_dim(self.dim(), x.len())?;
        let ax = self.a.mul_vec(x);
        let value = self.value_from_ax(&ax);
        if !value.is_finite() {
            return Err(Error::OutOfDomain);
        }
        let resid = Array1::from_shape_fn(ax.len(), |i| {
            if self.y[i] > T::zero() {
                T::one() - self.y[i] / ax[i]
            } else {
                T::one()
            }
        });
        let grad = self.a.tmul_vec(resid.view()) * self.scale;
        // weights yᵢ/(aᵢᵀx)² of the Hessian
        let w = Array1::from_shape_fn(ax.len(), |i| {
            if self.y[i] > T::zero() {
                self.y[i] / (ax[i] * ax[i])
            } else {
                T::zero()
            }
        });
        Ok(Box::new(PoissonLocal {
            oracle: self,
            x: x.to_owned(),
            value,
            grad,
            w,
            factor: LazyHessianFactor::new(),
            ctr,
        }))
    }
}

struct PoissonLocal<'a, T> {
    oracle: &'a PoissonOracle<T>,
    x: Array1<T>,
    value: T,
    grad: Array1<T>,
    w: Array1<T>,
    factor: LazyHessianFactor<T>,
    ctr: &'a Counters,
}

impl<T: Scalar> LocalModel<T> for PoissonLocal<'_, T> {
    fn point(&self) -> ArrayView1<'_, T> {
        self.x.view()
    }

    fn value(&self) -> T {
        self.value
    }

    fn grad(&self) -> ArrayView1<'_, T> {
        self.grad.view()
    }

    fn hess_vec(&self, v: ArrayView1<T>) -> Array1<T> {
        self.ctr.add_hess_vec();
        let av = self.oracle.a.mul_vec(v);
        let wav = &av * &self.w;
        self.oracle.a.tmul_vec(wav.view()) * self.oracle.scale
    }

    fn hess_solve(&self, r: ArrayView1<T>) -> Result<Array1<T>> {
        self.factor.solve(self, self.x.len(), self.ctr, r)
    }

    /// `(M²/4) Σ yᵢ (aᵢᵀd)² / (aᵢᵀx)²`: one product with `A`.
    fn norm_sq(&self, v: ArrayView1<T>) -> T {
        let av = self.oracle.a.mul_vec(v);
        let s = av.iter().zip(self.w.iter()).fold(T::zero(), |acc, (&a, &w)| acc + w * a * a);
        self.oracle.scale * s
    }
}
