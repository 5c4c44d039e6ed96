//! Self-concordant smooth parts and the local geometry every solver uses:
//! the gap functions `ω`, `ω*`, local norms and their duals.

mod barrier;
mod hetlasso;
mod logdet;
mod poisson;
mod scaled;

use std::cell::OnceCell;

use ndarray::{Array1, Array2, ArrayView1};

pub use barrier::BarrierQuadOracle;
pub use hetlasso::HetLassoOracle;
pub use logdet::{LogDetLocal, LogDetOracle};
pub use poisson::PoissonOracle;
pub use scaled::ScaledOracle;

use crate::counters::Counters;
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::scalar::{lit, Scalar};

/// Smooth convex part `f` of the composite objective.
///
/// Implementations are immutable after construction. All per-point work
/// (factorizations, cached products) lives in the [`LocalModel`] returned by
/// [`SmoothOracle::local`], which is owned by a single solve.
pub trait SmoothOracle<T: Scalar>: Send + Sync {
    /// Ambient dimension of the flattened variable.
    fn dim(&self) -> usize;

    /// `f(x)`, or `+inf` when `x ∉ dom f`.
    fn value(&self, x: ArrayView1<T>, ctr: &Counters) -> T;

    fn in_domain(&self, x: ArrayView1<T>, ctr: &Counters) -> bool {
        self.value(x, ctr).is_finite()
    }

    /// Evaluates value and gradient at `x` and returns a handle that serves
    /// Hessian products (and solves, when available) at that point.
    fn local<'a>(
        &'a self,
        x: ArrayView1<T>,
        ctr: &'a Counters,
    ) -> Result<Box<dyn LocalModel<T> + 'a>>;
}

/// First- and second-order information frozen at one point.
pub trait LocalModel<T: Scalar> {
    fn point(&self) -> ArrayView1<'_, T>;

    fn value(&self) -> T;

    fn grad(&self) -> ArrayView1<'_, T>;

    /// `∇²f(x)·v`.
    fn hess_vec(&self, v: ArrayView1<T>) -> Array1<T>;

    /// `∇²f(x)⁻¹·r`.
    fn hess_solve(&self, _r: ArrayView1<T>) -> Result<Array1<T>> {
        Err(Error::SolveUnavailable)
    }

    /// `vᵀ∇²f(x)v`; oracles with structure override this with a cheaper formula.
    fn norm_sq(&self, v: ArrayView1<T>) -> T {
        v.dot(&self.hess_vec(v))
    }
}

impl<T: Scalar, O: SmoothOracle<T> + ?Sized> SmoothOracle<T> for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: ArrayView1<T>, ctr: &Counters) -> T {
        (**self).value(x, ctr)
    }
    fn in_domain(&self, x: ArrayView1<T>, ctr: &Counters) -> bool {
        (**self).in_domain(x, ctr)
    }
    fn local<'a>(&'a self, x: ArrayView1<T>, ctr: &'a Counters) -> Result<Box<dyn LocalModel<T> + 'a>> {
        (**self).local(x, ctr)
    }
}

/// `ω(t) = t − ln(1 + t)` for `t ≥ 0`.
pub fn omega<T: Scalar>(t: T) -> Result<T> {
    if !(t >= T::zero()) {
        return Err(Error::Domain { what: "omega requires t >= 0", value: t.as_f64() });
    }
    if t < lit(1e-2) {
        return Ok(small_series(t, -T::one()));
    }
    Ok(t - t.ln_1p())
}

/// `ω*(t) = −t − ln(1 − t)` for `0 ≤ t < 1`.
pub fn omega_star<T: Scalar>(t: T) -> Result<T> {
    if !(t >= T::zero() && t < T::one()) {
        return Err(Error::Domain { what: "omega_star requires 0 <= t < 1", value: t.as_f64() });
    }
    if t < lit(1e-2) {
        return Ok(small_series(t, T::one()));
    }
    Ok(-t - (-t).ln_1p())
}

/// `Σ_{k≥2} (st)^k / k` with `s = ±1`, avoiding the cancellation in `t − ln(1 + t)`.
fn small_series<T: Scalar>(t: T, sign: T) -> T {
    let mut acc = T::zero();
    let mut pow = t;
    let mut s = sign;
    for k in 2..12 {
        pow *= t;
        s *= sign;
        acc += s * pow / T::from_usize(k).unwrap();
    }
    acc
}

/// `‖v‖ₓ` on an already evaluated local model.
pub fn local_norm_at<T: Scalar>(model: &dyn LocalModel<T>, v: ArrayView1<T>) -> Result<T> {
    let q = model.norm_sq(v);
    let vv = v.dot(&v);
    if q < -lit::<T>(1e-12) * vv || q.is_nan() {
        return Err(Error::OracleConsistency(format!(
            "negative quadratic form {q} for |v|^2 = {vv}"
        )));
    }
    Ok(q.max(T::zero()).sqrt())
}

/// `‖v‖ₓ* = (vᵀ∇²f(x)⁻¹v)^{1/2}` on an already evaluated local model.
pub fn dual_local_norm_at<T: Scalar>(model: &dyn LocalModel<T>, r: ArrayView1<T>) -> Result<T> {
    let q = r.dot(&model.hess_solve(r)?);
    if q < -lit::<T>(1e-12) * r.dot(&r) || q.is_nan() {
        return Err(Error::OracleConsistency(format!("negative dual quadratic form {q}")));
    }
    Ok(q.max(T::zero()).sqrt())
}

/// Local norm `‖v‖ₓ = (vᵀ∇²f(x)v)^{1/2}`.
pub fn local_norm<T: Scalar, O: SmoothOracle<T> + ?Sized>(
    oracle: &O,
    x: ArrayView1<T>,
    v: ArrayView1<T>,
) -> Result<T> {
    let ctr = Counters::new();
    let model = oracle.local(x, &ctr)?;
    local_norm_at(model.as_ref(), v)
}

/// Dual local norm `‖r‖ₓ*`.
pub fn dual_local_norm<T: Scalar, O: SmoothOracle<T> + ?Sized>(
    oracle: &O,
    x: ArrayView1<T>,
    r: ArrayView1<T>,
) -> Result<T> {
    let ctr = Counters::new();
    let model = oracle.local(x, &ctr)?;
    dual_local_norm_at(model.as_ref(), r)
}

/// Rescales an `M`-self-concordant function to a standard one: `(M²/4)·f`.
pub fn standardize<T: Scalar, O: SmoothOracle<T>>(oracle: O, m: T) -> Result<ScaledOracle<T, O>> {
    if !(m > T::zero()) || !m.is_finite() {
        return Err(Error::Domain { what: "self-concordance constant M must be > 0", value: m.as_f64() });
    }
    Ok(ScaledOracle::new(oracle, m * m / lit(4.0)))
}

/// Materializes `∇²f(x)` column by column from Hessian-vector products.
pub fn dense_hessian<T: Scalar>(model: &dyn LocalModel<T>, n: usize) -> Array2<T> {
    let mut h = Array2::zeros((n, n));
    let mut e = Array1::zeros(n);
    for j in 0..n {
        e[j] = T::one();
        h.column_mut(j).assign(&model.hess_vec(e.view()));
        e[j] = T::zero();
    }
    crate::linalg::symmetrize(&h)
}

/// Lazily built dense Cholesky factor of the Hessian, for oracles whose
/// Hessian has no cheap inverse.
#[derive(Debug, Default)]
pub(crate) struct LazyHessianFactor<T> {
    cell: OnceCell<std::result::Result<Cholesky<T>, Error>>,
}

impl<T: Scalar> LazyHessianFactor<T> {
    pub(crate) fn new() -> Self {
        Self { cell: OnceCell::new() }
    }

    pub(crate) fn solve(
        &self,
        model: &dyn LocalModel<T>,
        n: usize,
        ctr: &Counters,
        r: ArrayView1<T>,
    ) -> Result<Array1<T>> {
        let fac = self.cell.get_or_init(|| {
            ctr.add_chol();
            Cholesky::factor(dense_hessian(model, n).view())
        });
        match fac {
            Ok(c) => Ok(c.solve(r)),
            Err(e) => Err(e.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_values() {
        assert_eq!(omega(0.0f64).unwrap(), 0.0);
        assert!((omega(1.0f64).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-15);
        assert!((omega(1.0f64).unwrap() - 0.306853).abs() < 1e-6);
        let w = omega(0.2f64).unwrap();
        assert!(w > 0.017 && (w - 0.017678).abs() < 1e-6);
        assert!(omega(-1e-3f64).is_err());
    }

    #[test]
    fn omega_star_values() {
        assert_eq!(omega_star(0.0f64).unwrap(), 0.0);
        assert!((omega_star(0.5f64).unwrap() - 0.193147).abs() < 1e-6);
        assert!((omega_star(0.999f64).unwrap() - 5.908755).abs() < 1e-6);
        assert!(omega_star(1.0f64).is_err());
        assert!(omega_star(-0.1f64).is_err());
        assert!(omega_star(0.999_999f64).unwrap() > omega_star(0.999f64).unwrap());
    }

    #[test]
    fn omega_small_arguments_are_accurate() {
        // t²/2 − t³/3 leading terms
        let t = 1e-6f64;
        let w = omega(t).unwrap();
        assert!((w - (t * t / 2.0 - t * t * t / 3.0)).abs() < 1e-12 * w);
        let ws = omega_star(t).unwrap();
        assert!((ws - (t * t / 2.0 + t * t * t / 3.0)).abs() < 1e-12 * ws);
    }

    #[test]
    fn omega_is_increasing_and_convex_on_grid() {
        let vals: Vec<f64> = (0..200).map(|i| omega(i as f64 * 0.05).unwrap()).collect();
        for w in vals.windows(3) {
            assert!(w[1] > w[0]);
            assert!(w[2] - 2.0 * w[1] + w[0] > 0.0);
        }
    }
}
