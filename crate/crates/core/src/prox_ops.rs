//! Nonsmooth regularizers `g` and their proximal maps under diagonal metrics.
//!
//! All `prox_diag` entry points use the convention
//! `P(u) = argmin_x g(x) + ½ xᵀ diag(d) x − uᵀx`, which is the usual prox of
//! `g` with per-coordinate steps `1/dᵢ` evaluated at `u / d`.

use ndarray::{Array1, ArrayView1, Zip};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{lit, Scalar};

/// Per-solve scratch for iterative proximal maps (warm-started dual variable
/// and diagnostics of the last call).
#[derive(Debug, Clone)]
pub struct ProxWorkspace<T> {
    dual: Option<Array1<T>>,
    pub last_inner_iters: usize,
    pub last_residual: T,
}

impl<T: Scalar> Default for ProxWorkspace<T> {
    fn default() -> Self {
        Self { dual: None, last_inner_iters: 0, last_residual: T::zero() }
    }
}

impl<T: Scalar> ProxWorkspace<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        self.dual = None;
    }
}

/// Convex, proper, lower semicontinuous `g` with a diagonal-metric prox.
pub trait Regularizer<T: Scalar>: Send + Sync {
    /// `g(x)`, or `+inf` when an indicator is violated.
    fn eval(&self, x: ArrayView1<T>) -> T;

    /// `argmin_x g(x) + ½ xᵀ diag(d) x − uᵀx` for `d > 0`.
    fn prox_diag(&self, u: ArrayView1<T>, d: ArrayView1<T>, ws: &mut ProxWorkspace<T>) -> Result<Array1<T>>;

    fn is_separable(&self) -> bool;

    /// Prox with a scalar metric `d = c·1`: `argmin g(x) + (c/2)‖x − v‖²`.
    fn prox_scalar(&self, v: ArrayView1<T>, c: T, ws: &mut ProxWorkspace<T>) -> Result<Array1<T>> {
        let d = Array1::from_elem(v.len(), c);
        let u = &v * c;
        self.prox_diag(u.view(), d.view(), ws)
    }
}

impl<T: Scalar, R: Regularizer<T> + ?Sized> Regularizer<T> for &R {
    fn eval(&self, x: ArrayView1<T>) -> T {
        (**self).eval(x)
    }
    fn prox_diag(&self, u: ArrayView1<T>, d: ArrayView1<T>, ws: &mut ProxWorkspace<T>) -> Result<Array1<T>> {
        (**self).prox_diag(u, d, ws)
    }
    fn is_separable(&self) -> bool {
        (**self).is_separable()
    }
    fn prox_scalar(&self, v: ArrayView1<T>, c: T, ws: &mut ProxWorkspace<T>) -> Result<Array1<T>> {
        (**self).prox_scalar(v, c, ws)
    }
}

fn check_metric<T: Scalar>(u: ArrayView1<T>, d: ArrayView1<T>) -> Result<()> {
    check_dim(u.len(), d.len())?;
    if let Some(bad) = d.iter().find(|v| !(**v > T::zero()) || !v.is_finite()) {
        return Err(Error::Domain { what: "diagonal metric must be positive", value: bad.as_f64() });
    }
    Ok(())
}

#[inline]
fn soft<T: Scalar>(v: T, t: T) -> T {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        T::zero()
    }
}

/// `g ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoReg;

impl<T: Scalar> Regularizer<T> for NoReg {
    fn eval(&self, _x: ArrayView1<T>) -> T {
        T::zero()
    }

    fn prox_diag(&self, u: ArrayView1<T>, d: ArrayView1<T>, _ws: &mut ProxWorkspace<T>) -> Result<Array1<T>> {
        check_metric(u, d)?;
        Ok(&u / &d)
    }

    fn is_separable(&self) -> bool {
        true
    }
}

/// `g(x) = ρ Σ_{i unmasked} |xᵢ|`. Masked coordinates are left unpenalized.
#[derive(Debug, Clone)]
pub struct L1Reg<T> {
    pub rho: T,
    mask: Option<Vec<bool>>,
}

impl<T: Scalar> L1Reg<T> {
    pub fn new(rho: T) -> Result<Self> {
        if !(rho >= T::zero()) || !rho.is_finite() {
            return Err(Error::Domain { what: "l1 weight must be >= 0", value: rho.as_f64() });
        }
        Ok(Self { rho, mask: None })
    }

    /// `mask[i] == true` excludes coordinate `i` from the penalty.
    pub fn with_mask(rho: T, mask: Vec<bool>) -> Result<Self> {
        let mut r = Self::new(rho)?;
        r.mask = Some(mask);
        Ok(r)
    }

    pub fn is_masked(&self, i: usize) -> bool {
        self.mask.as_ref().is_some_and(|m| m.get(i).copied().unwrap_or(false))
    }

    /// Componentwise distance from `-grad` to `∂g(x)` in the max norm:
    /// zero exactly at a stationary point of `f + g`.
    pub fn kkt_residual(&self, x: ArrayView1<T>, grad: ArrayView1<T>) -> T {
        let mut worst = T::zero();
        for (i, (&xi, &gi)) in x.iter().zip(grad.iter()).enumerate() {
            let r = if self.is_masked(i) {
                gi.abs()
            } else if xi > T::zero() {
                (gi + self.rho).abs()
            } else if xi < T::zero() {
                (gi - self.rho).abs()
            } else {
                (gi.abs() - self.rho).max(T::zero())
            };
            worst = worst.max(r);
        }
        worst
    }
}

impl<T: Scalar> Regularizer<T> for L1Reg<T> {
    fn eval(&self, x: ArrayView1<T>) -> T {
        let s = x
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.is_masked(*i))
            .fold(T::zero(), |acc, (_, v)| acc + v.abs());
        self.rho * s
    }

    fn prox_diag(&self, u: ArrayView1<T>, d: ArrayView1<T>, _ws: &mut ProxWorkspace<T>) -> Result<Array1<T>> {
        check_metric(u, d)?;
        if let Some(m) = &self.mask {
            check_dim(u.len(), m.len())?;
        }
        Ok(Array1::from_shape_fn(u.len(), |i| {
            let v = u[i] / d[i];
            if self.is_masked(i) {
                v
            } else {
                soft(v, self.rho / d[i])
            }
        }))
    }

    fn is_separable(&self) -> bool {
        true
    }
}

/// Componentwise prox in step form: `sign(uᵢ)·max(|uᵢ| − ρτᵢ, 0)`, masked
/// coordinates pass through.
pub fn prox_l1<T: Scalar>(u: ArrayView1<T>, tau: ArrayView1<T>, rho: T, mask: Option<&[bool]>) -> Result<Array1<T>> {
    check_metric(u, tau)?;
    if let Some(m) = mask {
        check_dim(u.len(), m.len())?;
    }
    Ok(Array1::from_shape_fn(u.len(), |i| {
        if mask.is_some_and(|m| m[i]) {
            u[i]
        } else {
            soft(u[i], rho * tau[i])
        }
    }))
}

/// Controls of the iterative TV proximal map.
#[derive(Debug, Clone, Copy)]
pub struct TvControl<T> {
    /// Relative duality-gap tolerance.
    pub inner_tol: T,
    pub inner_max_iter: usize,
}

impl<T: Scalar> Default for TvControl<T> {
    fn default() -> Self {
        Self { inner_tol: lit(1e-6), inner_max_iter: 200 }
    }
}

/// `g(x) = ρ‖Dx‖₁ + δ_{x ≥ 0}(x)` on a `height × width` row-major image,
/// `D` the anisotropic forward-difference operator with replicate boundary.
#[derive(Debug, Clone)]
pub struct TVNonnegReg<T> {
    pub rho: T,
    pub height: usize,
    pub width: usize,
    pub ctrl: TvControl<T>,
}

impl<T: Scalar> TVNonnegReg<T> {
    pub fn new(rho: T, height: usize, width: usize) -> Result<Self> {
        if !(rho >= T::zero()) || !rho.is_finite() {
            return Err(Error::Domain { what: "tv weight must be >= 0", value: rho.as_f64() });
        }
        if height == 0 || width == 0 {
            return Err(Error::Config("empty image".into()));
        }
        Ok(Self { rho, height, width, ctrl: TvControl::default() })
    }

    pub fn with_control(mut self, ctrl: TvControl<T>) -> Self {
        self.ctrl = ctrl;
        self
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `‖Dx‖₁`.
    pub fn tv(&self, x: ArrayView1<T>) -> T {
        let grid = Grid { h: self.height, w: self.width };
        let k = grid.forward(x);
        k.iter().fold(T::zero(), |a, v| a + v.abs())
    }
}

impl<T: Scalar> Regularizer<T> for TVNonnegReg<T> {
    fn eval(&self, x: ArrayView1<T>) -> T {
        if x.len() != self.len() || x.iter().any(|v| *v < T::zero() || v.is_nan()) {
            return T::infinity();
        }
        self.rho * self.tv(x)
    }

    fn prox_diag(&self, u: ArrayView1<T>, d: ArrayView1<T>, ws: &mut ProxWorkspace<T>) -> Result<Array1<T>> {
        check_metric(u, d)?;
        check_dim(self.len(), u.len())?;
        tv_nonneg_prox(Grid { h: self.height, w: self.width }, u, d, self.rho, self.ctrl, ws)
    }

    fn is_separable(&self) -> bool {
        false
    }
}

/// `argmin_{x ≥ 0} ½‖x − w‖² + ρₖ‖Dx‖₁` on a `height × width` image.
pub fn prox_tv_nonneg<T: Scalar>(
    w: ArrayView1<T>,
    height: usize,
    width: usize,
    rho_k: T,
    ctrl: TvControl<T>,
    ws: &mut ProxWorkspace<T>,
) -> Result<Array1<T>> {
    check_dim(height * width, w.len())?;
    if !(rho_k >= T::zero()) {
        return Err(Error::Domain { what: "tv weight must be >= 0", value: rho_k.as_f64() });
    }
    let d = Array1::from_elem(w.len(), T::one());
    tv_nonneg_prox(Grid { h: height, w: width }, w, d.view(), rho_k, ctrl, ws)
}

/// `g(x)` through the trait; kept as a free function for symmetry with the
/// other prox entry points.
pub fn eval_g<T: Scalar, R: Regularizer<T> + ?Sized>(reg: &R, x: ArrayView1<T>) -> T {
    reg.eval(x)
}

/// Forward differences on a row-major grid. The dual variable stores the
/// horizontal block first, then the vertical block, each `h·w` long with the
/// replicate-boundary entries fixed at zero.
#[derive(Debug, Clone, Copy)]
struct Grid {
    h: usize,
    w: usize,
}

impl Grid {
    fn n(&self) -> usize {
        self.h * self.w
    }

    fn forward<T: Scalar>(&self, x: ArrayView1<T>) -> Array1<T> {
        let n = self.n();
        let mut k = Array1::zeros(2 * n);
        for i in 0..self.h {
            for j in 0..self.w {
                let p = i * self.w + j;
                if j + 1 < self.w {
                    k[p] = x[p + 1] - x[p];
                }
                if i + 1 < self.h {
                    k[n + p] = x[p + self.w] - x[p];
                }
            }
        }
        k
    }

    /// `Dᵀz`.
    fn adjoint<T: Scalar>(&self, z: ArrayView1<T>) -> Array1<T> {
        let n = self.n();
        let mut out = Array1::zeros(n);
        for i in 0..self.h {
            for j in 0..self.w {
                let p = i * self.w + j;
                if j + 1 < self.w {
                    out[p + 1] += z[p];
                    out[p] -= z[p];
                }
                if i + 1 < self.h {
                    out[p + self.w] += z[n + p];
                    out[p] -= z[n + p];
                }
            }
        }
        out
    }
}

/// Dual fast gradient projection with function-value restart for
/// `min_{x≥0} ρ‖Dx‖₁ + ½xᵀdiag(d)x − uᵀx`.
///
/// With `v(z) = u − ρDᵀz` the inner minimizer is `x(z) = max(0, v/d)` and the
/// dual value is `h(z) = −½Σ dᵢxᵢ(z)²`; the gap at `x(z)` is
/// `ρ(‖Dx‖₁ − zᵀDx)`.
fn tv_nonneg_prox<T: Scalar>(
    grid: Grid,
    u: ArrayView1<T>,
    d: ArrayView1<T>,
    rho: T,
    ctrl: TvControl<T>,
    ws: &mut ProxWorkspace<T>,
) -> Result<Array1<T>> {
    let n = grid.n();
    let primal_of = |z: &Array1<T>| -> Array1<T> {
        let dz = grid.adjoint(z.view());
        Zip::from(&u).and(&dz).and(&d).map_collect(|&ui, &gi, &di| ((ui - rho * gi) / di).max(T::zero()))
    };
    if rho == T::zero() || grid.n() == 1 {
        ws.last_inner_iters = 0;
        ws.last_residual = T::zero();
        return Ok(Zip::from(&u).and(&d).map_collect(|&ui, &di| (ui / di).max(T::zero())));
    }
    let dmin = d.iter().copied().fold(T::infinity(), T::min);
    let step = dmin / (lit::<T>(8.0) * rho * rho);
    let dual_value = |x: &Array1<T>| -> T { -Zip::from(x).and(&d).fold(T::zero(), |a, &xi, &di| a + di * xi * xi) / lit(2.0) };
    let gap_of = |x: &Array1<T>, z: &Array1<T>| -> (T, T) {
        let k = grid.forward(x.view());
        let l1 = k.iter().fold(T::zero(), |a, v| a + v.abs());
        let gap = rho * (l1 - z.dot(&k));
        let quad = Zip::from(x).and(&d).fold(T::zero(), |a, &xi, &di| a + di * xi * xi) / lit(2.0);
        let primal = rho * l1 + quad - u.dot(x);
        (gap.max(T::zero()), primal)
    };
    let clip = |v: T| v.max(-T::one()).min(T::one());
    let mut z = match ws.dual.take() {
        Some(z) if z.len() == 2 * n => z,
        _ => Array1::zeros(2 * n),
    };
    let mut x = primal_of(&z);
    let (gap, primal) = gap_of(&x, &z);
    let mut residual = gap / primal.abs().max(T::one());
    let mut hval = dual_value(&x);
    let mut y = z.clone();
    let mut t = T::one();
    let mut iters = 0;
    while residual > ctrl.inner_tol && iters < ctrl.inner_max_iter {
        iters += 1;
        let xy = primal_of(&y);
        let gy = grid.forward(xy.view());
        let mut z_new = Array1::zeros(2 * n);
        for i in 0..grid.h {
            for j in 0..grid.w {
                let p = i * grid.w + j;
                if j + 1 < grid.w {
                    z_new[p] = clip(y[p] + step * rho * gy[p]);
                }
                if i + 1 < grid.h {
                    z_new[n + p] = clip(y[n + p] + step * rho * gy[n + p]);
                }
            }
        }
        let x_new = primal_of(&z_new);
        let h_new = dual_value(&x_new);
        if h_new < hval {
            // ascent lost: restart momentum from the last iterate
            t = T::one();
            y = z.clone();
            continue;
        }
        let t_new = (T::one() + (T::one() + lit::<T>(4.0) * t * t).sqrt()) / lit(2.0);
        y = &z_new + &((&z_new - &z) * ((t - T::one()) / t_new));
        t = t_new;
        z = z_new;
        x = x_new;
        hval = h_new;
        let (gap, primal) = gap_of(&x, &z);
        residual = gap / primal.abs().max(T::one());
    }
    if residual > T::zero() {
        // any primal point with lower objective has a smaller gap against the same z
        let (_, primal) = gap_of(&x, &z);
        if let Some((xp, pp)) = polish(grid, u, d, rho, &x, primal) {
            let (gap_p, _) = gap_of(&xp, &z);
            if pp < primal {
                x = xp;
                residual = residual.min(gap_p / pp.abs().max(T::one()));
            }
        }
    }
    ws.last_inner_iters = iters;
    ws.last_residual = residual;
    ws.dual = Some(z);
    if residual > lit::<T>(10.0) * ctrl.inner_tol {
        return Err(Error::SubsolverFailure { iters, residual: residual.as_f64() });
    }
    Ok(x)
}

/// Active-set finishing step. Pixels are grouped by fused edges of the
/// approximate solution; with the zero set and the signs of the remaining
/// differences frozen, each group's common value has a closed form. Several
/// fusion thresholds are tried and the candidate with the lowest primal
/// objective below `best` is returned.
fn polish<T: Scalar>(
    grid: Grid,
    u: ArrayView1<T>,
    d: ArrayView1<T>,
    rho: T,
    x: &Array1<T>,
    best: T,
) -> Option<(Array1<T>, T)> {
    let n = grid.n();
    let scale = x.iter().fold(T::one(), |a, v| a.max(v.abs()));
    let mut edges = Vec::with_capacity(2 * n);
    for i in 0..grid.h {
        for j in 0..grid.w {
            let p = i * grid.w + j;
            if j + 1 < grid.w {
                edges.push((p, p + 1));
            }
            if i + 1 < grid.h {
                edges.push((p, p + grid.w));
            }
        }
    }
    let objective = |y: &Array1<T>| -> T {
        let l1 = edges.iter().fold(T::zero(), |a, &(p, q)| a + (y[q] - y[p]).abs());
        let quad = Zip::from(y).and(&d).fold(T::zero(), |a, &yi, &di| a + di * yi * yi) / lit(2.0);
        rho * l1 + quad - u.dot(y)
    };
    let mut winner: Option<(Array1<T>, T)> = None;
    let mut bound = best;
    for e in 3..=11 {
        let thr = scale * lit::<T>(10f64.powi(-e));
        let zero: Vec<bool> = x.iter().map(|&v| v <= thr).collect();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        for &(p, q) in &edges {
            if !zero[p] && !zero[q] && (x[q] - x[p]).abs() <= thr {
                let (a, b) = (find(&mut parent, p), find(&mut parent, q));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let mut num = vec![T::zero(); n];
        let mut den = vec![T::zero(); n];
        for p in 0..n {
            if !zero[p] {
                let r = find(&mut parent, p);
                num[r] += u[p];
                den[r] += d[p];
            }
        }
        for &(p, q) in &edges {
            if zero[p] && zero[q] {
                continue;
            }
            let (rp, rq) = (find(&mut parent, p), find(&mut parent, q));
            if !zero[p] && !zero[q] && rp == rq {
                continue;
            }
            let s = (x[q] - x[p]).signum();
            // (Dᵀz)_p gets −s, (Dᵀz)_q gets +s
            if !zero[p] {
                num[rp] += rho * s;
            }
            if !zero[q] {
                num[rq] -= rho * s;
            }
        }
        let mut cand = Array1::zeros(n);
        let mut valid = true;
        for p in 0..n {
            if !zero[p] {
                let r = find(&mut parent, p);
                let c = num[r] / den[r];
                if !(c > T::zero()) {
                    valid = false;
                    break;
                }
                cand[p] = c;
            }
        }
        if !valid {
            continue;
        }
        let obj = objective(&cand);
        if obj < bound {
            bound = obj;
            winner = Some((cand, obj));
        }
    }
    winner
}
