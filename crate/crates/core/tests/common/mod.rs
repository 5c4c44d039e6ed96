#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use scomp::linalg::CsrMatrix;
use scomp::sc_core::{BarrierQuadOracle, HetLassoOracle, LogDetOracle, PoissonOracle, SmoothOracle};
use scomp::Counters;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss_vec(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_iter((0..n).map(|_| StandardNormal.sample(rng)))
}

pub fn gauss_mat(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((m, n), |_| StandardNormal.sample(rng))
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Array2<f64> {
    let b = gauss_mat(rng, n, n) * 0.5;
    b.dot(&b.t()) + Array2::<f64>::eye(n) * shift
}

pub type Sampler = Box<dyn Fn(&mut ChaCha8Rng) -> Array1<f64>>;

/// One smooth oracle with samplers for interior points and directions.
pub struct Fixture {
    pub name: &'static str,
    pub oracle: Box<dyn SmoothOracle<f64>>,
    pub point: Sampler,
    pub direction: Sampler,
}

pub fn logdet_fixture() -> Fixture {
    let mut r = rng(11);
    let p = 4;
    let sigma_hat = random_spd(&mut r, p, 0.2);
    Fixture {
        name: "logdet",
        oracle: Box::new(LogDetOracle::new(sigma_hat).unwrap()),
        point: Box::new(move |r| Array1::from_iter(random_spd(r, p, 0.3).iter().copied())),
        direction: Box::new(move |r| {
            let s = gauss_mat(r, p, p);
            Array1::from_iter(((&s + &s.t()) * 0.5).iter().copied())
        }),
    }
}

pub fn poisson_fixture() -> Fixture {
    let mut r = rng(12);
    let (m, n) = (10, 5);
    let mut trip = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if r.random::<f64>() < 0.7 || j == i % n {
                trip.push((i, j, r.random_range(0.1..1.0)));
            }
        }
    }
    let a = CsrMatrix::from_triplets(m, n, trip);
    let y = Array1::from_vec(vec![0.0, 1.0, 2.0, 3.0, 5.0, 8.0, 0.0, 4.0, 1.0, 6.0]);
    Fixture {
        name: "poisson",
        oracle: Box::new(PoissonOracle::new(a, y).unwrap()),
        point: Box::new(move |r| Array1::from_iter((0..n).map(|_| r.random_range(0.2..2.0)))),
        direction: Box::new(move |r| gauss_vec(r, n)),
    }
}

pub fn hetlasso_fixture() -> Fixture {
    let mut r = rng(13);
    let (n, p) = (8, 4);
    let x = gauss_mat(&mut r, n, p);
    let y = gauss_vec(&mut r, n);
    Fixture {
        name: "hetlasso",
        oracle: Box::new(HetLassoOracle::new(x, y).unwrap()),
        point: Box::new(move |r| {
            let mut v = gauss_vec(r, p + 1);
            v[p] = r.random_range(0.3..2.0);
            v
        }),
        direction: Box::new(move |r| gauss_vec(r, p + 1)),
    }
}

pub fn barrier_fixture() -> Fixture {
    let mut r = rng(14);
    let (m, n) = (6, 4);
    let a = gauss_mat(&mut r, m, n);
    let xc = gauss_vec(&mut r, n);
    let y = a.dot(&xc) + gauss_vec(&mut r, m) * 0.1;
    let res = a.dot(&xc) - &y;
    let sigma2 = res.dot(&res) + 4.0;
    let oracle = BarrierQuadOracle::new(a, y, sigma2, 1.0).unwrap();
    let probe = oracle.clone();
    Fixture {
        name: "barrier",
        oracle: Box::new(oracle),
        point: Box::new(move |r| loop {
            let x = &xc + &(gauss_vec(r, n) * 0.3);
            if probe.value(x.view(), &Counters::new()).is_finite() {
                return x;
            }
        }),
        direction: Box::new(move |r| gauss_vec(r, n)),
    }
}

pub fn all_fixtures() -> Vec<Fixture> {
    vec![logdet_fixture(), poisson_fixture(), hetlasso_fixture(), barrier_fixture()]
}

/// Counts of checks run and failures observed in one property sweep.
#[derive(Debug, Default, Clone, Copy)]
pub struct SweepStats {
    pub checks: usize,
    pub failures: usize,
    pub worst: f64,
}

impl SweepStats {
    pub fn record(&mut self, violation: f64) {
        self.checks += 1;
        if violation > 0.0 {
            self.failures += 1;
        }
        self.worst = self.worst.max(violation);
    }
}

/// Lower/upper self-concordant bounds on `pairs` random pairs inside the
/// Dikin ellipsoid (`r < 0.99`). Violations are measured against the slack
/// `1e-8·(1 + |f(x)|)`.
pub fn sc_bounds_sweep(fx: &Fixture, pairs: usize, seed: u64) -> SweepStats {
    use scomp::sc_core::{omega, omega_star};
    let mut r = rng(seed);
    let ctr = Counters::new();
    let mut st = SweepStats { worst: f64::NEG_INFINITY, ..Default::default() };
    for _ in 0..pairs {
        let x = (fx.point)(&mut r);
        let v = (fx.direction)(&mut r);
        let model = fx.oracle.local(x.view(), &ctr).unwrap();
        let vn = model.norm_sq(v.view()).sqrt();
        if vn == 0.0 {
            continue;
        }
        let rr = r.random_range(0.0..0.99);
        let step = &v * (rr / vn);
        let y = &x + &step;
        let fxv = model.value();
        let lin = fxv + model.grad().dot(&step);
        let fy = fx.oracle.value(y.view(), &ctr);
        let slack = 1e-8 * (1.0 + fxv.abs());
        st.record(lin + omega(rr).unwrap() - fy - slack);
        st.record(fy - lin - omega_star(rr).unwrap() - slack);
    }
    st
}

/// `(1 − r)²‖v‖ₓ² ≤ ‖v‖_y² ≤ (1 − r)⁻²‖v‖ₓ²` for `r = ‖y − x‖ₓ < 0.9`.
pub fn sandwich_sweep(fx: &Fixture, pairs: usize, seed: u64) -> SweepStats {
    let mut r = rng(seed);
    let ctr = Counters::new();
    let mut st = SweepStats { worst: f64::NEG_INFINITY, ..Default::default() };
    for _ in 0..pairs {
        let x = (fx.point)(&mut r);
        let u = (fx.direction)(&mut r);
        let v = (fx.direction)(&mut r);
        let mx = fx.oracle.local(x.view(), &ctr).unwrap();
        let un = mx.norm_sq(u.view()).sqrt();
        if un == 0.0 {
            continue;
        }
        let rr = r.random_range(0.0..0.9);
        let y = &x + &(&u * (rr / un));
        let my = fx.oracle.local(y.view(), &ctr).unwrap();
        let nx = mx.norm_sq(v.view());
        let ny = my.norm_sq(v.view());
        let slack = 1e-8 * (nx.abs() + 1e-300);
        st.record((1.0 - rr).powi(2) * nx - ny - slack);
        st.record(ny - nx / (1.0 - rr).powi(2) - slack);
    }
    st
}

/// Central-difference checks of the gradient and Hessian-vector product with
/// step `1e-5·(1 + ‖x‖)`; returns the largest relative errors seen.
pub fn finite_difference_sweep(fx: &Fixture, points: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let ctr = Counters::new();
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    for _ in 0..points {
        let x = (fx.point)(&mut r);
        let mut u = (fx.direction)(&mut r);
        u /= u.dot(&u).sqrt();
        let h = 1e-5 * (1.0 + x.dot(&x).sqrt());
        let m = fx.oracle.local(x.view(), &ctr).unwrap();
        let xp = &x + &(&u * h);
        let xm = &x - &(&u * h);
        let fd = (fx.oracle.value(xp.view(), &ctr) - fx.oracle.value(xm.view(), &ctr)) / (2.0 * h);
        let g = m.grad().to_owned();
        let gu = g.dot(&u);
        worst_g = worst_g.max((fd - gu).abs() / g.dot(&g).sqrt().max(1.0));
        let gp = fx.oracle.local(xp.view(), &ctr).unwrap().grad().to_owned();
        let gm = fx.oracle.local(xm.view(), &ctr).unwrap().grad().to_owned();
        let fdh = (&gp - &gm) / (2.0 * h);
        let hu = m.hess_vec(u.view());
        let err = (&fdh - &hu).dot(&(&fdh - &hu)).sqrt();
        worst_h = worst_h.max(err / hu.dot(&hu).sqrt().max(1.0));
    }
    (worst_g, worst_h)
}

/// `f(x) = ½xᵀQx − bᵀx` with `Q` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadOracle {
    pub q: Array2<f64>,
    pub b: Array1<f64>,
}

pub struct QuadModel<'a> {
    o: &'a QuadOracle,
    x: Array1<f64>,
    g: Array1<f64>,
    v: f64,
}

impl QuadOracle {
    pub fn isotropic(c: f64, b: Array1<f64>) -> Self {
        Self { q: Array2::eye(b.len()) * c, b }
    }

    pub fn minimizer(&self) -> Array1<f64> {
        let n = self.b.len();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| self.q[[i, j]]);
        let s = m.cholesky().unwrap().solve(&nalgebra::DVector::from_iterator(n, self.b.iter().copied()));
        Array1::from_iter(s.iter().copied())
    }
}

impl SmoothOracle<f64> for QuadOracle {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: ndarray::ArrayView1<f64>, ctr: &Counters) -> f64 {
        ctr.add_feval();
        0.5 * x.dot(&self.q.dot(&x)) - self.b.dot(&x)
    }

    fn local<'a>(
        &'a self,
        x: ndarray::ArrayView1<f64>,
        _ctr: &'a Counters,
    ) -> scomp::Result<Box<dyn scomp::sc_core::LocalModel<f64> + 'a>> {
        let qx = self.q.dot(&x);
        let v = 0.5 * x.dot(&qx) - self.b.dot(&x);
        Ok(Box::new(QuadModel { o: self, x: x.to_owned(), g: qx - &self.b, v }))
    }
}

impl scomp::sc_core::LocalModel<f64> for QuadModel<'_> {
    fn point(&self) -> ndarray::ArrayView1<'_, f64> {
        self.x.view()
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn grad(&self) -> ndarray::ArrayView1<'_, f64> {
        self.g.view()
    }
    fn hess_vec(&self, v: ndarray::ArrayView1<f64>) -> Array1<f64> {
        self.o.q.dot(&v)
    }
    fn hess_solve(&self, r: ndarray::ArrayView1<f64>) -> scomp::Result<Array1<f64>> {
        let n = r.len();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| self.o.q[[i, j]]);
        let s = m.cholesky().unwrap().solve(&nalgebra::DVector::from_iterator(n, r.iter().copied()));
        Ok(Array1::from_iter(s.iter().copied()))
    }
}

/// Exact minimizer of `gᵀ(s − x) + ½(s − x)ᵀH(s − x) + ρ Σ wᵢ|sᵢ|` by
/// enumerating all `3ⁿ` sign patterns of `s`. `H` must be positive definite.
pub fn brute_force_weighted_l1(
    h: &Array2<f64>,
    g: &Array1<f64>,
    x: &Array1<f64>,
    rho: f64,
    w: &Array1<f64>,
) -> Array1<f64> {
    let n = g.len();
    let objective = |s: &Array1<f64>| {
        let d = s - x;
        g.dot(&d) + 0.5 * d.dot(&h.dot(&d)) + rho * s.iter().zip(w).map(|(a, b)| a.abs() * b).sum::<f64>()
    };
    let mut best: Option<(f64, Array1<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        let signs: Vec<i32> = (0..n)
            .map(|_| {
                let s = (c % 3) as i32 - 1;
                c /= 3;
                s
            })
            .collect();
        let free: Vec<usize> = (0..n).filter(|&i| signs[i] != 0).collect();
        let mut s = Array1::<f64>::zeros(n);
        if !free.is_empty() {
            // H_FF s_F = H_F· x − g_F − ρ w_F σ_F with s_Z = 0
            let hx = h.dot(x);
            let m = free.len();
            let a = nalgebra::DMatrix::from_fn(m, m, |i, j| h[[free[i], free[j]]]);
            let rhs = nalgebra::DVector::from_fn(m, |i, _| {
                let k = free[i];
                hx[k] - g[k] - rho * w[k] * signs[k] as f64
            });
            let sol = a.cholesky().unwrap().solve(&rhs);
            for (i, &k) in free.iter().enumerate() {
                s[k] = sol[i];
            }
            if free.iter().any(|&k| s[k] * signs[k] as f64 <= 0.0) {
                continue;
            }
        }
        let v = objective(&s);
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, s));
        }
    }
    best.unwrap().1
}

/// Checks `F(x̄ᵏ) − F* ≤ L̄‖x⁰ − x*‖²/(2S_k)` at every record carrying an
/// ergodic value; returns `(k, gap, bound)` for each violation.
pub fn ergodic_bound_violations(
    trace: &scomp::trace::SolverTrace,
    x0: &Array1<f64>,
    x_star: &Array1<f64>,
    f_star: f64,
) -> (usize, Vec<(usize, f64, f64)>) {
    let r0 = (x0 - x_star).mapv(|v| v * v).sum();
    let (mut s, mut l_bar) = (0.0f64, 0.0f64);
    let mut checked = 0;
    let mut bad = Vec::new();
    for rec in &trace.records {
        if let Some(fe) = rec.ergodic_f {
            checked += 1;
            let bound = l_bar * r0 / (2.0 * s);
            let gap = fe - f_star;
            if gap > bound + 1e-10 * (1.0 + f_star.abs()) {
                bad.push((rec.k, gap, bound));
            }
        }
        s += rec.alpha;
        l_bar = l_bar.max(rec.l.unwrap_or(0.0));
    }
    (checked, bad)
}
