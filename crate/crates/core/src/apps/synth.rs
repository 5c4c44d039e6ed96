//! Seeded synthetic instances for the three applications.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::{GraphProblem, HetLassoProblem, PoissonProblem};
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, Cholesky, CsrMatrix};
use crate::scalar::Scalar;

/// Sparse Gaussian graphical model with exact and sampled covariance.
#[derive(Debug, Clone)]
pub struct SynthGmrf<T> {
    pub theta_true: Array2<T>,
    pub sigma: Array2<T>,
    pub sigma_hat: Array2<T>,
}

impl<T: Scalar> SynthGmrf<T> {
    pub fn problem(&self, rho: T) -> Result<GraphProblem<T>> {
        GraphProblem::new(self.sigma_hat.clone(), rho)
    }
}

/// Off-diagonal entries are nonzero with probability `density`, drawn from
/// `±U[0.5, 1]`; the diagonal is set to the off-diagonal row sum plus a margin
/// that keeps the Gershgorin condition bound at most 1e3. `n_samples = 0`
/// returns the exact covariance as `Σ̂`.
pub fn synth_gmrf<T: Scalar>(p: usize, density: f64, n_samples: usize, seed: u64) -> Result<SynthGmrf<T>> {
    if p < 2 {
        return Err(Error::Config(format!("need p >= 2, got {p}")));
    }
    if !(0.0..1.0).contains(&density) {
        return Err(Error::Config(format!("density must lie in [0, 1), got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.random::<f64>() < density {
                let mag = rng.random_range(0.5..1.0);
                let v = if rng.random::<bool>() { mag } else { -mag };
                theta[[i, j]] = v;
                theta[[j, i]] = v;
            }
        }
    }
    let radius = (0..p).map(|i| theta.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let margin = (2.0 * radius / 999.0).max(0.5);
    for i in 0..p {
        theta[[i, i]] = radius + margin;
    }
    let sigma = Cholesky::factor(theta.view())?.inverse();
    let sigma_hat = if n_samples == 0 {
        sigma.clone()
    } else {
        let l = Cholesky::factor(sigma.view())?.factor_lower().clone();
        let mut acc = Array2::<f64>::zeros((p, p));
        for _ in 0..n_samples {
            let z = Array1::from_iter((0..p).map(|_| StandardNormal.sample(&mut rng)));
            let x: Array1<f64> = l.dot(&z);
            for a in 0..p {
                for b in 0..p {
                    acc[[a, b]] += x[a] * x[b];
                }
            }
        }
        symmetrize(&(acc / n_samples as f64))
    };
    Ok(SynthGmrf { theta_true: theta.mapv(T::lit), sigma: sigma.mapv(T::lit), sigma_hat: sigma_hat.mapv(T::lit) })
}

/// Blur applied before sampling counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Blur {
    Identity,
    /// Uniform `(2r+1)²` window.
    Box(usize),
    /// Truncated Gaussian with the given width and radius.
    Gaussian { sigma: f64, radius: usize },
}

impl Blur {
    fn weight(&self, di: isize, dj: isize) -> f64 {
        match *self {
            Blur::Identity => f64::from(u8::from(di == 0 && dj == 0)),
            Blur::Box(_) => 1.0,
            Blur::Gaussian { sigma, .. } => (-((di * di + dj * dj) as f64) / (2.0 * sigma * sigma)).exp(),
        }
    }

    fn radius(&self) -> usize {
        match *self {
            Blur::Identity => 0,
            Blur::Box(r) => r,
            Blur::Gaussian { radius, .. } => radius,
        }
    }
}

/// Row-normalized blur operator on a `height × width` grid; windows are
/// truncated at the border and rescaled to sum to one.
pub fn blur_matrix<T: Scalar>(height: usize, width: usize, blur: Blur) -> CsrMatrix<T> {
    let r = blur.radius() as isize;
    let mut trip = Vec::new();
    for i in 0..height as isize {
        for j in 0..width as isize {
            let row = (i as usize) * width + j as usize;
            let mut entries = Vec::new();
            for di in -r..=r {
                for dj in -r..=r {
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= height as isize || b >= width as isize {
                        continue;
                    }
                    let w = blur.weight(di, dj);
                    if w > 0.0 {
                        entries.push(((a as usize) * width + b as usize, w));
                    }
                }
            }
            let total: f64 = entries.iter().map(|e| e.1).sum();
            trip.extend(entries.into_iter().map(|(c, w)| (row, c, T::lit(w / total))));
        }
    }
    CsrMatrix::from_triplets(height * width, height * width, trip)
}

/// Piecewise-constant test image with values in `[0.1, 1]`.
pub fn phantom(height: usize, width: usize) -> Array1<f64> {
    let mut img = Array1::from_elem(height * width, 0.1);
    let (h, w) = (height as f64, width as f64);
    for i in 0..height {
        for j in 0..width {
            let (y, x) = ((i as f64 + 0.5) / h, (j as f64 + 0.5) / w);
            let v = &mut img[i * width + j];
            if ((x - 0.5) / 0.38).powi(2) + ((y - 0.5) / 0.45).powi(2) <= 1.0 {
                *v = 0.4;
            }
            if ((x - 0.38) / 0.12).powi(2) + ((y - 0.42) / 0.2).powi(2) <= 1.0 {
                *v = 0.8;
            }
            if (0.55..0.75).contains(&x) && (0.55..0.8).contains(&y) {
                *v = 1.0;
            }
            if (x - 0.65).powi(2) + (y - 0.3).powi(2) <= 0.006 {
                *v = 0.2;
            }
        }
    }
    img
}

/// Blurred Poisson counts of a nonnegative image.
#[derive(Debug, Clone)]
pub struct SynthPoisson<T> {
    pub a: CsrMatrix<T>,
    pub y: Array1<T>,
    pub x_true: Array1<T>,
    pub height: usize,
    pub width: usize,
}

impl<T: Scalar> SynthPoisson<T> {
    pub fn problem(&self, rho: T) -> Result<PoissonProblem<T>> {
        PoissonProblem::new(self.a.clone(), self.y.clone(), rho, self.height, self.width)
    }
}

/// `A = intensity × blur`, `y ~ Poisson(A x_true)`. `image` defaults to the
/// built-in phantom.
pub fn synth_poisson<T: Scalar>(
    image: Option<&Array1<f64>>,
    height: usize,
    width: usize,
    blur: Blur,
    intensity: f64,
    seed: u64,
) -> Result<SynthPoisson<T>> {
    if !(intensity > 0.0) {
        return Err(Error::Domain { what: "intensity must be positive", value: intensity });
    }
    let x_true = match image {
        Some(img) => {
            if img.len() != height * width {
                return Err(Error::Dimension { expected: height * width, got: img.len() });
            }
            if img.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Config("image must be nonnegative".into()));
            }
            img.clone()
        }
        None => phantom(height, width),
    };
    let mut a = blur_matrix::<f64>(height, width, blur);
    a.scale(intensity);
    let mean = a.mul_vec(x_true.view());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = mean.mapv(|m| if m > 0.0 { Poisson::new(m).expect("positive mean").sample(&mut rng) } else { 0.0 });
    let a_t = CsrMatrix::from_triplets(
        a.nrows(),
        a.ncols(),
        (0..a.nrows()).flat_map(|i| a.row(i).map(move |(j, v)| (i, j, T::lit(v))).collect::<Vec<_>>()).collect(),
    );
    Ok(SynthPoisson { a: a_t, y: y.mapv(T::lit), x_true: x_true.mapv(T::lit), height, width })
}

/// Sparse linear model with Gaussian design.
#[derive(Debug, Clone)]
pub struct SynthHetLasso<T> {
    pub x: Array2<T>,
    pub y: Array1<T>,
    pub beta_true: Array1<T>,
}

impl<T: Scalar> SynthHetLasso<T> {
    pub fn problem(&self, rho: T) -> Result<HetLassoProblem<T>> {
        HetLassoProblem::new(self.x.clone(), self.y.clone(), rho)
    }
}

/// `y = Xβ + noise·ε` with `k` nonzero coefficients drawn from `±U[1, 2]`.
pub fn synth_hetlasso<T: Scalar>(n: usize, p: usize, k: usize, noise: f64, seed: u64) -> Result<SynthHetLasso<T>> {
    if n == 0 || p == 0 || k > p {
        return Err(Error::Config(format!("invalid sizes n={n}, p={p}, k={k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Array2<f64> = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
    let mut beta = Array1::<f64>::zeros(p);
    let mut idx: Vec<usize> = (0..p).collect();
    for i in 0..k {
        let j = rng.random_range(i..p);
        idx.swap(i, j);
        let mag = rng.random_range(1.0..2.0);
        beta[idx[i]] = if rng.random::<bool>() { mag } else { -mag };
    }
    let eps: Array1<f64> = Array1::from_iter((0..n).map(|_| StandardNormal.sample(&mut rng)));
    let y: Array1<f64> = x.dot(&beta) + eps * noise;
    Ok(SynthHetLasso { x: x.mapv(T::lit), y: y.mapv(T::lit), beta_true: beta.mapv(T::lit) })
}
