//! Small dense linear-algebra kernels: Cholesky factorization and friends.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Array2<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factorizes a symmetric matrix; fails with the index of the first
    /// non-positive pivot.
    pub fn factor(a: ArrayView2<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension { expected: n, got: a.ncols() });
        }
        let mut l = Array2::<T>::zeros((n, n));
        for j in 0..n {
            let mut diag = a[[j, j]];
            for k in 0..j {
                diag -= l[[j, k]] * l[[j, k]];
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return Err(Error::RankDeficient { pivot: j });
            }
            let djj = diag.sqrt();
            l[[j, j]] = djj;
            for i in (j + 1)..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor_lower(&self) -> &Array2<T> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `log det A = 2 Σ log L_ii`.
    pub fn log_det(&self) -> T {
        let two = T::one() + T::one();
        self.l.diag().iter().fold(T::zero(), |acc, &d| acc + d.ln()) * two
    }

    pub fn solve(&self, b: ArrayView1<T>) -> Array1<T> {
        let n = self.dim();
        let mut y = b.to_owned();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[[i, k]] * y[k];
            }
            y[i] = s / self.l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[[k, i]] * y[k];
            }
            y[i] = s / self.l[[i, i]];
        }
        y
    }

    pub fn solve_mat(&self, b: ArrayView2<T>) -> Array2<T> {
        let mut out = Array2::zeros(b.raw_dim());
        for (j, col) in b.axis_iter(Axis(1)).enumerate() {
            out.column_mut(j).assign(&self.solve(col));
        }
        out
    }

    /// Symmetric inverse `A⁻¹`.
    pub fn inverse(&self) -> Array2<T> {
        let n = self.dim();
        let inv = self.solve_mat(Array2::eye(n).view());
        symmetrize(&inv)
    }
}

/// `½(A + Aᵀ)`.
pub fn symmetrize<T: Scalar>(a: &Array2<T>) -> Array2<T> {
    let half = T::lit(0.5);
    (a + &a.t()) * half
}

pub fn dot<T: Scalar>(a: ArrayView1<T>, b: ArrayView1<T>) -> T {
    a.dot(&b)
}

pub fn norm2<T: Scalar>(a: ArrayView1<T>) -> T {
    a.dot(&a).sqrt()
}

pub fn frobenius<T: Scalar>(a: ArrayView2<T>) -> T {
    a.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product<T: Scalar>(a: ArrayView2<T>, b: ArrayView2<T>) -> T {
    let mut s = T::zero();
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            s += a[[i, k]] * b[[k, i]];
        }
    }
    s
}

/// Compressed sparse row matrix; enough structure for blur operators.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, T)>) -> Self {
        trip.sort_by_key(|a| (a.0, a.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<T> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            assert!(r < nrows && c < ncols, "triplet out of bounds");
            if last == Some((r, c)) {
                let n = values.len();
                values[n - 1] += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn from_dense(a: ArrayView2<T>) -> Self {
        let mut trip = Vec::new();
        for ((i, j), &v) in a.indexed_iter() {
            if v != T::zero() {
                trip.push((i, j, v));
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), trip)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, T::one())).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn scale(&mut self, c: T) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn mul_vec(&self, x: ArrayView1<T>) -> Array1<T> {
        Array1::from_shape_fn(self.nrows, |i| self.row(i).fold(T::zero(), |s, (j, v)| s + v * x[j]))
    }

    pub fn tmul_vec(&self, y: ArrayView1<T>) -> Array1<T> {
        let mut out = Array1::zeros(self.ncols);
        for i in 0..self.nrows {
            let yi = y[i];
            if yi == T::zero() {
                continue;
            }
            for (j, v) in self.row(i) {
                out[j] += v * yi;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut a = Array2::zeros((self.nrows, self.ncols));
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                a[[i, j]] += v;
            }
        }
        a
    }

    pub fn min_value(&self) -> Option<T> {
        self.values.iter().copied().reduce(|a, b| a.min(b))
    }
}
