//! Small dense linear algebra: column-major matrices, Cholesky with a jitter
//! ladder, LU solves, and a cyclic Jacobi eigendecomposition for symmetric
//! matrices.
//!
//! Problem sizes in this crate are tiny (tens of rows), so everything is a
//! straightforward dense implementation generic over the scalar type.

use crate::error::{Error, Result};
use crate::real::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col_vec(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * v`.
    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `self^T * v`.
    pub fn tr_matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            let r = self.row(i);
            for j in 0..self.cols {
                out[j] = out[j] + r[j] * v[i];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `v^T self v`.
    pub fn quadratic_form(&self, v: &[T]) -> T {
        let av = self.matvec(v);
        av.iter().zip(v).map(|(&a, &b)| a * b).sum()
    }

    /// Symmetrizes in place: `(A + A^T)/2`.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.rows, self.cols);
        let half = T::of(0.5);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let m = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = m;
                self[(j, i)] = m;
            }
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }
}

impl<T> core::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> core::ops::IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Mat<T>,
}

impl<T: Real> Cholesky<T> {
    /// The lower-triangular factor.
    pub fn lower(&self) -> &Mat<T> {
        &self.l
    }

    pub fn new(a: &Mat<T>) -> Result<Self> {
        assert_eq!(a.rows(), a.cols());
        let n = a.rows();
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if s <= T::zero() {
                        return Err(Error::Factorization(format!(
                            "non-positive pivot {s:?} at row {i}"
                        )));
                    }
                    l[(i, j)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Ok(Self { l })
    }

    /// Factors `a + jitter*I`, walking jitter up the given ladder until the
    /// factorization succeeds. Returns the factor and the jitter used.
    pub fn with_jitter(a: &Mat<T>, ladder: &[f64]) -> Result<(Self, T)> {
        if let Ok(c) = Self::new(a) { return Ok((c, T::zero())) }
        let n = a.rows();
        for &j in ladder {
            let jitter = T::of(j);
            let mut aj = a.clone();
            for i in 0..n {
                aj[(i, i)] = aj[(i, i)] + jitter;
            }
            if let Ok(c) = Self::new(&aj) {
                return Ok((c, jitter));
            }
        }
        Err(Error::Factorization(format!(
            "matrix not positive definite even with jitter up to {:?}",
            ladder.last()
        )))
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.l.rows();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] = y[i] - self.l[(i, k)] * y[k];
            }
            y[i] = y[i] / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] = y[i] - self.l[(k, i)] * y[k];
            }
            y[i] = y[i] / self.l[(i, i)];
        }
        y
    }

    /// Inverse via `n` solves against unit vectors.
    pub fn inverse(&self) -> Mat<T> {
        let n = self.l.rows();
        let mut inv = Mat::zeros(n, n);
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Solves `a x = b` with partial-pivoting Gaussian elimination.
pub fn lu_solve<T: Real>(a: &Mat<T>, b: &[T]) -> Result<Vec<T>> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if m[(r, col)].abs() > m[(piv, col)].abs() {
                piv = r;
            }
        }
        if m[(piv, col)].abs() < T::of(1e-300) {
            return Err(Error::Factorization("singular system".into()));
        }
        if piv != col {
            for j in 0..n {
                let t = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            x.swap(col, piv);
        }
        for r in (col + 1)..n {
            let f = m[(r, col)] / m[(col, col)];
            if f == T::zero() {
                continue;
            }
            for j in col..n {
                m[(r, j)] = m[(r, j)] - f * m[(col, j)];
            }
            x[r] = x[r] - f * x[col];
        }
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            x[i] = x[i] - m[(i, j)] * x[j];
        }
        x[i] = x[i] / m[(i, i)];
    }
    Ok(x)
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    /// Eigenvalues in ascending order.
    pub values: Vec<T>,
    /// Matrix whose columns are the corresponding orthonormal eigenvectors.
    pub vectors: Mat<T>,
}

/// Cyclic Jacobi iteration for symmetric matrices.
///
/// Rotations are applied until the off-diagonal Frobenius mass falls below
/// `tol * max(|A|)`. Quadratic convergence makes ~10 sweeps plenty for the
/// sizes used here.
pub fn sym_eigen<T: Real>(a: &Mat<T>, tol: f64) -> Result<SymEigen<T>> {
    assert_eq!(a.rows(), a.cols());
    let n = a.rows();
    let mut m = a.clone();
    m.symmetrize();
    let mut v = Mat::identity(n);
    if n <= 1 {
        return Ok(SymEigen { values: (0..n).map(|i| m[(i, i)]).collect(), vectors: v });
    }
    let tol = T::of(tol);
    let scale = m.max_abs().max(T::one());
    let max_sweeps = 60;
    for _sweep in 0..max_sweeps {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= tol * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= tol * scale * T::of(1e-3) {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (T::of(2.0) * apq);
                // Stable tangent of the rotation angle.
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = (t * t + T::one()).sqrt().recip();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(i, i)].partial_cmp(&m[(j, j)]).expect("NaN eigenvalue")
    });
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(SymEigen { values, vectors })
}
