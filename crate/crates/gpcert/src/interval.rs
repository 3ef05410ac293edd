//! Interval arithmetic and verified interval linear solves.
//!
//! Outward rounding is not modelled; a small relative inflation is applied by
//! the callers that need slack against floating-point error. Intervals may
//! have infinite endpoints.

use crate::error::{Error, Result};
use crate::linalg::{lu_solve, Mat};
use crate::real::Real;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        debug_assert!(!(lo > hi), "inverted interval [{lo:?}, {hi:?}]");
        Self { lo, hi }
    }

    pub fn point(v: T) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn hull(a: T, b: T) -> Self {
        Self { lo: a.min(b), hi: a.max(b) }
    }

    pub fn zero() -> Self {
        Self::point(T::zero())
    }

    pub fn mid(&self) -> T {
        (self.lo + self.hi) * T::of(0.5)
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, v: T) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= T::zero() && T::zero() <= self.hi
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Self { lo, hi })
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { lo: self.lo + o.lo, hi: self.hi + o.hi }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { lo: self.lo - o.hi, hi: self.hi - o.lo }
    }

    pub fn neg(&self) -> Self {
        Self { lo: -self.hi, hi: -self.lo }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let combos = [
            mul_inf(self.lo, o.lo),
            mul_inf(self.lo, o.hi),
            mul_inf(self.hi, o.lo),
            mul_inf(self.hi, o.hi),
        ];
        let lo = combos.iter().fold(T::infinity(), |m, &x| m.min(x));
        let hi = combos.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
        Self { lo, hi }
    }

    pub fn scale(&self, k: T) -> Self {
        if k >= T::zero() {
            Self { lo: self.lo * k, hi: self.hi * k }
        } else {
            Self { lo: self.hi * k, hi: self.lo * k }
        }
    }

    /// Division; `None` when the divisor straddles zero.
    pub fn div(&self, o: &Self) -> Option<Self> {
        if o.contains_zero() {
            return None;
        }
        let combos = [self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi];
        let lo = combos.iter().fold(T::infinity(), |m, &x| m.min(x));
        let hi = combos.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
        Some(Self { lo, hi })
    }
}

/// IEEE multiplication maps `0 * inf` to NaN; intervals want 0 instead.
fn mul_inf<T: Real>(a: T, b: T) -> T {
    if a == T::zero() || b == T::zero() {
        T::zero()
    } else {
        a * b
    }
}

pub fn dot_intervals<T: Real>(a: &[Interval<T>], b: &[Interval<T>]) -> Interval<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(Interval::zero(), |acc, (x, y)| acc.add(&x.mul(y)))
}

/// Solves the interval linear system `A w = rhs` with midpoint
/// preconditioning followed by interval Gaussian elimination.
///
/// The result encloses `{A^-1 r : A in [A], r in [rhs]}`. Fails when the
/// preconditioned system has a pivot interval containing zero, which signals
/// that the interval matrix is too wide to be provably regular.
pub fn solve_interval_system<T: Real>(
    a: &[Vec<Interval<T>>],
    rhs: &[Interval<T>],
) -> Result<Vec<Interval<T>>> {
    let n = a.len();
    assert_eq!(rhs.len(), n);
    if n == 0 {
        return Ok(Vec::new());
    }
    // Precondition by the inverse of the midpoint matrix.
    let mid = Mat::from_fn(n, n, |i, j| a[i][j].mid());
    let mut cinv = Mat::zeros(n, n);
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        let col = lu_solve(&mid, &e).map_err(|_| Error::IntervalSingular)?;
        for i in 0..n {
            cinv[(i, j)] = col[i];
        }
    }
    // B = C^-1 [A], d = C^-1 [rhs]  (interval matrix/vector products).
    let mut b: Vec<Vec<Interval<T>>> = vec![vec![Interval::zero(); n]; n];
    let mut d: Vec<Interval<T>> = vec![Interval::zero(); n];
    for i in 0..n {
        for j in 0..n {
            let mut s = Interval::zero();
            for k in 0..n {
                s = s.add(&a[k][j].scale(cinv[(i, k)]));
            }
            b[i][j] = s;
        }
        let mut s = Interval::zero();
        for k in 0..n {
            s = s.add(&rhs[k].scale(cinv[(i, k)]));
        }
        d[i] = s;
    }
    // Interval Gaussian elimination on the (near-identity) preconditioned system.
    for col in 0..n {
        if b[col][col].contains_zero() {
            return Err(Error::IntervalSingular);
        }
        for row in (col + 1)..n {
            let f = b[row][col].div(&b[col][col]).ok_or(Error::IntervalSingular)?;
            for j in col..n {
                let sub = f.mul(&b[col][j]);
                b[row][j] = b[row][j].sub(&sub);
            }
            let sub = f.mul(&d[col]);
            d[row] = d[row].sub(&sub);
        }
    }
    let mut w = vec![Interval::zero(); n];
    for i in (0..n).rev() {
        let mut s = d[i];
        for j in (i + 1)..n {
            let sub = b[i][j].mul(&w[j]);
            s = s.sub(&sub);
        }
        w[i] = s.div(&b[i][i]).ok_or(Error::IntervalSingular)?;
    }
    Ok(w)
}
