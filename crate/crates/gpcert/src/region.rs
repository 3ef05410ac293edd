//! Axis-aligned hyper-rectangles in input space.

use crate::error::{Error, Result};
use crate::real::Real;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// The box `[lo, hi]`, carried through branch-and-bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Real> Region<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        for (j, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l <= h) {
                return Err(Error::InvalidRegion(format!(
                    "lower corner exceeds upper corner in dimension {j}"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The `ℓ∞` ball `[center - gamma, center + gamma]`.
    pub fn ball(center: &[T], gamma: T) -> Result<Self> {
        Self::new(
            center.iter().map(|&c| c - gamma).collect(),
            center.iter().map(|&c| c + gamma).collect(),
        )
    }

    pub fn point(x: &[T]) -> Self {
        Self { lo: x.to_vec(), hi: x.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    pub fn side(&self, j: usize) -> (T, T) {
        (self.lo[j], self.hi[j])
    }

    pub fn width(&self, j: usize) -> T {
        self.hi[j] - self.lo[j]
    }

    /// Maximum side length.
    pub fn diam(&self) -> T {
        (0..self.dim()).map(|j| self.width(j)).fold(T::zero(), T::max)
    }

    pub fn center(&self) -> Vec<T> {
        let half = T::of(0.5);
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| (l + h) * half).collect()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&l, &h))| l <= v && v <= h)
    }

    /// Componentwise projection of `x` into the box.
    pub fn clamp(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&l, &h))| v.max(l).min(h))
            .collect()
    }

    /// Index of the widest dimension (lowest index on ties).
    pub fn widest_dim(&self) -> usize {
        let mut best = 0;
        for j in 1..self.dim() {
            if self.width(j) > self.width(best) {
                best = j;
            }
        }
        best
    }

    /// Splits at the midpoint of dimension `j`.
    pub fn split_at(&self, j: usize) -> (Self, Self) {
        let mid = (self.lo[j] + self.hi[j]) * T::of(0.5);
        let mut left = self.clone();
        let mut right = self.clone();
        left.hi[j] = mid;
        right.lo[j] = mid;
        (left, right)
    }

    /// Uniform sample from the box.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| l + (h - l) * T::of(rng.gen::<f64>()))
            .collect()
    }

    /// Shrinks the box around its center by `factor` per side.
    pub fn shrink(&self, factor: T) -> Self {
        let half = T::of(0.5);
        let c = self.center();
        let lo = c
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&c, (&l, &h))| c - (h - l) * half * factor)
            .collect();
        let hi = c
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&c, (&l, &h))| c + (h - l) * half * factor)
            .collect();
        Self { lo, hi }
    }
}
