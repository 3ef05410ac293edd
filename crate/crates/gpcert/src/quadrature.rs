//! Gauss–Hermite quadrature for integrals of the form
//! `∫ f(ξ) N(ξ | μ, Σ) dξ`.

use crate::linalg::{sym_eigen, Mat};
use crate::real::Real;

/// Nodes and weights for physicists' Gauss–Hermite quadrature
/// (`∫ f(x) e^{-x²} dx ≈ Σ w_k f(x_k)`).
#[derive(Debug, Clone)]
pub struct GaussHermite<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussHermite<T> {
    /// Builds an `n`-node rule by the Golub–Welsch method: the nodes are the
    /// eigenvalues of the Jacobi matrix of the Hermite recurrence and the
    /// weights come from the first components of its eigenvectors.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut j = Mat::zeros(n, n);
        for k in 1..n {
            let off = (T::of(k as f64) * T::of(0.5)).sqrt();
            j[(k - 1, k)] = off;
            j[(k, k - 1)] = off;
        }
        let e = sym_eigen(&j, 1e-14).expect("Jacobi matrix eigendecomposition");
        let total = T::of(core::f64::consts::PI.sqrt());
        let weights = (0..n)
            .map(|k| {
                let v0 = e.vectors[(0, k)];
                total * v0 * v0
            })
            .collect();
        Self { nodes: e.values, weights }
    }

    /// `∫ f(ξ) N(ξ | mean, var) dξ`, exact for polynomial `f` up to degree
    /// `2n - 1`. `var` must be nonnegative; at zero variance this degenerates
    /// to `f(mean)` since all nodes collapse.
    pub fn gaussian_expectation(&self, mean: T, var: T, mut f: impl FnMut(T) -> T) -> T {
        let scale = (T::of(2.0) * var.max(T::zero())).sqrt();
        let inv_total = T::of(1.0 / core::f64::consts::PI.sqrt());
        let mut acc = T::zero();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + w * f(mean + scale * x);
        }
        acc * inv_total
    }
}
