//! Outer functions `ψ` of kernel decompositions, with the analytic structure
//! (derivative, curvature, inflection points, exact range on an interval)
//! the bounding-line construction needs.

use super::lines::{points_in_grid, Curve, Line, sandwich_lines};
use crate::real::Real;

/// `ψ` in the decomposition `Σ = ψ ∘ φ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Psi<T> {
    /// `σ² exp(-φ)` — squared-exponential.
    ExpNeg { variance: T },
    /// `σ² exp(-φ/2)` — periodic.
    ExpNegHalf { variance: T },
    /// `σ² (1 + φ/2)^(-α)` — rational quadratic.
    RationalQuadratic { variance: T, alpha: T },
    /// `σ² P(s) e^(-s)` with `s = sqrt((2p+1) φ)` — Matérn ν = p + 1/2.
    /// `poly` holds the coefficients of `P` (ascending powers of `s`) and
    /// `dpoly` those of `(P - P')(s)/s`, used for the derivative in `φ`.
    Matern { variance: T, order: u32, poly: Vec<T>, dpoly: Vec<T> },
    /// `cos(φ)` — spectral cosine part.
    Cos,
    /// `exp(φ)` — non-stationary spectral amplitude part.
    Exp,
    /// `φ` itself — trigonometric product factors.
    Identity,
}

fn polyval<T: Real>(coeffs: &[T], s: T) -> T {
    coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * s + c)
}

impl<T: Real> Psi<T> {
    /// Matérn ν = p + 1/2 in the form `σ² P(s) e^{-s}` with
    /// `P(s) = (p!/(2p)!) Σ_l ((p+l)!/(l!(p-l)!)) (2s)^{p-l}`.
    pub fn matern(variance: T, p: u32) -> Self {
        let pf = factorial(p);
        let scale = pf / factorial(2 * p);
        let mut poly = vec![T::zero(); p as usize + 1];
        for l in 0..=p {
            let deg = (p - l) as usize;
            let coeff = scale * factorial(p + l) / (factorial(l) * factorial(p - l))
                * 2f64.powi(deg as i32);
            poly[deg] = T::of(coeff);
        }
        // dψ/ds = σ² (P' - P) e^{-s}; (P - P')(0) = 0 for p >= 1, so
        // (P - P')(s) = s * dpoly(s) with dpoly a polynomial.
        let mut diff = vec![T::zero(); p as usize + 1];
        for (deg, &c) in poly.iter().enumerate() {
            diff[deg] = diff[deg] + c;
            if deg >= 1 {
                diff[deg - 1] = diff[deg - 1] - c * T::of(deg as f64);
            }
        }
        debug_assert!(diff[0].abs() < T::of(1e-9));
        let dpoly = diff[1..].to_vec();
        Psi::Matern { variance, order: p, poly, dpoly }
    }

    pub fn value(&self, phi: T) -> T {
        match self {
            Psi::ExpNeg { variance } => *variance * (-phi).exp(),
            Psi::ExpNegHalf { variance } => *variance * (-phi * T::of(0.5)).exp(),
            Psi::RationalQuadratic { variance, alpha } => {
                *variance * (T::one() + phi * T::of(0.5)).powf(-*alpha)
            }
            Psi::Matern { variance, order, poly, .. } => {
                let s = (T::of((2 * order + 1) as f64) * phi.max(T::zero())).sqrt();
                *variance * polyval(poly, s) * (-s).exp()
            }
            Psi::Cos => phi.cos(),
            Psi::Exp => phi.exp(),
            Psi::Identity => phi,
        }
    }

    pub fn deriv(&self, phi: T) -> T {
        match self {
            Psi::ExpNeg { variance } => -*variance * (-phi).exp(),
            Psi::ExpNegHalf { variance } => -*variance * T::of(0.5) * (-phi * T::of(0.5)).exp(),
            Psi::RationalQuadratic { variance, alpha } => {
                -*variance * *alpha * T::of(0.5)
                    * (T::one() + phi * T::of(0.5)).powf(-*alpha - T::one())
            }
            Psi::Matern { variance, order, dpoly, .. } => {
                // ψ'(φ) = -σ² (2p+1)/2 · dpoly(s) · e^{-s}, continuous at φ = 0.
                let c = T::of((2 * order + 1) as f64);
                let s = (c * phi.max(T::zero())).sqrt();
                -*variance * c * T::of(0.5) * polyval(dpoly, s) * (-s).exp()
            }
            Psi::Cos => -phi.sin(),
            Psi::Exp => phi.exp(),
            Psi::Identity => T::one(),
        }
    }

    /// Sign of `ψ''` at `phi` (value only used for its sign).
    pub fn curvature(&self, phi: T) -> T {
        match self {
            // Completely monotone in φ: strictly convex everywhere.
            Psi::ExpNeg { .. }
            | Psi::ExpNegHalf { .. }
            | Psi::RationalQuadratic { .. }
            | Psi::Matern { .. }
            | Psi::Exp => T::one(),
            Psi::Cos => -phi.cos(),
            Psi::Identity => T::zero(),
        }
    }

    /// Inflection points strictly inside `(lo, hi)`, ascending.
    pub fn flexes_in(&self, lo: T, hi: T) -> Vec<T> {
        match self {
            Psi::Cos => {
                let pi = T::of(core::f64::consts::PI);
                points_in_grid(lo, hi, pi * T::of(0.5), pi)
            }
            _ => Vec::new(),
        }
    }

    /// Exact range of `ψ` over `[lo, hi]`.
    pub fn range(&self, lo: T, hi: T) -> (T, T) {
        match self {
            // Monotone decreasing families.
            Psi::ExpNeg { .. }
            | Psi::ExpNegHalf { .. }
            | Psi::RationalQuadratic { .. }
            | Psi::Matern { .. } => (self.value(hi), self.value(lo)),
            Psi::Exp => (lo.exp(), hi.exp()),
            Psi::Identity => (lo, hi),
            Psi::Cos => cos_range(lo, hi),
        }
    }

    /// Bounding lines `a_L + b_L φ ≤ ψ(φ) ≤ a_U + b_U φ` on `[lo, hi]`.
    pub fn bounding_lines(&self, lo: T, hi: T) -> (Line<T>, Line<T>) {
        sandwich_lines(self, lo, hi)
    }
}

impl<T: Real> Curve<T> for Psi<T> {
    fn value(&self, t: T) -> T {
        Psi::value(self, t)
    }
    fn deriv(&self, t: T) -> T {
        Psi::deriv(self, t)
    }
    fn curvature(&self, t: T) -> T {
        Psi::curvature(self, t)
    }
    fn flexes_in(&self, lo: T, hi: T) -> Vec<T> {
        Psi::flexes_in(self, lo, hi)
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n as u64).map(|k| k as f64).product()
}

/// Exact range of `cos` over `[lo, hi]`.
pub fn cos_range<T: Real>(lo: T, hi: T) -> (T, T) {
    let two_pi = T::of(core::f64::consts::TAU);
    let pi = T::of(core::f64::consts::PI);
    let max = if super::lines::grid_point_in(lo, hi, T::zero(), two_pi) {
        T::one()
    } else {
        lo.cos().max(hi.cos())
    };
    let min = if super::lines::grid_point_in(lo, hi, pi, two_pi) {
        -T::one()
    } else {
        lo.cos().min(hi.cos())
    };
    (min, max)
}

/// Exact range of `sin` over `[lo, hi]`.
pub fn sin_range<T: Real>(lo: T, hi: T) -> (T, T) {
    let two_pi = T::of(core::f64::consts::TAU);
    let half_pi = T::of(core::f64::consts::FRAC_PI_2);
    let max = if super::lines::grid_point_in(lo, hi, half_pi, two_pi) {
        T::one()
    } else {
        lo.sin().max(hi.sin())
    };
    let min = if super::lines::grid_point_in(lo, hi, -half_pi, two_pi) {
        -T::one()
    } else {
        lo.sin().min(hi.sin())
    };
    (min, max)
}
