//! Kernel families, their evaluation, and bounded decompositions.
//!
//! Supported families: squared exponential, rational quadratic, Matérn with
//! half-integer smoothness, periodic, nonnegative sums, products, and
//! generalised spectral kernels (stationary and non-stationary). Every family
//! decomposes as `Σ = ψ(φ)` with a separable inner function and an upper
//! bounding function `U` on weighted sums of `φ`, which is what the mean and
//! variance bounds are built from.

mod channel;
mod decomp;
mod lines;
mod psi;

pub use channel::{AffineSandwich, PhiChannel, Trig};
pub use decomp::{
    compose_bounds_product, compose_bounds_sum, Decomposition, MultiBoundPair, RegionKernelBounds,
};
pub use lines::Line;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::region::Region;
use serde::{Deserialize, Serialize};

/// One summand of a sum kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumTerm<T> {
    pub weight: T,
    pub kernel: KernelSpec<T>,
}

/// One component of a stationary generalised spectral kernel:
/// `σ² exp(-Σ_j θ_j d_j²) cos(wᵀd)` with `d = x' - x''`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralComponent<T> {
    pub variance: T,
    pub theta: Vec<T>,
    pub w: Vec<T>,
}

/// One component of a non-stationary generalised spectral kernel:
/// `σ² exp(θᵀ(x' + x'')) Ψ(x')ᵀΨ(x'')` with
/// `Ψ(x) = [cos(xᵀw₁) + cos(xᵀw₂), sin(xᵀw₁) + sin(xᵀw₂)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonStationaryComponent<T> {
    pub variance: T,
    pub theta: Vec<T>,
    pub w1: Vec<T>,
    pub w2: Vec<T>,
}

/// Kernel family with hyperparameters. Lengthscales enter as the
/// per-dimension weights `θ_j` of the squared distance (`θ_j = 1/ℓ_j²`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec<T> {
    SquaredExponential { variance: T, theta: Vec<T> },
    RationalQuadratic { variance: T, theta: Vec<T>, alpha: T },
    MaternHalfInteger { variance: T, theta: Vec<T>, p: u32 },
    Periodic { variance: T, theta: Vec<T>, freq: Vec<T> },
    Sum { terms: Vec<SumTerm<T>> },
    Product { factors: Vec<KernelSpec<T>> },
    SpectralStationary { components: Vec<SpectralComponent<T>> },
    SpectralNonStationary { components: Vec<NonStationaryComponent<T>> },
}

/// Range of the separable inner function `φ(·, anchor)` over a region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiRange<T> {
    pub lo: T,
    pub hi: T,
}

/// Coefficients of kernel-level bounding lines in a single `φ`:
/// `a_l + b_l φ ≤ Σ_{x,anchor} ≤ a_u + b_u φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearBoundPair<T> {
    pub a_l: T,
    pub b_l: T,
    pub a_u: T,
    pub b_u: T,
}

impl<T: Real> KernelSpec<T> {
    /// Input dimension, inferred from the hyperparameter vectors. Errors on
    /// inconsistent children.
    pub fn dim(&self) -> Result<usize> {
        match self {
            KernelSpec::SquaredExponential { theta, .. }
            | KernelSpec::RationalQuadratic { theta, .. }
            | KernelSpec::MaternHalfInteger { theta, .. } => Ok(theta.len()),
            KernelSpec::Periodic { theta, freq, .. } => {
                if theta.len() != freq.len() {
                    return Err(Error::DimensionMismatch { expected: theta.len(), got: freq.len() });
                }
                Ok(theta.len())
            }
            KernelSpec::Sum { terms } => {
                common_dim(terms.iter().map(|t| t.kernel.dim()))
            }
            KernelSpec::Product { factors } => common_dim(factors.iter().map(|f| f.dim())),
            KernelSpec::SpectralStationary { components } => common_dim(
                components
                    .iter()
                    .map(|c| {
                        if c.theta.len() != c.w.len() {
                            Err(Error::DimensionMismatch { expected: c.theta.len(), got: c.w.len() })
                        } else {
                            Ok(c.theta.len())
                        }
                    }),
            ),
            KernelSpec::SpectralNonStationary { components } => common_dim(
                components
                    .iter()
                    .map(|c| {
                        if c.theta.len() != c.w1.len() || c.theta.len() != c.w2.len() {
                            Err(Error::DimensionMismatch { expected: c.theta.len(), got: c.w1.len() })
                        } else {
                            Ok(c.theta.len())
                        }
                    }),
            ),
        }
    }

    /// Validates hyperparameter positivity and dimension consistency.
    pub fn validate(&self) -> Result<()> {
        let check_pos = |name: &'static str, v: T| -> Result<()> {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, reason: format!("must be positive, got {v}") })
            }
        };
        self.dim()?;
        match self {
            KernelSpec::SquaredExponential { variance, theta } => {
                check_pos("variance", *variance)?;
                theta.iter().try_for_each(|&t| check_pos("theta", t))?;
            }
            KernelSpec::RationalQuadratic { variance, theta, alpha } => {
                check_pos("variance", *variance)?;
                check_pos("alpha", *alpha)?;
                theta.iter().try_for_each(|&t| check_pos("theta", t))?;
            }
            KernelSpec::MaternHalfInteger { variance, theta, p } => {
                check_pos("variance", *variance)?;
                theta.iter().try_for_each(|&t| check_pos("theta", t))?;
                if *p == 0 {
                    return Err(Error::InvalidParameter {
                        name: "p",
                        reason: "Matérn ν = 1/2 is not smooth enough for a bounded decomposition; use p >= 1"
                            .into(),
                    });
                }
            }
            KernelSpec::Periodic { variance, theta, freq } => {
                check_pos("variance", *variance)?;
                theta.iter().try_for_each(|&t| check_pos("theta", t))?;
                freq.iter().try_for_each(|&p| check_pos("freq", p))?;
            }
            KernelSpec::Sum { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidParameter { name: "terms", reason: "empty sum".into() });
                }
                for t in terms {
                    if t.weight < T::zero() || !t.weight.is_finite() {
                        return Err(Error::InvalidParameter {
                            name: "weight",
                            reason: format!("sum weights must be nonnegative, got {}", t.weight),
                        });
                    }
                    t.kernel.validate()?;
                }
            }
            KernelSpec::Product { factors } => {
                if factors.is_empty() {
                    return Err(Error::InvalidParameter {
                        name: "factors",
                        reason: "empty product".into(),
                    });
                }
                factors.iter().try_for_each(|f| f.validate())?;
            }
            KernelSpec::SpectralStationary { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidParameter {
                        name: "components",
                        reason: "empty spectral kernel".into(),
                    });
                }
                for c in components {
                    check_pos("variance", c.variance)?;
                    for &t in &c.theta {
                        if t < T::zero() {
                            return Err(Error::InvalidParameter {
                                name: "theta",
                                reason: "spectral theta must be nonnegative".into(),
                            });
                        }
                    }
                }
            }
            KernelSpec::SpectralNonStationary { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidParameter {
                        name: "components",
                        reason: "empty spectral kernel".into(),
                    });
                }
                for c in components {
                    check_pos("variance", c.variance)?;
                    for &t in &c.theta {
                        if t < T::zero() {
                            return Err(Error::InvalidParameter {
                                name: "theta",
                                reason: "spectral theta must be nonnegative".into(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// True when `Σ_{x,x}` is the same for all `x`.
    pub fn is_stationary(&self) -> bool {
        match self {
            KernelSpec::SquaredExponential { .. }
            | KernelSpec::RationalQuadratic { .. }
            | KernelSpec::MaternHalfInteger { .. }
            | KernelSpec::Periodic { .. }
            | KernelSpec::SpectralStationary { .. } => true,
            KernelSpec::Sum { terms } => terms.iter().all(|t| t.kernel.is_stationary()),
            KernelSpec::Product { factors } => factors.iter().all(|f| f.is_stationary()),
            KernelSpec::SpectralNonStationary { .. } => false,
        }
    }

    /// Kernel value by the direct closed-form formulas.
    pub fn eval(&self, x1: &[T], x2: &[T]) -> Result<T> {
        let d = self.dim()?;
        if x1.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x1.len() });
        }
        if x2.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x2.len() });
        }
        Ok(self.eval_unchecked(x1, x2))
    }

    fn eval_unchecked(&self, x1: &[T], x2: &[T]) -> T {
        match self {
            KernelSpec::SquaredExponential { variance, theta } => {
                *variance * (-sq_dist(theta, x1, x2)).exp()
            }
            KernelSpec::RationalQuadratic { variance, theta, alpha } => {
                *variance * (T::one() + sq_dist(theta, x1, x2) * T::of(0.5)).powf(-*alpha)
            }
            KernelSpec::MaternHalfInteger { variance, theta, p } => {
                psi::Psi::matern(*variance, *p).value(sq_dist(theta, x1, x2))
            }
            KernelSpec::Periodic { variance, theta, freq } => {
                let phi: T = theta
                    .iter()
                    .zip(freq)
                    .zip(x1.iter().zip(x2))
                    .map(|((&t, &p), (&a, &b))| {
                        let s = (p * (a - b)).sin();
                        t * s * s
                    })
                    .sum();
                *variance * (-phi * T::of(0.5)).exp()
            }
            KernelSpec::Sum { terms } => terms
                .iter()
                .map(|t| t.weight * t.kernel.eval_unchecked(x1, x2))
                .sum(),
            KernelSpec::Product { factors } => factors
                .iter()
                .map(|f| f.eval_unchecked(x1, x2))
                .fold(T::one(), |a, b| a * b),
            KernelSpec::SpectralStationary { components } => components
                .iter()
                .map(|c| {
                    let se = (-sq_dist(&c.theta, x1, x2)).exp();
                    let arg: T =
                        c.w.iter().zip(x1.iter().zip(x2)).map(|(&w, (&a, &b))| w * (a - b)).sum();
                    c.variance * se * arg.cos()
                })
                .sum(),
            KernelSpec::SpectralNonStationary { components } => components
                .iter()
                .map(|c| {
                    let amp: T = c
                        .theta
                        .iter()
                        .zip(x1.iter().zip(x2))
                        .map(|(&t, (&a, &b))| t * (a + b))
                        .sum();
                    let z1a: T = c.w1.iter().zip(x1).map(|(&w, &v)| w * v).sum();
                    let z2a: T = c.w2.iter().zip(x1).map(|(&w, &v)| w * v).sum();
                    let z1b: T = c.w1.iter().zip(x2).map(|(&w, &v)| w * v).sum();
                    let z2b: T = c.w2.iter().zip(x2).map(|(&w, &v)| w * v).sum();
                    let dot = (z1a.cos() + z2a.cos()) * (z1b.cos() + z2b.cos())
                        + (z1a.sin() + z2a.sin()) * (z1b.sin() + z2b.sin());
                    c.variance * amp.exp() * dot
                })
                .sum(),
        }
    }

    /// Gradient of `Σ_{·,anchor}` at `x` (needed by the gradient-sign
    /// attack).
    pub fn grad(&self, x: &[T], anchor: &[T]) -> Result<Vec<T>> {
        let d = self.dim()?;
        if x.len() != d || anchor.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len().min(anchor.len()) });
        }
        Ok(self.grad_unchecked(x, anchor))
    }

    fn grad_unchecked(&self, x: &[T], anchor: &[T]) -> Vec<T> {
        let d = x.len();
        match self {
            KernelSpec::SquaredExponential { .. }
            | KernelSpec::RationalQuadratic { .. }
            | KernelSpec::MaternHalfInteger { .. }
            | KernelSpec::Periodic { .. } => {
                // ψ'(φ) ∇φ for the single-channel families.
                let dec = Decomposition::new(self).expect("validated spec");
                let ch = &dec.channels()[0];
                let phi = ch.eval(x, anchor);
                let dpsi = match self {
                    KernelSpec::SquaredExponential { variance, .. } => {
                        psi::Psi::ExpNeg { variance: *variance }.deriv(phi)
                    }
                    KernelSpec::RationalQuadratic { variance, alpha, .. } => {
                        psi::Psi::RationalQuadratic { variance: *variance, alpha: *alpha }
                            .deriv(phi)
                    }
                    KernelSpec::MaternHalfInteger { variance, p, .. } => {
                        psi::Psi::matern(*variance, *p).deriv(phi)
                    }
                    KernelSpec::Periodic { variance, .. } => {
                        psi::Psi::ExpNegHalf { variance: *variance }.deriv(phi)
                    }
                    _ => unreachable!(),
                };
                ch.grad(x, anchor).into_iter().map(|g| dpsi * g).collect()
            }
            KernelSpec::Sum { terms } => {
                let mut out = vec![T::zero(); d];
                for t in terms {
                    for (o, g) in out.iter_mut().zip(t.kernel.grad_unchecked(x, anchor)) {
                        *o = *o + t.weight * g;
                    }
                }
                out
            }
            KernelSpec::Product { factors } => {
                let vals: Vec<T> = factors.iter().map(|f| f.eval_unchecked(x, anchor)).collect();
                let mut out = vec![T::zero(); d];
                for (i, f) in factors.iter().enumerate() {
                    let rest: T = vals
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| *k != i)
                        .map(|(_, &v)| v)
                        .fold(T::one(), |a, b| a * b);
                    for (o, g) in out.iter_mut().zip(f.grad_unchecked(x, anchor)) {
                        *o = *o + rest * g;
                    }
                }
                out
            }
            KernelSpec::SpectralStationary { components } => {
                let mut out = vec![T::zero(); d];
                for c in components {
                    let phi = sq_dist(&c.theta, x, anchor);
                    let se = (-phi).exp();
                    let arg: T =
                        c.w.iter().zip(x.iter().zip(anchor)).map(|(&w, (&a, &b))| w * (a - b)).sum();
                    for j in 0..d {
                        let dse = -T::of(2.0) * c.theta[j] * (x[j] - anchor[j]) * se;
                        out[j] = out[j]
                            + c.variance * (dse * arg.cos() - se * arg.sin() * c.w[j]);
                    }
                }
                out
            }
            KernelSpec::SpectralNonStationary { components } => {
                let mut out = vec![T::zero(); d];
                for c in components {
                    let amp: T = c
                        .theta
                        .iter()
                        .zip(x.iter().zip(anchor))
                        .map(|(&t, (&a, &b))| t * (a + b))
                        .sum();
                    let e = amp.exp();
                    let z1a: T = c.w1.iter().zip(x).map(|(&w, &v)| w * v).sum();
                    let z2a: T = c.w2.iter().zip(x).map(|(&w, &v)| w * v).sum();
                    let z1b: T = c.w1.iter().zip(anchor).map(|(&w, &v)| w * v).sum();
                    let z2b: T = c.w2.iter().zip(anchor).map(|(&w, &v)| w * v).sum();
                    let cb = z1b.cos() + z2b.cos();
                    let sb = z1b.sin() + z2b.sin();
                    let ca = z1a.cos() + z2a.cos();
                    let sa = z1a.sin() + z2a.sin();
                    let dotv = ca * cb + sa * sb;
                    for j in 0..d {
                        let dca = -z1a.sin() * c.w1[j] - z2a.sin() * c.w2[j];
                        let dsa = z1a.cos() * c.w1[j] + z2a.cos() * c.w2[j];
                        out[j] = out[j]
                            + c.variance * e * (c.theta[j] * dotv + dca * cb + dsa * sb);
                    }
                }
                out
            }
        }
    }

    /// Builds the bounded decomposition for this kernel.
    pub fn decomposition(&self) -> Result<Decomposition<T>> {
        self.validate()?;
        Decomposition::new(self)
    }
}

fn common_dim(iter: impl Iterator<Item = Result<usize>>) -> Result<usize> {
    let mut dim = None;
    for d in iter {
        let d = d?;
        match dim {
            None => dim = Some(d),
            Some(existing) if existing != d => {
                return Err(Error::DimensionMismatch { expected: existing, got: d })
            }
            _ => {}
        }
    }
    dim.ok_or(Error::InvalidParameter { name: "kernel", reason: "empty composite kernel".into() })
}

fn sq_dist<T: Real>(theta: &[T], x1: &[T], x2: &[T]) -> T {
    theta
        .iter()
        .zip(x1.iter().zip(x2))
        .map(|(&t, (&a, &b))| {
            let d = a - b;
            t * d * d
        })
        .sum()
}

/// Range of the inner function `φ(·, anchor)` over a region, for kernels
/// whose decomposition has a single channel.
pub fn phi_range<T: Real>(
    spec: &KernelSpec<T>,
    anchor: &[T],
    region: &Region<T>,
) -> Result<PhiRange<T>> {
    let dec = spec.decomposition()?;
    require_dims(&dec, anchor, region)?;
    if dec.n_channels() != 1 {
        return Err(Error::Unsupported(
            "phi_range is defined for kernels with a single inner function; composite kernels carry one per leaf".into(),
        ));
    }
    let (lo, hi) = dec.channels()[0].range(anchor, region);
    Ok(PhiRange { lo, hi })
}

/// Kernel-level bounding lines `a_L + b_L φ ≤ Σ_{x,anchor} ≤ a_U + b_U φ`
/// over a region, for single-channel kernels.
pub fn build_lbf_ubf<T: Real>(
    spec: &KernelSpec<T>,
    anchor: &[T],
    region: &Region<T>,
) -> Result<LinearBoundPair<T>> {
    let dec = spec.decomposition()?;
    require_dims(&dec, anchor, region)?;
    if dec.n_channels() != 1 {
        return Err(Error::Unsupported(
            "build_lbf_ubf is defined for kernels with a single inner function; use the decomposition API for composites".into(),
        ));
    }
    let pair = dec.anchored_pair(anchor, region);
    Ok(LinearBoundPair { a_l: pair.a_l, b_l: pair.b_l[0], a_u: pair.a_u, b_u: pair.b_u[0] })
}

/// The decomposition's bounding function `U(c)` for single-channel kernels:
/// an upper bound on `sup_{x ∈ region} Σ_i c_i φ(x, anchors_i)`.
pub fn upper_bounding_u<T: Real>(
    spec: &KernelSpec<T>,
    coeffs: &[T],
    anchors: &[Vec<T>],
    region: &Region<T>,
) -> Result<T> {
    let dec = spec.decomposition()?;
    if coeffs.len() != anchors.len() {
        return Err(Error::DimensionMismatch { expected: anchors.len(), got: coeffs.len() });
    }
    if coeffs.is_empty() {
        return Ok(T::zero());
    }
    if dec.n_channels() != 1 {
        return Err(Error::Unsupported(
            "upper_bounding_u is defined for kernels with a single inner function".into(),
        ));
    }
    let mat = crate::linalg::Mat::from_rows(anchors);
    Ok(dec.u_bound(0, coeffs, &mat, region))
}

fn require_dims<T: Real>(dec: &Decomposition<T>, anchor: &[T], region: &Region<T>) -> Result<()> {
    if anchor.len() != dec.dim() {
        return Err(Error::DimensionMismatch { expected: dec.dim(), got: anchor.len() });
    }
    if region.dim() != dec.dim() {
        return Err(Error::DimensionMismatch { expected: dec.dim(), got: region.dim() });
    }
    Ok(())
}

/// A fixed menu of valid kernels over `d` dimensions covering every family,
/// used by tests across the crate.
#[cfg(any(test, feature = "testutil"))]
pub fn test_suite_kernels(d: usize) -> Vec<KernelSpec<f64>> {
    let theta = |base: f64| (0..d).map(|j| base + 0.2 * j as f64).collect::<Vec<_>>();
    let se = KernelSpec::SquaredExponential { variance: 1.0, theta: theta(0.8) };
    let rq = KernelSpec::RationalQuadratic { variance: 0.9, theta: theta(0.5), alpha: 1.3 };
    let matern = KernelSpec::MaternHalfInteger { variance: 1.1, theta: theta(0.6), p: 1 };
    let periodic = KernelSpec::Periodic { variance: 0.8, theta: theta(0.4), freq: theta(1.1) };
    let sum = KernelSpec::Sum {
        terms: vec![
            SumTerm { weight: 0.6, kernel: se.clone() },
            SumTerm { weight: 0.4, kernel: matern.clone() },
        ],
    };
    let product = KernelSpec::Product { factors: vec![se.clone(), periodic.clone()] };
    let spectral = KernelSpec::SpectralStationary {
        components: vec![
            SpectralComponent { variance: 0.7, theta: theta(0.3), w: theta(0.9) },
            SpectralComponent { variance: 0.3, theta: theta(0.5), w: theta(0.2) },
        ],
    };
    let nonstat = KernelSpec::SpectralNonStationary {
        components: vec![NonStationaryComponent {
            variance: 0.5,
            theta: theta(0.05),
            w1: theta(0.7),
            w2: theta(0.3),
        }],
    };
    vec![se, rq, matern, periodic, sum, product, spectral, nonstat]
}
