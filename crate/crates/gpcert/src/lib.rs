//! Provable, anytime, ε-exact bounds on the prediction ranges of Gaussian
//! process models over input boxes, for certifying adversarial robustness of
//! regression and classification decisions.
//!
//! The pipeline: kernels decompose as `ψ ∘ φ` with computable bounding
//! functions ([`kernels`]); those yield region-wise bounds on the posterior
//! mean and variance ([`bounds`]); the moment bounds propagate through the
//! likelihood to bounds on class probabilities ([`likelihood`]); and a
//! branch-and-bound loop ([`bnb`]) refines everything to a chosen tolerance.
//! [`robustness`] wraps the machinery into certification verdicts, metrics
//! and an attack baseline.
//!
//! All numeric code is generic over the scalar type via [`real::Real`];
//! concrete `f64` aliases are exported at the crate root.

// Index loops read naturally in dense linear algebra, and `!(a > b)`-style
// comparisons are deliberate NaN guards.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bnb;
pub mod bounds;
pub mod error;
pub mod interval;
pub mod kernels;
pub mod likelihood;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod real;
pub mod region;
pub mod robustness;
pub mod solver;

pub use error::{Error, Result};

/// Double-precision aliases for the main types.
pub type KernelSpecF64 = kernels::KernelSpec<f64>;
pub type RegionF64 = region::Region<f64>;
pub type GpModelF64 = model::GpModel<f64>;
pub type MomentBoundsF64 = bounds::MomentBounds<f64>;
pub type RangeBoundsF64 = likelihood::RangeBounds<f64>;
pub type BnbConfigF64 = bnb::BnbConfig<f64>;
pub type BnbResultF64 = bnb::BnbResult<f64>;
pub type SafetyVerdictF64 = robustness::SafetyVerdict<f64>;

/// Single-precision aliases (lower-accuracy instantiation of the same core).
pub type KernelSpecF32 = kernels::KernelSpec<f32>;
pub type RegionF32 = region::Region<f32>;
