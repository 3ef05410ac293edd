//! Inner functions `φ` of kernel decompositions.
//!
//! Each channel knows how to evaluate itself, compute its exact range over a
//! box for a fixed anchor, bound weighted sums over anchors from above (the
//! `U` function of the decomposition), and produce an affine-in-`x` sandwich
//! of `φ(·, anchor)` for the variance programs.

use super::lines::{sandwich_lines, Parabola, Sinusoid};
use super::psi::{cos_range, sin_range};
use crate::linalg::Mat;
use crate::real::Real;
use crate::region::Region;

/// Which trigonometric function a spectral product factor uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

impl Trig {
    fn eval<T: Real>(self, z: T) -> T {
        match self {
            Trig::Cos => z.cos(),
            Trig::Sin => z.sin(),
        }
    }

    fn range<T: Real>(self, lo: T, hi: T) -> (T, T) {
        match self {
            Trig::Cos => cos_range(lo, hi),
            Trig::Sin => sin_range(lo, hi),
        }
    }
}

/// A separable (or trigonometric) inner function `φ(x, anchor)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiChannel<T> {
    /// `Σ_j θ_j (x_j - a_j)²` — squared-exponential, rational quadratic and
    /// Matérn kernels.
    SqDist { theta: Vec<T> },
    /// `Σ_j θ_j sin²(p_j (x_j - a_j))` — periodic kernel.
    SinSq { theta: Vec<T>, freq: Vec<T> },
    /// `Σ_j w_j (x_j - a_j)` — cosine part of stationary spectral kernels.
    Diff { w: Vec<T> },
    /// `Σ_j θ_j (x_j + a_j)` — amplitude part of non-stationary spectral
    /// kernels.
    SumShift { theta: Vec<T> },
    /// `trig_a(aᵀ w_a) · trig_x(xᵀ w_x)` — one of the trigonometric factors
    /// of non-stationary spectral kernels.
    TrigProd { w_anchor: Vec<T>, w_x: Vec<T>, trig_anchor: Trig, trig_x: Trig },
}

/// Affine sandwich `a_l + b_lᵀ x ≤ φ(x, anchor) ≤ a_u + b_uᵀ x` on a region.
#[derive(Debug, Clone)]
pub struct AffineSandwich<T> {
    pub a_l: T,
    pub b_l: Vec<T>,
    pub a_u: T,
    pub b_u: Vec<T>,
}

impl<T: Real> PhiChannel<T> {
    pub fn eval(&self, x: &[T], anchor: &[T]) -> T {
        match self {
            PhiChannel::SqDist { theta } => theta
                .iter()
                .zip(x.iter().zip(anchor))
                .map(|(&t, (&xj, &aj))| {
                    let d = xj - aj;
                    t * d * d
                })
                .sum(),
            PhiChannel::SinSq { theta, freq } => theta
                .iter()
                .zip(freq)
                .zip(x.iter().zip(anchor))
                .map(|((&t, &p), (&xj, &aj))| {
                    let s = (p * (xj - aj)).sin();
                    t * s * s
                })
                .sum(),
            PhiChannel::Diff { w } => {
                w.iter().zip(x.iter().zip(anchor)).map(|(&wj, (&xj, &aj))| wj * (xj - aj)).sum()
            }
            PhiChannel::SumShift { theta } => theta
                .iter()
                .zip(x.iter().zip(anchor))
                .map(|(&t, (&xj, &aj))| t * (xj + aj))
                .sum(),
            PhiChannel::TrigProd { w_anchor, w_x, trig_anchor, trig_x } => {
                let za: T = w_anchor.iter().zip(anchor).map(|(&w, &a)| w * a).sum();
                let zx: T = w_x.iter().zip(x).map(|(&w, &v)| w * v).sum();
                trig_anchor.eval(za) * trig_x.eval(zx)
            }
        }
    }

    /// Gradient of `φ(·, anchor)` at `x`.
    pub fn grad(&self, x: &[T], anchor: &[T]) -> Vec<T> {
        match self {
            PhiChannel::SqDist { theta } => theta
                .iter()
                .zip(x.iter().zip(anchor))
                .map(|(&t, (&xj, &aj))| T::of(2.0) * t * (xj - aj))
                .collect(),
            PhiChannel::SinSq { theta, freq } => theta
                .iter()
                .zip(freq)
                .zip(x.iter().zip(anchor))
                .map(|((&t, &p), (&xj, &aj))| t * p * (T::of(2.0) * p * (xj - aj)).sin())
                .collect(),
            PhiChannel::Diff { w } => w.clone(),
            PhiChannel::SumShift { theta } => theta.clone(),
            PhiChannel::TrigProd { w_anchor, w_x, trig_anchor, trig_x } => {
                let za: T = w_anchor.iter().zip(anchor).map(|(&w, &a)| w * a).sum();
                let zx: T = w_x.iter().zip(x).map(|(&w, &v)| w * v).sum();
                let outer = trig_anchor.eval(za);
                let dz = match trig_x {
                    Trig::Cos => -zx.sin(),
                    Trig::Sin => zx.cos(),
                };
                w_x.iter().map(|&w| outer * dz * w).collect()
            }
        }
    }

    /// Exact range of `φ(·, anchor)` over the region.
    pub fn range(&self, anchor: &[T], region: &Region<T>) -> (T, T) {
        match self {
            PhiChannel::SqDist { theta } => {
                let mut lo = T::zero();
                let mut hi = T::zero();
                for j in 0..theta.len() {
                    let (l, h) = region.side(j);
                    let a = anchor[j];
                    let dl = l - a;
                    let dh = h - a;
                    let mx = theta[j] * dl.abs().max(dh.abs()).powi(2);
                    let mn = if dl <= T::zero() && dh >= T::zero() {
                        T::zero()
                    } else {
                        theta[j] * dl.abs().min(dh.abs()).powi(2)
                    };
                    lo = lo + mn;
                    hi = hi + mx;
                }
                (lo, hi)
            }
            PhiChannel::SinSq { theta, freq } => {
                let mut lo = T::zero();
                let mut hi = T::zero();
                for j in 0..theta.len() {
                    let (l, h) = region.side(j);
                    let (mn, mx) = sin_sq_range(freq[j], anchor[j], l, h);
                    lo = lo + theta[j] * mn;
                    hi = hi + theta[j] * mx;
                }
                (lo, hi)
            }
            PhiChannel::Diff { w } => {
                let mut lo = T::zero();
                let mut hi = T::zero();
                for j in 0..w.len() {
                    let (l, h) = region.side(j);
                    let (a, b) = if w[j] >= T::zero() { (l, h) } else { (h, l) };
                    lo = lo + w[j] * (a - anchor[j]);
                    hi = hi + w[j] * (b - anchor[j]);
                }
                (lo, hi)
            }
            PhiChannel::SumShift { theta } => {
                let mut lo = T::zero();
                let mut hi = T::zero();
                for j in 0..theta.len() {
                    let (l, h) = region.side(j);
                    let (a, b) = if theta[j] >= T::zero() { (l, h) } else { (h, l) };
                    lo = lo + theta[j] * (a + anchor[j]);
                    hi = hi + theta[j] * (b + anchor[j]);
                }
                (lo, hi)
            }
            PhiChannel::TrigProd { w_anchor, w_x, trig_anchor, trig_x } => {
                let za: T = w_anchor.iter().zip(anchor).map(|(&w, &a)| w * a).sum();
                let gamma = trig_anchor.eval(za);
                let (zl, zh) = linear_range(w_x, region);
                let (tl, th) = trig_x.range(zl, zh);
                if gamma >= T::zero() {
                    (gamma * tl, gamma * th)
                } else {
                    (gamma * th, gamma * tl)
                }
            }
        }
    }

    /// The decomposition's bounding function:
    /// `U(c) ≥ sup_{x ∈ region} Σ_i c_i φ(x, anchors_i)`.
    ///
    /// Exact for the separable quadratic and all linear/trig channels; for
    /// the periodic channel the per-point suprema are summed, which is an
    /// over-approximation.
    pub fn u_bound(&self, coeffs: &[T], anchors: &Mat<T>, region: &Region<T>) -> T {
        assert_eq!(coeffs.len(), anchors.rows());
        if coeffs.is_empty() {
            return T::zero();
        }
        match self {
            PhiChannel::SqDist { theta } => {
                let mut total = T::zero();
                for j in 0..theta.len() {
                    total = total + aggregated_parabola_sup(theta[j], coeffs, anchors, j, region).0;
                }
                total
            }
            PhiChannel::SinSq { theta, freq } => {
                let mut total = T::zero();
                for j in 0..theta.len() {
                    let (l, h) = region.side(j);
                    for (i, &c) in coeffs.iter().enumerate() {
                        let q = c * theta[j];
                        let (mn, mx) = sin_sq_range(freq[j], anchors[(i, j)], l, h);
                        total = total + if q >= T::zero() { q * mx } else { q * mn };
                    }
                }
                total
            }
            PhiChannel::Diff { w } => {
                let csum: T = coeffs.iter().copied().sum();
                let mut total = T::zero();
                for j in 0..w.len() {
                    let (l, h) = region.side(j);
                    let wj = csum * w[j];
                    total = total + if wj >= T::zero() { wj * h } else { wj * l };
                    let mut off = T::zero();
                    for (i, &c) in coeffs.iter().enumerate() {
                        off = off + c * w[j] * anchors[(i, j)];
                    }
                    total = total - off;
                }
                total
            }
            PhiChannel::SumShift { theta } => {
                let csum: T = coeffs.iter().copied().sum();
                let mut total = T::zero();
                for j in 0..theta.len() {
                    let (l, h) = region.side(j);
                    let tj = csum * theta[j];
                    total = total + if tj >= T::zero() { tj * h } else { tj * l };
                    for (i, &c) in coeffs.iter().enumerate() {
                        total = total + c * theta[j] * anchors[(i, j)];
                    }
                }
                total
            }
            PhiChannel::TrigProd { w_anchor, w_x, trig_anchor, trig_x } => {
                let mut g = T::zero();
                for (i, &c) in coeffs.iter().enumerate() {
                    let za: T =
                        w_anchor.iter().enumerate().map(|(j, &w)| w * anchors[(i, j)]).sum();
                    g = g + c * trig_anchor.eval(za);
                }
                let (zl, zh) = linear_range(w_x, region);
                let (tl, th) = trig_x.range(zl, zh);
                if g >= T::zero() {
                    g * th
                } else {
                    g * tl
                }
            }
        }
    }

    /// A point in the region near the maximizer of `Σ_i c_i φ(x, anchors_i)`
    /// (exact for the separable quadratic and linear channels; heuristic for
    /// the trigonometric ones). Used as a witness candidate only.
    pub fn u_argmax(&self, coeffs: &[T], anchors: &Mat<T>, region: &Region<T>) -> Vec<T> {
        let d = region.dim();
        let mut x = region.center();
        if coeffs.is_empty() {
            return x;
        }
        match self {
            PhiChannel::SqDist { theta } => {
                for j in 0..d {
                    x[j] = aggregated_parabola_sup(theta[j], coeffs, anchors, j, region).1;
                }
            }
            PhiChannel::Diff { w } => {
                let csum: T = coeffs.iter().copied().sum();
                for j in 0..d {
                    let (l, h) = region.side(j);
                    x[j] = if csum * w[j] >= T::zero() { h } else { l };
                }
            }
            PhiChannel::SumShift { theta } => {
                let csum: T = coeffs.iter().copied().sum();
                for j in 0..d {
                    let (l, h) = region.side(j);
                    x[j] = if csum * theta[j] >= T::zero() { h } else { l };
                }
            }
            PhiChannel::SinSq { .. } | PhiChannel::TrigProd { .. } => {
                // Coordinate-wise scan over endpoints and a small grid.
                let obj = |x: &[T]| -> T {
                    (0..anchors.rows())
                        .map(|i| coeffs[i] * self.eval(x, anchors.row(i)))
                        .sum()
                };
                for j in 0..d {
                    let (l, h) = region.side(j);
                    let mut best = x[j];
                    let mut best_v = obj(&x);
                    for k in 0..=8 {
                        let cand = l + (h - l) * T::of(k as f64 / 8.0);
                        let mut xc = x.clone();
                        xc[j] = cand;
                        let v = obj(&xc);
                        if v > best_v {
                            best_v = v;
                            best = cand;
                        }
                    }
                    x[j] = best;
                }
            }
        }
        x
    }

    /// When the weighted sum `Σ_i c_i φ(x, anchors_i)` is a per-dimension
    /// polynomial of degree ≤ 2, returns its quadratic coefficients
    /// `(α_j, β_j, γ_j)` per dimension, so sums across channels can be
    /// maximised jointly and exactly. `None` for trigonometric channels.
    pub fn quadratic_profile(
        &self,
        coeffs: &[T],
        anchors: &Mat<T>,
    ) -> Option<Vec<(T, T, T)>> {
        match self {
            PhiChannel::SqDist { theta } => {
                let csum: T = coeffs.iter().copied().sum();
                let d = theta.len();
                let mut out = Vec::with_capacity(d);
                for j in 0..d {
                    let alpha = theta[j] * csum;
                    let mut beta = T::zero();
                    let mut gamma = T::zero();
                    for (i, &c) in coeffs.iter().enumerate() {
                        let a = anchors[(i, j)];
                        beta = beta - T::of(2.0) * theta[j] * c * a;
                        gamma = gamma + theta[j] * c * a * a;
                    }
                    out.push((alpha, beta, gamma));
                }
                Some(out)
            }
            PhiChannel::Diff { w } => {
                let csum: T = coeffs.iter().copied().sum();
                let d = w.len();
                let mut out = Vec::with_capacity(d);
                for j in 0..d {
                    let mut gamma = T::zero();
                    for (i, &c) in coeffs.iter().enumerate() {
                        gamma = gamma - c * w[j] * anchors[(i, j)];
                    }
                    out.push((T::zero(), csum * w[j], gamma));
                }
                Some(out)
            }
            PhiChannel::SumShift { theta } => {
                let csum: T = coeffs.iter().copied().sum();
                let d = theta.len();
                let mut out = Vec::with_capacity(d);
                for j in 0..d {
                    let mut gamma = T::zero();
                    for (i, &c) in coeffs.iter().enumerate() {
                        gamma = gamma + c * theta[j] * anchors[(i, j)];
                    }
                    out.push((T::zero(), csum * theta[j], gamma));
                }
                Some(out)
            }
            PhiChannel::SinSq { .. } | PhiChannel::TrigProd { .. } => None,
        }
    }

    /// Affine-in-`x` sandwich of `φ(·, anchor)` over the region.
    pub fn affine_sandwich(&self, anchor: &[T], region: &Region<T>) -> AffineSandwich<T> {
        let d = region.dim();
        let mut a_l = T::zero();
        let mut a_u = T::zero();
        let mut b_l = vec![T::zero(); d];
        let mut b_u = vec![T::zero(); d];
        match self {
            PhiChannel::SqDist { theta } => {
                for j in 0..d {
                    let (l, h) = region.side(j);
                    let curve = Parabola { scale: theta[j], center: anchor[j] };
                    let (lb, ub) = sandwich_lines(&curve, l, h);
                    a_l = a_l + lb.a;
                    b_l[j] = lb.b;
                    a_u = a_u + ub.a;
                    b_u[j] = ub.b;
                }
            }
            PhiChannel::SinSq { theta, freq } => {
                for j in 0..d {
                    let (l, h) = region.side(j);
                    let curve = SinSqCurve { theta: theta[j], freq: freq[j], center: anchor[j] };
                    let (lb, ub) = sandwich_lines(&curve, l, h);
                    a_l = a_l + lb.a;
                    b_l[j] = lb.b;
                    a_u = a_u + ub.a;
                    b_u[j] = ub.b;
                }
            }
            PhiChannel::Diff { w } => {
                let off: T = w.iter().zip(anchor).map(|(&wj, &aj)| wj * aj).sum();
                a_l = -off;
                a_u = -off;
                b_l.copy_from_slice(w);
                b_u.copy_from_slice(w);
            }
            PhiChannel::SumShift { theta } => {
                let off: T = theta.iter().zip(anchor).map(|(&tj, &aj)| tj * aj).sum();
                a_l = off;
                a_u = off;
                b_l.copy_from_slice(theta);
                b_u.copy_from_slice(theta);
            }
            PhiChannel::TrigProd { w_anchor, w_x, trig_anchor, trig_x } => {
                let za: T = w_anchor.iter().zip(anchor).map(|(&w, &a)| w * a).sum();
                let gamma = trig_anchor.eval(za);
                let (zl, zh) = linear_range(w_x, region);
                let curve = Sinusoid { amp: gamma, is_sin: matches!(trig_x, Trig::Sin) };
                let (lb, ub) = sandwich_lines(&curve, zl, zh);
                a_l = lb.a;
                a_u = ub.a;
                for j in 0..d {
                    b_l[j] = lb.b * w_x[j];
                    b_u[j] = ub.b * w_x[j];
                }
            }
        }
        AffineSandwich { a_l, b_l, a_u, b_u }
    }
}

/// Range of `wᵀx` over the region.
fn linear_range<T: Real>(w: &[T], region: &Region<T>) -> (T, T) {
    let mut lo = T::zero();
    let mut hi = T::zero();
    for j in 0..w.len() {
        let (l, h) = region.side(j);
        if w[j] >= T::zero() {
            lo = lo + w[j] * l;
            hi = hi + w[j] * h;
        } else {
            lo = lo + w[j] * h;
            hi = hi + w[j] * l;
        }
    }
    (lo, hi)
}

/// Supremum (and its location) of the aggregated per-dimension parabola
/// `h(x) = θ Σ_i c_i (x - a_ij)²` over side `j` of the region: the maximum of
/// a 1-d parabola over an interval, from its endpoints and vertex.
fn aggregated_parabola_sup<T: Real>(
    theta: T,
    coeffs: &[T],
    anchors: &Mat<T>,
    j: usize,
    region: &Region<T>,
) -> (T, T) {
    let csum: T = coeffs.iter().copied().sum();
    let alpha = theta * csum;
    let mut beta = T::zero();
    let mut gamma = T::zero();
    for (i, &c) in coeffs.iter().enumerate() {
        let a = anchors[(i, j)];
        beta = beta - T::of(2.0) * theta * c * a;
        gamma = gamma + theta * c * a * a;
    }
    let h = |x: T| alpha * x * x + beta * x + gamma;
    let (l, u) = region.side(j);
    let mut best = (h(l), l);
    let hu = h(u);
    if hu > best.0 {
        best = (hu, u);
    }
    if alpha != T::zero() {
        let vertex = -beta / (T::of(2.0) * alpha);
        if vertex >= l && vertex <= u {
            let hv = h(vertex);
            if hv > best.0 {
                best = (hv, vertex);
            }
        }
    }
    best
}

/// Exact range of `sin²(p (x - a))` for `x ∈ [l, h]`.
fn sin_sq_range<T: Real>(p: T, a: T, l: T, h: T) -> (T, T) {
    let zl = p * (l - a);
    let zh = p * (h - a);
    let pi = T::of(core::f64::consts::PI);
    let half_pi = pi * T::of(0.5);
    let s = |z: T| {
        let v = z.sin();
        v * v
    };
    let mx = if super::lines::grid_point_in(zl, zh, half_pi, pi) {
        T::one()
    } else {
        s(zl).max(s(zh))
    };
    let mn = if super::lines::grid_point_in(zl, zh, T::zero(), pi) {
        T::zero()
    } else {
        s(zl).min(s(zh))
    };
    (mn, mx)
}

/// `θ sin²(p (x - a))` as a 1-d curve.
struct SinSqCurve<T> {
    theta: T,
    freq: T,
    center: T,
}

impl<T: Real> super::lines::Curve<T> for SinSqCurve<T> {
    fn value(&self, t: T) -> T {
        let s = (self.freq * (t - self.center)).sin();
        self.theta * s * s
    }
    fn deriv(&self, t: T) -> T {
        self.theta * self.freq * (T::of(2.0) * self.freq * (t - self.center)).sin()
    }
    fn curvature(&self, t: T) -> T {
        self.theta * (T::of(2.0) * self.freq * (t - self.center)).cos()
    }
    fn flexes_in(&self, lo: T, hi: T) -> Vec<T> {
        // cos(2p(t - a)) = 0 at t = a + (π/4 + kπ/2)/p.
        let quarter = T::of(core::f64::consts::FRAC_PI_4) / self.freq;
        let step = T::of(core::f64::consts::FRAC_PI_2) / self.freq;
        super::lines::points_in_grid(lo, hi, self.center + quarter, step)
    }
}
