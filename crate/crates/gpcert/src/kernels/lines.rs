//! Linear under/over-estimators of smooth scalar functions on an interval.
//!
//! A concave stretch is bounded below by its chord and a convex stretch by
//! the tangent at the interval midpoint. Intervals containing inflection
//! points are split at them; adjacent segment lines are stitched back into a
//! single line. Two adjacent segments use the endpoint rule that exploits
//! the chord touching the curve at the inflection; longer runs are folded
//! pairwise through the chord of the pointwise minimum of the two lines,
//! which is a valid single-line under-estimator of both.

use crate::real::Real;

/// The line `a + b t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> Line<T> {
    pub fn constant(v: T) -> Self {
        Self { a: v, b: T::zero() }
    }

    pub fn through(p0: (T, T), p1: (T, T)) -> Self {
        let b = (p0.1 - p1.1) / (p0.0 - p1.0);
        Self { a: p0.1 - b * p0.0, b }
    }

    #[inline]
    pub fn eval(&self, t: T) -> T {
        self.a + self.b * t
    }

    pub fn neg(&self) -> Self {
        Self { a: -self.a, b: -self.b }
    }

    /// Range of the line over `[lo, hi]`.
    pub fn range_on(&self, lo: T, hi: T) -> (T, T) {
        let x = self.eval(lo);
        let y = self.eval(hi);
        (x.min(y), x.max(y))
    }
}

/// A scalar curve with enough structure to build bounding lines: value,
/// first derivative, curvature sign, and the inflection points inside an
/// open interval (ascending).
pub trait Curve<T: Real> {
    fn value(&self, t: T) -> T;
    fn deriv(&self, t: T) -> T;
    /// Sign of the second derivative at `t` (any representative value with
    /// the right sign works).
    fn curvature(&self, t: T) -> T;
    fn flexes_in(&self, lo: T, hi: T) -> Vec<T>;
}

/// Lower bounding line for `f` on `[lo, hi]`.
pub fn lower_line<T: Real, C: Curve<T>>(f: &C, lo: T, hi: T) -> Line<T> {
    debug_assert!(lo <= hi);
    if !(hi > lo) {
        return Line::constant(f.value(lo));
    }
    let mut cuts = vec![lo];
    cuts.extend(f.flexes_in(lo, hi));
    cuts.push(hi);
    let seg = |l: T, u: T| segment_lower_line(f, l, u);
    match cuts.len() {
        2 => seg(lo, hi),
        3 => stitch_at_flex(f, cuts[0], cuts[1], cuts[2]),
        _ => {
            // Fold left to right: after each merge the line is valid on
            // [lo, w[1]].
            let mut line = seg(cuts[0], cuts[1]);
            for w in cuts.windows(2).skip(1) {
                let next = seg(w[0], w[1]);
                line = merge_min_chord(&line, &next, lo, w[1]);
            }
            line
        }
    }
}

/// Upper bounding line for `f` on `[lo, hi]` (lower line of `-f`, negated).
pub fn upper_line<T: Real, C: Curve<T>>(f: &C, lo: T, hi: T) -> Line<T> {
    struct Neg<'a, C>(&'a C);
    impl<T: Real, C: Curve<T>> Curve<T> for Neg<'_, C> {
        fn value(&self, t: T) -> T {
            -self.0.value(t)
        }
        fn deriv(&self, t: T) -> T {
            -self.0.deriv(t)
        }
        fn curvature(&self, t: T) -> T {
            -self.0.curvature(t)
        }
        fn flexes_in(&self, lo: T, hi: T) -> Vec<T> {
            self.0.flexes_in(lo, hi)
        }
    }
    lower_line(&Neg(f), lo, hi).neg()
}

/// Both bounding lines at once.
pub fn sandwich_lines<T: Real, C: Curve<T>>(f: &C, lo: T, hi: T) -> (Line<T>, Line<T>) {
    (lower_line(f, lo, hi), upper_line(f, lo, hi))
}

/// Lower line on a flex-free segment: chord when concave, midpoint tangent
/// when convex.
fn segment_lower_line<T: Real, C: Curve<T>>(f: &C, lo: T, hi: T) -> Line<T> {
    if !(hi > lo) {
        return Line::constant(f.value(lo));
    }
    let mid = (lo + hi) * T::of(0.5);
    if f.curvature(mid) >= T::zero() {
        let b = f.deriv(mid);
        Line { a: f.value(mid) - b * mid, b }
    } else {
        Line::through((lo, f.value(lo)), (hi, f.value(hi)))
    }
}

/// Single inflection point: a line through endpoint values chosen so that it
/// stays under the chord on the concave side (which touches the curve at the
/// flex) and under the tangent on the convex side.
fn stitch_at_flex<T: Real, C: Curve<T>>(f: &C, lo: T, flex: T, hi: T) -> Line<T> {
    let left = segment_lower_line(f, lo, flex);
    let right = segment_lower_line(f, flex, hi);
    let left_concave = f.curvature((lo + flex) * T::of(0.5)) < T::zero();
    if left_concave {
        // Chord on the left touches f at the flex, so anchoring the right
        // endpoint to the tangent value is safe.
        Line::through(
            (lo, left.eval(lo).min(right.eval(lo))),
            (hi, right.eval(hi)),
        )
    } else {
        Line::through(
            (lo, left.eval(lo)),
            (hi, left.eval(hi).min(right.eval(hi))),
        )
    }
}

/// A single line under two lines on `[lo, hi]`: the chord of their pointwise
/// minimum. The min of two lines is concave, so its chord lies below it on
/// the whole interval.
fn merge_min_chord<T: Real>(g1: &Line<T>, g2: &Line<T>, lo: T, hi: T) -> Line<T> {
    Line::through(
        (lo, g1.eval(lo).min(g2.eval(lo))),
        (hi, g1.eval(hi).min(g2.eval(hi))),
    )
}

/// Parabola `scale * (t - center)^2` (convex for `scale >= 0`).
pub struct Parabola<T> {
    pub scale: T,
    pub center: T,
}

impl<T: Real> Curve<T> for Parabola<T> {
    fn value(&self, t: T) -> T {
        let d = t - self.center;
        self.scale * d * d
    }
    fn deriv(&self, t: T) -> T {
        T::of(2.0) * self.scale * (t - self.center)
    }
    fn curvature(&self, _t: T) -> T {
        self.scale
    }
    fn flexes_in(&self, _lo: T, _hi: T) -> Vec<T> {
        Vec::new()
    }
}

/// `amp * cos(t)` or `amp * sin(t)`.
pub struct Sinusoid<T> {
    pub amp: T,
    pub is_sin: bool,
}

impl<T: Real> Curve<T> for Sinusoid<T> {
    fn value(&self, t: T) -> T {
        self.amp * if self.is_sin { t.sin() } else { t.cos() }
    }
    fn deriv(&self, t: T) -> T {
        self.amp * if self.is_sin { t.cos() } else { -t.sin() }
    }
    fn curvature(&self, t: T) -> T {
        -self.value(t)
    }
    fn flexes_in(&self, lo: T, hi: T) -> Vec<T> {
        // Zeros of the function itself: k*pi (+ pi/2 for cos).
        let pi = T::of(core::f64::consts::PI);
        let offset = if self.is_sin { T::zero() } else { pi * T::of(0.5) };
        points_in_grid(lo, hi, offset, pi)
    }
}

/// Ascending list of points `offset + k * step` strictly inside `(lo, hi)`.
pub fn points_in_grid<T: Real>(lo: T, hi: T, offset: T, step: T) -> Vec<T> {
    let mut k = ((lo - offset) / step).ceil();
    if offset + k * step <= lo {
        k = k + T::one();
    }
    let mut out = Vec::new();
    loop {
        let p = offset + k * step;
        if p >= hi {
            break;
        }
        if p > lo {
            out.push(p);
        }
        k = k + T::one();
    }
    out
}

/// True iff some point `offset + k*step` lies inside `[lo, hi]`.
pub fn grid_point_in<T: Real>(lo: T, hi: T, offset: T, step: T) -> bool {
    let k = ((lo - offset) / step).ceil();
    offset + k * step <= hi
}
