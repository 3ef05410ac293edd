//! Bounded kernel decompositions.
//!
//! A [`Decomposition`] flattens a kernel into leaf channels `(φ, ψ)` plus a
//! composition tree of weighted sums and products. For a fixed anchor and
//! region it produces an affine sandwich of the kernel value in the channel
//! values, along with an interval enclosure; products are relaxed with
//! McCormick envelopes built from the factor enclosures.

use super::channel::{AffineSandwich, PhiChannel, Trig};
use super::psi::Psi;
use super::{KernelSpec, NonStationaryComponent, SpectralComponent};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::linalg::Mat;
use crate::real::Real;
use crate::region::Region;

/// Affine sandwich of a kernel value over several φ channels, together with
/// an interval enclosure of the kernel value itself:
/// `a_l + Σ_k b_l[k] φ_k ≤ Σ_{x,anchor} ≤ a_u + Σ_k b_u[k] φ_k`, and
/// `Σ_{x,anchor} ∈ [lo, hi]` for all `x` in the region.
#[derive(Debug, Clone)]
pub struct MultiBoundPair<T> {
    pub a_l: T,
    pub a_u: T,
    pub b_l: Vec<T>,
    pub b_u: Vec<T>,
    pub lo: T,
    pub hi: T,
}

impl<T: Real> MultiBoundPair<T> {
    fn zero(n_channels: usize) -> Self {
        Self {
            a_l: T::zero(),
            a_u: T::zero(),
            b_l: vec![T::zero(); n_channels],
            b_u: vec![T::zero(); n_channels],
            lo: T::zero(),
            hi: T::zero(),
        }
    }

    /// Evaluates the lower bounding function at given channel values.
    pub fn lbf_at(&self, phis: &[T]) -> T {
        self.a_l + self.b_l.iter().zip(phis).map(|(&b, &p)| b * p).sum()
    }

    /// Evaluates the upper bounding function at given channel values.
    pub fn ubf_at(&self, phis: &[T]) -> T {
        self.a_u + self.b_u.iter().zip(phis).map(|(&b, &p)| b * p).sum()
    }
}

/// Weighted sum of two sandwiches (kernel addition). Weights must be
/// nonnegative, matching the closure property of kernels under conic
/// combination.
pub fn compose_bounds_sum<T: Real>(
    p1: &MultiBoundPair<T>,
    p2: &MultiBoundPair<T>,
    k1: T,
    k2: T,
) -> Result<MultiBoundPair<T>> {
    if k1 < T::zero() || k2 < T::zero() {
        return Err(Error::InvalidParameter {
            name: "sum weight",
            reason: "kernel sum weights must be nonnegative".into(),
        });
    }
    debug_assert_eq!(p1.b_l.len(), p2.b_l.len());
    let n = p1.b_l.len();
    let mut out = MultiBoundPair::zero(n);
    out.a_l = k1 * p1.a_l + k2 * p2.a_l;
    out.a_u = k1 * p1.a_u + k2 * p2.a_u;
    for ch in 0..n {
        out.b_l[ch] = k1 * p1.b_l[ch] + k2 * p2.b_l[ch];
        out.b_u[ch] = k1 * p1.b_u[ch] + k2 * p2.b_u[ch];
    }
    out.lo = k1 * p1.lo + k2 * p2.lo;
    out.hi = k1 * p1.hi + k2 * p2.hi;
    Ok(out)
}

/// McCormick relaxation of a kernel product.
///
/// The lower bounding function uses
/// `Σ ≥ Σ'_L Σ'' + Σ' Σ''_L − Σ'_L Σ''_L` and the upper bounding function
/// `Σ ≤ Σ'_U Σ'' + Σ' Σ''_L − Σ'_U Σ''_L`; each factor occurrence is then
/// replaced by its own LBF or UBF depending on the sign of its multiplier.
pub fn compose_bounds_product<T: Real>(
    p1: &MultiBoundPair<T>,
    p2: &MultiBoundPair<T>,
) -> Result<MultiBoundPair<T>> {
    if p1.lo > p1.hi || p2.lo > p2.hi {
        return Err(Error::InvalidParameter {
            name: "factor interval",
            reason: "inverted enclosure interval".into(),
        });
    }
    debug_assert_eq!(p1.b_l.len(), p2.b_l.len());
    let n = p1.b_l.len();
    let mut out = MultiBoundPair::zero(n);

    // Lower: l1*S2 + l2*S1 - l1*l2.
    let (a2, b2) = pick(p2, p1.lo);
    let (a1, b1) = pick(p1, p2.lo);
    out.a_l = p1.lo * a2 + p2.lo * a1 - p1.lo * p2.lo;
    for ch in 0..n {
        out.b_l[ch] = p1.lo * b2[ch] + p2.lo * b1[ch];
    }

    // Upper: u1*S2 + l2*S1 - u1*l2.
    let (a2u, b2u) = pick_upper(p2, p1.hi);
    let (a1u, b1u) = pick_upper(p1, p2.lo);
    out.a_u = p1.hi * a2u + p2.lo * a1u - p1.hi * p2.lo;
    for ch in 0..n {
        out.b_u[ch] = p1.hi * b2u[ch] + p2.lo * b1u[ch];
    }

    let prod = Interval::new(p1.lo, p1.hi).mul(&Interval::new(p2.lo, p2.hi));
    out.lo = prod.lo;
    out.hi = prod.hi;
    Ok(out)
}

/// LBF of `k * S` for the factor sandwich `p`: `k >= 0` keeps the LBF,
/// `k < 0` flips to the UBF (linear propagation rule).
fn pick<T: Real>(p: &MultiBoundPair<T>, k: T) -> (T, Vec<T>) {
    if k >= T::zero() {
        (p.a_l, p.b_l.clone())
    } else {
        (p.a_u, p.b_u.clone())
    }
}

fn pick_upper<T: Real>(p: &MultiBoundPair<T>, k: T) -> (T, Vec<T>) {
    if k >= T::zero() {
        (p.a_u, p.b_u.clone())
    } else {
        (p.a_l, p.b_l.clone())
    }
}

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf { channel: usize, psi: Psi<T> },
    Sum { terms: Vec<(T, Node<T>)> },
    Prod { left: Box<Node<T>>, right: Box<Node<T>> },
}

/// A kernel together with its bounded decomposition, flattened into leaf
/// channels and a composition tree.
#[derive(Debug, Clone)]
pub struct Decomposition<T> {
    channels: Vec<PhiChannel<T>>,
    root: Node<T>,
    dim: usize,
}

/// Per-anchor bound data for one region: the affine sandwiches of the kernel
/// in channel space, the channel boxes, and affine-in-`x` relaxations of each
/// channel, ready for assembly into the variance programs.
#[derive(Debug, Clone)]
pub struct RegionKernelBounds<T> {
    pub pairs: Vec<MultiBoundPair<T>>,
    /// `[anchor][channel]` range of `φ_ch(x, anchor)` over the region.
    pub phi_boxes: Vec<Vec<(T, T)>>,
    /// `[anchor][channel]` affine sandwich of `φ_ch(·, anchor)`.
    pub phi_affine: Vec<Vec<AffineSandwich<T>>>,
    pub n_channels: usize,
}

impl<T: Real> Decomposition<T> {
    pub fn new(spec: &KernelSpec<T>) -> Result<Self> {
        let dim = spec.dim()?;
        let mut channels = Vec::new();
        let root = build_node(spec, &mut channels)?;
        Ok(Self { channels, root, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[PhiChannel<T>] {
        &self.channels
    }

    /// Kernel value computed through the decomposition (`ψ ∘ φ` at each
    /// leaf, composed through the tree).
    pub fn eval(&self, x: &[T], anchor: &[T]) -> T {
        eval_node(&self.root, &self.channels, x, anchor)
    }

    /// Affine sandwich and enclosure of `Σ_{x,anchor}` over the region.
    pub fn anchored_pair(&self, anchor: &[T], region: &Region<T>) -> MultiBoundPair<T> {
        anchored_node(&self.root, &self.channels, anchor, region)
    }

    /// Everything the variance programs need for a set of anchors.
    pub fn region_bounds(&self, anchors: &Mat<T>, region: &Region<T>) -> RegionKernelBounds<T> {
        let n = anchors.rows();
        let nch = self.channels.len();
        let mut pairs = Vec::with_capacity(n);
        let mut phi_boxes = Vec::with_capacity(n);
        let mut phi_affine = Vec::with_capacity(n);
        for i in 0..n {
            let anchor = anchors.row(i);
            pairs.push(self.anchored_pair(anchor, region));
            let boxes: Vec<(T, T)> =
                self.channels.iter().map(|ch| ch.range(anchor, region)).collect();
            let affine: Vec<AffineSandwich<T>> =
                self.channels.iter().map(|ch| ch.affine_sandwich(anchor, region)).collect();
            phi_boxes.push(boxes);
            phi_affine.push(affine);
        }
        RegionKernelBounds { pairs, phi_boxes, phi_affine, n_channels: nch }
    }

    /// The per-anchor sandwiches alone, for the mean bound and the
    /// large-model variance route (skips the per-dimension affine
    /// relaxations the dense programs would need).
    pub fn region_pairs_only(&self, anchors: &Mat<T>, region: &Region<T>) -> RegionKernelBounds<T> {
        let n = anchors.rows();
        let pairs = (0..n).map(|i| self.anchored_pair(anchors.row(i), region)).collect();
        RegionKernelBounds {
            pairs,
            phi_boxes: Vec::new(),
            phi_affine: Vec::new(),
            n_channels: self.channels.len(),
        }
    }

    /// `U` for channel `ch`: upper bound on `sup_x Σ_i coeffs_i φ_ch(x, anchors_i)`.
    pub fn u_bound(&self, ch: usize, coeffs: &[T], anchors: &Mat<T>, region: &Region<T>) -> T {
        self.channels[ch].u_bound(coeffs, anchors, region)
    }

    /// Heuristic maximizer corresponding to [`Self::u_bound`].
    pub fn u_argmax(&self, ch: usize, coeffs: &[T], anchors: &Mat<T>, region: &Region<T>) -> Vec<T> {
        self.channels[ch].u_argmax(coeffs, anchors, region)
    }

    /// Joint bounding function over all channels:
    /// `U(c₁, …) ≥ sup_x Σ_ch Σ_i c_ch[i] φ_ch(x, anchors_i)`.
    ///
    /// Channels whose weighted sums are per-dimension quadratics are merged
    /// and maximised exactly (one parabola per dimension); trigonometric
    /// channels contribute their own suprema. Returns the bound and a
    /// maximizer candidate.
    pub fn u_bound_joint(
        &self,
        coeffs: &[Vec<T>],
        anchors: &Mat<T>,
        region: &Region<T>,
    ) -> (T, Vec<T>) {
        debug_assert_eq!(coeffs.len(), self.channels.len());
        let d = region.dim();
        let mut quad: Option<Vec<(T, T, T)>> = None;
        let mut total = T::zero();
        let mut arg = region.center();
        let mut separate_arg: Option<Vec<T>> = None;
        for (ch, c) in self.channels.iter().zip(coeffs) {
            if c.iter().all(|&v| v == T::zero()) {
                continue;
            }
            match ch.quadratic_profile(c, anchors) {
                Some(profile) => match &mut quad {
                    Some(acc) => {
                        for j in 0..d {
                            acc[j].0 = acc[j].0 + profile[j].0;
                            acc[j].1 = acc[j].1 + profile[j].1;
                            acc[j].2 = acc[j].2 + profile[j].2;
                        }
                    }
                    None => quad = Some(profile),
                },
                None => {
                    total = total + ch.u_bound(c, anchors, region);
                    separate_arg = Some(ch.u_argmax(c, anchors, region));
                }
            }
        }
        if let Some(profile) = quad {
            for (j, &(alpha, beta, gamma)) in profile.iter().enumerate() {
                let (l, h) = region.side(j);
                let f = |x: T| alpha * x * x + beta * x + gamma;
                let mut best = (f(l), l);
                let fh = f(h);
                if fh > best.0 {
                    best = (fh, h);
                }
                if alpha != T::zero() {
                    let vertex = -beta / (T::of(2.0) * alpha);
                    if vertex >= l && vertex <= h {
                        let fv = f(vertex);
                        if fv > best.0 {
                            best = (fv, vertex);
                        }
                    }
                }
                total = total + best.0;
                arg[j] = best.1;
            }
        } else if let Some(sep) = separate_arg {
            arg = sep;
        }
        (total, arg)
    }

    /// Range of the prior diagonal `Σ_{x,x}` over the region. Constant for
    /// stationary kernels.
    pub fn diag_range(&self, region: &Region<T>) -> (T, T) {
        let iv = diag_node(&self.root, &self.channels, region);
        (iv.lo, iv.hi)
    }
}

fn build_node<T: Real>(spec: &KernelSpec<T>, channels: &mut Vec<PhiChannel<T>>) -> Result<Node<T>> {
    let mut push = |ch: PhiChannel<T>| {
        channels.push(ch);
        channels.len() - 1
    };
    Ok(match spec {
        KernelSpec::SquaredExponential { variance, theta } => Node::Leaf {
            channel: push(PhiChannel::SqDist { theta: theta.clone() }),
            psi: Psi::ExpNeg { variance: *variance },
        },
        KernelSpec::RationalQuadratic { variance, theta, alpha } => Node::Leaf {
            channel: push(PhiChannel::SqDist { theta: theta.clone() }),
            psi: Psi::RationalQuadratic { variance: *variance, alpha: *alpha },
        },
        KernelSpec::MaternHalfInteger { variance, theta, p } => Node::Leaf {
            channel: push(PhiChannel::SqDist { theta: theta.clone() }),
            psi: Psi::matern(*variance, *p),
        },
        KernelSpec::Periodic { variance, theta, freq } => Node::Leaf {
            channel: push(PhiChannel::SinSq { theta: theta.clone(), freq: freq.clone() }),
            psi: Psi::ExpNegHalf { variance: *variance },
        },
        KernelSpec::Sum { terms } => {
            let mut parts = Vec::with_capacity(terms.len());
            for term in terms {
                parts.push((term.weight, build_node(&term.kernel, channels)?));
            }
            Node::Sum { terms: parts }
        }
        KernelSpec::Product { factors } => {
            let mut nodes = factors.iter().map(|f| build_node(f, channels)).collect::<Result<Vec<_>>>()?;
            let mut acc = nodes.remove(0);
            for next in nodes {
                acc = Node::Prod { left: Box::new(acc), right: Box::new(next) };
            }
            acc
        }
        KernelSpec::SpectralStationary { components } => {
            let mut terms = Vec::with_capacity(components.len());
            for SpectralComponent { variance, theta, w } in components {
                let se = Node::Leaf {
                    channel: push(PhiChannel::SqDist { theta: theta.clone() }),
                    psi: Psi::ExpNeg { variance: *variance },
                };
                let cos = Node::Leaf {
                    channel: push(PhiChannel::Diff { w: w.clone() }),
                    psi: Psi::Cos,
                };
                terms.push((T::one(), Node::Prod { left: Box::new(se), right: Box::new(cos) }));
            }
            Node::Sum { terms }
        }
        KernelSpec::SpectralNonStationary { components } => {
            let mut terms = Vec::with_capacity(components.len() * 8);
            for NonStationaryComponent { variance, theta, w1, w2 } in components {
                for trig in [Trig::Cos, Trig::Sin] {
                    for (wa, wb) in [(w1, w1), (w1, w2), (w2, w1), (w2, w2)] {
                        let amp = Node::Leaf {
                            channel: push(PhiChannel::SumShift { theta: theta.clone() }),
                            psi: Psi::Exp,
                        };
                        let trig_leaf = Node::Leaf {
                            channel: push(PhiChannel::TrigProd {
                                w_anchor: wb.clone(),
                                w_x: wa.clone(),
                                trig_anchor: trig,
                                trig_x: trig,
                            }),
                            psi: Psi::Identity,
                        };
                        terms.push((
                            *variance,
                            Node::Prod { left: Box::new(amp), right: Box::new(trig_leaf) },
                        ));
                    }
                }
            }
            Node::Sum { terms }
        }
    })
}

fn eval_node<T: Real>(node: &Node<T>, channels: &[PhiChannel<T>], x: &[T], anchor: &[T]) -> T {
    match node {
        Node::Leaf { channel, psi } => psi.value(channels[*channel].eval(x, anchor)),
        Node::Sum { terms } => terms
            .iter()
            .map(|(k, n)| *k * eval_node(n, channels, x, anchor))
            .sum(),
        Node::Prod { left, right } => {
            eval_node(left, channels, x, anchor) * eval_node(right, channels, x, anchor)
        }
    }
}

fn anchored_node<T: Real>(
    node: &Node<T>,
    channels: &[PhiChannel<T>],
    anchor: &[T],
    region: &Region<T>,
) -> MultiBoundPair<T> {
    let nch = channels.len();
    match node {
        Node::Leaf { channel, psi } => {
            let (phi_l, phi_u) = channels[*channel].range(anchor, region);
            let (lline, uline) = psi.bounding_lines(phi_l, phi_u);
            let mut out = MultiBoundPair::zero(nch);
            out.a_l = lline.a;
            out.a_u = uline.a;
            out.b_l[*channel] = lline.b;
            out.b_u[*channel] = uline.b;
            let (lo, hi) = psi.range(phi_l, phi_u);
            out.lo = lo;
            out.hi = hi;
            out
        }
        Node::Sum { terms } => {
            let mut acc = MultiBoundPair::zero(nch);
            for (k, n) in terms {
                let p = anchored_node(n, channels, anchor, region);
                acc = compose_bounds_sum(&acc, &p, T::one(), *k)
                    .expect("weights validated at construction");
            }
            acc
        }
        Node::Prod { left, right } => {
            let p1 = anchored_node(left, channels, anchor, region);
            let p2 = anchored_node(right, channels, anchor, region);
            compose_bounds_product(&p1, &p2).expect("enclosures are ordered by construction")
        }
    }
}

fn diag_node<T: Real>(node: &Node<T>, channels: &[PhiChannel<T>], region: &Region<T>) -> Interval<T> {
    match node {
        Node::Leaf { channel, psi } => {
            let (lo, hi) = diag_phi_range(&channels[*channel], region);
            let (a, b) = psi.range(lo, hi);
            Interval::new(a, b)
        }
        Node::Sum { terms } => terms.iter().fold(Interval::zero(), |acc, (k, n)| {
            acc.add(&diag_node(n, channels, region).scale(*k))
        }),
        Node::Prod { left, right } => {
            diag_node(left, channels, region).mul(&diag_node(right, channels, region))
        }
    }
}

/// Range of `φ(x, x)` over the region.
fn diag_phi_range<T: Real>(ch: &PhiChannel<T>, region: &Region<T>) -> (T, T) {
    match ch {
        // Distance-based channels vanish on the diagonal.
        PhiChannel::SqDist { .. } | PhiChannel::SinSq { .. } | PhiChannel::Diff { .. } => {
            (T::zero(), T::zero())
        }
        PhiChannel::SumShift { theta } => {
            let mut lo = T::zero();
            let mut hi = T::zero();
            for j in 0..theta.len() {
                let (l, h) = region.side(j);
                let two = T::of(2.0);
                if theta[j] >= T::zero() {
                    lo = lo + two * theta[j] * l;
                    hi = hi + two * theta[j] * h;
                } else {
                    lo = lo + two * theta[j] * h;
                    hi = hi + two * theta[j] * l;
                }
            }
            (lo, hi)
        }
        PhiChannel::TrigProd { w_anchor, w_x, trig_anchor, trig_x } => {
            // trig(xᵀw_x)·trig(xᵀw_a) with the same x on both sides: use the
            // product-to-sum identity on the linear forms A = xᵀw_x, B = xᵀw_a.
            use super::psi::cos_range;
            let d = region.dim();
            let diff: Vec<T> = (0..d).map(|j| w_x[j] - w_anchor[j]).collect();
            let sum: Vec<T> = (0..d).map(|j| w_x[j] + w_anchor[j]).collect();
            let lr = |w: &[T]| {
                let mut lo = T::zero();
                let mut hi = T::zero();
                for j in 0..d {
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
            };
            let (dl, dh) = lr(&diff);
            let (sl, sh) = lr(&sum);
            let cd = cos_range(dl, dh);
            let cs = cos_range(sl, sh);
            let half = T::of(0.5);
            debug_assert_eq!(trig_anchor, trig_x);
            match trig_x {
                // cos A cos B = (cos(A-B) + cos(A+B))/2
                Trig::Cos => (half * (cd.0 + cs.0), half * (cd.1 + cs.1)),
                // sin A sin B = (cos(A-B) - cos(A+B))/2
                Trig::Sin => (half * (cd.0 - cs.1), half * (cd.1 - cs.0)),
            }
        }
    }
}
