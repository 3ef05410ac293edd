//! From moment bounds to prediction-range bounds.
//!
//! Binary links get analytic bounds (the probit in closed form, the logistic
//! through quadrature at the same extremal corners). The generic route
//! discretises the latent space into cells of equal link mass, bounds the
//! Gaussian mass of each cell from the moment box, and weights by the link
//! values at cell corners; the multi-class version conditions each latent on
//! the higher ones with interval arithmetic first.

use crate::bounds::MomentBounds;
use crate::error::{Error, Result};
use crate::interval::{dot_intervals, solve_interval_system, Interval};
use crate::model::{predictive_binary, Link};
use crate::quadrature::GaussHermite;
use crate::real::{erf, logit, sigmoid, std_normal_cdf, std_normal_quantile, Real};
use serde::{Deserialize, Serialize};

/// Certified range information for one class over a region:
/// `pi_min_lo ≤ min π ≤ pi_min_hi` and `pi_max_lo ≤ max π ≤ pi_max_hi`.
/// The inner two values are under-approximations obtained by evaluating
/// witness points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RangeBounds<T> {
    pub pi_min_lo: T,
    pub pi_min_hi: T,
    pub pi_max_lo: T,
    pub pi_max_hi: T,
    pub min_witness: Option<Vec<T>>,
    pub max_witness: Option<Vec<T>>,
}

impl<T: Real> RangeBounds<T> {
    /// Vacuous bounds before any computation.
    pub fn vacuous() -> Self {
        Self {
            pi_min_lo: T::zero(),
            pi_min_hi: T::one(),
            pi_max_lo: T::zero(),
            pi_max_hi: T::one(),
            min_witness: None,
            max_witness: None,
        }
    }

    /// Tightens the under-approximations with an observed value `π(x)`.
    pub fn observe(&mut self, x: &[T], value: T) {
        if value < self.pi_min_hi {
            self.pi_min_hi = value;
            self.min_witness = Some(x.to_vec());
        }
        if value > self.pi_max_lo {
            self.pi_max_lo = value;
            self.max_witness = Some(x.to_vec());
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.pi_min_lo <= self.pi_min_hi
            && self.pi_max_lo <= self.pi_max_hi
            && self.pi_min_lo <= self.pi_max_hi
    }
}

/// Variance corner selectors shared by the probit and logistic bounds:
/// the minimising corner pairs `μ^L` with `Σ^U` when `μ^L ≥ 0` and with
/// `Σ^L` otherwise; the maximising corner mirrors it.
fn variance_corners<T: Real>(mu_lo: T, mu_hi: T, var_lo: T, var_hi: T) -> (T, T) {
    let var_for_min = if mu_lo >= T::zero() { var_hi } else { var_lo };
    let var_for_max = if mu_hi >= T::zero() { var_lo } else { var_hi };
    (var_for_min, var_for_max)
}

/// Analytic probit range bounds: `(π^L_min, π^U_max)`.
pub fn probit_range_bounds<T: Real>(
    mu_lo: T,
    mu_hi: T,
    var_lo: T,
    var_hi: T,
    lambda: T,
) -> (T, T) {
    let (vmin, vmax) = variance_corners(mu_lo, mu_hi, var_lo, var_hi);
    let lo = std_normal_cdf(mu_lo / (lambda.powi(-2) + vmin.max(T::zero())).sqrt());
    let hi = std_normal_cdf(mu_hi / (lambda.powi(-2) + vmax.max(T::zero())).sqrt());
    (lo, hi)
}

/// Logistic range bounds: the extrema sit at the same moment corners as the
/// probit; the integral is evaluated by Gauss–Hermite quadrature.
pub fn logistic_range_bounds<T: Real>(
    mu_lo: T,
    mu_hi: T,
    var_lo: T,
    var_hi: T,
    gh: &GaussHermite<T>,
) -> (T, T) {
    let (vmin, vmax) = variance_corners(mu_lo, mu_hi, var_lo, var_hi);
    let lo = predictive_binary(Link::Logistic, mu_lo, vmin, gh);
    let hi = predictive_binary(Link::Logistic, mu_hi, vmax, gh);
    (lo, hi)
}

/// Range bounds for either binary link from a moment box.
pub fn binary_range_bounds<T: Real>(
    link: Link<T>,
    mu_lo: T,
    mu_hi: T,
    var_lo: T,
    var_hi: T,
    gh: &GaussHermite<T>,
) -> (T, T) {
    match link {
        Link::Probit { lambda } => probit_range_bounds(mu_lo, mu_hi, var_lo, var_hi, lambda),
        Link::Logistic => logistic_range_bounds(mu_lo, mu_hi, var_lo, var_hi, gh),
    }
}

/// A partition of the one-dimensional latent space into `M` contiguous
/// cells of equal link mass. `breaks` has `M + 1` entries starting at `-∞`
/// and ending at `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPartition<T> {
    breaks: Vec<T>,
}

impl<T: Real> LatentPartition<T> {
    pub fn cells(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn cell(&self, l: usize) -> (T, T) {
        (self.breaks[l], self.breaks[l + 1])
    }

    pub fn breaks(&self) -> &[T] {
        &self.breaks
    }
}

/// Inverse of the link function, mapping a probability back to the latent
/// axis.
fn link_inverse<T: Real>(link: Link<T>, p: T) -> T {
    match link {
        Link::Probit { lambda } => std_normal_quantile(p) / lambda,
        Link::Logistic => logit(p),
    }
}

fn link_value<T: Real>(link: Link<T>, xi: T) -> T {
    if xi == T::neg_infinity() {
        return T::zero();
    }
    if xi == T::infinity() {
        return T::one();
    }
    match link {
        Link::Probit { lambda } => std_normal_cdf(lambda * xi),
        Link::Logistic => sigmoid(xi),
    }
}

/// Builds the `M`-cell partition with breakpoints `σ⁻¹(l/M)`: every cell
/// carries link mass exactly `1/M`.
pub fn build_partition<T: Real>(cells: usize, link: Link<T>) -> LatentPartition<T> {
    assert!(cells >= 1);
    let mut breaks = Vec::with_capacity(cells + 1);
    breaks.push(T::neg_infinity());
    for l in 1..cells {
        breaks.push(link_inverse(link, T::of(l as f64 / cells as f64)));
    }
    breaks.push(T::infinity());
    LatentPartition { breaks }
}

/// Partition sized for a target discretisation error: `M = ⌈2/ε⌉`.
pub fn build_partition_for_eps<T: Real>(eps: T, link: Link<T>) -> LatentPartition<T> {
    assert!(eps > T::zero());
    let m = (T::of(2.0) / eps).ceil().to_f64_lossy() as usize;
    build_partition(m.max(1), link)
}

/// Lower and upper bounds on `∫_a^b N(ξ|μ,Σ) dξ` over a moment box
/// `μ ∈ [mu_lo, mu_hi]`, `Σ ∈ [var_lo, var_hi]`. Infinite cell ends are
/// allowed.
pub fn gaussian_integral_extrema<T: Real>(
    mu_lo: T,
    mu_hi: T,
    var_lo: T,
    var_hi: T,
    a: T,
    b: T,
) -> Result<(T, T)> {
    if !(a < b) {
        return Err(Error::InvalidParameter {
            name: "cell",
            reason: format!("cell [{a}, {b}] must have a < b"),
        });
    }
    if a == T::neg_infinity() && b == T::infinity() {
        return Ok((T::one(), T::one()));
    }
    let var_lo = var_lo.max(T::of(1e-300));
    let var_hi = var_hi.max(var_lo);

    // Minimum: the mean endpoint farthest from the cell midpoint, paired
    // with the worse of the two variance endpoints.
    let mu_min = if a == T::neg_infinity() {
        mu_hi // integral decreasing in μ
    } else if b == T::infinity() {
        mu_lo
    } else {
        let mu_c = (a + b) * T::of(0.5);
        if (mu_c - mu_lo).abs() >= (mu_hi - mu_c).abs() {
            mu_lo
        } else {
            mu_hi
        }
    };
    let lo = gauss_mass(mu_min, var_lo, a, b).min(gauss_mass(mu_min, var_hi, a, b));

    // Maximum: the admissible mean closest to the cell midpoint; variance at
    // Σ^L inside the cell, otherwise at the critical variance clamped.
    let mu_max = if a == T::neg_infinity() {
        mu_lo
    } else if b == T::infinity() {
        mu_hi
    } else {
        let mu_c = (a + b) * T::of(0.5);
        mu_c.max(mu_lo).min(mu_hi)
    };
    let inside = a <= mu_max && mu_max <= b;
    let var_max = if inside {
        var_lo
    } else {
        let crit = critical_variance(mu_max, a, b);
        crit.max(var_lo).min(var_hi)
    };
    let hi = gauss_mass(mu_max, var_max, a, b);
    Ok((lo.max(T::zero()), hi.min(T::one())))
}

/// `Σ^c(μ) = ((μ−a)² − (μ−b)²) / (2 ln((μ−a)/(μ−b)))` for `μ ∉ [a, b]`,
/// with `+∞` when either cell end is infinite.
fn critical_variance<T: Real>(mu: T, a: T, b: T) -> T {
    if a == T::neg_infinity() || b == T::infinity() {
        return T::infinity();
    }
    let da = mu - a;
    let db = mu - b;
    let ratio = da / db;
    if !(ratio > T::zero()) || ratio == T::one() {
        return T::infinity();
    }
    (da * da - db * db) / (T::of(2.0) * ratio.ln())
}

/// `∫_a^b N(ξ|μ,Σ) dξ` via the error function; exact limits for infinite
/// cell ends.
pub fn gauss_mass<T: Real>(mu: T, var: T, a: T, b: T) -> T {
    let denom = (T::of(2.0) * var.max(T::of(1e-300))).sqrt();
    let ea = if a == T::neg_infinity() { T::one() } else { erf((mu - a) / denom) };
    let eb = if b == T::infinity() { -T::one() } else { erf((mu - b) / denom) };
    ((ea - eb) * T::of(0.5)).max(T::zero()).min(T::one())
}

/// Binary discretised range bounds (`(π^L_min, π^U_max)`): cell masses are
/// bounded by [`gaussian_integral_extrema`] and weighted by the link value
/// at the lower (respectively upper) cell end.
pub fn discretized_binary_range_bounds<T: Real>(
    link: Link<T>,
    mu_lo: T,
    mu_hi: T,
    var_lo: T,
    var_hi: T,
    partition: &LatentPartition<T>,
) -> Result<(T, T)> {
    let mut lo = T::zero();
    let mut hi = T::zero();
    for l in 0..partition.cells() {
        let (a, b) = partition.cell(l);
        let (mass_lo, mass_hi) = gaussian_integral_extrema(mu_lo, mu_hi, var_lo, var_hi, a, b)?;
        lo = lo + link_value(link, a) * mass_lo;
        hi = hi + link_value(link, b) * mass_hi;
    }
    Ok((lo.max(T::zero()).min(T::one()), hi.max(T::zero()).min(T::one())))
}

/// Interval enclosure of the conditional mean and variance of latent `i`
/// given the higher latents constrained to `cell_tail` (the coordinates
/// `i+1..m` of a latent cell). Uses preconditioned interval Gaussian
/// elimination; fails when the covariance interval matrix cannot be proven
/// regular, which signals the region must be split.
pub fn conditional_moment_bounds<T: Real>(
    mb: &MomentBounds<T>,
    cell_tail: &[(T, T)],
    class: usize,
) -> Result<(Interval<T>, Interval<T>)> {
    let m = mb.mean_lo.len();
    let k = cell_tail.len();
    assert_eq!(class + 1 + k, m, "tail must cover latents {}..{}", class + 1, m);
    let mean_i = Interval::new(mb.mean_lo[class], mb.mean_hi[class]);
    let var_i = Interval::new(mb.var_lo[class], mb.var_hi[class]);
    if k == 0 {
        return Ok((mean_i, var_i));
    }
    for &(a, b) in cell_tail {
        if a == T::neg_infinity() || b == T::infinity() {
            return Err(Error::Unsupported(
                "conditional moments need finite tail cells".into(),
            ));
        }
    }
    let idx = |j: usize| class + 1 + j;
    // Off-diagonal covariance rows come from the cross enclosures; the
    // diagonal from the variance bounds.
    let cov = |a: usize, b: usize| {
        if a == b {
            Interval::new(mb.var_lo[a], mb.var_hi[a])
        } else {
            let (lo, hi) = mb.cross[a][b];
            Interval::new(lo.min(hi), lo.max(hi))
        }
    };
    let a_mat: Vec<Vec<Interval<T>>> =
        (0..k).map(|r| (0..k).map(|c| cov(idx(r), idx(c))).collect()).collect();
    let row_i: Vec<Interval<T>> = (0..k).map(|c| cov(class, idx(c))).collect();

    // μ^f_i = μ_i − Σ_{i,I} Σ_{I,I}^{-1} (f_I − μ_I).
    let rhs_mean: Vec<Interval<T>> = (0..k)
        .map(|j| {
            let f = Interval::new(cell_tail[j].0, cell_tail[j].1);
            f.sub(&Interval::new(mb.mean_lo[idx(j)], mb.mean_hi[idx(j)]))
        })
        .collect();
    let w = solve_interval_system(&a_mat, &rhs_mean)?;
    let mean_f = mean_i.sub(&dot_intervals(&row_i, &w));

    // Σ^f_i = Σ_{ii} − Σ_{i,I} Σ_{I,I}^{-1} Σ_{I,i}, floored at 1e-12.
    let u = solve_interval_system(&a_mat, &row_i)?;
    let var_raw = var_i.sub(&dot_intervals(&row_i, &u));
    let floor = T::of(1e-12);
    let var_f = Interval::new(var_raw.lo.max(floor), var_raw.hi.max(floor));
    Ok((mean_f, var_f))
}

/// Softmax component `i` at a latent corner, with `±∞` coordinate limits.
pub fn softmax_at_corner<T: Real>(xi: &[T], class: usize) -> T {
    if xi[class] == T::neg_infinity() {
        return T::zero();
    }
    let mut denom = T::one();
    for (k, &v) in xi.iter().enumerate() {
        if k == class {
            continue;
        }
        if v == T::infinity() {
            if xi[class] == T::infinity() {
                // Tie between infinite coordinates: split mass evenly among
                // them (conservative only for corner evaluation; does not
                // occur with the partitions built here, whose cells never
                // put +∞ on two coordinates of the same corner).
                let ties =
                    xi.iter().filter(|&&u| u == T::infinity()).count();
                return T::one() / T::of(ties as f64);
            }
            return T::zero();
        }
        if xi[class] == T::infinity() {
            continue; // e^{v - ∞} = 0
        }
        denom = denom + (v - xi[class]).exp();
    }
    denom.recip()
}

/// Multi-class discretised bounds `(π^L_min, π^U_max)` for one class from a
/// per-coordinate latent partition (cells form the `M^m` product grid, with
/// a cap). Follows the conditioning order: the last latent is bounded
/// marginally, each earlier one conditionally on the higher ones.
pub fn multiclass_range_bounds<T: Real>(
    mb: &MomentBounds<T>,
    partition: &LatentPartition<T>,
    class: usize,
    cell_cap: usize,
) -> Result<(T, T)> {
    let m = mb.mean_lo.len();
    assert!(class < m);
    let per_dim = partition.cells();
    let total = per_dim.checked_pow(m as u32).unwrap_or(usize::MAX);
    if total > cell_cap {
        return Err(Error::PartitionTooLarge { cells: total, cap: cell_cap });
    }
    let mut lo = T::zero();
    let mut hi = T::zero();
    let mut idx = vec![0usize; m];
    loop {
        let cell: Vec<(T, T)> = (0..m).map(|c| partition.cell(idx[c])).collect();

        // Softmax monotonicity picks the corners: the minimising corner
        // takes the lower end at `class` and upper ends elsewhere; the
        // maximising corner flips.
        let corner_min: Vec<T> =
            (0..m).map(|c| if c == class { cell[c].0 } else { cell[c].1 }).collect();
        let corner_max: Vec<T> =
            (0..m).map(|c| if c == class { cell[c].1 } else { cell[c].0 }).collect();
        let w_min = softmax_at_corner(&corner_min, class);
        let w_max = softmax_at_corner(&corner_max, class);

        let (mass_lo, mass_hi) = cell_mass_bounds(mb, &cell)?;
        lo = lo + w_min * mass_lo;
        hi = hi + w_max * mass_hi;

        // Advance the mixed-radix counter.
        let mut c = 0;
        loop {
            idx[c] += 1;
            if idx[c] < per_dim {
                break;
            }
            idx[c] = 0;
            c += 1;
            if c == m {
                return Ok((lo.max(T::zero()).min(T::one()), hi.max(T::zero()).min(T::one())));
            }
        }
    }
}

/// Bounds on the Gaussian mass of a latent cell from the moment box, as the
/// product of the outermost marginal mass and the conditional masses of the
/// lower coordinates.
fn cell_mass_bounds<T: Real>(mb: &MomentBounds<T>, cell: &[(T, T)]) -> Result<(T, T)> {
    let m = cell.len();
    let last = m - 1;
    let (mut lo, mut hi) = gaussian_integral_extrema(
        mb.mean_lo[last],
        mb.mean_hi[last],
        mb.var_lo[last],
        mb.var_hi[last],
        cell[last].0,
        cell[last].1,
    )?;
    hi = hi.min(T::one());
    for i in (0..last).rev() {
        let tail = &cell[i + 1..];
        let factor = match conditional_moment_bounds(mb, tail, i) {
            Ok((mean_f, var_f)) => gaussian_integral_extrema(
                mean_f.lo,
                mean_f.hi,
                var_f.lo,
                var_f.hi,
                cell[i].0,
                cell[i].1,
            )?,
            // Tail cell touching infinity: the conditional mass of a finite
            // or infinite cell is still within [0, 1].
            Err(Error::Unsupported(_)) => (T::zero(), T::one()),
            Err(e) => return Err(e),
        };
        lo = lo * factor.0.max(T::zero());
        hi = hi * factor.1.min(T::one());
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::MomentBounds;
    use crate::model::GH_NODES;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn probit_examples() {
        // μ^L = 0: Φ(0) = 1/2 regardless of the variance pick.
        let (lo, _) = probit_range_bounds(0.0, 1.0, 0.3, 2.0, 1.0);
        assert_relative_eq!(lo, 0.5, epsilon = 1e-14);
        // Point moments: both sides Φ(1).
        let (lo, hi) = probit_range_bounds(1.0, 1.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(lo, 0.8413447460685429, epsilon = 1e-12);
        assert_relative_eq!(hi, 0.8413447460685429, epsilon = 1e-12);
        // Negative μ^L pairs with Σ^L: Φ(−1/√(1+3)) = Φ(−1/2).
        let (lo, _) = probit_range_bounds(-1.0, 0.5, 3.0, 9.0, 1.0);
        assert_relative_eq!(lo, 0.3085375387259869, epsilon = 1e-12);
    }

    #[test]
    fn logistic_examples_and_corner_property() {
        let gh = GaussHermite::new(GH_NODES);
        let (lo, _) = logistic_range_bounds(0.0, 1.0, 0.2, 0.9, &gh);
        assert_relative_eq!(lo, 0.5, epsilon = 1e-10);
        let (lo, _) = logistic_range_bounds(2.0, 3.0, 0.0, 0.0, &gh);
        assert_relative_eq!(lo, sigmoid(2.0), epsilon = 1e-10);
        // Grid check: Π over the (μ, Σ) box attains its extrema at the
        // claimed corners.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let mu_lo = rng.gen_range(-3.0..2.0);
            let mu_hi = mu_lo + rng.gen_range(0.1..2.0);
            let v_lo = rng.gen_range(0.01..2.0);
            let v_hi = v_lo + rng.gen_range(0.1..3.0);
            let (lo, hi) = logistic_range_bounds(mu_lo, mu_hi, v_lo, v_hi, &gh);
            for i in 0..=50 {
                for j in 0..=50 {
                    let mu = mu_lo + (mu_hi - mu_lo) * i as f64 / 50.0;
                    let v = v_lo + (v_hi - v_lo) * j as f64 / 50.0;
                    let val = predictive_binary(Link::Logistic, mu, v, &gh);
                    assert!(lo <= val + 1e-9, "min corner violated");
                    assert!(hi >= val - 1e-9, "max corner violated");
                }
            }
        }
    }

    #[test]
    fn partition_breakpoints() {
        let p1 = build_partition(1, Link::<f64>::Logistic);
        assert_eq!(p1.cells(), 1);
        assert_eq!(p1.cell(0), (f64::NEG_INFINITY, f64::INFINITY));

        let p2 = build_partition(2, Link::<f64>::Logistic);
        assert_eq!(p2.breaks()[1], 0.0);

        let p4 = build_partition(4, Link::<f64>::Logistic);
        assert_relative_eq!(p4.breaks()[1], -(3.0f64.ln()), epsilon = 1e-12);
        assert_relative_eq!(p4.breaks()[2], 0.0, epsilon = 1e-12);
        assert_relative_eq!(p4.breaks()[3], 3.0f64.ln(), epsilon = 1e-12);

        // ε → M = ⌈2/ε⌉.
        let p = build_partition_for_eps(0.01, Link::<f64>::Logistic);
        assert_eq!(p.cells(), 200);
    }

    #[test]
    fn gaussian_integral_examples() {
        // Point moments, standard cell: mass within ±1σ.
        let (lo, hi) = gaussian_integral_extrema(0.0, 0.0, 1.0, 1.0, -1.0, 1.0).unwrap();
        let expected = erf(1.0 / 2.0f64.sqrt());
        assert_relative_eq!(lo, expected, epsilon = 1e-12);
        assert_relative_eq!(hi, expected, epsilon = 1e-12);
        // Whole line: exactly one.
        let (lo, hi) =
            gaussian_integral_extrema(0.0, 2.0, 0.5, 3.0, f64::NEG_INFINITY, f64::INFINITY)
                .unwrap();
        assert_eq!((lo, hi), (1.0, 1.0));
        // μ^c inside the admissible range: maximiser is the midpoint.
        let (_, hi) = gaussian_integral_extrema(-1.0, 2.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(hi, gauss_mass(0.5, 1.0, 0.0, 1.0), epsilon = 1e-12);
        assert!(gaussian_integral_extrema(0.0, 1.0, 1.0, 1.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn gaussian_integral_extrema_certify_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for trial in 0..100 {
            let mu_lo = rng.gen_range(-3.0..3.0);
            let mu_hi = mu_lo + rng.gen_range(0.0..2.0);
            let v_lo = rng.gen_range(0.01..2.0);
            let v_hi = v_lo + rng.gen_range(0.0..2.0);
            let a = rng.gen_range(-3.0..2.0);
            let b = a + rng.gen_range(0.05..3.0);
            let (lo, hi) =
                gaussian_integral_extrema(mu_lo, mu_hi, v_lo, v_hi, a, b).unwrap();
            for i in 0..=100 {
                for j in 0..=100 {
                    let mu = mu_lo + (mu_hi - mu_lo) * i as f64 / 100.0;
                    let v = v_lo + (v_hi - v_lo) * j as f64 / 100.0;
                    let mass = gauss_mass(mu, v, a, b);
                    assert!(lo <= mass + 1e-9, "trial {trial}: min {lo} > {mass}");
                    assert!(hi >= mass - 1e-9, "trial {trial}: max {hi} < {mass}");
                }
            }
        }
    }

    #[test]
    fn discretized_binary_examples() {
        let link = Link::<f64>::Logistic;
        // M = 1 is vacuous: σ(-∞)·mass = 0 and σ(∞)·mass = 1.
        let p = build_partition(1, link);
        let (lo, hi) = discretized_binary_range_bounds(link, 0.0, 0.0, 1.0, 1.0, &p).unwrap();
        assert_eq!((lo, hi), (0.0, 1.0));
        // Point moments, M = 100: within 1/M of the exact value.
        let gh = GaussHermite::new(GH_NODES);
        let p = build_partition(100, link);
        let exact = predictive_binary(link, 0.7, 0.9, &gh);
        let (lo, hi) = discretized_binary_range_bounds(link, 0.7, 0.7, 0.9, 0.9, &p).unwrap();
        assert!(lo <= exact && exact <= hi);
        assert!(exact - lo <= 0.02, "lower gap {}", exact - lo);
        assert!(hi - exact <= 0.02, "upper gap {}", hi - exact);
    }

    #[test]
    fn discretization_rate_is_one_over_m() {
        // With exact point moments the bound gap is exactly 1/M (the cells
        // partition the mass and the corner weights differ by 1/M).
        let link = Link::<f64>::Logistic;
        for m in [10usize, 100, 1000] {
            let p = build_partition(m, link);
            let (lo, hi) =
                discretized_binary_range_bounds(link, 0.3, 0.3, 1.2, 1.2, &p).unwrap();
            assert!(hi - lo <= 1.0 / m as f64 + 1e-9, "M={m}: gap {}", hi - lo);
        }
    }

    #[test]
    fn probit_dominates_discretized() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let link = Link::Probit { lambda: 1.0 };
        let p = build_partition(100, link);
        for _ in 0..50 {
            let mu_lo = rng.gen_range(-2.0..2.0);
            let mu_hi = mu_lo + rng.gen_range(0.0..1.0);
            let v_lo = rng.gen_range(0.01..1.0);
            let v_hi = v_lo + rng.gen_range(0.0..1.0);
            let (alo, ahi) = probit_range_bounds(mu_lo, mu_hi, v_lo, v_hi, 1.0);
            let (dlo, dhi) =
                discretized_binary_range_bounds(link, mu_lo, mu_hi, v_lo, v_hi, &p).unwrap();
            assert!(alo >= dlo - 1e-9, "analytic lower looser: {alo} < {dlo}");
            assert!(ahi <= dhi + 1e-9, "analytic upper looser: {ahi} > {dhi}");
        }
    }

    fn diag_moments(mean: &[f64], var: &[f64]) -> MomentBounds<f64> {
        let m = mean.len();
        let mut cross = vec![vec![(0.0, 0.0); m]; m];
        for i in 0..m {
            cross[i][i] = (var[i], var[i]);
        }
        MomentBounds {
            mean_lo: mean.to_vec(),
            mean_hi: mean.to_vec(),
            var_lo: var.to_vec(),
            var_hi: var.to_vec(),
            cross,
        }
    }

    #[test]
    fn conditional_moments_reduce_to_marginal_when_independent() {
        let mb = diag_moments(&[0.3, -0.2, 1.0], &[0.5, 0.7, 0.4]);
        let (mean_f, var_f) = conditional_moment_bounds(&mb, &[(-1.0, 1.0), (0.0, 2.0)], 0).unwrap();
        assert_relative_eq!(mean_f.lo, 0.3, epsilon = 1e-12);
        assert_relative_eq!(mean_f.hi, 0.3, epsilon = 1e-12);
        assert_relative_eq!(var_f.lo, 0.5, epsilon = 1e-12);
        assert_relative_eq!(var_f.hi, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn conditional_moments_match_closed_form_bivariate() {
        // Degenerate intervals: conditioning a bivariate Gaussian.
        let mean = [1.0, -0.5];
        let var = [2.0, 1.5];
        let c01 = 0.8;
        let mut mb = diag_moments(&mean, &var);
        mb.cross[0][1] = (c01, c01);
        mb.cross[1][0] = (c01, c01);
        let f = (0.25, 0.25); // f_1 pinned
        let (mean_f, var_f) = conditional_moment_bounds(&mb, &[f], 0).unwrap();
        let expect_mean = mean[0] - c01 / var[1] * (f.0 - mean[1]);
        let expect_var = var[0] - c01 * c01 / var[1];
        assert_relative_eq!(mean_f.lo, expect_mean, epsilon = 1e-10);
        assert_relative_eq!(mean_f.hi, expect_mean, epsilon = 1e-10);
        assert_relative_eq!(var_f.lo, expect_var, epsilon = 1e-10);
        assert_relative_eq!(var_f.hi, expect_var, epsilon = 1e-10);
    }

    #[test]
    fn conditional_moments_enclose_samples() {
        // Interval-widened moments must contain the true conditional moments
        // for every concrete (moment, f) selection sampled from the box.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let mut mb = diag_moments(&[0.2, -0.1], &[1.0, 0.8]);
        mb.mean_lo[0] -= 0.1;
        mb.mean_hi[0] += 0.1;
        mb.var_lo[1] -= 0.1;
        mb.var_hi[1] += 0.1;
        mb.cross[0][1] = (0.2, 0.4);
        mb.cross[1][0] = (0.2, 0.4);
        let tail = (0.0, 0.5);
        let (mean_f, var_f) = conditional_moment_bounds(&mb, &[tail], 0).unwrap();
        for _ in 0..1000 {
            let mu0 = rng.gen_range(mb.mean_lo[0]..=mb.mean_hi[0]);
            let mu1 = -0.1;
            let v0 = 1.0;
            let v1 = rng.gen_range(mb.var_lo[1]..=mb.var_hi[1]);
            let c = rng.gen_range(0.2..=0.4);
            let f = rng.gen_range(tail.0..=tail.1);
            let cm = mu0 - c / v1 * (f - mu1);
            let cv = v0 - c * c / v1;
            assert!(mean_f.lo - 1e-9 <= cm && cm <= mean_f.hi + 1e-9);
            assert!(var_f.lo - 1e-9 <= cv && cv <= var_f.hi + 1e-9);
        }
    }

    #[test]
    fn softmax_corner_limits() {
        let inf = f64::INFINITY;
        assert_eq!(softmax_at_corner(&[-inf, 0.0, 0.0], 0), 0.0);
        assert_eq!(softmax_at_corner(&[0.0, inf, 0.0], 0), 0.0);
        assert_relative_eq!(softmax_at_corner(&[inf, 0.0, 0.0], 0), 1.0);
        assert_relative_eq!(softmax_at_corner(&[0.0, 0.0, 0.0], 0), 1.0 / 3.0, epsilon = 1e-12);
        // Corner rule for class 0: a at coordinate 0, b elsewhere.
        let s = softmax_at_corner(&[-1.0, 2.0, 2.0], 0);
        assert!(s < 1.0 / 3.0);
    }

    #[test]
    fn multiclass_symmetric_straddles_third() {
        let mb = diag_moments(&[0.0, 0.0, 0.0], &[0.5, 0.5, 0.5]);
        let p = build_partition(8, Link::<f64>::Logistic);
        let (lo, hi) = multiclass_range_bounds(&mb, &p, 0, 100_000).unwrap();
        assert!(lo <= 1.0 / 3.0 && 1.0 / 3.0 <= hi, "[{lo}, {hi}] misses 1/3");
        assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        assert!(lo <= hi);
    }

    #[test]
    fn multiclass_cell_cap_enforced() {
        let mb = diag_moments(&[0.0, 0.0, 0.0], &[0.5, 0.5, 0.5]);
        let p = build_partition(50, Link::<f64>::Logistic);
        assert!(matches!(
            multiclass_range_bounds(&mb, &p, 0, 1000),
            Err(Error::PartitionTooLarge { .. })
        ));
    }

    #[test]
    fn multiclass_bounds_contain_mc_estimate() {
        // Exact point moments with mild correlation; Monte-Carlo oracle.
        let mut mb = diag_moments(&[0.4, -0.3, 0.1], &[0.6, 0.5, 0.7]);
        mb.cross[0][1] = (0.1, 0.1);
        mb.cross[1][0] = (0.1, 0.1);
        let p = build_partition(16, Link::<f64>::Logistic);
        let (lo, hi) = multiclass_range_bounds(&mb, &p, 1, 100_000).unwrap();
        // MC estimate of π_1 for the point Gaussian.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let l = [
            [0.6f64.sqrt(), 0.0, 0.0],
            [
                0.1 / 0.6f64.sqrt(),
                (0.5 - 0.01 / 0.6f64).sqrt(),
                0.0,
            ],
            [0.0, 0.0, 0.7f64.sqrt()],
        ];
        let mut acc = 0.0;
        let n = 200_000;
        for _ in 0..n {
            let z: Vec<f64> = (0..3)
                .map(|_| {
                    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                    let u2: f64 = rng.gen();
                    (-2.0 * u1.ln()).sqrt() * (core::f64::consts::TAU * u2).cos()
                })
                .collect();
            let mean = [0.4, -0.3, 0.1];
            let mut xi = [0.0; 3];
            for i in 0..3 {
                xi[i] = mean[i];
                for j in 0..3 {
                    xi[i] += l[i][j] * z[j];
                }
            }
            let mx = xi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = xi.iter().map(|v| (v - mx).exp()).collect();
            acc += e[1] / e.iter().sum::<f64>();
        }
        let mc = acc / n as f64;
        assert!(lo - 3e-3 <= mc && mc <= hi + 3e-3, "MC {mc} outside [{lo}, {hi}]");
    }

    #[test]
    fn range_bounds_observe_updates_witnesses() {
        let mut rb = RangeBounds::<f64>::vacuous();
        rb.pi_min_lo = 0.2;
        rb.pi_max_hi = 0.9;
        rb.observe(&[1.0], 0.5);
        rb.observe(&[2.0], 0.4);
        assert_eq!(rb.pi_min_hi, 0.4);
        assert_eq!(rb.min_witness.as_deref(), Some(&[2.0][..]));
        assert_eq!(rb.pi_max_lo, 0.5);
        assert!(rb.is_consistent());
    }
}
