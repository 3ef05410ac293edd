//! Anytime branch-and-bound over input boxes.
//!
//! Best-first on the certified bound, midpoint splits along a random (or
//! widest) dimension, under-approximation by evaluating the solver witness
//! points, and ε-termination. The engine works on a minimisation oracle;
//! maximisation runs the same loop on the negated objective.

use crate::bounds::{bound_mean, directed_binary_moments, moment_bounds, Region};
use crate::error::{Error, Result};
use crate::likelihood::{
    build_partition, discretized_binary_range_bounds, multiclass_range_bounds, RangeBounds,
};
use crate::model::{GpModel, Task};
use crate::real::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;
use std::time::Instant;

/// How regions are split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// Split a uniformly chosen dimension at its midpoint.
    Random,
    /// Split the widest dimension at its midpoint.
    WidestDimension,
}

/// Branch-and-bound parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BnbConfig<T> {
    /// Termination gap.
    pub epsilon: T,
    pub max_iterations: usize,
    /// Optional wall-clock budget in seconds (the iteration budget alone
    /// keeps runs deterministic).
    pub max_seconds: Option<f64>,
    pub split_rule: SplitRule,
    /// Latent partition size for the discretised likelihood bounds.
    pub partition_cells: usize,
    /// Use the discretised bounds even for binary links.
    pub force_discretized: bool,
    /// Cap on the number of multi-class latent cells (`M^m`).
    pub cell_cap: usize,
    pub seed: u64,
}

impl<T: Real> Default for BnbConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: T::of(0.01),
            max_iterations: 10_000,
            max_seconds: None,
            split_rule: SplitRule::Random,
            partition_cells: 200,
            force_discretized: false,
            cell_cap: 200_000,
            seed: 0,
        }
    }
}

/// One row of the per-iteration progress stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord<T> {
    pub iter: usize,
    pub lower: T,
    pub upper: T,
    pub regions: usize,
}

/// Result of a branch-and-bound run. The interval `[lower, upper]` is sound
/// at every iteration; `converged` records whether the ε gap was reached
/// within the budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BnbResult<T> {
    pub lower: T,
    pub upper: T,
    pub iterations: usize,
    pub regions_explored: usize,
    pub wall_seconds: f64,
    pub witness: Option<Vec<T>>,
    pub converged: bool,
    pub trace: Vec<IterationRecord<T>>,
}

impl<T: Real> BnbResult<T> {
    pub fn gap(&self) -> T {
        self.upper - self.lower
    }

    /// The same result for the mirrored objective `1 - f` (binary class
    /// complement).
    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        out.lower = T::one() - self.upper;
        out.upper = T::one() - self.lower;
        out.trace = self
            .trace
            .iter()
            .map(|r| IterationRecord {
                iter: r.iter,
                lower: T::one() - r.upper,
                upper: T::one() - r.lower,
                regions: r.regions,
            })
            .collect();
        out
    }
}

/// Splits at the midpoint of a dimension chosen by the rule, skipping
/// zero-width dimensions. Errors on zero-diameter regions.
pub fn split_region<T: Real, R: Rng>(
    region: &Region<T>,
    rule: SplitRule,
    rng: &mut R,
) -> Result<(Region<T>, Region<T>)> {
    let widths: Vec<usize> =
        (0..region.dim()).filter(|&j| region.width(j) > T::zero()).collect();
    if widths.is_empty() {
        return Err(Error::InvalidRegion("cannot split a zero-diameter region".into()));
    }
    let j = match rule {
        SplitRule::Random => widths[rng.gen_range(0..widths.len())],
        SplitRule::WidestDimension => region.widest_dim(),
    };
    Ok(region.split_at(j))
}

/// Witness candidates for a region: the argpoints of the four moment
/// subproblems plus the region centre, all inside the region.
pub fn witness_candidates<T: Real>(
    model: &GpModel<T>,
    region: &Region<T>,
) -> Result<Vec<Vec<T>>> {
    let (_, w) = moment_bounds(model, region)?;
    Ok(w)
}

/// A minimisation problem the engine can branch over.
trait RegionOracle<T: Real> {
    /// Certified lower bound on the objective over the region, plus witness
    /// candidates inside it.
    fn bound(&mut self, region: &Region<T>) -> Result<(T, Vec<Vec<T>>)>;
    /// Exact objective value at a point.
    fn evaluate(&mut self, x: &[T]) -> Result<T>;
}

/// Max-heap entry ordered so the smallest lower bound pops first, FIFO on
/// ties.
struct Entry<T> {
    key: T,
    seq: u64,
    region: Region<T>,
}

impl<T: Real> PartialEq for Entry<T> {
    fn eq(&self, o: &Self) -> bool {
        self.key == o.key && self.seq == o.seq
    }
}
impl<T: Real> Eq for Entry<T> {}
impl<T: Real> PartialOrd for Entry<T> {
    fn partial_cmp(&self, o: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Real> Ord for Entry<T> {
    fn cmp(&self, o: &Self) -> core::cmp::Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the lowest key first;
        // ties break toward the lower sequence number (older entry).
        o.key
            .partial_cmp(&self.key)
            .expect("bound keys must not be NaN")
            .then(o.seq.cmp(&self.seq).reverse())
            .reverse()
    }
}

fn run_minimize<T: Real>(
    oracle: &mut dyn RegionOracle<T>,
    roots: &[Region<T>],
    config: &BnbConfig<T>,
) -> Result<BnbResult<T>> {
    if roots.is_empty() {
        return Err(Error::InvalidRegion("need at least one root box".into()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut heap: BinaryHeap<Entry<T>> = BinaryHeap::new();
    let mut seq = 0u64;
    for root in roots {
        heap.push(Entry { key: T::neg_infinity(), seq, region: root.clone() });
        seq += 1;
    }
    let mut best_upper = T::infinity();
    let mut witness: Option<Vec<T>> = None;
    let mut closed_min = T::infinity();
    let mut best_lower = T::neg_infinity();
    let mut trace = Vec::new();
    let mut iterations = 0usize;
    let mut regions_explored = 0usize;
    let mut converged = false;

    while let Some(entry) = heap.pop() {
        iterations += 1;
        regions_explored += 1;
        let (fresh, candidates) = oracle.bound(&entry.region)?;
        // Both the inherited key and the fresh bound are valid; keep the
        // tighter one.
        let lb = fresh.max(entry.key);
        for cand in &candidates {
            let v = oracle.evaluate(cand)?;
            if v < best_upper {
                best_upper = v;
                witness = Some(cand.clone());
            }
        }
        if best_upper - lb > config.epsilon && entry.region.diam() > T::zero() {
            let (r1, r2) = split_region(&entry.region, config.split_rule, &mut rng)?;
            seq += 1;
            heap.push(Entry { key: lb, seq, region: r1 });
            seq += 1;
            heap.push(Entry { key: lb, seq, region: r2 });
        } else {
            closed_min = closed_min.min(lb);
        }
        let open_min = heap.peek().map_or(T::infinity(), |e| e.key);
        let lower_candidate = open_min.min(closed_min).min(best_upper);
        best_lower = best_lower.max(lower_candidate);
        trace.push(IterationRecord {
            iter: iterations,
            lower: best_lower,
            upper: best_upper,
            regions: heap.len(),
        });
        if best_upper - best_lower <= config.epsilon {
            converged = true;
            break;
        }
        if iterations >= config.max_iterations {
            break;
        }
        if let Some(limit) = config.max_seconds {
            if start.elapsed().as_secs_f64() > limit {
                break;
            }
        }
    }
    if heap.is_empty() && !converged {
        // Everything pruned: the closed minimum is the certified bound.
        best_lower = best_lower.max(closed_min.min(best_upper));
        converged = best_upper - best_lower <= config.epsilon;
    }
    Ok(BnbResult {
        lower: best_lower,
        upper: best_upper,
        iterations,
        regions_explored,
        wall_seconds: start.elapsed().as_secs_f64(),
        witness,
        converged,
        trace,
    })
}

/// Prediction-range objective for one class, expressed as a minimisation.
struct PredictionOracle<'m, T: Real> {
    model: &'m GpModel<T>,
    class: usize,
    /// Objective is `sign · π_class + offset` (so max π = min of `-π`).
    negate: bool,
    config: BnbConfig<T>,
}

impl<T: Real> PredictionOracle<'_, T> {
    /// Certified bounds `(π^L_min, π^U_max)` of the class probability over a
    /// region, through the configured likelihood route.
    fn class_bounds(&self, region: &Region<T>) -> Result<(T, Vec<Vec<T>>, T)> {
        let model = self.model;
        let (mb, witnesses) = moment_bounds(model, region)?;
        match model.task() {
            Task::Regression { .. } => Err(Error::TaskMismatch { expected: "classification" }),
            Task::BinaryClassification { link } => {
                let (lo1, hi1) = if self.config.force_discretized {
                    let partition = build_partition(self.config.partition_cells, link);
                    discretized_binary_range_bounds(
                        link,
                        mb.mean_lo[0],
                        mb.mean_hi[0],
                        mb.var_lo[0],
                        mb.var_hi[0],
                        &partition,
                    )?
                } else {
                    crate::likelihood::binary_range_bounds(
                        link,
                        mb.mean_lo[0],
                        mb.mean_hi[0],
                        mb.var_lo[0],
                        mb.var_hi[0],
                        model.gauss_hermite(),
                    )
                };
                // Class 1 is the complement of class 0.
                let (lo, hi) = if self.class == 0 {
                    (lo1, hi1)
                } else {
                    (T::one() - hi1, T::one() - lo1)
                };
                Ok((lo, witnesses, hi))
            }
            Task::MultiClass { .. } => {
                // Softmax latents are partitioned on the logistic scale.
                let partition =
                    build_partition(self.config.partition_cells, crate::model::Link::Logistic);
                match multiclass_range_bounds(&mb, &partition, self.class, self.config.cell_cap) {
                    Ok((lo, hi)) => Ok((lo, witnesses, hi)),
                    // A too-wide region for the interval conditioning still
                    // admits the trivial probability bounds; splitting will
                    // recover precision.
                    Err(Error::IntervalSingular) => Ok((T::zero(), witnesses, T::one())),
                    Err(e) => Err(e),
                }
            }
        }
    }
}

impl<T: Real> RegionOracle<T> for PredictionOracle<'_, T> {
    fn bound(&mut self, region: &Region<T>) -> Result<(T, Vec<Vec<T>>)> {
        // Binary links with their analytic corner bounds only need the mean
        // bounds plus one variance side per direction.
        if let Task::BinaryClassification { link } = self.model.task() {
            if !self.config.force_discretized {
                // Objective direction on the class-0 probability: minimising
                // class 0 and maximising class 1 both need the π lower
                // corner; the two other combinations need the upper corner.
                let want_min_pi0 = (self.class == 0) != self.negate;
                let (mu_lo, mu_hi, var_star, witnesses) =
                    directed_binary_moments(self.model, region, want_min_pi0)?;
                let gh = self.model.gauss_hermite();
                let pi0 = if want_min_pi0 {
                    let mu = mu_lo;
                    crate::model::predictive_binary(link, mu, var_star, gh)
                } else {
                    let mu = mu_hi;
                    crate::model::predictive_binary(link, mu, var_star, gh)
                };
                // Map back to a lower bound of the (possibly negated,
                // possibly complemented) objective.
                let bound = match (self.class, self.negate) {
                    (0, false) => pi0,            // min π0 ≥ pi0
                    (0, true) => -pi0,            // min −π0 ≥ −(upper of π0)
                    (_, false) => T::one() - pi0, // min π1 = 1 − max π0
                    (_, true) => pi0 - T::one(),  // min −π1 = min π0 − 1
                };
                return Ok((bound, witnesses));
            }
        }
        let (lo, witnesses, hi) = self.class_bounds(region)?;
        Ok(if self.negate { (-hi, witnesses) } else { (lo, witnesses) })
    }

    fn evaluate(&mut self, x: &[T]) -> Result<T> {
        let p = self.model.predict_class_prob(x)?[self.class];
        Ok(if self.negate { -p } else { p })
    }
}

/// Posterior-mean objective for regression problems.
struct MeanOracle<'m, T: Real> {
    model: &'m GpModel<T>,
    output: usize,
    negate: bool,
}

impl<T: Real> RegionOracle<T> for MeanOracle<'_, T> {
    fn bound(&mut self, region: &Region<T>) -> Result<(T, Vec<Vec<T>>)> {
        let (lo, hi) = bound_mean(self.model, region, self.output)?;
        let mut witnesses = vec![lo.witness.clone(), hi.witness.clone(), region.center()];
        witnesses.dedup();
        Ok(if self.negate { (-hi.value, witnesses) } else { (lo.value, witnesses) })
    }

    fn evaluate(&mut self, x: &[T]) -> Result<T> {
        let v = self.model.latent_mean(self.output, x)?;
        Ok(if self.negate { -v } else { v })
    }
}

fn check_classification<T: Real>(model: &GpModel<T>) -> Result<()> {
    if !model.task().is_classification() {
        return Err(Error::TaskMismatch { expected: "classification" });
    }
    Ok(())
}

/// Branch-and-bound refinement of `min_{x ∈ T} π_class(x)`.
pub fn minimize_prediction<T: Real>(
    model: &GpModel<T>,
    region: &Region<T>,
    class: usize,
    config: &BnbConfig<T>,
) -> Result<BnbResult<T>> {
    minimize_prediction_over(model, core::slice::from_ref(region), class, config)
}

/// As [`minimize_prediction`] over a finite union of boxes (non-box sets are
/// covered by their box unions; the queue is seeded with every box).
pub fn minimize_prediction_over<T: Real>(
    model: &GpModel<T>,
    regions: &[Region<T>],
    class: usize,
    config: &BnbConfig<T>,
) -> Result<BnbResult<T>> {
    check_classification(model)?;
    let mut oracle = PredictionOracle { model, class, negate: false, config: config.clone() };
    run_minimize(&mut oracle, regions, config)
}

/// Branch-and-bound refinement of `max_{x ∈ T} π_class(x)`.
pub fn maximize_prediction<T: Real>(
    model: &GpModel<T>,
    region: &Region<T>,
    class: usize,
    config: &BnbConfig<T>,
) -> Result<BnbResult<T>> {
    check_classification(model)?;
    let mut oracle = PredictionOracle { model, class, negate: true, config: config.clone() };
    let res = run_minimize(&mut oracle, core::slice::from_ref(region), config)?;
    Ok(negate_result(res))
}

/// Branch-and-bound refinement of `min_{x ∈ T} μ̄_output(x)`.
pub fn minimize_posterior_mean<T: Real>(
    model: &GpModel<T>,
    region: &Region<T>,
    output: usize,
    config: &BnbConfig<T>,
) -> Result<BnbResult<T>> {
    let mut oracle = MeanOracle { model, output, negate: false };
    run_minimize(&mut oracle, core::slice::from_ref(region), config)
}

/// Branch-and-bound refinement of `max_{x ∈ T} μ̄_output(x)`.
pub fn maximize_posterior_mean<T: Real>(
    model: &GpModel<T>,
    region: &Region<T>,
    output: usize,
    config: &BnbConfig<T>,
) -> Result<BnbResult<T>> {
    let mut oracle = MeanOracle { model, output, negate: true };
    let res = run_minimize(&mut oracle, core::slice::from_ref(region), config)?;
    Ok(negate_result(res))
}

fn negate_result<T: Real>(res: BnbResult<T>) -> BnbResult<T> {
    BnbResult {
        lower: -res.upper,
        upper: -res.lower,
        trace: res
            .trace
            .iter()
            .map(|r| IterationRecord {
                iter: r.iter,
                lower: -r.upper,
                upper: -r.lower,
                regions: r.regions,
            })
            .collect(),
        ..res
    }
}

/// Certified prediction-range information for one class over a region,
/// combining a min run and a max run.
pub fn prediction_range<T: Real>(
    model: &GpModel<T>,
    region: &Region<T>,
    class: usize,
    config: &BnbConfig<T>,
) -> Result<(RangeBounds<T>, BnbResult<T>, BnbResult<T>)> {
    let min_run = minimize_prediction(model, region, class, config)?;
    let max_run = maximize_prediction(model, region, class, config)?;
    let rb = RangeBounds {
        pi_min_lo: min_run.lower.max(T::zero()),
        pi_min_hi: min_run.upper,
        pi_max_lo: max_run.lower,
        pi_max_hi: max_run.upper.min(T::one()),
        min_witness: min_run.witness.clone(),
        max_witness: max_run.witness.clone(),
    };
    Ok((rb, min_run, max_run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::linalg::Mat;
    use crate::model::Link;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn se(variance: f64, theta: Vec<f64>) -> KernelSpec<f64> {
        KernelSpec::SquaredExponential { variance, theta }
    }

    fn quick_config(seed: u64) -> BnbConfig<f64> {
        BnbConfig { seed, ..Default::default() }
    }

    fn toy_binary() -> GpModel<f64> {
        let x = Mat::from_rows(&[vec![-1.0], vec![-0.4], vec![0.5], vec![1.2]]);
        GpModel::fit_laplace_binary(
            x,
            &[-1, -1, 1, 1],
            se(1.0, vec![1.0]),
            Link::Probit { lambda: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn split_region_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = Region::new(vec![0.0, 0.0], vec![1.0, 4.0]).unwrap();
        let (a, b) = split_region(&r, SplitRule::WidestDimension, &mut rng).unwrap();
        assert_eq!(a.hi()[1], 2.0);
        assert_eq!(b.lo()[1], 2.0);
        assert!(a.diam() <= r.diam() && b.diam() <= r.diam());
        let point = Region::point(&[1.0, 2.0]);
        assert!(split_region(&point, SplitRule::Random, &mut rng).is_err());
    }

    #[test]
    fn point_region_converges_immediately() {
        let m = toy_binary();
        let x = vec![0.3];
        let region = Region::point(&x);
        let res = minimize_prediction(&m, &region, 0, &quick_config(1)).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        let exact = m.predict_class_prob(&x).unwrap()[0];
        assert!(res.lower <= exact && exact <= res.upper);
        assert!(res.gap() <= 0.01);
    }

    #[test]
    fn matches_grid_oracle_on_monotone_model() {
        // Single positive training point: π is increasing toward it, so the
        // minimum over [0,1] sits at the far end from the point.
        let x = Mat::from_rows(&[vec![2.0], vec![-2.0]]);
        let m = GpModel::fit_laplace_binary(
            x,
            &[1, -1],
            se(1.0, vec![0.6]),
            Link::Probit { lambda: 1.0 },
        )
        .unwrap();
        let region = Region::new(vec![0.0], vec![1.0]).unwrap();
        let res = minimize_prediction(&m, &region, 0, &quick_config(2)).unwrap();
        assert!(res.converged, "gap {}", res.gap());
        let mut grid_min = f64::INFINITY;
        for i in 0..100_000 {
            let xi = [i as f64 / 99_999.0];
            grid_min = grid_min.min(m.predict_class_prob(&xi).unwrap()[0]);
        }
        assert!(res.lower <= grid_min + 1e-9, "lower {} > {grid_min}", res.lower);
        assert!(res.upper >= grid_min - 1e-9);
        assert!(res.upper - grid_min <= 0.01 + 1e-9);
        // Witness is the far endpoint.
        assert!((res.witness.unwrap()[0] - 0.0).abs() < 0.2);
    }

    #[test]
    fn binary_complementarity() {
        let m = toy_binary();
        let region = Region::new(vec![-0.5], vec![0.5]).unwrap();
        let cfg = quick_config(3);
        let max1 = maximize_prediction(&m, &region, 0, &cfg).unwrap();
        let min2 = minimize_prediction(&m, &region, 1, &cfg).unwrap();
        assert_relative_eq!(max1.upper, 1.0 - min2.lower, epsilon = 1e-9);
        assert_relative_eq!(max1.lower, 1.0 - min2.upper, epsilon = 1e-9);
    }

    #[test]
    fn bounds_are_monotone_and_anytime() {
        let m = toy_binary();
        let region = Region::new(vec![-1.0], vec![1.0]).unwrap();
        let res = minimize_prediction(&m, &region, 0, &quick_config(4)).unwrap();
        let mut prev_lower = f64::NEG_INFINITY;
        let mut prev_upper = f64::INFINITY;
        for r in &res.trace {
            assert!(r.lower >= prev_lower - 1e-12, "lower bound decreased");
            assert!(r.upper <= prev_upper + 1e-12, "upper bound increased");
            prev_lower = r.lower;
            prev_upper = r.upper;
        }
        // Anytime soundness: every prefix interval contains the converged
        // value.
        let final_v = 0.5 * (res.lower + res.upper);
        for r in &res.trace {
            assert!(r.lower <= final_v + 1e-9 && final_v <= r.upper + 1e-9);
        }
    }

    #[test]
    fn deterministic_trace_for_fixed_seed() {
        let m = toy_binary();
        let region = Region::new(vec![-1.0], vec![1.0]).unwrap();
        let cfg = quick_config(42);
        let a = minimize_prediction(&m, &region, 0, &cfg).unwrap();
        let b = minimize_prediction(&m, &region, 0, &cfg).unwrap();
        assert_eq!(a.trace.len(), b.trace.len());
        for (x, y) in a.trace.iter().zip(&b.trace) {
            assert_eq!(x.lower.to_bits(), y.lower.to_bits());
            assert_eq!(x.upper.to_bits(), y.upper.to_bits());
            assert_eq!(x.regions, y.regions);
        }
        assert_eq!(a.witness, b.witness);
    }

    #[test]
    fn budget_exhaustion_returns_partial_sound_result() {
        let m = toy_binary();
        let region = Region::new(vec![-2.0], vec![2.0]).unwrap();
        let cfg = BnbConfig { max_iterations: 2, ..quick_config(5) };
        let res = minimize_prediction(&m, &region, 0, &cfg).unwrap();
        assert!(!res.converged);
        assert!(res.iterations <= 2);
        let mut grid_min = f64::INFINITY;
        for i in 0..2000 {
            let xi = [-2.0 + 4.0 * i as f64 / 1999.0];
            grid_min = grid_min.min(m.predict_class_prob(&xi).unwrap()[0]);
        }
        assert!(res.lower <= grid_min + 1e-9 && grid_min <= res.upper + 1e-9);
    }

    #[test]
    fn regression_mean_bnb() {
        let x = Mat::from_rows(&[vec![0.0]]);
        let m = GpModel::fit_regression(x, &[1.0], se(1.0, vec![1.0]), 1.0).unwrap();
        // Zero weights: immediate [0, 0].
        let z = GpModel::fit_regression(
            Mat::from_rows(&[vec![0.0]]),
            &[0.0],
            se(1.0, vec![1.0]),
            1.0,
        )
        .unwrap();
        let region = Region::new(vec![2.0], vec![3.0]).unwrap();
        let rz = minimize_posterior_mean(&z, &region, 0, &quick_config(6)).unwrap();
        assert_eq!(rz.lower, 0.0);
        assert_eq!(rz.upper, 0.0);
        assert!(rz.converged);
        // Monotone decreasing mean on [2, 3]: minimum at x = 3.
        let cfg = BnbConfig { epsilon: 1e-4, ..quick_config(7) };
        let res = minimize_posterior_mean(&m, &region, 0, &cfg).unwrap();
        assert!(res.converged);
        let mut grid_min = f64::INFINITY;
        for i in 0..100_000 {
            let xi = [2.0 + i as f64 / 99_999.0];
            grid_min = grid_min.min(m.latent_mean(0, &xi).unwrap());
        }
        assert!(res.lower <= grid_min + 1e-12 && grid_min <= res.upper + 1e-12);
        assert!(res.gap() <= 1e-4);
        // Point region: exact mean.
        let p = Region::point(&[2.5]);
        let rp = maximize_posterior_mean(&m, &p, 0, &cfg).unwrap();
        assert_relative_eq!(rp.upper, m.latent_mean(0, &[2.5]).unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn witness_candidates_stay_inside() {
        let m = toy_binary();
        let region = Region::new(vec![-0.7], vec![0.9]).unwrap();
        let w = witness_candidates(&m, &region).unwrap();
        assert!(!w.is_empty());
        for x in &w {
            assert!(region.contains(x));
        }
    }

    #[test]
    fn discretized_mode_also_converges() {
        let m = toy_binary();
        let region = Region::new(vec![-0.5], vec![0.5]).unwrap();
        let cfg = BnbConfig {
            force_discretized: true,
            partition_cells: 400,
            ..quick_config(8)
        };
        let res = minimize_prediction(&m, &region, 0, &cfg).unwrap();
        assert!(res.converged, "gap {}", res.gap());
        let exact = minimize_prediction(&m, &region, 0, &quick_config(8)).unwrap();
        // Discretised interval must contain the analytic one.
        assert!(res.lower <= exact.lower + 1e-9);
    }
}
