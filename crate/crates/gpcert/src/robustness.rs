//! User-facing robustness semantics: certified classification safety,
//! regression δ-robustness, the δ robustness metric, one-sided
//! interpretability scores, certified adversarial-gap curves, and the
//! gradient-sign attack baseline.

use crate::bnb::{
    maximize_posterior_mean, maximize_prediction, minimize_posterior_mean, minimize_prediction,
    prediction_range, BnbConfig, BnbResult,
};
use crate::bounds::Region;
use crate::error::{Error, Result};
use crate::likelihood::RangeBounds;
use crate::model::{argmax, GpModel, Task};
use crate::real::Real;
use serde::{Deserialize, Serialize};

/// Norm order used for the perturbation ball (classification) or the output
/// deviation (regression).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormOrder {
    LInf,
    L2,
    L1,
}

impl NormOrder {
    pub fn eval<T: Real>(&self, v: &[T]) -> T {
        match self {
            NormOrder::LInf => v.iter().fold(T::zero(), |m, &x| m.max(x.abs())),
            NormOrder::L2 => v.iter().map(|&x| x * x).sum::<T>().sqrt(),
            NormOrder::L1 => v.iter().map(|&x| x.abs()).sum(),
        }
    }
}

/// Outcome of a certification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Robustness<T> {
    Certified,
    Falsified,
    /// Budget exhausted with the residual certified margin gap.
    Unknown { gap: T },
}

/// Verdict of a certification query, with enough data to audit it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SafetyVerdict<T> {
    pub robust: Robustness<T>,
    /// Adversarial input when falsified (verified by direct evaluation).
    pub witness: Option<Vec<T>>,
    /// The conservative per-class vector: certified lower bound of the
    /// predicted class, certified upper bounds of the others. Empty for
    /// regression.
    pub pi_star: Vec<T>,
    /// Certified upper bound on the output deviation (regression only).
    pub certified_deviation: Option<T>,
    pub gamma: T,
    /// Requested ball norm; non-`LInf` balls are enclosed in their bounding
    /// box before certification (sound but conservative).
    pub norm: NormOrder,
    pub predicted_class: Option<usize>,
    pub converged: bool,
}

/// `ℓp` balls share the `ℓ∞` bounding box `[x*-γ, x*+γ]`.
fn perturbation_box<T: Real>(x_star: &[T], gamma: T) -> Result<Region<T>> {
    if gamma < T::zero() {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: "perturbation radius must be nonnegative".into(),
        });
    }
    Region::ball(x_star, gamma)
}

/// Checks decision invariance of a classification model over the `γ`-ball
/// around `x*`.
pub fn certify_classification<T: Real>(
    model: &GpModel<T>,
    x_star: &[T],
    gamma: T,
    norm: NormOrder,
    config: &BnbConfig<T>,
) -> Result<SafetyVerdict<T>> {
    if !model.task().is_classification() {
        return Err(Error::TaskMismatch { expected: "classification" });
    }
    let region = perturbation_box(x_star, gamma)?;
    let probs = model.predict_class_prob(x_star)?;
    let predicted = argmax(&probs);
    let classes = model.task().classes();

    // Certified lower bound for the predicted class; upper bounds for the
    // rest. The binary case needs one run: the complement class mirror.
    let own = minimize_prediction(model, &region, predicted, config)?;
    let mut pi_star = vec![T::zero(); classes];
    pi_star[predicted] = own.lower;
    let mut converged = own.converged;
    let mut others: Vec<(usize, BnbResult<T>)> = Vec::new();
    if classes == 2 {
        let other = 1 - predicted;
        let run = own.complement();
        pi_star[other] = run.upper;
        others.push((other, run));
    } else {
        for k in 0..classes {
            if k == predicted {
                continue;
            }
            let run = maximize_prediction(model, &region, k, config)?;
            converged &= run.converged;
            pi_star[k] = run.upper;
            others.push((k, run));
        }
    }

    // Falsification: any evaluated point whose decision flips.
    let mut witness = None;
    let mut check = |cand: &Option<Vec<T>>| -> Result<()> {
        if witness.is_some() {
            return Ok(());
        }
        if let Some(x) = cand {
            if region.contains(x) && model.predicted_class(x)? != predicted {
                witness = Some(x.clone());
            }
        }
        Ok(())
    };
    check(&own.witness)?;
    for (_, run) in &others {
        check(&run.witness)?;
    }

    let best_other = others
        .iter()
        .map(|(k, _)| pi_star[*k])
        .fold(T::neg_infinity(), T::max);
    let robust = if witness.is_some() {
        Robustness::Falsified
    } else if pi_star[predicted] > best_other {
        Robustness::Certified
    } else {
        Robustness::Unknown { gap: best_other - pi_star[predicted] }
    };
    Ok(SafetyVerdict {
        robust,
        witness,
        pi_star,
        certified_deviation: None,
        gamma,
        norm,
        predicted_class: Some(predicted),
        converged,
    })
}

/// Checks `δ`-boundedness of the regression decision over the `γ`-ball
/// around `x*` with respect to the output `norm`.
pub fn certify_regression<T: Real>(
    model: &GpModel<T>,
    x_star: &[T],
    gamma: T,
    delta: T,
    norm: NormOrder,
    config: &BnbConfig<T>,
) -> Result<SafetyVerdict<T>> {
    let Task::Regression { outputs, .. } = model.task() else {
        return Err(Error::TaskMismatch { expected: "regression" });
    };
    if delta < T::zero() {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: "tolerance must be nonnegative".into(),
        });
    }
    let region = perturbation_box(x_star, gamma)?;
    let center: Vec<T> =
        (0..outputs).map(|i| model.latent_mean(i, x_star)).collect::<Result<_>>()?;
    let mut mu_star = vec![T::zero(); outputs];
    let mut converged = true;
    let mut candidates: Vec<Vec<T>> = Vec::new();
    for i in 0..outputs {
        let lo = minimize_posterior_mean(model, &region, i, config)?;
        let hi = maximize_posterior_mean(model, &region, i, config)?;
        converged &= lo.converged && hi.converged;
        // The farther certified endpoint from the centre prediction.
        let dl = (center[i] - lo.lower).abs();
        let dh = (center[i] - hi.upper).abs();
        mu_star[i] = if dl >= dh { lo.lower } else { hi.upper };
        candidates.extend(lo.witness.clone());
        candidates.extend(hi.witness.clone());
    }
    let deviation_bound = {
        let diffs: Vec<T> = (0..outputs).map(|i| center[i] - mu_star[i]).collect();
        norm.eval(&diffs)
    };

    // Falsification by direct evaluation of the solver witnesses.
    let mut witness = None;
    for cand in &candidates {
        let dev: Vec<T> = (0..outputs)
            .map(|i| Ok::<_, Error>(center[i] - model.latent_mean(i, cand)?))
            .collect::<Result<_>>()?;
        if norm.eval(&dev) > delta {
            witness = Some(cand.clone());
            break;
        }
    }
    let robust = if witness.is_some() {
        Robustness::Falsified
    } else if deviation_bound <= delta {
        Robustness::Certified
    } else {
        Robustness::Unknown { gap: deviation_bound - delta }
    };
    Ok(SafetyVerdict {
        robust,
        witness,
        pi_star: Vec::new(),
        certified_deviation: Some(deviation_bound),
        gamma,
        norm,
        predicted_class: None,
        converged,
    })
}

/// The robustness score `δ = π^U_max(T) − π^L_min(T)` of a binary model
/// (smaller is more robust).
pub fn delta_metric<T: Real>(
    model: &GpModel<T>,
    x_star: &[T],
    gamma: T,
    config: &BnbConfig<T>,
) -> Result<T> {
    if !matches!(model.task(), Task::BinaryClassification { .. }) {
        return Err(Error::TaskMismatch { expected: "binary classification" });
    }
    let region = perturbation_box(x_star, gamma)?;
    let (rb, _, _) = prediction_range(model, &region, 0, config)?;
    Ok((rb.pi_max_hi - rb.pi_min_lo).max(T::zero()).min(T::one()))
}

/// One-sided interpretability score for an input dimension:
/// `Δ = (π_sup(T⁺) − π_sup(T⁻)) + (π_inf(T⁺) − π_inf(T⁻))` over the
/// one-sided boxes `T± = [x*, x* ± γ e_i]`, each extremum taken as the
/// midpoint of its converged certificate interval.
pub fn interpretability_delta<T: Real>(
    model: &GpModel<T>,
    x_star: &[T],
    gamma: T,
    dim: usize,
    config: &BnbConfig<T>,
) -> Result<T> {
    if !matches!(model.task(), Task::BinaryClassification { .. }) {
        return Err(Error::TaskMismatch { expected: "binary classification" });
    }
    if dim >= x_star.len() {
        return Err(Error::DimensionMismatch { expected: x_star.len(), got: dim });
    }
    let half = T::of(0.5);
    let one_sided = |sign: T| -> Result<(T, T)> {
        let mut lo = x_star.to_vec();
        let mut hi = x_star.to_vec();
        if sign >= T::zero() {
            hi[dim] = hi[dim] + gamma;
        } else {
            lo[dim] = lo[dim] - gamma;
        }
        let region = Region::new(lo, hi)?;
        let sup = maximize_prediction(model, &region, 0, config)?;
        let inf = minimize_prediction(model, &region, 0, config)?;
        Ok(((sup.lower + sup.upper) * half, (inf.lower + inf.upper) * half))
    };
    let (sup_p, inf_p) = one_sided(T::one())?;
    let (sup_m, inf_m) = one_sided(-T::one())?;
    Ok((sup_p - sup_m) + (inf_p - inf_m))
}

/// Per-dimension interpretability scores, either for a single point or
/// averaged over a test set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterpretabilityReport<T> {
    /// `Δ^i_γ` per input dimension (each in `[-2, 2]`).
    pub per_dimension: Vec<T>,
    pub gamma: T,
    /// Number of points the expectation was taken over (1 for a single
    /// point).
    pub aggregated_over: usize,
}

/// Interpretability scores averaged over a set of points (the global
/// variant of [`interpretability_delta`]).
pub fn interpretability_report<T: Real>(
    model: &GpModel<T>,
    points: &[Vec<T>],
    gamma: T,
    dims: &[usize],
    config: &BnbConfig<T>,
) -> Result<InterpretabilityReport<T>> {
    if points.is_empty() {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: "need at least one point".into(),
        });
    }
    let mut per_dimension = vec![T::zero(); dims.len()];
    for x in points {
        for (slot, &dim) in per_dimension.iter_mut().zip(dims) {
            *slot = *slot + interpretability_delta(model, x, gamma, dim, config)?;
        }
    }
    let inv = T::of(points.len() as f64).recip();
    for v in &mut per_dimension {
        *v = *v * inv;
    }
    Ok(InterpretabilityReport { per_dimension, gamma, aggregated_over: points.len() })
}

/// Outcome of the gradient-sign attack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackOutcome<T> {
    pub point: Vec<T>,
    pub success: bool,
    /// Class probabilities at the returned point.
    pub probs: Vec<T>,
}

/// Gradient-sign attack on the latent mean of a binary model: repeated
/// steps `x ← clip_T(x + η · s · sign(∇μ̄(x)))` with `s` the direction that
/// pushes the mean toward the opposing class and `η = γ / steps`.
pub fn gpfgs_attack<T: Real>(
    model: &GpModel<T>,
    x_star: &[T],
    gamma: T,
    steps: usize,
) -> Result<AttackOutcome<T>> {
    if !matches!(model.task(), Task::BinaryClassification { .. }) {
        return Err(Error::TaskMismatch { expected: "binary classification" });
    }
    let region = perturbation_box(x_star, gamma)?;
    let predicted = model.predicted_class(x_star)?;
    // Class 0 has probability increasing in the latent mean; attacking it
    // means descending the mean, attacking class 1 means ascending.
    let dir = if predicted == 0 { -T::one() } else { T::one() };
    let mut x = x_star.to_vec();
    if gamma <= T::zero() || steps == 0 {
        let probs = model.predict_class_prob(&x)?;
        return Ok(AttackOutcome { point: x, success: false, probs });
    }
    let eta = gamma / T::of(steps as f64);
    let mut success = false;
    for _ in 0..steps {
        let grad = model.latent_mean_grad(0, &x)?;
        for j in 0..x.len() {
            let s = if grad[j] > T::zero() {
                T::one()
            } else if grad[j] < T::zero() {
                -T::one()
            } else {
                T::zero()
            };
            x[j] = x[j] + eta * dir * s;
        }
        x = region.clamp(&x);
        if model.predicted_class(&x)? != predicted {
            success = true;
            break;
        }
    }
    let probs = model.predict_class_prob(&x)?;
    Ok(AttackOutcome { point: x, success, probs })
}

/// One certified point on a safety curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SafetyCurvePoint<T> {
    pub gamma: T,
    pub bounds: RangeBounds<T>,
    pub verdict: Robustness<T>,
    pub converged: bool,
}

/// Certified range bounds of the predicted class over a ladder of radii
/// (the certified lower curve is non-increasing in `γ` up to `2ε`).
pub fn safety_curve<T: Real>(
    model: &GpModel<T>,
    x_star: &[T],
    gammas: &[T],
    config: &BnbConfig<T>,
) -> Result<Vec<SafetyCurvePoint<T>>> {
    let mut out = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let verdict = certify_classification(model, x_star, gamma, NormOrder::LInf, config)?;
        let region = perturbation_box(x_star, gamma)?;
        let class = verdict.predicted_class.expect("classification verdict");
        let (bounds, min_run, max_run) = prediction_range(model, &region, class, config)?;
        out.push(SafetyCurvePoint {
            gamma,
            bounds,
            verdict: verdict.robust,
            converged: min_run.converged && max_run.converged,
        });
    }
    Ok(out)
}

/// Certified adversarial gap (lowest certified margin of the true class
/// against the best other class) when only the first `budget` features of
/// `order` may vary within `±γ`.
pub fn adversarial_gap_curve<T: Real>(
    model: &GpModel<T>,
    x_star: &[T],
    order: &[usize],
    gamma: T,
    budgets: &[usize],
    config: &BnbConfig<T>,
) -> Result<Vec<(usize, T)>> {
    if !model.task().is_classification() {
        return Err(Error::TaskMismatch { expected: "classification" });
    }
    let probs = model.predict_class_prob(x_star)?;
    let predicted = argmax(&probs);
    let classes = model.task().classes();
    let mut out = Vec::with_capacity(budgets.len());
    for &beta in budgets {
        let mut lo = x_star.to_vec();
        let mut hi = x_star.to_vec();
        for &j in order.iter().take(beta) {
            lo[j] = lo[j] - gamma;
            hi[j] = hi[j] + gamma;
        }
        let region = Region::new(lo, hi)?;
        let own = minimize_prediction(model, &region, predicted, config)?;
        let gap = if classes == 2 {
            // π_other ≤ 1 − π^L: margin = π − (1 − π) = 2π − 1.
            T::of(2.0) * own.lower - T::one()
        } else {
            let mut best_other = T::neg_infinity();
            for k in 0..classes {
                if k == predicted {
                    continue;
                }
                let run = maximize_prediction(model, &region, k, config)?;
                best_other = best_other.max(run.upper);
            }
            own.lower - best_other
        };
        out.push((beta, gap));
    }
    Ok(out)
}
