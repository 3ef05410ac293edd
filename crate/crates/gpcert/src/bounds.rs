//! Region-wise bounds on the posterior mean and variance.
//!
//! The mean bound propagates per-anchor kernel bounding lines through the
//! weights and closes with the kernel's `U` function. The variance upper
//! bound relaxes `min_x Σ_{x,X} S Σ_{X,x}` to a convex QP over the kernel
//! and inner-function slacks; the lower bound rotates into the eigenbasis of
//! `S`, boxes the rotated coordinates with 2N linear programs, replaces each
//! concave `-λ r̂²` summand by its chord, and solves one final LP.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::kernels::RegionKernelBounds;
use crate::linalg::Mat;
use crate::model::{GpModel, Task};
use crate::real::Real;
pub use crate::region::Region;
use crate::solver::{solve_lp, solve_qp, LinProgram, QuadProgram};

/// A bound value together with the feasible point the solver attained it at
/// (a candidate input witness).
#[derive(Debug, Clone)]
pub struct ValueWitness<T> {
    pub value: T,
    pub witness: Vec<T>,
}

/// Componentwise enclosures of the posterior moments over a region:
/// `mean_lo[i] ≤ μ̄_i ≤ mean_hi[i]`, `var_lo[i] ≤ Σ̄_ii ≤ var_hi[i]`, and
/// `cross[i][j]` enclosing `Σ̄_ij` (diagonal entries mirror the variance
/// bounds).
#[derive(Debug, Clone)]
pub struct MomentBounds<T> {
    pub mean_lo: Vec<T>,
    pub mean_hi: Vec<T>,
    pub var_lo: Vec<T>,
    pub var_hi: Vec<T>,
    pub cross: Vec<Vec<(T, T)>>,
}

impl<T: Real> MomentBounds<T> {
    /// Exact moments of a single point, wrapped as degenerate bounds.
    pub fn at_point(model: &GpModel<T>, x: &[T]) -> Result<Self> {
        let p = model.posterior_at(x)?;
        let m = p.mean.len();
        let cross = (0..m)
            .map(|i| (0..m).map(|j| (p.cov[(i, j)], p.cov[(i, j)])).collect())
            .collect();
        Ok(Self {
            mean_lo: p.mean.clone(),
            mean_hi: p.mean,
            var_lo: (0..m).map(|i| p.cov[(i, i)]).collect(),
            var_hi: (0..m).map(|i| p.cov[(i, i)]).collect(),
            cross,
        })
    }
}

/// Sign-selected affine data for the mean bound: the summed constant and the
/// per-channel coefficient vectors after multiplying each anchor sandwich by
/// its weight.
fn weighted_lower_form<T: Real>(rb: &RegionKernelBounds<T>, t: &[T]) -> (T, Vec<Vec<T>>) {
    let n = t.len();
    let nch = rb.n_channels;
    let mut a_sum = T::zero();
    let mut coeffs = vec![vec![T::zero(); n]; nch];
    for i in 0..n {
        let p = &rb.pairs[i];
        if t[i] >= T::zero() {
            a_sum = a_sum + t[i] * p.a_l;
            for ch in 0..nch {
                coeffs[ch][i] = t[i] * p.b_l[ch];
            }
        } else {
            a_sum = a_sum + t[i] * p.a_u;
            for ch in 0..nch {
                coeffs[ch][i] = t[i] * p.b_u[ch];
            }
        }
    }
    (a_sum, coeffs)
}

/// Lower and upper bounds on the posterior mean of one latent over a region,
/// each with a witness candidate.
pub fn bound_mean<T: Real>(
    model: &GpModel<T>,
    region: &Region<T>,
    latent: usize,
) -> Result<(ValueWitness<T>, ValueWitness<T>)> {
    check_region(model, region)?;
    let dec = model.decomposition(latent);
    let rb = dec.region_pairs_only(model.x_train(), region);
    mean_bounds_from(model, region, latent, &rb)
}

fn mean_bounds_from<T: Real>(
    model: &GpModel<T>,
    region: &Region<T>,
    latent: usize,
    rb: &RegionKernelBounds<T>,
) -> Result<(ValueWitness<T>, ValueWitness<T>)> {
    let dec = model.decomposition(latent);
    let anchors = model.x_train();
    let t = model.t_block(latent);
    let neg_t: Vec<T> = t.iter().map(|&v| -v).collect();

    // One pass lower-bounds μ̄, the other lower-bounds -μ̄.
    let mut out: Vec<ValueWitness<T>> = Vec::with_capacity(2);
    for (pass, weights) in [t, neg_t.as_slice()].into_iter().enumerate() {
        let (a_sum, coeffs) = weighted_lower_form(rb, weights);
        let negated: Vec<Vec<T>> =
            coeffs.iter().map(|c| c.iter().map(|&v| -v).collect()).collect();
        let (u, argmax) = dec.u_bound_joint(&negated, anchors, region);
        let bound = a_sum - u;
        let candidates = vec![argmax, region.center()];
        let obj_sign = if pass == 0 { T::one() } else { -T::one() };
        let mut best = candidates[0].clone();
        let mut best_v = T::infinity();
        for cand in &candidates {
            let v = obj_sign * model.latent_mean(latent, cand)?;
            if v < best_v {
                best_v = v;
                best = cand.clone();
            }
        }
        out.push(ValueWitness { value: bound, witness: best });
    }
    let upper = out.pop().expect("two passes");
    let lower = out.pop().expect("two passes");
    Ok((lower, ValueWitness { value: -upper.value, witness: upper.witness }))
}

/// Variable layout of the variance programs:
/// `[r (N) | x (d) | φ (N × channels)]`.
struct VarianceProgram<T> {
    rows: Vec<(Vec<T>, T)>,
    bounds: Vec<(T, T)>,
    n: usize,
    d: usize,
    nch: usize,
}

impl<T: Real> VarianceProgram<T> {
    fn build(rb: &RegionKernelBounds<T>, region: &Region<T>) -> Self {
        let n = rb.pairs.len();
        let d = region.dim();
        let nch = rb.n_channels;
        let nv = n + d + n * nch;
        let phi_idx = |i: usize, ch: usize| n + d + i * nch + ch;
        let mut rows: Vec<(Vec<T>, T)> = Vec::new();
        for i in 0..n {
            let p = &rb.pairs[i];
            // a_l + Σ b_l φ ≤ r_i ≤ a_u + Σ b_u φ.
            let mut up = vec![T::zero(); nv];
            up[i] = T::one();
            for ch in 0..nch {
                up[phi_idx(i, ch)] = -p.b_u[ch];
            }
            rows.push((up, p.a_u));
            let mut lo = vec![T::zero(); nv];
            lo[i] = -T::one();
            for ch in 0..nch {
                lo[phi_idx(i, ch)] = p.b_l[ch];
            }
            rows.push((lo, -p.a_l));
            // Each φ slack sandwiched by affine functions of x.
            for ch in 0..nch {
                let s = &rb.phi_affine[i][ch];
                let mut lbf = vec![T::zero(); nv];
                lbf[phi_idx(i, ch)] = -T::one();
                lbf[n..n + d].copy_from_slice(&s.b_l);
                rows.push((lbf, -s.a_l));
                let mut ubf = vec![T::zero(); nv];
                ubf[phi_idx(i, ch)] = T::one();
                for j in 0..d {
                    ubf[n + j] = -s.b_u[j];
                }
                rows.push((ubf, s.a_u));
            }
        }
        let mut bounds = Vec::with_capacity(nv);
        for p in &rb.pairs {
            bounds.push((p.lo, p.hi));
        }
        for j in 0..d {
            bounds.push(region.side(j));
        }
        for i in 0..n {
            for ch in 0..nch {
                bounds.push(rb.phi_boxes[i][ch]);
            }
        }
        Self { rows, bounds, n, d, nch }
    }

    fn x_of(&self, point: &[T], region: &Region<T>) -> Vec<T> {
        region.clamp(&point[self.n..self.n + self.d])
    }

    fn r_objective(&self, r_coeffs: &[T]) -> Vec<T> {
        let mut c = vec![T::zero(); self.n + self.d + self.n * self.nch];
        c[..self.n].copy_from_slice(r_coeffs);
        c
    }
}

/// Upper bound `Σ^U ≥ max_x Σ̄(x)` via the convex QP relaxation.
pub fn bound_variance_upper<T: Real>(
    model: &GpModel<T>,
    region: &Region<T>,
    latent: usize,
) -> Result<ValueWitness<T>> {
    check_region(model, region)?;
    let dec = model.decomposition(latent);
    let rb = if model.n_train() > DENSE_SOLVER_LIMIT {
        dec.region_pairs_only(model.x_train(), region)
    } else {
        dec.region_bounds(model.x_train(), region)
    };
    variance_upper_from(model, region, latent, &rb)
}

/// Training-set size above which the variance bounds switch from the dense
/// relaxation programs to kernel-box relaxations (the programs grow as
/// `O(N)` variables with `2N` range LPs, which stops being viable around
/// this size).
pub const DENSE_SOLVER_LIMIT: usize = 40;

fn variance_upper_from<T: Real>(
    model: &GpModel<T>,
    region: &Region<T>,
    latent: usize,
    rb: &RegionKernelBounds<T>,
) -> Result<ValueWitness<T>> {
    let dec = model.decomposition(latent);
    let (_, diag_hi) = dec.diag_range(region);
    if rb.pairs.len() > DENSE_SOLVER_LIMIT {
        let quad_min = box_quadratic_min(model, latent, rb);
        return Ok(ValueWitness {
            value: (diag_hi - quad_min).max(T::zero()),
            witness: region.center(),
        });
    }
    let prog = VarianceProgram::build(rb, region);
    let n = prog.n;
    let nv = prog.bounds.len();
    let s = model.s_block(latent, latent);
    let mut q = Mat::zeros(nv, nv);
    for a in 0..n {
        for b in 0..n {
            q[(a, b)] = T::of(2.0) * s[(a, b)];
        }
    }
    let qp = QuadProgram {
        q,
        c: vec![T::zero(); nv],
        rows: prog.rows.clone(),
        bounds: prog.bounds.clone(),
    };
    let sol = solve_qp(&qp)?;
    let quad_min = sol.value.max(T::zero());
    let value = (diag_hi - quad_min).max(T::zero());
    Ok(ValueWitness { value, witness: prog.x_of(&sol.point, region) })
}

/// Lower bound `Σ^L ≤ min_x Σ̄(x)` via eigen-rotation, 2N range LPs, chord
/// relaxation of the concave objective, and one final LP. Clipped at zero.
pub fn bound_variance_lower<T: Real>(
    model: &GpModel<T>,
    region: &Region<T>,
    latent: usize,
) -> Result<ValueWitness<T>> {
    check_region(model, region)?;
    let dec = model.decomposition(latent);
    let rb = if model.n_train() > DENSE_SOLVER_LIMIT {
        dec.region_pairs_only(model.x_train(), region)
    } else {
        dec.region_bounds(model.x_train(), region)
    };
    variance_lower_from(model, region, latent, &rb)
}

fn variance_lower_from<T: Real>(
    model: &GpModel<T>,
    region: &Region<T>,
    latent: usize,
    rb: &RegionKernelBounds<T>,
) -> Result<ValueWitness<T>> {
    let dec = model.decomposition(latent);
    let (diag_lo, _) = dec.diag_range(region);
    if rb.pairs.len() > DENSE_SOLVER_LIMIT {
        let quad_max = box_quadratic_max(model, latent, rb);
        return Ok(ValueWitness {
            value: (diag_lo - quad_max).max(T::zero()),
            witness: region.center(),
        });
    }
    let prog = VarianceProgram::build(rb, region);
    let n = prog.n;
    let eig = model.s_block_eigen(latent);

    // Ranges of the rotated coordinates r̂_k = u^(k)·r over the feasible set
    // (2N linear programs). Vanishing eigenvalues contribute nothing.
    let mut alpha_sum = T::zero();
    let mut obj_r = vec![T::zero(); n];
    let mut witness = region.center();
    let mut any = false;
    for k in 0..n {
        let lam = eig.values[k];
        if lam <= T::zero() {
            continue;
        }
        any = true;
        let u = eig.vectors.col_vec(k);
        let min_sol = solve_lp(&LinProgram {
            objective: prog.r_objective(&u),
            rows: prog.rows.clone(),
            bounds: prog.bounds.clone(),
        })?;
        let neg_u: Vec<T> = u.iter().map(|&v| -v).collect();
        let max_sol = solve_lp(&LinProgram {
            objective: prog.r_objective(&neg_u),
            rows: prog.rows.clone(),
            bounds: prog.bounds.clone(),
        })?;
        let r_lo = min_sol.value;
        let r_hi = -max_sol.value;
        // Chord of -λ r̂² over [r_lo, r_hi]:  λ·lo·hi − λ(lo+hi) r̂.
        alpha_sum = alpha_sum + lam * r_lo * r_hi;
        let beta = -lam * (r_lo + r_hi);
        for i in 0..n {
            obj_r[i] = obj_r[i] + beta * u[i];
        }
    }
    let quad_lower = if any {
        let final_sol = solve_lp(&LinProgram {
            objective: prog.r_objective(&obj_r),
            rows: prog.rows.clone(),
            bounds: prog.bounds.clone(),
        })?;
        witness = prog.x_of(&final_sol.point, region);
        alpha_sum + final_sol.value
    } else {
        T::zero()
    };
    // Σ^L = min diag + lower bound of (-r S r), clipped at zero.
    let value = (diag_lo + quad_lower).max(T::zero());
    Ok(ValueWitness { value, witness })
}

/// Certified lower bound on `min kᵀSk` over the per-anchor kernel boxes
/// (large-model route). Projected gradient descent finds a near-minimiser
/// `k̂`; convexity then certifies
/// `f(k) ≥ f(k̂) + ∇f(k̂)ᵀ(k − k̂)`, whose box minimum is evaluated in
/// closed form. A slack proportional to the certified semidefiniteness
/// tolerance of `S` covers the almost-PSD case.
fn box_quadratic_min<T: Real>(
    model: &GpModel<T>,
    latent: usize,
    rb: &RegionKernelBounds<T>,
) -> T {
    let n = rb.pairs.len();
    let s = model.s_diag_block(latent);
    let lo: Vec<T> = rb.pairs.iter().map(|p| p.lo).collect();
    let hi: Vec<T> = rb.pairs.iter().map(|p| p.hi).collect();
    let clamp = |v: &mut Vec<T>| {
        for j in 0..n {
            v[j] = v[j].max(lo[j]).min(hi[j]);
        }
    };
    // Interval image of the Cholesky form gives a certified floor for free.
    // The factor is of S + jitter·I, so the jitter mass over the box is
    // subtracted to keep the floor valid for S itself.
    let (l, jitter) = model.s_block_chol(latent);
    let mut chol_lower = T::zero();
    let mut k_norm_sq_max = T::zero();
    for j in 0..n {
        let mut z = Interval::zero();
        for i in j..n {
            z = z.add(&Interval::new(lo[i], hi[i]).scale(l[(i, j)]));
        }
        let m = if z.contains_zero() { T::zero() } else { z.lo.abs().min(z.hi.abs()) };
        chol_lower = chol_lower + m * m;
        k_norm_sq_max = k_norm_sq_max + (lo[j] * lo[j]).max(hi[j] * hi[j]);
    }
    chol_lower = chol_lower - *jitter * k_norm_sq_max;

    let mut k: Vec<T> = (0..n).map(|j| (lo[j] + hi[j]) * T::of(0.5)).collect();
    let f = |k: &[T]| s.quadratic_form(k);
    let mut fk = f(&k);
    let mut grad = s.matvec(&k).iter().map(|&g| g * T::of(2.0)).collect::<Vec<T>>();
    let mut prev: Option<(Vec<T>, Vec<T>)> = None;
    let mut best_lower = chol_lower;
    // The π bounds only need the variance to ~1e-5, so the optimality gap
    // tolerance is loose; Barzilai-Borwein steps with a projection reach it
    // in a few tens of matrix-vector products.
    let tol = T::of(1e-5) * (T::one() + fk.abs());
    for _ in 0..40 {
        let mut lin = fk;
        for j in 0..n {
            lin = lin + (grad[j] * (lo[j] - k[j])).min(grad[j] * (hi[j] - k[j]));
        }
        best_lower = best_lower.max(lin);
        if fk - lin <= tol {
            break;
        }
        let step = match &prev {
            Some((pk, pg)) => {
                let mut num = T::zero();
                let mut den = T::zero();
                for j in 0..n {
                    let dk = k[j] - pk[j];
                    let dg = grad[j] - pg[j];
                    num = num + dk * dk;
                    den = den + dk * dg;
                }
                if den > T::of(1e-300) {
                    num / den
                } else {
                    T::one() / (T::one() + s.max_abs())
                }
            }
            None => T::one() / (T::one() + s.max_abs()),
        };
        prev = Some((k.clone(), grad.clone()));
        for j in 0..n {
            k[j] = k[j] - step * grad[j];
        }
        clamp(&mut k);
        fk = f(&k);
        grad = s.matvec(&k).iter().map(|&g| g * T::of(2.0)).collect();
    }
    // Almost-PSD slack: min eig(S) >= -psd_slack.
    let slack: T =
        model.psd_slack() * (0..n).map(|j| (hi[j] - lo[j]) * (hi[j] - lo[j])).sum::<T>();
    (best_lower - slack).max(T::zero())
}

/// Upper bound on `max kᵀSk` over the kernel boxes via the interval image
/// of the Cholesky form `‖Lᵀk‖²` (large-model route).
fn box_quadratic_max<T: Real>(model: &GpModel<T>, latent: usize, rb: &RegionKernelBounds<T>) -> T {
    let n = rb.pairs.len();
    let (l, jitter) = model.s_block_chol(latent);
    let boxes: Vec<Interval<T>> =
        rb.pairs.iter().map(|p| Interval::new(p.lo, p.hi)).collect();
    let mut total = T::zero();
    for j in 0..n {
        // z_j = (Lᵀ k)_j = Σ_i L[i][j] k_i for i >= j (L lower triangular).
        let mut z = Interval::zero();
        for i in j..n {
            z = z.add(&boxes[i].scale(l[(i, j)]));
        }
        let sq = z.lo.abs().max(z.hi.abs());
        total = total + sq * sq;
    }
    // kᵀSk <= kᵀ(S + jitter·I)k = ‖Lᵀk‖²; the jitter only increases the
    // form, so the bound stays valid for S itself.
    let _ = jitter;
    total
}

/// Moment data for a single-latent model reduced to what one bound
/// direction needs: both mean bounds (cheap) but only the variance corner
/// the likelihood selector will read — `Σ^U` when the relevant mean bound is
/// nonnegative, `Σ^L` otherwise.
pub fn directed_binary_moments<T: Real>(
    model: &GpModel<T>,
    region: &Region<T>,
    want_min: bool,
) -> Result<(T, T, T, Vec<Vec<T>>)> {
    check_region(model, region)?;
    let dec = model.decomposition(0);
    let large = model.n_train() > DENSE_SOLVER_LIMIT;
    let rb = if large {
        dec.region_pairs_only(model.x_train(), region)
    } else {
        dec.region_bounds(model.x_train(), region)
    };
    let (lo, hi) = mean_bounds_from(model, region, 0, &rb)?;
    let pivot = if want_min { lo.value } else { hi.value };
    let needs_upper = (pivot >= T::zero()) == want_min;
    let var = if needs_upper {
        variance_upper_from(model, region, 0, &rb)?
    } else {
        variance_lower_from(model, region, 0, &rb)?
    };
    let mut witnesses = vec![lo.witness, hi.witness, var.witness, region.center()];
    witnesses.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| x == y));
    Ok((lo.value, hi.value, var.value, witnesses))
}

/// Enclosure of the posterior cross-covariance `Σ̄_ij` over a region. For
/// `i = j` this delegates to the variance programs; off-diagonal entries use
/// interval arithmetic on the inference equation.
pub fn bound_cross_covariance<T: Real>(
    model: &GpModel<T>,
    region: &Region<T>,
    i: usize,
    j: usize,
) -> Result<(T, T)> {
    check_region(model, region)?;
    if i == j {
        let lo = bound_variance_lower(model, region, i)?;
        let hi = bound_variance_upper(model, region, i)?;
        return Ok((lo.value, hi.value));
    }
    let anchors = model.x_train();
    let enclosures = |latent: usize| -> Vec<Interval<T>> {
        (0..anchors.rows())
            .map(|a| {
                let p = model.decomposition(latent).anchored_pair(anchors.row(a), region);
                Interval::new(p.lo, p.hi)
            })
            .collect()
    };
    let ki = enclosures(i);
    let kj = enclosures(j);
    let s = model.s_block(i, j);
    let mut acc = Interval::zero();
    for a in 0..anchors.rows() {
        for b in 0..anchors.rows() {
            let w = s[(a, b)];
            if w == T::zero() {
                continue;
            }
            acc = acc.add(&ki[a].mul(&kj[b]).scale(w));
        }
    }
    // Σ̄_ij = -k_i S^{(ij)} k_j (prior cross-covariance between latents is 0).
    let neg = acc.neg();
    Ok((neg.lo, neg.hi))
}

/// Full moment bounds over a region for every latent, plus the solver
/// witness candidates (mean argmin/argmax, variance argmin/argmax per
/// latent, region center). Regression models skip the variance programs.
pub fn moment_bounds<T: Real>(
    model: &GpModel<T>,
    region: &Region<T>,
) -> Result<(MomentBounds<T>, Vec<Vec<T>>)> {
    check_region(model, region)?;
    let m = model.task().latents();
    let mut mean_lo = Vec::with_capacity(m);
    let mut mean_hi = Vec::with_capacity(m);
    let mut var_lo = Vec::with_capacity(m);
    let mut var_hi = Vec::with_capacity(m);
    let mut witnesses: Vec<Vec<T>> = Vec::new();
    let needs_variance = matches!(model.task(), Task::BinaryClassification { .. } | Task::MultiClass { .. });
    let large = model.n_train() > DENSE_SOLVER_LIMIT;
    for latent in 0..m {
        let dec = model.decomposition(latent);
        let rb = if large {
            dec.region_pairs_only(model.x_train(), region)
        } else {
            dec.region_bounds(model.x_train(), region)
        };
        let (lo, hi) = mean_bounds_from(model, region, latent, &rb)?;
        witnesses.push(lo.witness.clone());
        witnesses.push(hi.witness.clone());
        mean_lo.push(lo.value);
        mean_hi.push(hi.value);
        if needs_variance {
            let vu = variance_upper_from(model, region, latent, &rb)?;
            let vl = variance_lower_from(model, region, latent, &rb)?;
            witnesses.push(vu.witness.clone());
            witnesses.push(vl.witness.clone());
            var_lo.push(vl.value);
            var_hi.push(vu.value);
        } else {
            var_lo.push(T::zero());
            var_hi.push(T::zero());
        }
    }
    witnesses.push(region.center());
    let mut cross: Vec<Vec<(T, T)>> = vec![vec![(T::zero(), T::zero()); m]; m];
    for i in 0..m {
        cross[i][i] = (var_lo[i], var_hi[i]);
        for j in 0..m {
            if i != j {
                cross[i][j] = bound_cross_covariance(model, region, i, j)?;
            }
        }
    }
    // Solvers often return the same corner; drop consecutive duplicates.
    witnesses.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| x == y));
    Ok((MomentBounds { mean_lo, mean_hi, var_lo, var_hi, cross }, witnesses))
}

fn check_region<T: Real>(model: &GpModel<T>, region: &Region<T>) -> Result<()> {
    if region.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: region.dim() });
    }
    Ok(())
}
