//! Embedded dense solvers: a two-phase simplex for linear programs and a
//! primal-dual interior-point method (with active-set polish) for convex
//! quadratic programs.
//!
//! Both operate on box-constrained variables with general `a·v ≤ b` rows,
//! which is exactly the shape of the variance relaxation programs. Problem
//! sizes are small (tens of variables), so dense tableaus are fine.

use crate::error::{Error, Result};
use crate::linalg::{dot, lu_solve, Cholesky, Mat};
use crate::real::Real;

/// `minimize c·v  subject to  a_i·v ≤ b_i,  l ≤ v ≤ u`.
#[derive(Debug, Clone)]
pub struct LinProgram<T> {
    pub objective: Vec<T>,
    pub rows: Vec<(Vec<T>, T)>,
    pub bounds: Vec<(T, T)>,
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub value: T,
    pub point: Vec<T>,
    /// Nonnegative multipliers of the general rows.
    pub row_duals: Vec<T>,
}

/// `minimize ½ vᵀQv + c·v  subject to  a_i·v ≤ b_i,  l ≤ v ≤ u` with `Q`
/// symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct QuadProgram<T> {
    pub q: Mat<T>,
    pub c: Vec<T>,
    pub rows: Vec<(Vec<T>, T)>,
    pub bounds: Vec<(T, T)>,
}

#[derive(Debug, Clone)]
pub struct QpSolution<T> {
    pub value: T,
    pub point: Vec<T>,
    /// Multipliers for general rows, then lower-bound rows, then upper-bound
    /// rows (the internal `Gv ≤ h` ordering).
    pub duals: Vec<T>,
    pub kkt_residual: T,
}

// ---------------------------------------------------------------------------
// Simplex
// ---------------------------------------------------------------------------

/// Dense two-phase simplex. Dantzig pricing with a switch to Bland's rule
/// after a run of degenerate pivots, which guarantees termination.
pub fn solve_lp<T: Real>(p: &LinProgram<T>) -> Result<LpSolution<T>> {
    let n = p.objective.len();
    assert_eq!(p.bounds.len(), n);
    for (row, _) in &p.rows {
        assert_eq!(row.len(), n);
    }
    for (j, &(l, u)) in p.bounds.iter().enumerate() {
        if !(l <= u) || !l.is_finite() || !u.is_finite() {
            return Err(Error::InvalidParameter {
                name: "bounds",
                reason: format!("variable {j} has invalid box [{l}, {u}]"),
            });
        }
    }

    // Shift to y = v - l >= 0; upper bounds become rows y_j <= u_j - l_j.
    let shift: Vec<T> = p.bounds.iter().map(|&(l, _)| l).collect();
    let mut rows: Vec<(Vec<T>, T)> = Vec::with_capacity(p.rows.len() + n);
    for (a, b) in &p.rows {
        let bb = *b - dot(a, &shift);
        rows.push((a.clone(), bb));
    }
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        rows.push((e, p.bounds[j].1 - p.bounds[j].0));
    }
    let m = rows.len();

    // Standard form: slack per row; artificials where rhs < 0 (row negated).
    // Columns: [y (n)] [slack (m)] [artificial (n_art)].
    let mut need_art: Vec<bool> = Vec::with_capacity(m);
    for (a, b) in rows.iter_mut() {
        if *b < T::zero() {
            for x in a.iter_mut() {
                *x = -*x;
            }
            *b = -*b;
            need_art.push(true);
        } else {
            need_art.push(false);
        }
    }
    let n_art: usize = need_art.iter().filter(|&&x| x).count();
    let total = n + m + n_art;
    let mut tab = Mat::zeros(m, total + 1);
    let mut basis = vec![0usize; m];
    let mut art_col = n + m;
    for (i, (a, b)) in rows.iter().enumerate() {
        for j in 0..n {
            tab[(i, j)] = a[j];
        }
        let slack_sign = if need_art[i] { -T::one() } else { T::one() };
        tab[(i, n + i)] = slack_sign;
        if need_art[i] {
            tab[(i, art_col)] = T::one();
            basis[i] = art_col;
            art_col += 1;
        } else {
            basis[i] = n + i;
        }
        tab[(i, total)] = *b;
    }

    if n_art > 0 {
        // Phase 1: minimize the sum of artificials.
        let mut cost = vec![T::zero(); total];
        for c in cost.iter_mut().skip(n + m) {
            *c = T::one();
        }
        let value = run_simplex(&mut tab, &mut basis, &cost, total, total)?;
        if value > T::of(1e-7) {
            return Err(Error::LpDegenerate("infeasible"));
        }
        // Drive any artificial still in the basis out (degenerate rows).
        for i in 0..m {
            if basis[i] >= n + m {
                if let Some(j) = (0..n + m).find(|&j| tab[(i, j)].abs() > T::of(1e-9)) {
                    pivot(&mut tab, &mut basis, i, j);
                }
            }
        }
    }

    // Phase 2 on the original objective (artificial columns frozen out).
    let mut cost = vec![T::zero(); total];
    cost[..n].copy_from_slice(&p.objective);
    run_simplex(&mut tab, &mut basis, &cost, total, n + m)?;

    let mut y = vec![T::zero(); n];
    for i in 0..m {
        if basis[i] < n {
            y[basis[i]] = tab[(i, total)];
        }
    }
    let point: Vec<T> = y.iter().zip(&shift).map(|(&a, &b)| a + b).collect();
    let value = dot(&p.objective, &point);

    // Row duals are the reduced costs of the slack columns. A phase-1 row
    // negation flips both the slack sign and the equality sign, so the
    // relation λ_i = r_{s_i} holds for flipped rows too.
    let reduced = reduced_costs(&tab, &basis, &cost);
    let row_duals: Vec<T> =
        (0..p.rows.len()).map(|i| reduced[n + i].max(T::zero())).collect();
    Ok(LpSolution { value, point, row_duals })
}

fn reduced_costs<T: Real>(tab: &Mat<T>, basis: &[usize], cost: &[T]) -> Vec<T> {
    let m = tab.rows();
    let mut r = cost.to_vec();
    for i in 0..m {
        let cb = cost[basis[i]];
        if cb == T::zero() {
            continue;
        }
        for (j, rj) in r.iter_mut().enumerate() {
            *rj = *rj - cb * tab[(i, j)];
        }
    }
    r
}

/// Simplex iterations over the first `limit` columns; returns the objective
/// value at termination.
fn run_simplex<T: Real>(
    tab: &mut Mat<T>,
    basis: &mut [usize],
    cost: &[T],
    total: usize,
    limit: usize,
) -> Result<T> {
    let m = tab.rows();
    // Stated tolerances assume f64; floor them for narrower scalars.
    let eps = T::of(1e-9).max(T::epsilon() * T::of(8.0));
    let tie = T::of(1e-12).max(T::epsilon());
    let mut degenerate_run = 0usize;
    let max_iters = 50 * (m + total) + 1000;
    for _ in 0..max_iters {
        let r = reduced_costs(tab, basis, cost);
        let bland = degenerate_run > m + total;
        let mut enter = None;
        if bland {
            for (j, &rj) in r.iter().enumerate().take(limit) {
                if rj < -eps {
                    enter = Some(j);
                    break;
                }
            }
        } else {
            let mut best = -eps;
            for (j, &rj) in r.iter().enumerate().take(limit) {
                if rj < best {
                    best = rj;
                    enter = Some(j);
                }
            }
        }
        let Some(enter) = enter else {
            let mut v = T::zero();
            for i in 0..m {
                v = v + cost[basis[i]] * tab[(i, total)];
            }
            return Ok(v);
        };
        let mut leave: Option<(usize, T)> = None;
        for i in 0..m {
            let a = tab[(i, enter)];
            if a > eps {
                let ratio = tab[(i, total)] / a;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((_, best)) if ratio < best - tie => leave = Some((i, ratio)),
                    Some((li, best)) if bland && ratio <= best + tie && basis[i] < basis[li] => {
                        leave = Some((i, ratio))
                    }
                    _ => {}
                }
            }
        }
        let Some((leave, ratio)) = leave else {
            return Err(Error::LpDegenerate("unbounded"));
        };
        if ratio.abs() <= eps {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
        pivot(tab, basis, leave, enter);
    }
    Err(Error::LpDegenerate("iteration limit reached"))
}

fn pivot<T: Real>(tab: &mut Mat<T>, basis: &mut [usize], row: usize, col: usize) {
    let m = tab.rows();
    let width = tab.cols();
    let p = tab[(row, col)];
    for j in 0..width {
        tab[(row, j)] = tab[(row, j)] / p;
    }
    for i in 0..m {
        if i == row {
            continue;
        }
        let f = tab[(i, col)];
        if f == T::zero() {
            continue;
        }
        for j in 0..width {
            let v = tab[(row, j)];
            tab[(i, j)] = tab[(i, j)] - f * v;
        }
    }
    basis[row] = col;
}

// ---------------------------------------------------------------------------
// Interior-point QP
// ---------------------------------------------------------------------------

/// Mehrotra predictor-corrector interior-point method followed by an
/// active-set polish step. Returns a solution with its measured KKT
/// residual; errs when the residual target cannot be reached.
pub fn solve_qp<T: Real>(p: &QuadProgram<T>) -> Result<QpSolution<T>> {
    let n = p.c.len();
    assert_eq!(p.q.rows(), n);
    assert_eq!(p.bounds.len(), n);
    // Stack general rows and box rows into G v <= h.
    let m = p.rows.len() + 2 * n;
    let mut g = Mat::zeros(m, n);
    let mut h = vec![T::zero(); m];
    for (i, (a, b)) in p.rows.iter().enumerate() {
        for j in 0..n {
            g[(i, j)] = a[j];
        }
        h[i] = *b;
    }
    for j in 0..n {
        let (l, u) = p.bounds[j];
        if !(l <= u) || !l.is_finite() || !u.is_finite() {
            return Err(Error::InvalidParameter {
                name: "bounds",
                reason: format!("variable {j} has invalid box [{l}, {u}]"),
            });
        }
        g[(p.rows.len() + j, j)] = -T::one();
        h[p.rows.len() + j] = -l;
        g[(p.rows.len() + n + j, j)] = T::one();
        h[p.rows.len() + n + j] = u;
    }

    let mut v: Vec<T> = p.bounds.iter().map(|&(l, u)| (l + u) * T::of(0.5)).collect();
    let gv = g.matvec(&v);
    let mut s: Vec<T> = (0..m)
        .map(|i| (h[i] - gv[i]).max(T::of(0.1) * (T::one() + h[i].abs())))
        .collect();
    let mut lam = vec![T::one(); m];

    let tol = T::of(1e-10).max(T::epsilon() * T::of(64.0));
    let mut best: Option<QpSolution<T>> = None;
    for _iter in 0..80 {
        let (r_dual, r_prim, mu) = residuals(p, &g, &h, &v, &s, &lam);
        let res = kkt_residual(p, &g, &h, &v, &lam);
        if best.as_ref().is_none_or(|b| res < b.kkt_residual) {
            best = Some(QpSolution {
                value: objective(p, &v),
                point: v.clone(),
                duals: lam.clone(),
                kkt_residual: res,
            });
        }
        if res <= tol {
            break;
        }
        // Normal-equation matrix Q + Gᵀ diag(λ/s) G (+ tiny regularization).
        let mut k = p.q.clone();
        for i in 0..m {
            let d = lam[i] / s[i];
            for a in 0..n {
                let ga = g[(i, a)];
                if ga == T::zero() {
                    continue;
                }
                for b in 0..n {
                    k[(a, b)] = k[(a, b)] + d * ga * g[(i, b)];
                }
            }
        }
        let reg = T::of(1e-12).max(T::epsilon() * T::of(16.0));
        for a in 0..n {
            k[(a, a)] = k[(a, a)] + reg;
        }
        let chol = match Cholesky::new(&k) {
            Ok(c) => c,
            Err(_) => {
                match Cholesky::with_jitter(&k, &[1e-10, 1e-8, 1e-6, 1e-4, 1e-2]) {
                    Ok((c, _)) => c,
                    // The Newton matrix has gone numerically indefinite
                    // (narrow scalar near convergence): stop refining and
                    // keep the best iterate found so far.
                    Err(_) => break,
                }
            }
        };

        // Affine (predictor) direction: drive complementarity to zero.
        let rc_aff: Vec<T> = (0..m).map(|i| lam[i] * s[i]).collect();
        let (_, dlam_aff, ds_aff) = newton_step(&chol, &g, &r_dual, &r_prim, &rc_aff, &s, &lam);
        let alpha_aff = step_length(&s, &ds_aff).min(step_length(&lam, &dlam_aff)).min(T::one());
        let mu_aff: T = (0..m)
            .map(|i| (lam[i] + alpha_aff * dlam_aff[i]) * (s[i] + alpha_aff * ds_aff[i]))
            .sum::<T>()
            / T::of(m as f64);
        let sigma = (mu_aff / mu).max(T::zero()).powi(3).min(T::one());

        // Corrector.
        let rc: Vec<T> = (0..m)
            .map(|i| lam[i] * s[i] + dlam_aff[i] * ds_aff[i] - sigma * mu)
            .collect();
        let (dv, dlam, ds) = newton_step(&chol, &g, &r_dual, &r_prim, &rc, &s, &lam);
        let alpha =
            (T::of(0.99) * step_length(&s, &ds).min(step_length(&lam, &dlam))).min(T::one());
        for j in 0..n {
            v[j] = v[j] + alpha * dv[j];
        }
        for i in 0..m {
            lam[i] = (lam[i] + alpha * dlam[i]).max(T::of(1e-300));
            s[i] = (s[i] + alpha * ds[i]).max(T::of(1e-300));
        }
    }

    let mut sol = best.expect("at least one iterate recorded");
    if let Some(pol) = polish(p, &g, &h, &sol) {
        if pol.kkt_residual < sol.kkt_residual {
            sol = pol;
        }
    }
    if sol.kkt_residual > T::of(1e-8).max(T::epsilon() * T::of(512.0)) {
        return Err(Error::QpFailure(format!("KKT residual {}", sol.kkt_residual)));
    }
    Ok(sol)
}

fn objective<T: Real>(p: &QuadProgram<T>, v: &[T]) -> T {
    p.q.quadratic_form(v) * T::of(0.5) + dot(&p.c, v)
}

fn residuals<T: Real>(
    p: &QuadProgram<T>,
    g: &Mat<T>,
    h: &[T],
    v: &[T],
    s: &[T],
    lam: &[T],
) -> (Vec<T>, Vec<T>, T) {
    let n = v.len();
    let m = s.len();
    let qv = p.q.matvec(v);
    let gtl = g.tr_matvec(lam);
    let r_dual: Vec<T> = (0..n).map(|j| qv[j] + p.c[j] + gtl[j]).collect();
    let gv = g.matvec(v);
    let r_prim: Vec<T> = (0..m).map(|i| gv[i] + s[i] - h[i]).collect();
    let mu = (0..m).map(|i| lam[i] * s[i]).sum::<T>() / T::of(m as f64);
    (r_dual, r_prim, mu)
}

/// Solves the reduced Newton system for a given complementarity residual.
fn newton_step<T: Real>(
    chol: &Cholesky<T>,
    g: &Mat<T>,
    r_dual: &[T],
    r_prim: &[T],
    rc: &[T],
    s: &[T],
    lam: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let n = r_dual.len();
    let m = r_prim.len();
    // rhs = -r_dual - Gᵀ (D r_prim - rc/s), D = diag(λ/s).
    let tmp: Vec<T> = (0..m).map(|i| lam[i] / s[i] * r_prim[i] - rc[i] / s[i]).collect();
    let gt_tmp = g.tr_matvec(&tmp);
    let rhs: Vec<T> = (0..n).map(|j| -r_dual[j] - gt_tmp[j]).collect();
    let dv = chol.solve(&rhs);
    let gdv = g.matvec(&dv);
    let dlam: Vec<T> =
        (0..m).map(|i| lam[i] / s[i] * (gdv[i] + r_prim[i]) - rc[i] / s[i]).collect();
    // From S dλ + Λ ds = -rc:  ds = -(rc + s dλ)/λ.
    let ds: Vec<T> = (0..m).map(|i| -(rc[i] + s[i] * dlam[i]) / lam[i]).collect();
    (dv, dlam, ds)
}

/// Largest step in `[0, 1]` keeping `x + α dx > 0`.
fn step_length<T: Real>(x: &[T], dx: &[T]) -> T {
    let mut alpha = T::one();
    for i in 0..x.len() {
        if dx[i] < T::zero() {
            alpha = alpha.min(-x[i] / dx[i]);
        }
    }
    alpha
}

/// Measured KKT residual (dual stationarity, primal feasibility,
/// complementarity, dual sign) in the infinity norm.
pub fn kkt_residual<T: Real>(p: &QuadProgram<T>, g: &Mat<T>, h: &[T], v: &[T], lam: &[T]) -> T {
    let n = v.len();
    let m = h.len();
    let qv = p.q.matvec(v);
    let gtl = g.tr_matvec(lam);
    let mut res = T::zero();
    for j in 0..n {
        res = res.max((qv[j] + p.c[j] + gtl[j]).abs());
    }
    let gv = g.matvec(v);
    for i in 0..m {
        res = res.max((gv[i] - h[i]).max(T::zero()));
        res = res.max(lam[i].max(T::zero()) * (h[i] - gv[i]).abs().min(T::one()));
        res = res.max(-lam[i]);
    }
    res
}

/// Snaps the interior-point iterate to its active set and re-solves the
/// equality-constrained KKT system, which typically gains several digits.
fn polish<T: Real>(
    p: &QuadProgram<T>,
    g: &Mat<T>,
    h: &[T],
    sol: &QpSolution<T>,
) -> Option<QpSolution<T>> {
    let n = sol.point.len();
    let m = h.len();
    let gv = g.matvec(&sol.point);
    let active: Vec<usize> = (0..m)
        .filter(|&i| {
            let slack = h[i] - gv[i];
            slack.abs() <= T::of(1e-6) * (T::one() + h[i].abs()) || sol.duals[i] > T::of(1e-6)
        })
        .collect();
    let na = active.len();
    let dim = n + na;
    let mut kkt = Mat::zeros(dim, dim);
    let mut rhs = vec![T::zero(); dim];
    for a in 0..n {
        for b in 0..n {
            kkt[(a, b)] = p.q[(a, b)];
        }
        kkt[(a, a)] = kkt[(a, a)] + T::of(1e-12);
        rhs[a] = -p.c[a];
    }
    for (k, &i) in active.iter().enumerate() {
        for j in 0..n {
            kkt[(j, n + k)] = g[(i, j)];
            kkt[(n + k, j)] = g[(i, j)];
        }
        rhs[n + k] = h[i];
    }
    let sol_vec = lu_solve(&kkt, &rhs).ok()?;
    let v = sol_vec[..n].to_vec();
    // Reject the polish if it left the feasible set.
    let gv = g.matvec(&v);
    for i in 0..m {
        if gv[i] > h[i] + T::of(1e-9) * (T::one() + h[i].abs()) {
            return None;
        }
    }
    let mut lam = vec![T::zero(); m];
    for (k, &i) in active.iter().enumerate() {
        lam[i] = sol_vec[n + k].max(T::zero());
    }
    let res = kkt_residual(p, g, h, &v, &lam);
    Some(QpSolution { value: objective(p, &v), point: v, duals: lam, kkt_residual: res })
}

/// Brute-force LP oracle: enumerates all vertices (intersections of `n`
/// constraint hyperplanes from rows and bounds) and picks the feasible one
/// with the lowest objective. Exponential; for test instances only.
#[cfg(any(test, feature = "testutil"))]
pub fn lp_vertex_enumeration_oracle<T: Real>(p: &LinProgram<T>) -> Option<(T, Vec<T>)> {
    fn rec<T: Real>(
        planes: &[(Vec<T>, T)],
        p: &LinProgram<T>,
        combo: &mut Vec<usize>,
        depth: usize,
        start: usize,
        best: &mut Option<(T, Vec<T>)>,
    ) {
        let n = p.objective.len();
        if depth == n {
            let a = Mat::from_rows(&combo.iter().map(|&i| planes[i].0.clone()).collect::<Vec<_>>());
            let b: Vec<T> = combo.iter().map(|&i| planes[i].1).collect();
            if let Ok(x) = lu_solve(&a, &b) {
                let feas = p.rows.iter().all(|(row, rhs)| dot(row, &x) <= *rhs + T::of(1e-9))
                    && x.iter()
                        .zip(&p.bounds)
                        .all(|(&v, &(l, u))| v >= l - T::of(1e-9) && v <= u + T::of(1e-9));
                if feas {
                    let val = dot(&p.objective, &x);
                    if best.as_ref().is_none_or(|(bv, _)| val < *bv) {
                        *best = Some((val, x));
                    }
                }
            }
            return;
        }
        for i in start..planes.len() {
            combo[depth] = i;
            rec(planes, p, combo, depth + 1, i + 1, best);
        }
    }

    let n = p.objective.len();
    let mut planes: Vec<(Vec<T>, T)> = p.rows.clone();
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        planes.push((e.clone(), p.bounds[j].1));
        planes.push((e, p.bounds[j].0));
    }
    let mut best: Option<(T, Vec<T>)> = None;
    let mut combo = vec![0usize; n];
    rec(&planes, p, &mut combo, 0, 0, &mut best);
    best
}
