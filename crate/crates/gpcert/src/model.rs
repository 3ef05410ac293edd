//! Gaussian process models: exact regression posteriors, Laplace binary
//! classification posteriors, ingestion of externally trained (including
//! sparse) models, and predictive evaluation.
//!
//! Every model is reduced to the common inference form
//! `μ̄(x) = Σ_{x,X} t` and `Σ̄(x) = Σ_{x,x} − Σ_{x,X} S Σ_{X,x}`, so the
//! downstream bound machinery applies regardless of how `S` and `t` were
//! produced.

use crate::error::{Error, Result};
use crate::kernels::{Decomposition, KernelSpec};
use crate::linalg::{dot, sym_eigen, Cholesky, Mat, SymEigen};
use crate::quadrature::GaussHermite;
use crate::real::{normal_pdf_over_cdf, sigmoid, std_normal_cdf, Real};
use rand::SeedableRng;
use std::sync::OnceLock;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Binary classification likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Link<T> {
    /// `σ(ξ) = Φ(λξ)`.
    Probit { lambda: T },
    /// Logistic sigmoid.
    Logistic,
}

/// What the model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task<T> {
    /// `outputs` independent regression outputs with observation noise.
    Regression { outputs: usize, noise: T },
    /// Two classes through a single latent and a sigmoid link.
    BinaryClassification { link: Link<T> },
    /// `classes >= 3` softmax classification over one latent per class.
    MultiClass { classes: usize },
}

impl<T: Real> Task<T> {
    /// Number of latent functions.
    pub fn latents(&self) -> usize {
        match self {
            Task::Regression { outputs, .. } => *outputs,
            Task::BinaryClassification { .. } => 1,
            Task::MultiClass { classes } => *classes,
        }
    }

    pub fn is_classification(&self) -> bool {
        !matches!(self, Task::Regression { .. })
    }

    /// Number of classes reported by `predict_class_prob`.
    pub fn classes(&self) -> usize {
        match self {
            Task::Regression { .. } => 0,
            Task::BinaryClassification { .. } => 2,
            Task::MultiClass { classes } => *classes,
        }
    }
}

/// Posterior mean and covariance of the latent functions at one point.
#[derive(Debug, Clone)]
pub struct Posterior<T> {
    pub mean: Vec<T>,
    pub cov: Mat<T>,
}

/// A trained (or ingested) GP in the common `S, t` inference form.
///
/// For sparse approximations the rows of `x_train` are the inducing points.
/// `s` is the `(mN) × (mN)` posterior matrix in class-major block layout and
/// `t` the stacked weight vector.
#[derive(Debug)]
pub struct GpModel<T> {
    kernels: Vec<KernelSpec<T>>,
    x_train: Mat<T>,
    s: Mat<T>,
    t: Vec<T>,
    task: Task<T>,
    decomps: Vec<Decomposition<T>>,
    block_eigs: Vec<OnceLock<SymEigen<T>>>,
    block_chols: Vec<OnceLock<(Mat<T>, T)>>,
    diag_blocks: Vec<OnceLock<Mat<T>>>,
    /// Certified bound on how far `S` may be from positive semidefinite
    /// (`min eigenvalue >= -psd_slack`).
    psd_slack: T,
    gh: GaussHermite<T>,
}

impl<T: Real> Clone for GpModel<T> {
    fn clone(&self) -> Self {
        Self {
            kernels: self.kernels.clone(),
            x_train: self.x_train.clone(),
            s: self.s.clone(),
            t: self.t.clone(),
            task: self.task,
            decomps: self.decomps.clone(),
            block_eigs: (0..self.block_eigs.len()).map(|_| OnceLock::new()).collect(),
            block_chols: (0..self.block_chols.len()).map(|_| OnceLock::new()).collect(),
            diag_blocks: (0..self.diag_blocks.len()).map(|_| OnceLock::new()).collect(),
            psd_slack: self.psd_slack,
            gh: self.gh.clone(),
        }
    }
}

/// Gauss–Hermite order used for all likelihood expectations.
pub const GH_NODES: usize = 64;

/// Jitter ladder applied when Gram factorizations fail.
pub const JITTER_LADDER: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

impl<T: Real> GpModel<T> {
    /// Assembles and validates a model from its inference parts. This is the
    /// ingestion path for externally trained and sparse models.
    pub fn from_parts(
        kernels: Vec<KernelSpec<T>>,
        x_train: Mat<T>,
        s: Mat<T>,
        t: Vec<T>,
        task: Task<T>,
    ) -> Result<Self> {
        let m = task.latents();
        let n = x_train.rows();
        let d = x_train.cols();
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "x_train",
                reason: "at least one training/inducing point required".into(),
            });
        }
        if kernels.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: kernels.len() });
        }
        for k in &kernels {
            k.validate()?;
            let kd = k.dim()?;
            if kd != d {
                return Err(Error::DimensionMismatch { expected: d, got: kd });
            }
        }
        if let Task::Regression { noise, .. } = task {
            if noise <= T::zero() {
                return Err(Error::InvalidParameter {
                    name: "noise",
                    reason: "observation noise must be positive".into(),
                });
            }
        }
        if let Task::BinaryClassification { link: Link::Probit { lambda } } = task {
            if lambda <= T::zero() {
                return Err(Error::InvalidParameter {
                    name: "lambda",
                    reason: "probit scale must be positive".into(),
                });
            }
        }
        if s.rows() != m * n || s.cols() != m * n {
            return Err(Error::DimensionMismatch { expected: m * n, got: s.rows() });
        }
        if t.len() != m * n {
            return Err(Error::DimensionMismatch { expected: m * n, got: t.len() });
        }

        // Symmetry within 1e-8, then positive semidefiniteness within the
        // same tolerance. A plain Cholesky witnesses definiteness cheaply;
        // only borderline matrices fall back to the eigenvalue clip.
        let scale = s.max_abs().max(T::one());
        for i in 0..s.rows() {
            for j in (i + 1)..s.cols() {
                if (s[(i, j)] - s[(j, i)]).abs() > T::of(1e-8) * scale {
                    return Err(Error::InvalidParameter {
                        name: "S",
                        reason: format!("not symmetric at ({i},{j})"),
                    });
                }
            }
        }
        let mut s = s;
        s.symmetrize();
        let mut psd_slack = T::zero();
        if Cholesky::new(&s).is_err() {
            let tol = 1e-8 * scale.to_f64_lossy();
            match Cholesky::with_jitter(&s, &[1e-12 * scale.to_f64_lossy(), 1e-10 * scale.to_f64_lossy(), tol]) {
                Ok((_, jitter)) => {
                    // min eigenvalue >= -jitter: acceptably semidefinite.
                    psd_slack = jitter;
                }
                Err(_) => {
                    let eig = sym_eigen(&s, 1e-12)?;
                    if eig.values[0] < -T::of(1e-8) * scale {
                        return Err(Error::InvalidParameter {
                            name: "S",
                            reason: format!(
                                "not positive semidefinite: min eigenvalue {}",
                                eig.values[0]
                            ),
                        });
                    }
                    let dim = s.rows();
                    let mut rebuilt = Mat::zeros(dim, dim);
                    for a in 0..dim {
                        for b in 0..dim {
                            let mut acc = T::zero();
                            for k in 0..dim {
                                let lk = eig.values[k].max(T::zero());
                                acc = acc + eig.vectors[(a, k)] * lk * eig.vectors[(b, k)];
                            }
                            rebuilt[(a, b)] = acc;
                        }
                    }
                    s = rebuilt;
                }
            }
        }

        let decomps = kernels.iter().map(Decomposition::new).collect::<Result<Vec<_>>>()?;
        let block_eigs = (0..m).map(|_| OnceLock::new()).collect();
        let block_chols = (0..m).map(|_| OnceLock::new()).collect();
        let diag_blocks = (0..m).map(|_| OnceLock::new()).collect();
        Ok(Self {
            kernels,
            x_train,
            s,
            t,
            task,
            decomps,
            block_eigs,
            block_chols,
            diag_blocks,
            psd_slack,
            gh: GaussHermite::new(GH_NODES),
        })
    }

    /// Exact GP regression: `S = (K + noise·I)⁻¹`, `t = S y`, zero prior
    /// mean. Walks the jitter ladder when the Gram factorization fails.
    pub fn fit_regression(
        x_train: Mat<T>,
        y: &[T],
        kernel: KernelSpec<T>,
        noise: T,
    ) -> Result<Self> {
        let n = x_train.rows();
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        if noise <= T::zero() {
            return Err(Error::InvalidParameter {
                name: "noise",
                reason: "observation noise must be positive".into(),
            });
        }
        kernel.validate()?;
        let gram = gram_matrix(&kernel, &x_train)?;
        let mut ky = gram;
        for i in 0..n {
            ky[(i, i)] = ky[(i, i)] + noise;
        }
        let (chol, _jitter) = Cholesky::with_jitter(&ky, &JITTER_LADDER)?;
        let s = chol.inverse();
        let t = chol.solve(y);
        Self::from_parts(vec![kernel], x_train, s, t, Task::Regression { outputs: 1, noise })
    }

    /// Laplace approximation for binary classification with labels in
    /// `{-1, +1}`. Newton iteration on the latent posterior mode (stopping
    /// tolerance 1e-8, at most 100 iterations), then
    /// `t = ∇ log p(y|f̂)` and `S = W^½ (I + W^½ K W^½)⁻¹ W^½`, which puts
    /// the model in the common inference form.
    pub fn fit_laplace_binary(
        x_train: Mat<T>,
        y: &[i8],
        kernel: KernelSpec<T>,
        link: Link<T>,
    ) -> Result<Self> {
        let n = x_train.rows();
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        if !(y.iter().any(|&v| v > 0) && y.iter().any(|&v| v < 0)) {
            return Err(Error::SingleClass);
        }
        kernel.validate()?;
        let k = gram_matrix(&kernel, &x_train)?;

        let mut f = vec![T::zero(); n];
        // 1e-8 as specified for f64; floored at a few ulps for narrower
        // scalar types where 1e-8 is unreachable.
        let tol = T::of(1e-8).max(T::epsilon() * T::of(32.0));
        let mut converged = false;
        let mut w_sqrt = vec![T::zero(); n];
        let mut grad = vec![T::zero(); n];
        for _ in 0..100 {
            let mut w = vec![T::zero(); n];
            for i in 0..n {
                let (g, wi) = link_derivatives(link, y[i], f[i]);
                grad[i] = g;
                w[i] = wi.max(T::of(1e-12));
            }
            for i in 0..n {
                w_sqrt[i] = w[i].sqrt();
            }
            // B = I + W^½ K W^½.
            let mut b = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    b[(i, j)] = w_sqrt[i] * k[(i, j)] * w_sqrt[j];
                }
                b[(i, i)] = b[(i, i)] + T::one();
            }
            let (chol, _) = Cholesky::with_jitter(&b, &JITTER_LADDER)?;
            // a = b' − W^½ B⁻¹ W^½ K b' with b' = W f + ∇.
            let bvec: Vec<T> = (0..n).map(|i| w[i] * f[i] + grad[i]).collect();
            let kb = k.matvec(&bvec);
            let rhs: Vec<T> = (0..n).map(|i| w_sqrt[i] * kb[i]).collect();
            let sol = chol.solve(&rhs);
            let a: Vec<T> = (0..n).map(|i| bvec[i] - w_sqrt[i] * sol[i]).collect();
            let f_new = k.matvec(&a);
            let delta =
                f_new.iter().zip(&f).map(|(&a, &b)| (a - b).abs()).fold(T::zero(), T::max);
            f = f_new;
            if delta < tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence(
                "Laplace mode finding exceeded 100 Newton iterations".into(),
            ));
        }

        // Final t and S at the mode.
        let mut w = vec![T::zero(); n];
        let mut t = vec![T::zero(); n];
        for i in 0..n {
            let (g, wi) = link_derivatives(link, y[i], f[i]);
            t[i] = g;
            w[i] = wi.max(T::of(1e-12));
            w_sqrt[i] = w[i].sqrt();
        }
        let mut b = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] = w_sqrt[i] * k[(i, j)] * w_sqrt[j];
            }
            b[(i, i)] = b[(i, i)] + T::one();
        }
        let (chol, _) = Cholesky::with_jitter(&b, &JITTER_LADDER)?;
        let binv = chol.inverse();
        let mut s = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] = w_sqrt[i] * binv[(i, j)] * w_sqrt[j];
            }
        }
        Self::from_parts(vec![kernel], x_train, s, t, Task::BinaryClassification { link })
    }

    pub fn task(&self) -> Task<T> {
        self.task
    }

    pub fn dim(&self) -> usize {
        self.x_train.cols()
    }

    pub fn n_train(&self) -> usize {
        self.x_train.rows()
    }

    pub fn x_train(&self) -> &Mat<T> {
        &self.x_train
    }

    pub fn kernel(&self, latent: usize) -> &KernelSpec<T> {
        &self.kernels[latent]
    }

    pub fn decomposition(&self, latent: usize) -> &Decomposition<T> {
        &self.decomps[latent]
    }

    /// Weight vector block of latent `i`.
    pub fn t_block(&self, latent: usize) -> &[T] {
        let n = self.n_train();
        &self.t[latent * n..(latent + 1) * n]
    }

    /// Posterior matrix block `S^{(i,j)}`.
    pub fn s_block(&self, i: usize, j: usize) -> Mat<T> {
        block_of(&self.s, self.n_train(), i, j)
    }

    /// Cached reference to the diagonal block `S^{(i,i)}`.
    pub fn s_diag_block(&self, latent: usize) -> &Mat<T> {
        self.diag_blocks[latent]
            .get_or_init(|| block_of(&self.s, self.n_train(), latent, latent))
    }

    /// Eigendecomposition of the diagonal block `S^{(i,i)}` with eigenvalues
    /// clipped at zero. Computed on first use and cached.
    pub fn s_block_eigen(&self, latent: usize) -> &SymEigen<T> {
        self.block_eigs[latent].get_or_init(|| {
            let block = block_of(&self.s, self.n_train(), latent, latent);
            let mut e = sym_eigen(&block, 1e-12).expect("Jacobi iteration on a symmetric block");
            for v in &mut e.values {
                *v = v.max(T::zero());
            }
            e
        })
    }

    /// Lower Cholesky factor of `S^{(i,i)} + jitter·I` together with the
    /// jitter that was needed. Computed on first use and cached.
    pub fn s_block_chol(&self, latent: usize) -> &(Mat<T>, T) {
        self.block_chols[latent].get_or_init(|| {
            let block = block_of(&self.s, self.n_train(), latent, latent);
            let scale = block.max_abs().max(T::one()).to_f64_lossy();
            let ladder = [1e-14 * scale, 1e-12 * scale, 1e-10 * scale, 1e-8 * scale];
            let (chol, jitter) =
                Cholesky::with_jitter(&block, &ladder).expect("S blocks are PSD within tolerance");
            (chol.lower().clone(), jitter)
        })
    }

    /// Certified semidefiniteness slack of `S`.
    pub fn psd_slack(&self) -> T {
        self.psd_slack
    }

    pub fn gauss_hermite(&self) -> &GaussHermite<T> {
        &self.gh
    }

    /// Kernel vector `Σ_{x,X}` for one latent.
    pub fn kernel_vector(&self, latent: usize, x: &[T]) -> Result<Vec<T>> {
        (0..self.n_train())
            .map(|i| self.kernels[latent].eval(x, self.x_train.row(i)))
            .collect()
    }

    /// Latent posterior mean of one output.
    pub fn latent_mean(&self, latent: usize, x: &[T]) -> Result<T> {
        let kv = self.kernel_vector(latent, x)?;
        Ok(dot(&kv, self.t_block(latent)))
    }

    /// Gradient of the latent posterior mean.
    pub fn latent_mean_grad(&self, latent: usize, x: &[T]) -> Result<Vec<T>> {
        let d = self.dim();
        let mut out = vec![T::zero(); d];
        let t = self.t_block(latent);
        for i in 0..self.n_train() {
            let g = self.kernels[latent].grad(x, self.x_train.row(i))?;
            for j in 0..d {
                out[j] = out[j] + t[i] * g[j];
            }
        }
        Ok(out)
    }

    /// Posterior mean vector and covariance matrix at `x`. Diagonal entries
    /// within `-1e-10` of zero are clipped to zero.
    pub fn posterior_at(&self, x: &[T]) -> Result<Posterior<T>> {
        let m = self.task.latents();
        let kvs: Vec<Vec<T>> = (0..m).map(|c| self.kernel_vector(c, x)).collect::<Result<_>>()?;
        let mean: Vec<T> = (0..m).map(|c| dot(&kvs[c], self.t_block(c))).collect();
        let mut cov = Mat::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let sv = if i == j {
                    self.s_diag_block(i).matvec(&kvs[j])
                } else {
                    self.s_block(i, j).matvec(&kvs[j])
                };
                let mut v = -dot(&kvs[i], &sv);
                if i == j {
                    v = v + self.kernels[i].eval(x, x)?;
                    if v < T::zero() {
                        v = T::zero();
                    }
                }
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        Ok(Posterior { mean, cov })
    }

    /// Class probabilities. Binary models use the probit closed form or
    /// 64-node Gauss–Hermite quadrature of the logistic integral; softmax
    /// models fall back to the seeded Monte-Carlo reference evaluator.
    pub fn predict_class_prob(&self, x: &[T]) -> Result<Vec<T>> {
        match self.task {
            Task::Regression { .. } => Err(Error::TaskMismatch { expected: "classification" }),
            Task::BinaryClassification { link } => {
                let p = self.posterior_at(x)?;
                let pi = predictive_binary(link, p.mean[0], p.cov[(0, 0)], &self.gh);
                Ok(vec![pi, T::one() - pi])
            }
            Task::MultiClass { .. } => self.predict_softmax_mc(x, 20_000, 0x5eed),
        }
    }

    /// Monte-Carlo estimate of the softmax predictive distribution
    /// (diagnostics / reference only). Deterministic for a fixed seed.
    pub fn predict_softmax_mc(&self, x: &[T], samples: usize, seed: u64) -> Result<Vec<T>> {
        let m = self.task.latents();
        if !self.task.is_classification() {
            return Err(Error::TaskMismatch { expected: "classification" });
        }
        let p = self.posterior_at(x)?;
        let mut cov = p.cov.clone();
        for i in 0..m {
            cov[(i, i)] = cov[(i, i)] + T::of(1e-12);
        }
        let l = lower_cholesky_psd(&cov);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = vec![T::zero(); m];
        let mut z = vec![T::zero(); m];
        for _ in 0..samples {
            for zi in z.iter_mut() {
                *zi = T::of(standard_normal(&mut rng));
            }
            // ξ = μ + L z, then softmax.
            let mut xi = p.mean.clone();
            for i in 0..m {
                for j in 0..=i {
                    xi[i] = xi[i] + l[(i, j)] * z[j];
                }
            }
            let mx = xi.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let exps: Vec<T> = xi.iter().map(|&v| (v - mx).exp()).collect();
            let total: T = exps.iter().copied().sum();
            for i in 0..m {
                acc[i] = acc[i] + exps[i] / total;
            }
        }
        let inv = T::of(samples as f64).recip();
        Ok(acc.into_iter().map(|a| a * inv).collect())
    }

    /// Most probable class at `x`.
    pub fn predicted_class(&self, x: &[T]) -> Result<usize> {
        let probs = self.predict_class_prob(x)?;
        Ok(argmax(&probs))
    }
}

pub(crate) fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    // Box-Muller.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (core::f64::consts::TAU * u2).cos()
}

/// Lower Cholesky factor with flooring for positive-semidefinite input.
fn lower_cholesky_psd<T: Real>(a: &Mat<T>) -> Mat<T> {
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            if i == j {
                l[(i, j)] = s.max(T::of(1e-300)).sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    l
}

/// `(d/df log p(y|f), -d²/df² log p(y|f))` for one observation.
fn link_derivatives<T: Real>(link: Link<T>, y: i8, f: T) -> (T, T) {
    let ys = if y > 0 { T::one() } else { -T::one() };
    match link {
        Link::Probit { lambda } => {
            let z = lambda * ys * f;
            let ratio = normal_pdf_over_cdf(z);
            let g = lambda * ys * ratio;
            let w = lambda * lambda * (ratio * ratio + z * ratio);
            (g, w)
        }
        Link::Logistic => {
            let p = sigmoid(f);
            let target = if y > 0 { T::one() } else { T::zero() };
            (target - p, p * (T::one() - p))
        }
    }
}

/// `Π(μ, Σ) = ∫ σ(ξ) N(ξ|μ, Σ) dξ` for a binary link: closed form for the
/// probit, Gauss–Hermite quadrature for the logistic sigmoid.
pub fn predictive_binary<T: Real>(link: Link<T>, mean: T, var: T, gh: &GaussHermite<T>) -> T {
    let var = var.max(T::zero());
    match link {
        Link::Probit { lambda } => {
            let denom = (lambda.powi(-2) + var).sqrt();
            std_normal_cdf(mean / denom)
        }
        Link::Logistic => gh.gaussian_expectation(mean, var, sigmoid),
    }
}

/// Quadrature evaluation of the binary predictive integral for any link
/// (used to cross-check the probit closed form).
pub fn predictive_binary_quadrature<T: Real>(
    link: Link<T>,
    mean: T,
    var: T,
    gh: &GaussHermite<T>,
) -> T {
    let var = var.max(T::zero());
    match link {
        Link::Probit { lambda } => {
            gh.gaussian_expectation(mean, var, |xi| std_normal_cdf(lambda * xi))
        }
        Link::Logistic => gh.gaussian_expectation(mean, var, sigmoid),
    }
}

fn gram_matrix<T: Real>(kernel: &KernelSpec<T>, x: &Mat<T>) -> Result<Mat<T>> {
    let n = x.rows();
    let mut k = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(x.row(i), x.row(j))?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

fn block_of<T: Real>(s: &Mat<T>, n: usize, i: usize, j: usize) -> Mat<T> {
    Mat::from_fn(n, n, |a, b| s[(i * n + a, j * n + b)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn se(variance: f64, theta: Vec<f64>) -> KernelSpec<f64> {
        KernelSpec::SquaredExponential { variance, theta }
    }

    #[test]
    fn single_point_regression_conditioning() {
        // x=0, y=1, SE(1,1), noise 1: S = (1+1)^-1 = 0.5, t = 0.5,
        // mean at 0 = 0.5, variance = 1 - 0.5 = 0.5.
        let m = GpModel::fit_regression(
            Mat::from_rows(&[vec![0.0]]),
            &[1.0],
            se(1.0, vec![1.0]),
            1.0,
        )
        .unwrap();
        assert_relative_eq!(m.t_block(0)[0], 0.5, epsilon = 1e-12);
        let p = m.posterior_at(&[0.0]).unwrap();
        assert_relative_eq!(p.mean[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(p.cov[(0, 0)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn zero_targets_give_zero_mean() {
        let x = Mat::from_rows(&[vec![0.0], vec![1.0], vec![-0.5]]);
        let m = GpModel::fit_regression(x, &[0.0; 3], se(1.0, vec![1.0]), 0.1).unwrap();
        assert!(m.t_block(0).iter().all(|&t| t.abs() < 1e-12));
        assert!(m.latent_mean(0, &[0.3]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn regression_matches_dense_solve_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 3;
        let x = Mat::from_fn(n, 1, |_, _| rng.gen_range(-2.0..2.0));
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let kernel = se(1.3, vec![0.8]);
        let noise = 0.05;
        let m = GpModel::fit_regression(x.clone(), &y, kernel.clone(), noise).unwrap();
        // Independent oracle: solve (K + noise I) alpha = y by Gaussian
        // elimination and predict k(x*)ᵀ alpha.
        let mut ky = Mat::from_fn(n, n, |i, j| kernel.eval(x.row(i), x.row(j)).unwrap());
        for i in 0..n {
            ky[(i, i)] += noise;
        }
        let alpha = crate::linalg::lu_solve(&ky, &y).unwrap();
        for i in 0..n {
            let pred = m.latent_mean(0, x.row(i)).unwrap();
            let kv: Vec<f64> = (0..n).map(|j| kernel.eval(x.row(i), x.row(j)).unwrap()).collect();
            let oracle = dot(&kv, &alpha);
            assert_relative_eq!(pred, oracle, epsilon = 1e-8);
        }
    }

    #[test]
    fn prior_recovered_far_from_data() {
        let m = GpModel::fit_regression(
            Mat::from_rows(&[vec![0.0]]),
            &[1.0],
            se(1.0, vec![1.0]),
            1.0,
        )
        .unwrap();
        let p = m.posterior_at(&[50.0]).unwrap();
        assert!(p.mean[0].abs() < 1e-10);
        assert_relative_eq!(p.cov[(0, 0)], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn laplace_symmetric_data_is_balanced() {
        // Mirrored inputs with mirrored labels: mean at 0 is 0, p = 1/2.
        let x = Mat::from_rows(&[vec![-1.0], vec![1.0], vec![-0.4], vec![0.4]]);
        let y = [-1i8, 1, -1, 1];
        for link in [Link::Probit { lambda: 1.0 }, Link::Logistic] {
            let m = GpModel::fit_laplace_binary(x.clone(), &y, se(1.0, vec![1.0]), link).unwrap();
            assert!(m.latent_mean(0, &[0.0]).unwrap().abs() < 1e-8);
            let p = m.predict_class_prob(&[0.0]).unwrap();
            assert_relative_eq!(p[0], 0.5, epsilon = 1e-8);
            assert_relative_eq!(p[0] + p[1], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn laplace_separable_data_classifies_training_set() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 20;
        let x = Mat::from_fn(n, 1, |i, _| {
            if i < n / 2 {
                rng.gen_range(-2.0..-0.5)
            } else {
                rng.gen_range(0.5..2.0)
            }
        });
        let y: Vec<i8> = (0..n).map(|i| if i < n / 2 { -1 } else { 1 }).collect();
        let m = GpModel::fit_laplace_binary(
            x.clone(),
            &y,
            se(1.0, vec![1.0]),
            Link::Probit { lambda: 1.0 },
        )
        .unwrap();
        for i in 0..n {
            let mean = m.latent_mean(0, x.row(i)).unwrap();
            assert!(mean * f64::from(y[i]) > 0.0, "sign mismatch at {i}");
        }
    }

    #[test]
    fn laplace_rejects_single_class() {
        let x = Mat::from_rows(&[vec![0.0], vec![1.0]]);
        let err = GpModel::fit_laplace_binary(x, &[1, 1], se(1.0, vec![1.0]), Link::Logistic);
        assert!(matches!(err, Err(Error::SingleClass)));
    }

    #[test]
    fn predict_class_prob_examples() {
        let gh = GaussHermite::new(GH_NODES);
        // Probit: mean 0 -> 1/2 for any variance; mean 1, var 0 -> Φ(1).
        assert_relative_eq!(
            predictive_binary(Link::Probit { lambda: 1.0 }, 0.0, 3.7, &gh),
            0.5,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            predictive_binary(Link::Probit { lambda: 1.0 }, 1.0, 0.0, &gh),
            0.8413447460685429,
            epsilon = 1e-12
        );
        // Logistic with zero variance is the plain sigmoid.
        assert_relative_eq!(predictive_binary(Link::Logistic, 0.0, 0.0, &gh), 0.5, epsilon = 1e-12);
        assert_relative_eq!(
            predictive_binary(Link::Logistic, 2.0, 0.0, &gh),
            sigmoid(2.0),
            epsilon = 1e-10
        );
    }

    #[test]
    fn probit_closed_form_matches_quadrature() {
        // Quadrature error grows with the link steepness; the 64-node rule
        // is sized for the default λ = 1 (and the logistic link, which is
        // shallower still).
        let gh = GaussHermite::new(GH_NODES);
        for lambda in [0.7, 1.0] {
            let link = Link::Probit { lambda };
            for i in 0..=20 {
                for j in 0..=20 {
                    let mu = -5.0 + 10.0 * i as f64 / 20.0;
                    let var = 1e-6 + 10.0 * j as f64 / 20.0;
                    let exact = predictive_binary(link, mu, var, &gh);
                    let quad = predictive_binary_quadrature(link, mu, var, &gh);
                    assert!(
                        (exact - quad).abs() < 1e-6,
                        "λ={lambda} μ={mu} Σ={var}: {exact} vs {quad}"
                    );
                }
            }
        }
    }

    #[test]
    fn posterior_variance_nonnegative_on_samples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 8;
        let x = Mat::from_fn(n, 2, |_, _| rng.gen_range(-2.0..2.0));
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = GpModel::fit_regression(x, &y, se(1.0, vec![0.9, 1.4]), 0.01).unwrap();
        for _ in 0..200 {
            let p =
                m.posterior_at(&[rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]).unwrap();
            assert!(p.cov[(0, 0)] >= 0.0);
        }
    }

    #[test]
    fn ingested_multiclass_model_validates_blocks() {
        // Three classes, two training points: block-diagonal S.
        let x = Mat::from_rows(&[vec![0.0], vec![1.0]]);
        let s = Mat::from_fn(6, 6, |i, j| if i == j { 0.5 } else { 0.0 });
        let t = vec![0.1; 6];
        let kernels = vec![se(1.0, vec![1.0]), se(1.0, vec![1.0]), se(1.0, vec![1.0])];
        let m = GpModel::from_parts(kernels, x, s, t, Task::MultiClass { classes: 3 }).unwrap();
        let p = m.posterior_at(&[0.5]).unwrap();
        assert_eq!(p.mean.len(), 3);
        // Independent latents: off-diagonal covariance is zero.
        assert!(p.cov[(0, 1)].abs() < 1e-12);
        let probs = m.predict_class_prob(&[0.5]).unwrap();
        let total: f64 = probs.iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn asymmetric_s_is_rejected() {
        let x = Mat::from_rows(&[vec![0.0], vec![1.0]]);
        let mut s = Mat::zeros(2, 2);
        s[(0, 1)] = 0.3;
        let err = GpModel::from_parts(
            vec![se(1.0, vec![1.0])],
            x,
            s,
            vec![0.0, 0.0],
            Task::Regression { outputs: 1, noise: 0.1 },
        );
        assert!(err.is_err());
    }
}
