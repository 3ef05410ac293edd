//! On-disk formats: the model file, the job specification, and the report
//! records. JSON for structured documents, CSV for datasets and curves.

use anyhow::{bail, Context};
use gpcert::kernels::KernelSpec;
use gpcert::linalg::Mat;
use gpcert::model::{GpModel, Task};
use gpcert::robustness::NormOrder;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Tolerance for reproducing embedded reference predictions at load time.
pub const REFERENCE_TOLERANCE: f64 = 1e-6;

/// A prediction pinned into the model file for load-time verification:
/// class probabilities for classification, posterior means for regression.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReferencePrediction {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

/// Serialized GP model in the common inference form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    /// One kernel per latent function.
    pub kernels: Vec<KernelSpec<f64>>,
    /// Training (or inducing) inputs, `N × d`.
    pub x: Vec<Vec<f64>>,
    /// Posterior matrix, `(mN) × (mN)` in class-major block layout.
    pub s: Vec<Vec<f64>>,
    /// Stacked weight vector of length `mN`.
    pub t: Vec<f64>,
    pub task: Task<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference_predictions: Vec<ReferencePrediction>,
}

impl ModelFile {
    pub fn from_model(model: &GpModel<f64>, references: Vec<ReferencePrediction>) -> Self {
        let m = model.task().latents();
        let n = model.n_train();
        let mut s = vec![vec![0.0; m * n]; m * n];
        for bi in 0..m {
            for bj in 0..m {
                let block = model.s_block(bi, bj);
                for a in 0..n {
                    for b in 0..n {
                        s[bi * n + a][bj * n + b] = block[(a, b)];
                    }
                }
            }
        }
        let x = (0..n).map(|i| model.x_train().row(i).to_vec()).collect();
        let mut t = Vec::with_capacity(m * n);
        for c in 0..m {
            t.extend_from_slice(model.t_block(c));
        }
        Self {
            kernels: (0..m).map(|c| model.kernel(c).clone()).collect(),
            x,
            s,
            t,
            task: model.task(),
            reference_predictions: references,
        }
    }

    /// Builds and validates the model, then replays the embedded reference
    /// predictions and rejects the file on any mismatch beyond 1e-6.
    pub fn into_model(self) -> anyhow::Result<GpModel<f64>> {
        let n = self.x.len();
        let d = self.x.first().map_or(0, Vec::len);
        let x = Mat::from_fn(n, d, |i, j| self.x[i][j]);
        let dim = self.s.len();
        for (i, row) in self.s.iter().enumerate() {
            if row.len() != dim {
                bail!("S row {i} has {} entries, expected {dim}", row.len());
            }
        }
        let s = Mat::from_fn(dim, dim, |i, j| self.s[i][j]);
        let model = GpModel::from_parts(self.kernels, x, s, self.t, self.task)
            .context("model file failed validation")?;
        for (k, reference) in self.reference_predictions.iter().enumerate() {
            let got: Vec<f64> = match model.task() {
                Task::Regression { outputs, .. } => (0..outputs)
                    .map(|i| model.latent_mean(i, &reference.x))
                    .collect::<gpcert::Result<_>>()?,
                _ => model.predict_class_prob(&reference.x)?,
            };
            if got.len() != reference.values.len() {
                bail!("reference prediction {k} has {} values, model produces {}", reference.values.len(), got.len());
            }
            for (a, b) in got.iter().zip(&reference.values) {
                if (a - b).abs() > REFERENCE_TOLERANCE {
                    bail!(
                        "reference prediction {k} mismatch: file {b}, model {a} (tolerance {REFERENCE_TOLERANCE}); \
                         the file is corrupted or was produced by a different implementation"
                    );
                }
            }
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let data = std::fs::read_to_string(path)
            .with_context(|| format!("reading model file {}", path.display()))?;
        serde_json::from_str(&data).with_context(|| format!("parsing model file {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let data = serde_json::to_string_pretty(self)?;
        std::fs::write(path, data)
            .with_context(|| format!("writing model file {}", path.display()))?;
        Ok(())
    }
}

/// Analysis mode of a job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobMode {
    Certify,
    Delta,
    Interpret,
    Attack,
    SafetyCurve,
}

/// A batch analysis request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobSpec {
    pub model: String,
    /// Explicit query points; alternatively a dataset path with row indices.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub dataset: Option<String>,
    #[serde(default)]
    pub indices: Vec<usize>,
    /// Perturbation radii (a ladder for safety curves, a single entry
    /// otherwise).
    pub gammas: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Latent partition size for discretised likelihood bounds.
    #[serde(default = "default_cells")]
    pub partition_cells: usize,
    /// Feature subset analysed by interpret/attack-budget modes (stands in
    /// for externally selected salient features).
    #[serde(default)]
    pub features: Vec<usize>,
    pub mode: JobMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_iters")]
    pub max_iterations: usize,
    #[serde(default)]
    pub max_seconds: Option<f64>,
    /// Regression tolerance for certify on regression models.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_norm")]
    pub norm: NormOrder,
    /// Attack steps.
    #[serde(default = "default_steps")]
    pub attack_steps: usize,
    /// Emit the per-iteration branch-and-bound progress stream alongside
    /// certify reports.
    #[serde(default)]
    pub trace: bool,
}

fn default_epsilon() -> f64 {
    0.01
}
fn default_cells() -> usize {
    200
}
fn default_iters() -> usize {
    10_000
}
fn default_norm() -> NormOrder {
    NormOrder::LInf
}
fn default_steps() -> usize {
    20
}

impl JobSpec {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let data = std::fs::read_to_string(path)
            .with_context(|| format!("reading job file {}", path.display()))?;
        let job: JobSpec = serde_json::from_str(&data)
            .with_context(|| format!("parsing job file {}", path.display()))?;
        job.validate()?;
        Ok(job)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.gammas.is_empty() {
            bail!("job needs at least one gamma");
        }
        if self.gammas.iter().any(|&g| g < 0.0) {
            bail!("gammas must be nonnegative");
        }
        if self.epsilon <= 0.0 {
            bail!("epsilon must be positive");
        }
        if self.points.is_empty() && self.dataset.is_none() {
            // An empty point list is legal (empty report), but only when it
            // is explicit rather than a missing dataset reference.
        }
        Ok(())
    }
}

/// One certification record of the report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CertifyRecord {
    pub point_index: usize,
    pub x: Vec<f64>,
    pub gamma: f64,
    pub verdict: String,
    pub predicted_class: Option<usize>,
    pub pi_star: Vec<f64>,
    pub certified_deviation: Option<f64>,
    pub witness: Option<Vec<f64>>,
    pub converged: bool,
    pub wall_seconds: f64,
}

/// Report envelope written by `certify`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CertifyReport {
    pub model: String,
    pub epsilon: f64,
    pub seed: u64,
    pub records: Vec<CertifyRecord>,
}

/// Reads a dataset CSV with feature columns followed by one label/target
/// column. Returns the feature rows and the raw label column.
pub fn read_dataset(path: &Path) -> anyhow::Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("opening dataset {}", path.display()))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        if row.len() < 2 {
            bail!("dataset row {i} has fewer than 2 columns");
        }
        let vals: Vec<f64> = row
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("parsing dataset row {i}"))?;
        let (features, label) = vals.split_at(vals.len() - 1);
        xs.push(features.to_vec());
        ys.push(label[0]);
    }
    Ok((xs, ys))
}

/// Writes a dataset CSV with headers `x1..xd,label`.
pub fn write_dataset(path: &Path, xs: &[Vec<f64>], ys: &[f64], label_name: &str) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_path(path)
        .with_context(|| format!("creating dataset {}", path.display()))?;
    let d = xs.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    header.push(label_name.to_string());
    wtr.write_record(&header)?;
    for (x, y) in xs.iter().zip(ys) {
        let mut row: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
        row.push(format!("{y}"));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
