//! Command implementations. Each command is a plain function over parsed
//! inputs so the test suites can drive them without spawning processes.

use crate::dataset::synthetic2d;
use crate::formats::{
    read_dataset, write_dataset, CertifyRecord, CertifyReport, JobMode, JobSpec, ModelFile,
    ReferencePrediction,
};
use anyhow::{bail, Context};
use gpcert::bnb::BnbConfig;
use gpcert::kernels::KernelSpec;
use gpcert::linalg::Mat;
use gpcert::model::{GpModel, Link, Task};
use gpcert::robustness::{
    adversarial_gap_curve, certify_classification, certify_regression, delta_metric,
    gpfgs_attack, interpretability_delta, Robustness,
};
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Exit code signalling at least one budget-limited (Unknown) verdict.
pub const EXIT_UNKNOWN: u8 = 2;

/// Builds the worker pool: `--workers` flag, `GPCERT_WORKERS`, or the rayon
/// default.
pub fn thread_pool(workers: Option<usize>) -> anyhow::Result<rayon::ThreadPool> {
    let n = workers
        .or_else(|| std::env::var("GPCERT_WORKERS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0);
    Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?)
}

/// `gen`: writes `train.csv` and `test.csv` of the two-dimensional synthetic
/// benchmark into `out_dir`.
pub fn cmd_gen(n_train: usize, n_test: usize, seed: u64, out_dir: &Path) -> anyhow::Result<()> {
    if n_train < 2 || n_test < 2 {
        bail!("need at least 2 train and 2 test samples");
    }
    std::fs::create_dir_all(out_dir)?;
    let (xs, ys) = synthetic2d(n_train, seed);
    write_dataset(&out_dir.join("train.csv"), &xs, &ys, "label")?;
    let (xs, ys) = synthetic2d(n_test, seed.wrapping_add(1));
    write_dataset(&out_dir.join("test.csv"), &xs, &ys, "label")?;
    Ok(())
}

/// Training task selector for `train`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainTask {
    Regression,
    BinaryLaplace,
}

/// Options for `train`.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub task: TrainTask,
    /// Squared-exponential signal variance.
    pub variance: f64,
    /// Lengthscales, broadcast to every dimension when a single value is
    /// given (`θ_j = 1/(2 ℓ_j²)`).
    pub lengthscales: Vec<f64>,
    pub noise: f64,
    pub link: Link<f64>,
    pub seed: u64,
    /// Number of rows held out for the embedded reference predictions.
    pub holdout: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            task: TrainTask::BinaryLaplace,
            variance: 10.0,
            lengthscales: vec![2.0],
            noise: 0.1,
            link: Link::Probit { lambda: 1.0 },
            seed: 0,
            holdout: 10,
        }
    }
}

/// `train`: fits a squared-exponential GP on a dataset and writes the model
/// file with embedded reference predictions on held-out rows.
pub fn cmd_train(dataset: &Path, opts: &TrainOptions, out: &Path) -> anyhow::Result<()> {
    let (xs, ys) = read_dataset(dataset)?;
    if xs.is_empty() {
        bail!("dataset {} is empty", dataset.display());
    }
    let d = xs[0].len();
    let theta: Vec<f64> = match opts.lengthscales.len() {
        1 => vec![1.0 / (2.0 * opts.lengthscales[0].powi(2)); d],
        n if n == d => opts.lengthscales.iter().map(|l| 1.0 / (2.0 * l * l)).collect(),
        n => bail!("got {n} lengthscales for a {d}-dimensional dataset"),
    };
    let kernel = KernelSpec::SquaredExponential { variance: opts.variance, theta };

    // Deterministic shuffle, then hold out the tail for reference
    // predictions.
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    order.shuffle(&mut rng);
    let holdout = opts.holdout.min(xs.len().saturating_sub(2));
    let (train_idx, held_idx) = order.split_at(xs.len() - holdout);

    let x_train = Mat::from_fn(train_idx.len(), d, |i, j| xs[train_idx[i]][j]);
    let model = match opts.task {
        TrainTask::Regression => {
            let y: Vec<f64> = train_idx.iter().map(|&i| ys[i]).collect();
            GpModel::fit_regression(x_train, &y, kernel, opts.noise)?
        }
        TrainTask::BinaryLaplace => {
            let labels: Vec<i8> = train_idx
                .iter()
                .map(|&i| label_to_sign(ys[i]))
                .collect::<anyhow::Result<_>>()?;
            GpModel::fit_laplace_binary(x_train, &labels, kernel, opts.link)?
        }
    };

    let references: Vec<ReferencePrediction> = held_idx
        .iter()
        .map(|&i| {
            let values = match model.task() {
                Task::Regression { .. } => vec![model.latent_mean(0, &xs[i])?],
                _ => model.predict_class_prob(&xs[i])?,
            };
            Ok(ReferencePrediction { x: xs[i].clone(), values })
        })
        .collect::<gpcert::Result<_>>()?;
    ModelFile::from_model(&model, references).save(out)
}

/// Maps dataset labels `{1, 2}` to latent signs (`1 → +1`, `2 → -1`).
pub fn label_to_sign(label: f64) -> anyhow::Result<i8> {
    if label == 1.0 {
        Ok(1)
    } else if label == 2.0 {
        Ok(-1)
    } else {
        bail!("binary classification labels must be 1 or 2, got {label}")
    }
}

fn bnb_config(job: &JobSpec, point_seed: u64) -> BnbConfig<f64> {
    BnbConfig {
        epsilon: job.epsilon,
        max_iterations: job.max_iterations,
        max_seconds: job.max_seconds,
        partition_cells: job.partition_cells,
        seed: point_seed,
        ..Default::default()
    }
}

/// Resolves the job's query points from the explicit list or from dataset
/// rows.
pub fn job_points(job: &JobSpec, base: &Path) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut points = job.points.clone();
    if let Some(ds) = &job.dataset {
        let path = resolve_path(base, ds);
        let (xs, _) = read_dataset(&path)?;
        if job.indices.is_empty() {
            points.extend(xs);
        } else {
            for &i in &job.indices {
                let Some(row) = xs.get(i) else {
                    bail!("dataset index {i} out of range ({} rows)", xs.len());
                };
                points.push(row.clone());
            }
        }
    }
    Ok(points)
}

fn resolve_path(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load_model_for_job(job: &JobSpec, base: &Path) -> anyhow::Result<GpModel<f64>> {
    ModelFile::load(&resolve_path(base, &job.model))?.into_model()
}

/// The outcome of `certify`: the report document, the safety-curve rows for
/// the curves CSV, and whether any verdict was budget-limited.
pub struct CertifyOutput {
    pub report: CertifyReport,
    pub curve_rows: Vec<CurveRow>,
    pub trace_rows: Vec<TraceRow>,
    pub any_unknown: bool,
}

/// One row of the per-iteration progress stream CSV.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TraceRow {
    pub point_index: usize,
    pub gamma: f64,
    pub run: &'static str,
    pub iter: usize,
    pub lower: f64,
    pub upper: f64,
    pub regions: usize,
}

/// One row of the curves CSV.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CurveRow {
    pub point_index: usize,
    pub gamma: f64,
    pub pi_min_lo: f64,
    pub pi_min_hi: f64,
    pub pi_max_lo: f64,
    pub pi_max_hi: f64,
    pub verdict: String,
}

fn verdict_name(r: &Robustness<f64>) -> String {
    match r {
        Robustness::Certified => "certified".into(),
        Robustness::Falsified => "falsified".into(),
        Robustness::Unknown { .. } => "unknown".into(),
    }
}

/// `certify`: per (point, γ) verdicts; emits safety-curve rows alongside.
type PointOutput = (Vec<CertifyRecord>, Vec<CurveRow>, Vec<TraceRow>);

pub fn cmd_certify(job: &JobSpec, base: &Path) -> anyhow::Result<CertifyOutput> {
    let model = load_model_for_job(job, base)?;
    let points = job_points(job, base)?;
    let is_classification = model.task().is_classification();

    let results: Vec<anyhow::Result<PointOutput>> = points
        .par_iter()
        .enumerate()
        .map(|(idx, x)| {
            let mut records = Vec::new();
            let mut curves = Vec::new();
            let mut traces = Vec::new();
            let cfg = bnb_config(job, job.seed.wrapping_add(idx as u64));
            if is_classification {
                let classes = model.task().classes();
                let predicted = model.predicted_class(x)?;
                for &g in &job.gammas {
                    let start = Instant::now();
                    let (verdict, bounds) = if classes == 2 {
                        // One min/max pair of class 0 carries both classes.
                        let region = gpcert::region::Region::ball(x, g)?;
                        let (rb, min_run, max_run) =
                            gpcert::bnb::prediction_range(&model, &region, 0, &cfg)?;
                        if job.trace {
                            for (name, run) in [("min", &min_run), ("max", &max_run)] {
                                for r in &run.trace {
                                    traces.push(TraceRow {
                                        point_index: idx,
                                        gamma: g,
                                        run: name,
                                        iter: r.iter,
                                        lower: r.lower,
                                        upper: r.upper,
                                        regions: r.regions,
                                    });
                                }
                            }
                        }
                        let (own_lo, other_hi) = if predicted == 0 {
                            (rb.pi_min_lo, 1.0 - rb.pi_min_lo)
                        } else {
                            (1.0 - rb.pi_max_hi, rb.pi_max_hi)
                        };
                        let mut witness = None;
                        for w in [&rb.min_witness, &rb.max_witness].into_iter().flatten() {
                            if model.predicted_class(w)? != predicted {
                                witness = Some(w.clone());
                                break;
                            }
                        }
                        let robust = if witness.is_some() {
                            Robustness::Falsified
                        } else if own_lo > other_hi {
                            Robustness::Certified
                        } else {
                            Robustness::Unknown { gap: other_hi - own_lo }
                        };
                        let mut pi_star = vec![0.0; 2];
                        pi_star[predicted] = own_lo;
                        pi_star[1 - predicted] = other_hi;
                        let verdict = gpcert::robustness::SafetyVerdict {
                            robust,
                            witness,
                            pi_star,
                            certified_deviation: None,
                            gamma: g,
                            norm: job.norm,
                            predicted_class: Some(predicted),
                            converged: min_run.converged && max_run.converged,
                        };
                        // Curve rows track the predicted class.
                        let curve_bounds = if predicted == 0 {
                            rb
                        } else {
                            gpcert::likelihood::RangeBounds {
                                pi_min_lo: 1.0 - rb.pi_max_hi,
                                pi_min_hi: 1.0 - rb.pi_max_lo,
                                pi_max_lo: 1.0 - rb.pi_min_hi,
                                pi_max_hi: 1.0 - rb.pi_min_lo,
                                min_witness: rb.max_witness.clone(),
                                max_witness: rb.min_witness.clone(),
                            }
                        };
                        (verdict, curve_bounds)
                    } else {
                        let verdict = certify_classification(&model, x, g, job.norm, &cfg)?;
                        let region = gpcert::region::Region::ball(x, g)?;
                        let (rb, _, _) =
                            gpcert::bnb::prediction_range(&model, &region, predicted, &cfg)?;
                        (verdict, rb)
                    };
                    records.push(CertifyRecord {
                        point_index: idx,
                        x: x.clone(),
                        gamma: g,
                        verdict: verdict_name(&verdict.robust),
                        predicted_class: verdict.predicted_class,
                        pi_star: verdict.pi_star.clone(),
                        certified_deviation: None,
                        witness: verdict.witness.clone(),
                        converged: verdict.converged,
                        wall_seconds: start.elapsed().as_secs_f64(),
                    });
                    curves.push(CurveRow {
                        point_index: idx,
                        gamma: g,
                        pi_min_lo: bounds.pi_min_lo,
                        pi_min_hi: bounds.pi_min_hi,
                        pi_max_lo: bounds.pi_max_lo,
                        pi_max_hi: bounds.pi_max_hi,
                        verdict: verdict_name(&verdict.robust),
                    });
                }
            } else {
                let delta = job.delta.context("regression certification needs a delta")?;
                for &g in &job.gammas {
                    let start = Instant::now();
                    let verdict = certify_regression(&model, x, g, delta, job.norm, &cfg)?;
                    records.push(CertifyRecord {
                        point_index: idx,
                        x: x.clone(),
                        gamma: g,
                        verdict: verdict_name(&verdict.robust),
                        predicted_class: None,
                        pi_star: vec![],
                        certified_deviation: verdict.certified_deviation,
                        witness: verdict.witness.clone(),
                        converged: verdict.converged,
                        wall_seconds: start.elapsed().as_secs_f64(),
                    });
                }
            }
            Ok((records, curves, traces))
        })
        .collect();

    let mut report =
        CertifyReport { model: job.model.clone(), epsilon: job.epsilon, seed: job.seed, records: vec![] };
    let mut curve_rows = Vec::new();
    let mut trace_rows = Vec::new();
    for r in results {
        let (records, curves, traces) = r?;
        report.records.extend(records);
        curve_rows.extend(curves);
        trace_rows.extend(traces);
    }
    let any_unknown = report.records.iter().any(|r| r.verdict == "unknown");
    Ok(CertifyOutput { report, curve_rows, trace_rows, any_unknown })
}

/// One row of the δ-metric CSV.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DeltaRow {
    pub point_index: usize,
    pub gamma: f64,
    pub delta: f64,
}

/// `delta`: the robustness score per point and radius.
pub fn cmd_delta(job: &JobSpec, base: &Path) -> anyhow::Result<Vec<DeltaRow>> {
    let model = load_model_for_job(job, base)?;
    let points = job_points(job, base)?;
    let rows: Vec<anyhow::Result<Vec<DeltaRow>>> = points
        .par_iter()
        .enumerate()
        .map(|(idx, x)| {
            let cfg = bnb_config(job, job.seed.wrapping_add(idx as u64));
            job.gammas
                .iter()
                .map(|&g| {
                    Ok(DeltaRow { point_index: idx, gamma: g, delta: delta_metric(&model, x, g, &cfg)? })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// One row of the interpretability CSV.
#[derive(Debug, Clone, serde::Serialize)]
pub struct InterpretRow {
    pub point_index: usize,
    pub dimension: usize,
    pub gamma: f64,
    pub delta: f64,
}

/// `interpret`: one-sided interpretability scores per point and dimension
/// (all dimensions unless the job names a feature subset).
pub fn cmd_interpret(job: &JobSpec, base: &Path) -> anyhow::Result<Vec<InterpretRow>> {
    let model = load_model_for_job(job, base)?;
    let points = job_points(job, base)?;
    let dims: Vec<usize> = if job.features.is_empty() {
        (0..model.dim()).collect()
    } else {
        job.features.clone()
    };
    let gamma = job.gammas[0];
    let rows: Vec<anyhow::Result<Vec<InterpretRow>>> = points
        .par_iter()
        .enumerate()
        .map(|(idx, x)| {
            let cfg = bnb_config(job, job.seed.wrapping_add(idx as u64));
            dims.iter()
                .map(|&dim| {
                    let delta = interpretability_delta(&model, x, gamma, dim, &cfg)?;
                    Ok(InterpretRow { point_index: idx, dimension: dim, gamma, delta })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// One row of the attack CSV.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AttackRow {
    pub point_index: usize,
    pub gamma: f64,
    pub success: bool,
    pub adversarial_x: String,
    pub verdict: String,
    /// False only if the heuristic attack succeeded against a certificate,
    /// which would indicate a soundness bug.
    pub consistent: bool,
    /// Certified margin lower bound for the predicted class against the
    /// budgeted feature set (full box when no features are given).
    pub gap_curve: String,
}

/// `attack`: gradient-sign attack per point with a certification
/// cross-check and, when a feature order is supplied, the certified
/// adversarial-gap curve over budgets.
pub fn cmd_attack(job: &JobSpec, base: &Path) -> anyhow::Result<Vec<AttackRow>> {
    let model = load_model_for_job(job, base)?;
    let points = job_points(job, base)?;
    let gamma = job.gammas[0];
    let rows: Vec<anyhow::Result<AttackRow>> = points
        .par_iter()
        .enumerate()
        .map(|(idx, x)| {
            let cfg = bnb_config(job, job.seed.wrapping_add(idx as u64));
            let attack = gpfgs_attack(&model, x, gamma, job.attack_steps)?;
            let verdict = certify_classification(&model, x, gamma, job.norm, &cfg)?;
            let consistent = !(attack.success && verdict.robust == Robustness::Certified);
            let gap = if job.features.is_empty() {
                String::new()
            } else {
                let budgets: Vec<usize> = (0..=job.features.len()).collect();
                let curve =
                    adversarial_gap_curve(&model, x, &job.features, gamma, &budgets, &cfg)?;
                curve
                    .iter()
                    .map(|(b, g)| format!("{b}:{g:.6}"))
                    .collect::<Vec<_>>()
                    .join(";")
            };
            Ok(AttackRow {
                point_index: idx,
                gamma,
                success: attack.success,
                adversarial_x: attack
                    .point
                    .iter()
                    .map(|v| format!("{v:.6}"))
                    .collect::<Vec<_>>()
                    .join(";"),
                verdict: verdict_name(&verdict.robust),
                consistent,
                gap_curve: gap,
            })
        })
        .collect();
    rows.into_iter().collect()
}

/// Writes serializable rows as CSV.
pub fn write_csv_rows<S: serde::Serialize>(path: &Path, rows: &[S]) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Dispatches a job by mode, writing outputs under `out` (a path stem).
/// Returns the process exit code.
pub fn run_job(job: &JobSpec, base: &Path, out: &Path) -> anyhow::Result<u8> {
    match job.mode {
        JobMode::Certify | JobMode::SafetyCurve => {
            let output = cmd_certify(job, base)?;
            let json = serde_json::to_string_pretty(&output.report)?;
            std::fs::write(out.with_extension("json"), json)?;
            write_csv_rows(&curves_path(out), &output.curve_rows)?;
            if job.trace {
                write_csv_rows(&companion_path(out, "_trace.csv"), &output.trace_rows)?;
            }
            Ok(if output.any_unknown { EXIT_UNKNOWN } else { 0 })
        }
        JobMode::Delta => {
            let rows = cmd_delta(job, base)?;
            write_csv_rows(&out.with_extension("csv"), &rows)?;
            Ok(0)
        }
        JobMode::Interpret => {
            let rows = cmd_interpret(job, base)?;
            write_csv_rows(&out.with_extension("csv"), &rows)?;
            Ok(0)
        }
        JobMode::Attack => {
            let rows = cmd_attack(job, base)?;
            write_csv_rows(&out.with_extension("csv"), &rows)?;
            Ok(0)
        }
    }
}

/// Path of the curves CSV companion of a report.
pub fn curves_path(out: &Path) -> PathBuf {
    companion_path(out, "_curves.csv")
}

fn companion_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}"))
}
