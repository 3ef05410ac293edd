//! Command-level tests driving the CLI functions in-process, plus exit-code
//! checks through the binary.

use gpcert_cli::commands::{
    cmd_attack, cmd_certify, cmd_delta, cmd_gen, cmd_interpret, cmd_train, TrainOptions, TrainTask,
};
use gpcert_cli::formats::{read_dataset, CertifyReport, JobMode, JobSpec, ModelFile};
use gpcert::robustness::NormOrder;
use std::path::Path;
use std::process::Command;

fn job_template(model: &str, mode: JobMode) -> JobSpec {
    JobSpec {
        model: model.to_string(),
        points: vec![],
        dataset: None,
        indices: vec![],
        gammas: vec![0.05],
        epsilon: 0.01,
        partition_cells: 200,
        features: vec![],
        mode,
        seed: 0,
        max_iterations: 2000,
        max_seconds: None,
        delta: None,
        norm: NormOrder::LInf,
        attack_steps: 20,
        trace: false,
    }
}

/// Small deterministic binary model fixture on disk.
fn small_model(dir: &Path) -> std::path::PathBuf {
    let xs = vec![vec![-1.0], vec![-0.4], vec![0.5], vec![1.2], vec![0.1], vec![-0.8]];
    let ys = vec![1.0, 1.0, 2.0, 2.0, 2.0, 1.0];
    let data = dir.join("toy.csv");
    gpcert_cli::formats::write_dataset(&data, &xs, &ys, "label").unwrap();
    let out = dir.join("model.json");
    let opts = TrainOptions {
        task: TrainTask::BinaryLaplace,
        variance: 1.0,
        lengthscales: vec![0.8],
        holdout: 2,
        ..Default::default()
    };
    cmd_train(&data, &opts, &out).unwrap();
    out
}

#[test]
fn gen_is_deterministic_and_balanced() {
    let dir = tempfile::tempdir().unwrap();
    cmd_gen(200, 50, 11, dir.path()).unwrap();
    let (xs1, ys1) = read_dataset(&dir.path().join("train.csv")).unwrap();
    assert_eq!(xs1.len(), 200);
    assert!(ys1.iter().all(|&y| y == 1.0 || y == 2.0));
    let ones = ys1.iter().filter(|&&y| y == 1.0).count();
    assert!((ones as i64 - 100).abs() <= 2, "class balance within 1%: {ones}");
    let bytes1 = std::fs::read(dir.path().join("train.csv")).unwrap();
    cmd_gen(200, 50, 11, dir.path()).unwrap();
    let bytes2 = std::fs::read(dir.path().join("train.csv")).unwrap();
    assert_eq!(bytes1, bytes2, "same seed must reproduce identical files");
}

#[test]
fn train_writes_verifiable_model_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = small_model(dir.path());
    let bytes1 = std::fs::read(&model_path).unwrap();
    // Retrain: identical bytes.
    let opts = TrainOptions {
        task: TrainTask::BinaryLaplace,
        variance: 1.0,
        lengthscales: vec![0.8],
        holdout: 2,
        ..Default::default()
    };
    cmd_train(&dir.path().join("toy.csv"), &opts, &model_path).unwrap();
    let bytes2 = std::fs::read(&model_path).unwrap();
    assert_eq!(bytes1, bytes2);
    // Loads and replays reference predictions.
    let model = ModelFile::load(&model_path).unwrap().into_model().unwrap();
    assert_eq!(model.dim(), 1);
}

#[test]
fn train_regression_matches_dense_solve() {
    let dir = tempfile::tempdir().unwrap();
    let xs = vec![vec![0.0], vec![1.0], vec![2.0]];
    let ys = vec![0.3, -0.2, 0.5];
    let data = dir.path().join("reg.csv");
    gpcert_cli::formats::write_dataset(&data, &xs, &ys, "y").unwrap();
    let out = dir.path().join("reg_model.json");
    let opts = TrainOptions {
        task: TrainTask::Regression,
        variance: 1.0,
        lengthscales: vec![1.0],
        noise: 0.1,
        holdout: 0,
        ..Default::default()
    };
    cmd_train(&data, &opts, &out).unwrap();
    let model = ModelFile::load(&out).unwrap().into_model().unwrap();
    // Dense-solve oracle.
    use gpcert::linalg::{lu_solve, Mat};
    let kernel = model.kernel(0);
    let mut ky = Mat::from_fn(3, 3, |i, j| kernel.eval(&xs[i], &xs[j]).unwrap());
    for i in 0..3 {
        ky[(i, i)] += 0.1;
    }
    let alpha = lu_solve(&ky, &ys).unwrap();
    for (i, x) in xs.iter().enumerate() {
        let kv: Vec<f64> = xs.iter().map(|xj| kernel.eval(x, xj).unwrap()).collect();
        let oracle: f64 = kv.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let got = model.latent_mean(0, x).unwrap();
        assert!((got - oracle).abs() < 1e-8, "row {i}: {got} vs {oracle}");
    }
}

#[test]
fn train_rejects_single_class_labels() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("one.csv");
    gpcert_cli::formats::write_dataset(&data, &[vec![0.0], vec![1.0]], &[1.0, 1.0], "label")
        .unwrap();
    let opts = TrainOptions { holdout: 0, ..Default::default() };
    assert!(cmd_train(&data, &opts, &dir.path().join("m.json")).is_err());
}

#[test]
fn certify_empty_point_list_gives_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = small_model(dir.path());
    let job = job_template(model_path.to_str().unwrap(), JobMode::Certify);
    let out = cmd_certify(&job, dir.path()).unwrap();
    assert!(out.report.records.is_empty());
    assert!(!out.any_unknown);
}

#[test]
fn certify_report_round_trips_and_curves_are_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = small_model(dir.path());
    let mut job = job_template(model_path.to_str().unwrap(), JobMode::Certify);
    job.points = vec![vec![-0.7]];
    job.gammas = vec![0.02, 0.05, 0.1, 0.2, 0.3];
    let out = cmd_certify(&job, dir.path()).unwrap();
    assert_eq!(out.report.records.len(), 5);
    // Round trip: parse -> emit -> parse identical.
    let json = serde_json::to_string_pretty(&out.report).unwrap();
    let parsed: CertifyReport = serde_json::from_str(&json).unwrap();
    let json2 = serde_json::to_string_pretty(&parsed).unwrap();
    assert_eq!(json, json2);
    assert_eq!(parsed, out.report);
    // Certified lower bound of the predicted class is non-increasing.
    for w in out.curve_rows.windows(2) {
        assert!(
            w[1].pi_min_lo <= w[0].pi_min_lo + 2.0 * job.epsilon,
            "curve increased: {} then {}",
            w[0].pi_min_lo,
            w[1].pi_min_lo
        );
    }
}

#[test]
fn delta_rows_are_in_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = small_model(dir.path());
    let mut job = job_template(model_path.to_str().unwrap(), JobMode::Delta);
    job.points = (0..6).map(|i| vec![-1.0 + 0.4 * i as f64]).collect();
    let rows = cmd_delta(&job, dir.path()).unwrap();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert!((0.0..=1.0).contains(&r.delta), "delta {} outside [0,1]", r.delta);
    }
}

#[test]
fn interpret_vanishes_on_symmetric_dimension() {
    let dir = tempfile::tempdir().unwrap();
    // Mirrored duplicates in dimension 2.
    let xs = vec![
        vec![-0.6, 0.4],
        vec![-0.6, -0.4],
        vec![0.6, 0.4],
        vec![0.6, -0.4],
    ];
    let ys = vec![1.0, 1.0, 2.0, 2.0];
    let data = dir.path().join("sym.csv");
    gpcert_cli::formats::write_dataset(&data, &xs, &ys, "label").unwrap();
    let model_path = dir.path().join("sym_model.json");
    let opts = TrainOptions {
        variance: 1.0,
        lengthscales: vec![1.0],
        holdout: 0,
        ..Default::default()
    };
    cmd_train(&data, &opts, &model_path).unwrap();
    let mut job = job_template(model_path.to_str().unwrap(), JobMode::Interpret);
    job.points = vec![vec![-0.2, 0.0]];
    job.gammas = vec![0.25];
    let rows = cmd_interpret(&job, dir.path()).unwrap();
    assert_eq!(rows.len(), 2);
    let d2 = rows.iter().find(|r| r.dimension == 1).unwrap();
    assert!(d2.delta.abs() <= 2.0 * job.epsilon, "symmetric dim delta {}", d2.delta);
}

#[test]
fn attack_rows_are_consistent_with_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = small_model(dir.path());
    let mut job = job_template(model_path.to_str().unwrap(), JobMode::Attack);
    job.points = (0..5).map(|i| vec![-1.1 + 0.5 * i as f64]).collect();
    job.gammas = vec![0.15];
    let rows = cmd_attack(&job, dir.path()).unwrap();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        assert!(r.consistent, "attack beat a certificate at point {}", r.point_index);
    }
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_gpcert");
    let dir = tempfile::tempdir().unwrap();
    // Missing job file: exit 1.
    let status = Command::new(exe)
        .args(["certify", "--job", "missing.json", "--out"])
        .arg(dir.path().join("r"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // Unknown verdict (tiny budget, point near the boundary): exit 2.
    let model_path = small_model(dir.path());
    let mut job = job_template(model_path.to_str().unwrap(), JobMode::Certify);
    job.points = vec![vec![0.05]];
    job.gammas = vec![0.4];
    job.max_iterations = 1;
    let job_path = dir.path().join("job.json");
    std::fs::write(&job_path, serde_json::to_string(&job).unwrap()).unwrap();
    let out = dir.path().join("rep");
    let status = Command::new(exe)
        .args(["certify", "--job"])
        .arg(&job_path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2), "unknown verdicts must exit 2");

    // Same job with a real budget: exit 0 and both artifacts exist.
    let status = Command::new(exe)
        .args(["certify", "--job"])
        .arg(&job_path)
        .args(["--out"])
        .arg(&out)
        .args(["--epsilon", "0.01"])
        .env("GPCERT_WORKERS", "2")
        .args(["--seed", "1"])
        .arg("--gamma")
        .arg("0.05")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.with_extension("json").exists());
    assert!(dir.path().join("rep_curves.csv").exists());
}
