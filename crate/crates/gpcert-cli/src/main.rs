use anyhow::Context;
use clap::{Parser, Subcommand};
use gpcert::model::Link;
use gpcert_cli::commands::{
    self, cmd_gen, cmd_train, run_job, thread_pool, TrainOptions, TrainTask,
};
use gpcert_cli::formats::JobSpec;
use std::path::PathBuf;
use std::process::ExitCode;

/// Provable robustness certificates for Gaussian process models.
#[derive(Parser)]
#[command(name = "gpcert", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (falls back to GPCERT_WORKERS, then all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the two-dimensional synthetic benchmark dataset.
    Gen {
        #[arg(long, default_value_t = 1000)]
        n_train: usize,
        #[arg(long, default_value_t = 200)]
        n_test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for train.csv and test.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a squared-exponential GP on a CSV dataset and write a model file.
    Train {
        /// Dataset CSV: feature columns, then a label/target column.
        #[arg(long)]
        dataset: PathBuf,
        /// Task: binary-laplace or regression.
        #[arg(long, default_value = "binary-laplace")]
        task: String,
        #[arg(long, default_value_t = 10.0)]
        variance: f64,
        /// Lengthscale(s); one value broadcasts to every dimension.
        #[arg(long = "lengthscale", num_args = 1.., default_values_t = vec![2.0])]
        lengthscales: Vec<f64>,
        /// Observation noise (regression).
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Binary link: probit or logistic.
        #[arg(long, default_value = "probit")]
        link: String,
        /// Probit scale λ.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output model path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Certify decision robustness per point over a γ ladder.
    Certify(JobArgs),
    /// Robustness score δ = π^U_max − π^L_min per point.
    Delta(JobArgs),
    /// One-sided interpretability scores per point and dimension.
    Interpret(JobArgs),
    /// Gradient-sign attack baseline with certification cross-check.
    Attack(JobArgs),
}

#[derive(clap::Args)]
struct JobArgs {
    /// Job specification JSON.
    #[arg(long)]
    job: PathBuf,
    /// Model file (overrides the job's model path).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output path stem (writes <out>.json / <out>.csv companions).
    #[arg(long)]
    out: PathBuf,
    /// Override the job seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the branch-and-bound tolerance.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Override the perturbation radii.
    #[arg(long, num_args = 1..)]
    gamma: Option<Vec<f64>>,
}

fn load_job(args: &JobArgs, mode: gpcert_cli::formats::JobMode) -> anyhow::Result<(JobSpec, PathBuf)> {
    let mut job = JobSpec::load(&args.job)?;
    job.mode = mode;
    if let Some(model) = &args.model {
        job.model = model.to_string_lossy().into_owned();
    }
    if let Some(seed) = args.seed {
        job.seed = seed;
    }
    if let Some(eps) = args.epsilon {
        job.epsilon = eps;
    }
    if let Some(gammas) = &args.gamma {
        job.gammas = gammas.clone();
    }
    job.validate()?;
    let base = args.job.parent().unwrap_or_else(|| std::path::Path::new(".")).to_path_buf();
    Ok((job, base))
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> anyhow::Result<u8> {
    let cli = Cli::parse();
    let pool = thread_pool(cli.workers)?;
    match cli.command {
        Command::Gen { n_train, n_test, seed, out } => {
            cmd_gen(n_train, n_test, seed, &out)?;
            println!("wrote {} and {}", out.join("train.csv").display(), out.join("test.csv").display());
            Ok(0)
        }
        Command::Train {
            dataset,
            task,
            variance,
            lengthscales,
            noise,
            link,
            lambda,
            seed,
            out,
        } => {
            let task = match task.as_str() {
                "regression" => TrainTask::Regression,
                "binary-laplace" => TrainTask::BinaryLaplace,
                other => anyhow::bail!("unknown task {other}; use regression or binary-laplace"),
            };
            let link = match link.as_str() {
                "probit" => Link::Probit { lambda },
                "logistic" => Link::Logistic,
                other => anyhow::bail!("unknown link {other}; use probit or logistic"),
            };
            let opts = TrainOptions {
                task,
                variance,
                lengthscales,
                noise,
                link,
                seed,
                holdout: 10,
            };
            cmd_train(&dataset, &opts, &out).context("training failed")?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Certify(args) => dispatch(&pool, args, gpcert_cli::formats::JobMode::Certify),
        Command::Delta(args) => dispatch(&pool, args, gpcert_cli::formats::JobMode::Delta),
        Command::Interpret(args) => dispatch(&pool, args, gpcert_cli::formats::JobMode::Interpret),
        Command::Attack(args) => dispatch(&pool, args, gpcert_cli::formats::JobMode::Attack),
    }
}

fn dispatch(
    pool: &rayon::ThreadPool,
    args: JobArgs,
    mode: gpcert_cli::formats::JobMode,
) -> anyhow::Result<u8> {
    let (job, base) = load_job(&args, mode)?;
    let code = pool.install(|| run_job(&job, &base, &args.out))?;
    if code == commands::EXIT_UNKNOWN {
        eprintln!("warning: some verdicts were budget-limited (unknown)");
    }
    Ok(code)
}
