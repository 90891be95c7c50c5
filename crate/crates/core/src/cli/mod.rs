//! Command-line front end.
//!
//! Every command resolves its flags (and an optional config file) into a
//! [`Job`], runs it, writes the outputs plus a [`RunManifest`] into the output
//! directory and prints a JSON summary on standard output. Progress goes to
//! standard error.
//!
//! Exit status: 0 on success, 2 for usage and constraint errors, 3 for a
//! diverging chain, 1 otherwise.

mod config;
mod jobs;
mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{load_config, ConfigFile, CONFIG_KEYS};
pub use jobs::{read_points, resolve_model, DenoiseJob, DsmJob, Job, PointSource, SampleJob, TheoryJob};
pub use manifest::{FileRecord, RunManifest, MANIFEST_NAME};

use crate::error::{Error, Result};
use crate::experiments::{ExperimentSpec, Scenario};
use crate::samplers::{Init, SamplerConfig, Variant};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "NCLANGEVIN_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "nclangevin-out";

#[derive(Debug, Parser)]
#[command(name = "nclangevin", version, about = "Noise-corrected Langevin samplers and bias experiments")]
struct Cli {
    /// Output directory [default: $NCLANGEVIN_OUT_DIR, else ./nclangevin-out]
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Cap on worker threads
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// More progress output (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only errors on standard error
    #[arg(short, long, global = true)]
    quiet: bool,
    /// Re-run the job recorded in a manifest and check the outputs match
    #[arg(long, value_name = "MANIFEST")]
    replay: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one chain and write its trajectory
    Sample(SampleArgs),
    /// Density bias of each method on a 2D Gaussian mixture
    GmmBias(ExperimentArgs),
    /// Covariance bias of each method on a white Gaussian
    GaussianBias(ExperimentArgs),
    /// Mixing curves of short-chain ensembles
    Mixing(ExperimentArgs),
    /// Closed-form stationary covariances on a white Gaussian
    Theory(TheoryArgs),
    /// Posterior-mean denoising with the exact noisy score
    Denoise(DenoiseArgs),
    /// Affine denoising score matching fit
    DsmFit(DsmArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScoreChoice {
    /// True score of the target
    Clean,
    /// Score of the target convolved with N(0, sigma2 I)
    Noisy,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long, default_value = "half-denoise")]
    variant: Variant,
    /// gauss<d>d, gmm<k> or a model file
    #[arg(long, default_value = "gauss1d")]
    model: String,
    #[arg(long, default_value_t = 0.0)]
    sigma2: f64,
    /// Step size; defaults to sigma2/2 for half-denoising
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Score followed by the chain [default: noisy when sigma2 > 0]
    #[arg(long, value_enum)]
    score: Option<ScoreChoice>,
    /// Fixed starting point instead of N(0, I) draws
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    init_point: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.3)]
    tail_fraction: f64,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// `key = value` config file; flags override its values
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// One million steps per chain unless steps are set explicitly
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    kernels: Option<usize>,
    /// Mixture model file replacing the benchmark mixture
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Noise levels, comma separated
    #[arg(long, value_delimiter = ',')]
    sigma2: Option<Vec<f64>>,
    #[arg(long)]
    mu: Option<f64>,
    /// Subset of proposed,basic,basic_mu4,oracle,oracle_mu4,ground_truth
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    tail_fraction: Option<f64>,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    init_variance: Option<f64>,
}

#[derive(Debug, Args)]
struct TheoryArgs {
    #[arg(long)]
    sigma2: f64,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Step size [default: sigma2/2]
    #[arg(long)]
    mu: Option<f64>,
    /// Target covariance is variance * I
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
}

#[derive(Debug, Args)]
struct DenoiseArgs {
    #[arg(long, default_value = "gauss1d")]
    model: String,
    #[arg(long)]
    sigma2: f64,
    /// Noisy points (CSV with header); without it clean points are drawn and noised
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct DsmArgs {
    /// Clean samples (CSV with header); without it they are drawn from --model
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    sigma2: f64,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Runs the command line `args` (including the program name) and returns the
/// process exit status.
pub fn execute<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging(cli.verbose, cli.quiet);
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli, argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_usage() {
        2
    } else if matches!(e, Error::Divergence { .. }) {
        3
    } else {
        1
    }
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => "error",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn dispatch(cli: Cli, argv: Vec<String>) -> Result<()> {
    let work = || -> Result<()> {
        if let Some(manifest) = &cli.replay {
            if cli.command.is_some() {
                return Err(Error::invalid("replay", "--replay takes no subcommand"));
            }
            return replay(manifest, cli.out_dir.clone(), argv.clone());
        }
        let command = cli
            .command
            .as_ref()
            .ok_or_else(|| Error::invalid("command", "a subcommand or --replay is required"))?;
        let (job, inputs, file_out_dir) = resolve(command)?;
        let out_dir = cli.out_dir.clone().or(file_out_dir).unwrap_or_else(default_out_dir);
        run_and_record(&job, inputs, &out_dir, argv.clone(), None).map(|_| ())
    };
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::invalid("threads", e.to_string()))?
            .install(work),
        None => work(),
    }
}

fn apply_flags(spec: &mut ExperimentSpec, a: &ExperimentArgs) -> Result<()> {
    macro_rules! set {
        ($field:ident, $flag:ident) => {
            if let Some(v) = a.$flag.clone() {
                spec.$field = v;
            }
        };
    }
    set!(kernels, kernels);
    set!(dim, dim);
    set!(sigma2, sigma2);
    set!(n_steps, steps);
    set!(n_trials, trials);
    set!(replicates, replicates);
    set!(seed, seed);
    set!(bootstrap, bootstrap);
    set!(tail_fraction, tail_fraction);
    set!(bandwidth, bandwidth);
    set!(spacing, spacing);
    set!(init_variance, init_variance);
    if let Some(mu) = a.mu {
        spec.mu = Some(mu);
    }
    if let Some(m) = &a.methods {
        spec.methods = config::parse_methods("methods", m)?;
    }
    Ok(())
}

fn resolve_experiment(scenario: Scenario, a: &ExperimentArgs) -> Result<(Job, Vec<FileRecord>, Option<PathBuf>)> {
    let mut inputs = Vec::new();
    let (mut spec, out_dir) = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let parsed = config::parse_config(&text, &path.display().to_string(), path.parent(), Some(scenario), a.paper_scale)?;
            inputs.push(FileRecord::hash_file(path)?);
            inputs.extend(parsed.model_file);
            (parsed.spec, parsed.output_dir)
        }
        None => {
            let spec = ExperimentSpec::defaults(scenario);
            (if a.paper_scale { spec.paper_scale() } else { spec }, None)
        }
    };
    apply_flags(&mut spec, a)?;
    if let Some(path) = &a.model {
        spec.model = Some(crate::models::read_model_file(path)?);
        inputs.push(FileRecord::hash_file(path)?);
    }
    spec.validate()?;
    Ok((Job::Experiment(spec), inputs, out_dir))
}

fn resolve(command: &Command) -> Result<(Job, Vec<FileRecord>, Option<PathBuf>)> {
    match command {
        Command::GmmBias(a) => resolve_experiment(Scenario::GmmBias, a),
        Command::GaussianBias(a) => resolve_experiment(Scenario::GaussianBias, a),
        Command::Mixing(a) => resolve_experiment(Scenario::Mixing, a),
        Command::Sample(a) => {
            let (model, record) = resolve_model(&a.model)?;
            let noisy = match a.score {
                Some(ScoreChoice::Noisy) => true,
                Some(ScoreChoice::Clean) => false,
                None => a.sigma2 > 0.0,
            };
            if noisy && !(a.sigma2 > 0.0) {
                return Err(Error::invalid("sigma2", "a noisy score needs sigma2 > 0"));
            }
            let correction = if a.variant == Variant::Basic { 0.0 } else { a.sigma2 };
            let mut config = SamplerConfig::new(a.variant, a.mu, correction, a.steps, a.seed)?;
            if let Some(p) = &a.init_point {
                config = config.with_init(Init::Point { point: p.clone() });
            }
            let job = SampleJob {
                config,
                model,
                score_noise: if noisy { a.sigma2 } else { 0.0 },
                tail_fraction: a.tail_fraction,
            };
            Ok((Job::Sample(job), record.into_iter().collect(), None))
        }
        Command::Theory(a) => {
            let job = TheoryJob {
                dim: a.dim,
                variance: a.variance,
                sigma2: a.sigma2,
                mu: a.mu.unwrap_or(a.sigma2 / 2.0),
            };
            if job.mu < job.sigma2 / 2.0 {
                return Err(Error::StepSizeCondition {
                    mu: job.mu,
                    sigma2: job.sigma2,
                });
            }
            Ok((Job::Theory(job), Vec::new(), None))
        }
        Command::Denoise(a) => {
            let (model, record) = resolve_model(&a.model)?;
            let source = match &a.input {
                Some(path) => PointSource::File { path: path.clone() },
                None => PointSource::Draw { n: a.n, seed: a.seed },
            };
            let job = DenoiseJob {
                model,
                sigma2: a.sigma2,
                source,
            };
            Ok((Job::Denoise(job), record.into_iter().collect(), None))
        }
        Command::DsmFit(a) => {
            let (model, record) = match &a.model {
                Some(name) => {
                    let (m, r) = resolve_model(name)?;
                    (Some(m), r)
                }
                None => (None, None),
            };
            let source = match &a.input {
                Some(path) => PointSource::File { path: path.clone() },
                None if model.is_some() => PointSource::Draw { n: a.n, seed: a.seed },
                None => return Err(Error::invalid("input", "give --input or --model")),
            };
            let job = DsmJob {
                sigma2: a.sigma2,
                seed: a.seed,
                source,
                model,
            };
            Ok((Job::DsmFit(job), record.into_iter().collect(), None))
        }
    }
}

/// Runs `job`, writes its outputs and manifest under `out_dir` and prints the
/// summary.
fn run_and_record(
    job: &Job,
    mut inputs: Vec<FileRecord>,
    out_dir: &Path,
    argv: Vec<String>,
    replay_of: Option<PathBuf>,
) -> Result<RunManifest> {
    let started = Instant::now();
    log::info!("writing to {}", out_dir.display());
    let output = job.run()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut outputs = Vec::with_capacity(output.files.len());
    for (name, bytes) in &output.files {
        let path = out_dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        outputs.push(FileRecord::new(name, bytes));
    }
    for record in output.inputs {
        if !inputs.contains(&record) {
            inputs.push(record);
        }
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        job: job.clone(),
        seed: job.seed(),
        inputs,
        outputs,
        duration_seconds: started.elapsed().as_secs_f64(),
        argv,
        replay_of,
    };
    let path = out_dir.join(MANIFEST_NAME);
    std::fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    println!("{}", serde_json::to_string(&output.summary)?);
    Ok(manifest)
}

fn replay(manifest_path: &Path, out_dir: Option<PathBuf>, argv: Vec<String>) -> Result<()> {
    let recorded = RunManifest::read(manifest_path)?;
    if recorded.tool_version != env!("CARGO_PKG_VERSION") {
        log::warn!(
            "manifest written by version {}, replaying with {}",
            recorded.tool_version,
            env!("CARGO_PKG_VERSION")
        );
    }
    for input in &recorded.inputs {
        let now = FileRecord::hash_file(&input.path)?;
        if now.sha256 != input.sha256 {
            return Err(Error::Degenerate(format!("input {} changed since the recorded run", input.path.display())));
        }
    }
    let out_dir = out_dir.unwrap_or_else(|| manifest_path.parent().unwrap_or(Path::new(".")).join("replay"));
    let fresh = run_and_record(
        &recorded.job,
        recorded.inputs.clone(),
        &out_dir,
        argv,
        Some(manifest_path.to_path_buf()),
    )?;
    for (old, new) in recorded.outputs.iter().zip(&fresh.outputs) {
        if old != new {
            return Err(Error::Degenerate(format!("replayed output {} differs from the record", new.path.display())));
        }
    }
    if recorded.outputs.len() != fresh.outputs.len() {
        return Err(Error::Degenerate("replay produced a different set of outputs".into()));
    }
    log::info!("replay reproduced {} outputs", fresh.outputs.len());
    Ok(())
}
