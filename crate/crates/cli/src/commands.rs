//! Subcommand definitions and their implementations.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use unlearn_core::data::{self, Dataset, ModelFile, RemovalInfo};
use unlearn_core::experiments::{self, ExperimentOutcome, ScaleMode};
use unlearn_core::metrics::{certify_check, l2_distance};
use unlearn_core::noise::{calibrate, theoretical_scale, TheoryConstants};
use unlearn_core::rng::{stream, substream};
use unlearn_core::solver::{default_tol, fit, fit_polished, DEFAULT_MAX_ITER};
use unlearn_core::unlearn::{recommended_steps, unlearn, RemovalRequest};
use unlearn_core::{faer::Col, LossFamily, ModelSpec, Regularizer};

use crate::config::{self, default_output_dir, Overrides};
use crate::UsageError;

#[derive(Debug, Parser)]
#[command(name = "unlearn", version, about = "Certified Newton-step data removal for ridge GLMs")]
pub struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a ridge-regularized GLM and write a model file.
    Fit(FitArgs),
    /// Remove rows from a fitted model by perturbed Newton steps.
    Unlearn(UnlearnArgs),
    /// Calibrate the noise radius from random forget sets.
    Calibrate(CalibrateArgs),
    /// Run a configured Monte Carlo experiment.
    Experiment(ExperimentArgs),
    /// Check the certifiability condition between two model files.
    Certify(CertifyArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV dataset with header `y,x1,...,xp`.
    #[arg(long, conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,
    /// Generate `N P` rows and features from the simulation law.
    #[arg(long, num_args = 2, value_names = ["N", "P"])]
    pub synthetic: Option<Vec<usize>>,
    /// Root seed for synthetic data and every random choice.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value = "logistic")]
    pub loss: LossFamily,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Model file to write (default: `<output dir>/model.txt`).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the dataset as CSV.
    #[arg(long)]
    pub save_data: Option<PathBuf>,
}

/// `T` or `auto`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Steps {
    Fixed(usize),
    Auto,
}

impl FromStr for Steps {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(Steps::Auto);
        }
        match s.parse::<usize>() {
            Ok(t) if t >= 1 => Ok(Steps::Fixed(t)),
            _ => Err(format!("expected a positive integer or `auto`, got `{s}`")),
        }
    }
}

impl fmt::Display for Steps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Steps::Fixed(t) => write!(f, "{t}"),
            Steps::Auto => write!(f, "auto"),
        }
    }
}

fn parse_scale(s: &str) -> std::result::Result<ScaleMode, String> {
    s.parse().map_err(|e: unlearn_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct UnlearnArgs {
    /// Fitted model file.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated row indices to remove.
    #[arg(long, value_delimiter = ',', conflicts_with = "remove_random")]
    pub remove: Option<Vec<usize>>,
    /// Remove this many rows chosen uniformly at random.
    #[arg(long)]
    pub remove_random: Option<usize>,
    /// Newton steps, or `auto` for the smallest count the step rule allows.
    #[arg(long, default_value = "2")]
    pub steps: Steps,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    /// `theoretical`, `empirical:M0` or `fixed:R`.
    #[arg(long, default_value = "theoretical", value_parser = parse_scale)]
    pub scale: ScaleMode,
    /// Retrain exactly and report per-step errors and the certifiability check.
    #[arg(long)]
    pub verify_exact: bool,
    /// Probe points for the density-ratio check.
    #[arg(long, default_value_t = 1000)]
    pub n_probe: usize,
    /// Unlearned model file (default: `<output dir>/unlearned.txt`).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Forget-set size.
    #[arg(long)]
    pub m: usize,
    /// Number of random forget sets.
    #[arg(long, default_value_t = 50)]
    pub m0: usize,
    /// Step counts to calibrate.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub steps: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// TOML experiment file.
    pub config: PathBuf,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum concurrent trials.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Overrides `noise.scale`.
    #[arg(long)]
    pub scale: Option<String>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Fill the `seconds` column.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Model whose coefficients are released before perturbation.
    #[arg(long)]
    pub candidate: PathBuf,
    /// Exactly retrained model.
    #[arg(long)]
    pub exact: PathBuf,
    #[arg(long)]
    pub scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    pub n_probe: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Unlearn(a) => cmd_unlearn(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Experiment(a) => cmd_experiment(a).map(|_| ()),
        Command::Certify(a) => cmd_certify(a),
    }
}

fn load_dataset(args: &DataArgs, loss: LossFamily) -> Result<Dataset> {
    match (&args.data, &args.synthetic) {
        (Some(path), None) => Ok(data::load_csv(path)?),
        (None, Some(np)) => {
            let (n, p) = (np[0], np[1]);
            if n == 0 || p == 0 {
                return Err(UsageError(format!("--synthetic needs positive N and P, got {n} {p}")).into());
            }
            let mut rng = substream(args.seed, &[0]);
            let mut ds = data::generate_for(loss, n, p, &mut rng)?;
            ds.meta.seed = Some(args.seed);
            Ok(ds)
        }
        _ => Err(UsageError("a dataset is required: pass --data PATH or --synthetic N P".into()).into()),
    }
}

fn lineage(ds: &Dataset) -> String {
    match ds.meta.seed {
        Some(seed) => format!("{} n={} p={} seed={seed}", ds.meta.generator, ds.n(), ds.p()),
        None => ds.meta.generator.clone(),
    }
}

fn output_path(flag: Option<PathBuf>, file: &str) -> Result<PathBuf> {
    let path = flag.unwrap_or_else(|| default_output_dir().join(file));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(path)
}

pub fn cmd_fit(a: FitArgs) -> Result<()> {
    let reg = Regularizer::ridge_with_nu(a.model.lambda, a.model.nu).map_err(|e| UsageError(format!("--lambda/--nu: {e}")))?;
    let spec = ModelSpec::new(a.model.loss, reg)?;
    let ds = load_dataset(&a.data, spec.loss)?;
    if ds.n() == 0 {
        return Err(UsageError("dataset has no rows".into()).into());
    }
    info!(
        "fit: loss={} lambda={} nu={} n={} p={} seed={} data={}",
        spec.loss,
        spec.reg.lambda,
        spec.reg.nu,
        ds.n(),
        ds.p(),
        a.data.seed,
        lineage(&ds)
    );
    let obj = ds.objective(spec)?;
    let res = fit(&obj, &Col::zeros(ds.p()), default_tol(ds.p()), DEFAULT_MAX_ITER)?;
    if let Some(path) = &a.save_data {
        data::save_csv(&ds, path)?;
    }
    let out = output_path(a.output, "model.txt")?;
    let model = ModelFile {
        spec,
        n: ds.n(),
        seed: ds.meta.seed,
        lineage: lineage(&ds),
        beta: res.beta.clone(),
        grad_norm: res.grad_norm,
        iterations: res.iterations,
        converged: res.converged,
        removal: None,
    };
    data::save_model(&model, &out)?;
    println!(
        "n={} p={} iterations={} grad_norm={:.3e} converged={} model={}",
        ds.n(),
        ds.p(),
        res.iterations,
        res.grad_norm,
        res.converged,
        out.display()
    );
    if !res.converged {
        return Err(unlearn_core::Error::NonConvergence {
            grad_norm: res.grad_norm,
            iterations: res.iterations,
        }
        .into());
    }
    Ok(())
}

fn load_model_for(path: &Path, ds: &Dataset) -> Result<ModelFile> {
    let model = data::load_model(path)?;
    model.check_compatible(ds)?;
    if model.removal.is_some() {
        bail!(UsageError(format!("{} is already an unlearned model", path.display())));
    }
    Ok(model)
}

pub fn cmd_unlearn(a: UnlearnArgs) -> Result<()> {
    if !(a.epsilon.is_finite() && a.epsilon > 0.0) {
        return Err(UsageError(format!("--epsilon must be positive, got {}", a.epsilon)).into());
    }
    let peek = data::load_model(&a.model)?;
    let ds = load_dataset(&a.data, peek.spec.loss)?;
    let model = load_model_for(&a.model, &ds)?;
    let obj = ds.objective(model.spec)?;
    let n = ds.n();
    let req = match (&a.remove, a.remove_random) {
        (Some(idx), None) => RemovalRequest::new(idx.clone()),
        (None, Some(m)) => RemovalRequest::random(n, m, &mut substream(a.data.seed, &[1]))?,
        _ => return Err(UsageError("pass --remove I,J,... or --remove-random M".into()).into()),
    };
    req.validate(n).map_err(|e| UsageError(e.to_string()))?;
    let m = req.m();
    let steps = match a.steps {
        Steps::Fixed(t) => t,
        Steps::Auto => recommended_steps(m, n).map_err(|e| UsageError(e.to_string()))?,
    };
    info!(
        "unlearn: model={} n={n} p={} m={m} steps={steps} (requested {}) epsilon={} scale={} seed={}",
        a.model.display(),
        ds.p(),
        a.steps,
        a.epsilon,
        a.scale,
        a.data.seed
    );

    let scale = match a.scale {
        ScaleMode::Zero => 0.0,
        ScaleMode::Fixed(r) => r,
        ScaleMode::Theoretical | ScaleMode::Empirical { .. } if m == 0 => {
            return Err(UsageError("an empty removal has no calibrated radius; use --scale fixed:R".into()).into())
        }
        ScaleMode::Theoretical => {
            let mut tc = TheoryConstants::new(model.spec.reg.lambda, n, ds.p(), m, steps);
            tc.nu = model.spec.reg.nu;
            theoretical_scale(&tc)?
        }
        ScaleMode::Empirical { m0 } => {
            let cal = calibrate(&obj, &model.beta, m, &[steps], m0, &mut substream(a.data.seed, &[2]))?;
            cal.scales[0]
        }
    };
    if !scale.is_finite() {
        bail!(UsageError(format!(
            "the {} radius overflows at steps = {steps}; choose fewer steps or another --scale",
            a.scale
        )));
    }
    let res = unlearn(&obj, &model.beta, &req, steps, scale, a.epsilon, &mut substream(a.data.seed, &[3]))?;
    println!("removed={m} steps={steps} scale={scale:.6e} noise_norm={:.6e}", res.noise.norm_l2());

    if a.verify_exact {
        let without = obj.without(&req)?;
        let exact = fit_polished(&without, &model.beta, default_tol(ds.p()), DEFAULT_MAX_ITER)?;
        if !exact.converged {
            return Err(unlearn_core::Error::NonConvergence {
                grad_norm: exact.grad_norm,
                iterations: exact.iterations,
            }
            .into());
        }
        for (t, it) in res.iterates.iter().enumerate() {
            println!("step={t} error={:.6e}", l2_distance(it, &exact.beta));
        }
        println!("perturbed_error={:.6e}", l2_distance(&res.perturbed, &exact.beta));
        if scale > 0.0 {
            let rep = certify_check(
                res.last_iterate(),
                &exact.beta,
                scale,
                a.epsilon,
                a.n_probe,
                &mut substream(a.data.seed, &[4]),
            )?;
            print_cert(&rep);
        } else {
            println!("certify: no perturbation (scale 0)");
        }
    } else {
        println!("certify: skipped (needs --verify-exact)");
    }

    let out = output_path(a.output, "unlearned.txt")?;
    let unlearned = ModelFile {
        spec: model.spec,
        n: n - m,
        seed: Some(a.data.seed),
        lineage: format!("unlearned from {}", model.lineage),
        beta: res.perturbed.clone(),
        grad_norm: obj.without(&req)?.gradient(res.last_iterate())?.norm_l2(),
        iterations: steps,
        converged: true,
        removal: Some(RemovalInfo {
            removed: req.indices().to_vec(),
            steps,
            noise_scale: scale,
            epsilon: a.epsilon,
        }),
    };
    data::save_model(&unlearned, &out)?;
    println!("model={}", out.display());
    Ok(())
}

fn print_cert(rep: &unlearn_core::CertReport) {
    println!(
        "certify: satisfied={} delta_norm={:.6e} scale={:.6e} epsilon={} max_log_ratio={:.6e} bound={:.6e} probes={}",
        rep.satisfied,
        rep.delta_norm,
        rep.scale,
        rep.epsilon,
        rep.max_observed_log_ratio,
        rep.log_ratio_bound(),
        rep.n_probe
    );
}

pub fn cmd_calibrate(a: CalibrateArgs) -> Result<()> {
    if a.steps.is_empty() || a.steps.contains(&0) {
        return Err(UsageError("--steps needs positive step counts".into()).into());
    }
    let peek = data::load_model(&a.model)?;
    let ds = load_dataset(&a.data, peek.spec.loss)?;
    let model = load_model_for(&a.model, &ds)?;
    let obj = ds.objective(model.spec)?;
    info!(
        "calibrate: model={} n={} p={} m={} m0={} steps={:?} seed={}",
        a.model.display(),
        ds.n(),
        ds.p(),
        a.m,
        a.m0,
        a.steps,
        a.data.seed
    );
    let cal = calibrate(&obj, &model.beta, a.m, &a.steps, a.m0, &mut substream(a.data.seed, &[2]))?;
    println!("subsets={} rescale={:.6}", cal.subsets, cal.rescale);
    for (j, &t) in cal.steps.iter().enumerate() {
        let mut tc = TheoryConstants::new(model.spec.reg.lambda, ds.n(), ds.p(), a.m.max(1), t);
        tc.nu = model.spec.reg.nu;
        let theory = theoretical_scale(&tc).map(|r| format!("{r:.6e}")).unwrap_or_else(|e| e.to_string());
        println!(
            "steps={t} raw_max={:.6e} scale={:.6e} theoretical={theory}",
            cal.raw_max[j], cal.scales[j]
        );
    }
    Ok(())
}

pub fn cmd_experiment(a: ExperimentArgs) -> Result<ExperimentOutcome> {
    let over = Overrides {
        trials: a.trials,
        seed: a.seed,
        workers: a.workers,
        output_dir: a.output_dir,
        scale: a.scale,
        n_test: a.n_test,
        timings: a.timings,
    };
    let cfg = config::load(&a.config)
        .and_then(|c| c.resolve(&over))
        .map_err(|e| UsageError(format!("{e:#}")))?;
    info!("experiment: resolved configuration {cfg:?}");
    info!("experiment: root seed {}", cfg.seed);
    let outcome = experiments::run_experiment(&cfg)?;
    let files = experiments::write_outputs(&outcome, &cfg.output_dir)?;
    for s in &outcome.summary {
        println!(
            "n={} p={} m={} err_exact={:.4e} err_t1={:.4e}±{:.2e} err_t2={:.4e}±{:.2e} ged_t1={:.4e} ged_t2={:.4e}",
            s.point.n,
            s.point.p,
            s.point.m,
            s.err_exact.mean,
            s.err_t1.mean,
            s.err_t1.std,
            s.err_t2.mean,
            s.err_t2.std,
            s.ged_t1.mean,
            s.ged_t2.mean
        );
    }
    for (q, f) in &outcome.slopes {
        println!("slope {q} = {:.4} (r2 = {:.4})", f.slope, f.r2);
    }
    if let (Some(d1), Some(d2)) = (outcome.mean_abs_deviation(1), outcome.mean_abs_deviation(2)) {
        println!("mean_abs_deviation t1={d1:.6e} t2={d2:.6e}");
    }
    println!("violations={}", outcome.violations);
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(outcome)
}

pub fn cmd_certify(a: CertifyArgs) -> Result<()> {
    let cand = data::load_model(&a.candidate)?;
    let exact = data::load_model(&a.exact)?;
    if cand.p() != exact.p() {
        return Err(anyhow!(UsageError(format!(
            "models have different dimensions: {} vs {}",
            cand.p(),
            exact.p()
        ))));
    }
    if !(a.scale > 0.0 && a.epsilon > 0.0) {
        return Err(UsageError("--scale and --epsilon must be positive".into()).into());
    }
    info!(
        "certify: candidate={} exact={} scale={} epsilon={} n_probe={} seed={}",
        a.candidate.display(),
        a.exact.display(),
        a.scale,
        a.epsilon,
        a.n_probe,
        a.seed
    );
    let rep = certify_check(&cand.beta, &exact.beta, a.scale, a.epsilon, a.n_probe, &mut stream(a.seed))?;
    print_cert(&rep);
    Ok(())
}
