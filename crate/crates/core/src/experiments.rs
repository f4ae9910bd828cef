//! Monte Carlo harness for the scaling and noise-comparison experiments.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use faer::Col;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{generate_for, PointSource};
use crate::error::{Error, Result};
use crate::glm::{LossFamily, ModelSpec, Regularizer};
use crate::metrics::{ged_estimate, in_sample_error, l2_distance};
use crate::noise::{calibrate, sample_isotropic_laplace, theoretical_scale, NoiseSpec, TheoryConstants};
use crate::rng::substream;
use crate::solver::{default_tol, fit_default, fit_polished, FitResult, DEFAULT_MAX_ITER};
use crate::svg::{self, Series};
use crate::unlearn::{newton_path, RemovalRequest};

/// Step counts every trial reports.
pub const STEPS: [usize; 2] = [1, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PScaling,
    MScaling,
    NoiseComparison,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::PScaling => "p_scaling",
            ExperimentKind::MScaling => "m_scaling",
            ExperimentKind::NoiseComparison => "noise_comparison",
        }
    }
}

/// How the perturbation radius is chosen for each trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleMode {
    /// No perturbation.
    Zero,
    Fixed(f64),
    Theoretical,
    /// Calibrated per trial from `m0` random forget sets.
    Empirical { m0: usize },
}

impl std::fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScaleMode::Zero => write!(f, "zero"),
            ScaleMode::Fixed(r) => write!(f, "fixed:{r}"),
            ScaleMode::Theoretical => write!(f, "theoretical"),
            ScaleMode::Empirical { m0 } => write!(f, "empirical:{m0}"),
        }
    }
}

impl std::str::FromStr for ScaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("unrecognized scale `{s}` (expected zero, theoretical, empirical:M0 or fixed:R)"));
        match s {
            "zero" | "none" => return Ok(ScaleMode::Zero),
            "theoretical" => return Ok(ScaleMode::Theoretical),
            _ => {}
        }
        let (head, tail) = s.split_once(':').ok_or_else(bad)?;
        match head {
            "empirical" => {
                let m0: usize = tail.parse().map_err(|_| bad())?;
                if m0 < 2 {
                    return Err(Error::Config(format!("empirical calibration needs m0 >= 2, got {m0}")));
                }
                Ok(ScaleMode::Empirical { m0 })
            }
            "fixed" => {
                let r: f64 = tail.parse().map_err(|_| bad())?;
                if !(r.is_finite() && r >= 0.0) {
                    return Err(Error::Config(format!("fixed scale must be finite and >= 0, got {r}")));
                }
                Ok(if r == 0.0 { ScaleMode::Zero } else { ScaleMode::Fixed(r) })
            }
            _ => Err(bad()),
        }
    }
}

/// One point of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub lambda: f64,
    pub epsilon: f64,
}

/// Axis values; the grid is their Cartesian product in `p, n, m, λ, ε` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub p: Vec<usize>,
    /// Ignored when `n_equals_p`.
    pub n: Vec<usize>,
    pub n_equals_p: bool,
    pub m: Vec<usize>,
    pub lambda: Vec<f64>,
    pub epsilon: Vec<f64>,
}

impl Grid {
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &p in &self.p {
            let ns = if self.n_equals_p { vec![p] } else { self.n.clone() };
            for &n in &ns {
                for &m in &self.m {
                    for &lambda in &self.lambda {
                        for &epsilon in &self.epsilon {
                            out.push(GridPoint { n, p, m, lambda, epsilon });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub loss: LossFamily,
    pub nu: f64,
    pub grid: Grid,
    pub trials: usize,
    pub seed: u64,
    pub scale_mode: ScaleMode,
    /// Fresh points per GED estimate.
    pub n_test: usize,
    pub output_dir: PathBuf,
    /// Caps concurrent trials; `None` uses the ambient rayon pool.
    pub workers: Option<usize>,
    /// Fill the `seconds` column. Off by default so outputs stay byte-identical.
    pub timings: bool,
}

impl ExperimentConfig {
    /// A config with the given grid and the usual defaults.
    pub fn new(kind: ExperimentKind, loss: LossFamily, grid: Grid) -> Self {
        ExperimentConfig {
            kind,
            loss,
            nu: 1.0,
            grid,
            trials: 100,
            seed: 0,
            scale_mode: ScaleMode::Zero,
            n_test: 10_000,
            output_dir: PathBuf::from("out"),
            workers: None,
            timings: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return cfg("experiment.trials must be >= 1".into());
        }
        if self.n_test < 2 {
            return cfg(format!("experiment.n_test must be >= 2, got {}", self.n_test));
        }
        if self.workers == Some(0) {
            return cfg("experiment.workers must be >= 1".into());
        }
        if !(self.nu > 0.0 && self.nu <= 2.0) {
            return cfg(format!("model.nu must lie in (0, 2], got {}", self.nu));
        }
        let g = &self.grid;
        for (name, empty) in [
            ("grid.p", g.p.is_empty()),
            ("grid.n", !g.n_equals_p && g.n.is_empty()),
            ("grid.m", g.m.is_empty()),
            ("grid.lambda", g.lambda.is_empty()),
            ("grid.epsilon", g.epsilon.is_empty()),
        ] {
            if empty {
                return cfg(format!("{name} must not be empty"));
            }
        }
        if g.p.contains(&0) {
            return cfg("grid.p values must be >= 1".into());
        }
        if g.m.contains(&0) {
            return cfg("grid.m values must be >= 1".into());
        }
        if let Some(l) = g.lambda.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return cfg(format!("grid.lambda values must be positive, got {l}"));
        }
        if let Some(e) = g.epsilon.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return cfg(format!("grid.epsilon values must be positive, got {e}"));
        }
        for pt in g.points() {
            if pt.m + 1 > pt.n {
                return cfg(format!("grid.m: m = {} needs n >= m + 1, got n = {}", pt.m, pt.n));
            }
        }
        let varying = |len: usize| len > 1;
        let sweep = match self.kind {
            ExperimentKind::PScaling => {
                if !g.n_equals_p {
                    return cfg("grid.n_equals_p must be true for p_scaling".into());
                }
                Some(("grid.p", distinct_usize(&g.p), [g.m.len(), g.lambda.len(), g.epsilon.len()]))
            }
            ExperimentKind::MScaling => {
                let fixed_n = if g.n_equals_p { 1 } else { g.n.len() };
                Some(("grid.m", distinct_usize(&g.m), [g.p.len(), fixed_n, g.lambda.len() * g.epsilon.len()]))
            }
            ExperimentKind::NoiseComparison => None,
        };
        if let Some((axis, distinct, others)) = sweep {
            if distinct < 3 {
                return cfg(format!("{axis} needs at least 3 distinct values to fit a slope, got {distinct}"));
            }
            if others.iter().any(|&l| varying(l)) {
                return cfg(format!("{} varies only {axis}; every other grid axis must hold one value", self.kind.name()));
            }
        }
        if let ScaleMode::Fixed(r) = self.scale_mode {
            if !(r.is_finite() && r > 0.0) {
                return cfg(format!("noise.scale fixed radius must be positive, got {r}"));
            }
        }
        Ok(())
    }
}

fn distinct_usize(v: &[usize]) -> usize {
    let mut s = v.to_vec();
    s.sort_unstable();
    s.dedup();
    s.len()
}

/// One Monte Carlo trial at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub point: GridPoint,
    pub trial: usize,
    pub err_exact: f64,
    pub err_t1: f64,
    pub err_t2: f64,
    pub ged_t1: f64,
    pub ged_t2: f64,
    pub in_sample_t1: f64,
    pub in_sample_t2: f64,
    pub out_sample_t1: f64,
    pub out_sample_t2: f64,
    pub noise_norm_t1: f64,
    pub noise_norm_t2: f64,
    pub seconds: Option<f64>,
    /// Radii used for `T = 1, 2`; summarized, not written per row.
    pub scale_t1: f64,
    pub scale_t2: f64,
    /// Slack allowed by the exact retrain's own tolerance.
    pub retrain_slack: f64,
}

impl ExperimentRecord {
    /// `err_t2 > err_t1` beyond what retrain tolerance can explain.
    pub fn is_violation(&self) -> bool {
        self.err_t2 > self.err_t1 + self.retrain_slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointRole {
    Forgotten,
    Heldout,
}

impl PointRole {
    pub fn name(self) -> &'static str {
        match self {
            PointRole::Forgotten => "forgotten",
            PointRole::Heldout => "heldout",
        }
    }
}

/// Exact-unlearned versus perturbed-approximate loss at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LossPair {
    pub point: GridPoint,
    pub trial: usize,
    pub steps: usize,
    pub role: PointRole,
    pub loss_exact: f64,
    pub loss_perturbed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }

    /// Standard error of the mean over `n` samples.
    pub fn std_error(&self, n: usize) -> f64 {
        self.std / (n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub point: GridPoint,
    pub trials: usize,
    pub err_exact: MeanStd,
    pub err_t1: MeanStd,
    pub err_t2: MeanStd,
    pub ged_t1: MeanStd,
    pub ged_t2: MeanStd,
    pub scale_t1: f64,
    pub scale_t2: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares on `(log x, log y)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::domain(format!("slope fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(bad) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::domain(format!("log-log fit needs positive values, got ({}, {})", bad.0, bad.1)));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("slope fit needs at least two distinct x values"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if ss_tot <= f64::EPSILON * k * my.abs().max(1.0) {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(SlopeFit { slope, intercept, r2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub kind: ExperimentKind,
    pub records: Vec<ExperimentRecord>,
    pub pairs: Vec<LossPair>,
    pub summary: Vec<PointSummary>,
    /// `(quantity, fit)` for `err_exact`, `err_t1`, `err_t2` on scaling runs.
    pub slopes: Vec<(String, SlopeFit)>,
    pub violations: usize,
}

impl ExperimentOutcome {
    pub fn slope(&self, quantity: &str) -> Option<SlopeFit> {
        self.slopes.iter().find(|(q, _)| q == quantity).map(|(_, f)| *f)
    }

    /// Mean `|loss_perturbed − loss_exact|` over all pairs at `steps`.
    pub fn mean_abs_deviation(&self, steps: usize) -> Option<f64> {
        let d: Vec<f64> = self
            .pairs
            .iter()
            .filter(|p| p.steps == steps)
            .map(|p| (p.loss_perturbed - p.loss_exact).abs())
            .collect();
        (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
    }
}

fn converged(res: FitResult) -> Result<FitResult> {
    if res.converged {
        Ok(res)
    } else {
        Err(Error::NonConvergence {
            grad_norm: res.grad_norm,
            iterations: res.iterations,
        })
    }
}

struct TrialOutput {
    record: ExperimentRecord,
    pairs: Vec<LossPair>,
}

fn run_trial(cfg: &ExperimentConfig, idx: usize, pt: GridPoint, trial: usize) -> Result<TrialOutput> {
    let start = Instant::now();
    let path = |k: u64| [idx as u64, trial as u64, k];
    let mut data_rng = substream(cfg.seed, &path(0));
    let spec = ModelSpec::new(cfg.loss, Regularizer::ridge_with_nu(pt.lambda, cfg.nu)?)?;
    let dataset = generate_for(cfg.loss, pt.n, pt.p, &mut data_rng)?;
    let obj = dataset.objective(spec)?;
    let beta_hat = converged(fit_default(&obj)?)?.beta;
    let req = RemovalRequest::random(pt.n, pt.m, &mut data_rng)?;
    let without = obj.without(&req)?;
    let iterates = newton_path(&without, &beta_hat, 2)?;
    let exact = converged(fit_polished(&without, &beta_hat, default_tol(pt.p), DEFAULT_MAX_ITER)?)?;
    let strong_convexity = 2.0 * pt.lambda * cfg.nu.min(1.0);
    // Retrain error bound from strong convexity, plus a roundoff floor.
    let retrain_slack = 2.0 * exact.grad_norm / strong_convexity + 1e-12 * exact.beta.norm_l2().max(1.0);
    let exact = exact.beta;

    let scales: [f64; 2] = match cfg.scale_mode {
        ScaleMode::Zero => [0.0, 0.0],
        ScaleMode::Fixed(r) => [r, r],
        ScaleMode::Theoretical => {
            let mut out = [0.0; 2];
            for (slot, t) in out.iter_mut().zip(STEPS) {
                let mut tc = TheoryConstants::new(pt.lambda, pt.n, pt.p, pt.m, t);
                tc.nu = cfg.nu;
                *slot = theoretical_scale(&tc)?;
            }
            out
        }
        ScaleMode::Empirical { m0 } => {
            let mut cal_rng = substream(cfg.seed, &path(1));
            let cal = calibrate(&obj, &beta_hat, pt.m, &STEPS, m0, &mut cal_rng)?;
            [cal.scales[0], cal.scales[1]]
        }
    };

    let law = dataset.law.as_ref().expect("synthetic datasets carry their law");
    let mut held_rng = substream(cfg.seed, &path(4));
    let (y0, x0) = law.draw(&mut held_rng);
    let loss_at = |beta: &Col<f64>, y: f64, x: &Col<f64>| cfg.loss.value_unchecked(y, x.transpose() * beta);
    let exact_heldout = loss_at(&exact, y0, &x0);

    let mut perturbed = Vec::with_capacity(2);
    let mut ged = [0.0; 2];
    let mut in_sample = [0.0; 2];
    let mut out_sample = [0.0; 2];
    let mut noise_norm = [0.0; 2];
    let mut pairs = Vec::new();
    for (j, t) in STEPS.into_iter().enumerate() {
        let noise_spec = NoiseSpec::new(pt.p, scales[j], pt.epsilon)?;
        let mut noise_rng = substream(cfg.seed, &[idx as u64, trial as u64, 2, t as u64]);
        let b = sample_isotropic_laplace(&noise_spec, &mut noise_rng)?;
        noise_norm[j] = b.norm_l2();
        let beta_t = &iterates[t] + &b;
        // Same test points for every T.
        let mut test_rng = substream(cfg.seed, &path(3));
        ged[j] = ged_estimate(cfg.loss, &exact, &beta_t, law, cfg.n_test, &mut test_rng)?.mean;
        in_sample[j] = in_sample_error(cfg.loss, &beta_t, &exact, &dataset, &req)?;
        let pert_heldout = loss_at(&beta_t, y0, &x0);
        out_sample[j] = (pert_heldout - exact_heldout).abs();
        if cfg.kind == ExperimentKind::NoiseComparison {
            for &i in req.indices() {
                let xi = dataset.row(i);
                pairs.push(LossPair {
                    point: pt,
                    trial,
                    steps: t,
                    role: PointRole::Forgotten,
                    loss_exact: loss_at(&exact, dataset.y[i], &xi),
                    loss_perturbed: loss_at(&beta_t, dataset.y[i], &xi),
                });
            }
            pairs.push(LossPair {
                point: pt,
                trial,
                steps: t,
                role: PointRole::Heldout,
                loss_exact: exact_heldout,
                loss_perturbed: pert_heldout,
            });
        }
        perturbed.push(beta_t);
    }

    let record = ExperimentRecord {
        point: pt,
        trial,
        err_exact: l2_distance(&beta_hat, &exact),
        err_t1: l2_distance(&iterates[1], &exact),
        err_t2: l2_distance(&iterates[2], &exact),
        ged_t1: ged[0],
        ged_t2: ged[1],
        in_sample_t1: in_sample[0],
        in_sample_t2: in_sample[1],
        out_sample_t1: out_sample[0],
        out_sample_t2: out_sample[1],
        noise_norm_t1: noise_norm[0],
        noise_norm_t2: noise_norm[1],
        seconds: cfg.timings.then(|| start.elapsed().as_secs_f64()),
        scale_t1: scales[0],
        scale_t2: scales[1],
        retrain_slack,
    };
    Ok(TrialOutput { record, pairs })
}

/// Runs every trial at every grid point and aggregates in `(point, trial)` order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let points = cfg.grid.points();
    let items: Vec<(usize, GridPoint, usize)> = points
        .iter()
        .enumerate()
        .flat_map(|(i, pt)| (0..cfg.trials).map(move |t| (i, *pt, t)))
        .collect();
    let work = || {
        items
            .par_iter()
            .map(|&(i, pt, t)| run_trial(cfg, i, pt, t))
            .collect::<Result<Vec<_>>>()
    };
    let outputs = match cfg.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let mut records = Vec::with_capacity(outputs.len());
    let mut pairs = Vec::new();
    for out in outputs {
        records.push(out.record);
        pairs.extend(out.pairs);
    }
    let summary: Vec<PointSummary> = records
        .chunks(cfg.trials)
        .map(|chunk| PointSummary {
            point: chunk[0].point,
            trials: chunk.len(),
            err_exact: MeanStd::of(chunk.iter().map(|r| r.err_exact)),
            err_t1: MeanStd::of(chunk.iter().map(|r| r.err_t1)),
            err_t2: MeanStd::of(chunk.iter().map(|r| r.err_t2)),
            ged_t1: MeanStd::of(chunk.iter().map(|r| r.ged_t1)),
            ged_t2: MeanStd::of(chunk.iter().map(|r| r.ged_t2)),
            scale_t1: MeanStd::of(chunk.iter().map(|r| r.scale_t1)).mean,
            scale_t2: MeanStd::of(chunk.iter().map(|r| r.scale_t2)).mean,
            violations: chunk.iter().filter(|r| r.is_violation()).count(),
        })
        .collect();
    let violations = summary.iter().map(|s| s.violations).sum();

    let axis: Option<fn(&GridPoint) -> f64> = match cfg.kind {
        ExperimentKind::PScaling => Some(|pt| pt.p as f64),
        ExperimentKind::MScaling => Some(|pt| pt.m as f64),
        ExperimentKind::NoiseComparison => None,
    };
    let mut slopes = Vec::new();
    if let Some(axis) = axis {
        let quantities: [(&str, fn(&PointSummary) -> f64); 3] = [
            ("err_exact", |s| s.err_exact.mean),
            ("err_t1", |s| s.err_t1.mean),
            ("err_t2", |s| s.err_t2.mean),
        ];
        for (name, get) in quantities {
            let pts: Vec<(f64, f64)> = summary.iter().map(|s| (axis(&s.point), get(s))).collect();
            // A flat zero series (e.g. squared loss at T = 2) has no slope.
            if let Ok(fit) = fit_loglog_slope(&pts) {
                slopes.push((name.to_string(), fit));
            }
        }
    }

    Ok(ExperimentOutcome {
        kind: cfg.kind,
        records,
        pairs,
        summary,
        slopes,
        violations,
    })
}

pub fn run_p_scaling(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    expect_kind(cfg, ExperimentKind::PScaling)?;
    run_experiment(cfg)
}

pub fn run_m_scaling(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    expect_kind(cfg, ExperimentKind::MScaling)?;
    run_experiment(cfg)
}

pub fn run_noise_comparison(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    expect_kind(cfg, ExperimentKind::NoiseComparison)?;
    run_experiment(cfg)
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::Config(format!(
            "experiment.kind is {}, expected {}",
            cfg.kind.name(),
            kind.name()
        )));
    }
    Ok(())
}

pub const RECORD_HEADER: &str = "n,p,m,lambda,epsilon,trial,err_exact,err_t1,err_t2,ged_t1,ged_t2,\
in_sample_t1,in_sample_t2,out_sample_t1,out_sample_t2,noise_norm_t1,noise_norm_t2,seconds";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn point_cols(pt: &GridPoint) -> String {
    format!("{},{},{},{},{}", pt.n, pt.p, pt.m, num(pt.lambda), num(pt.epsilon))
}

pub fn records_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::from(RECORD_HEADER);
    out.push('\n');
    for r in records {
        let vals = [
            r.err_exact,
            r.err_t1,
            r.err_t2,
            r.ged_t1,
            r.ged_t2,
            r.in_sample_t1,
            r.in_sample_t2,
            r.out_sample_t1,
            r.out_sample_t2,
            r.noise_norm_t1,
            r.noise_norm_t2,
        ];
        let vals: Vec<String> = vals.iter().map(|v| num(*v)).collect();
        let secs = r.seconds.map(num).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", point_cols(&r.point), r.trial, vals.join(","), secs);
    }
    out
}

pub fn summary_csv(outcome: &ExperimentOutcome) -> String {
    let mut out = String::from(
        "n,p,m,lambda,epsilon,trials,err_exact_mean,err_exact_std,err_t1_mean,err_t1_std,err_t2_mean,err_t2_std,\
ged_t1_mean,ged_t1_std,ged_t2_mean,ged_t2_std,scale_t1,scale_t2,violations\n",
    );
    for s in &outcome.summary {
        let vals = [
            s.err_exact.mean,
            s.err_exact.std,
            s.err_t1.mean,
            s.err_t1.std,
            s.err_t2.mean,
            s.err_t2.std,
            s.ged_t1.mean,
            s.ged_t1.std,
            s.ged_t2.mean,
            s.ged_t2.std,
            s.scale_t1,
            s.scale_t2,
        ];
        let vals: Vec<String> = vals.iter().map(|v| num(*v)).collect();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            point_cols(&s.point),
            s.trials,
            vals.join(","),
            s.violations
        );
    }
    out
}

pub fn slopes_csv(outcome: &ExperimentOutcome) -> String {
    let mut out = String::from("quantity,slope,intercept,r2\n");
    for (q, f) in &outcome.slopes {
        let _ = writeln!(out, "{q},{},{},{}", num(f.slope), num(f.intercept), num(f.r2));
    }
    out
}

pub fn pairs_csv(pairs: &[LossPair]) -> String {
    let mut out = String::from("n,p,m,lambda,epsilon,trial,steps,role,loss_exact,loss_perturbed\n");
    for p in pairs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            point_cols(&p.point),
            p.trial,
            p.steps,
            p.role.name(),
            num(p.loss_exact),
            num(p.loss_perturbed)
        );
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes CSV tables and SVG figures into `dir`; returns the paths written.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = outcome.kind.name();
    let mut written = Vec::new();
    let mut emit = |file: String, contents: String| -> Result<()> {
        let path = dir.join(file);
        write_file(&path, &contents)?;
        written.push(path);
        Ok(())
    };
    emit(format!("{name}.csv"), records_csv(&outcome.records))?;
    emit(format!("{name}_summary.csv"), summary_csv(outcome))?;

    match outcome.kind {
        ExperimentKind::PScaling | ExperimentKind::MScaling => {
            emit(format!("{name}_slopes.csv"), slopes_csv(outcome))?;
            let (axis, x_of): (&str, fn(&GridPoint) -> f64) = if outcome.kind == ExperimentKind::PScaling {
                ("p (n = p)", |pt| pt.p as f64)
            } else {
                ("m = |M|", |pt| pt.m as f64)
            };
            let quantities: [(&str, fn(&PointSummary) -> MeanStd); 3] = [
                ("err_exact", |s| s.err_exact),
                ("err_t1", |s| s.err_t1),
                ("err_t2", |s| s.err_t2),
            ];
            for (q, get) in quantities {
                let series = Series {
                    name: q.to_string(),
                    points: outcome
                        .summary
                        .iter()
                        .map(|s| (x_of(&s.point), get(s).mean, get(s).std))
                        .collect(),
                };
                let title = match outcome.slope(q) {
                    Some(f) => format!("{q} (slope {:.3})", f.slope),
                    None => q.to_string(),
                };
                emit(
                    format!("{name}_{q}.svg"),
                    svg::line_chart(&title, axis, "l2 error", &[series], true),
                )?;
            }
        }
        ExperimentKind::NoiseComparison => {
            emit(format!("{name}_pairs.csv"), pairs_csv(&outcome.pairs))?;
            for t in STEPS {
                for role in [PointRole::Forgotten, PointRole::Heldout] {
                    let pts: Vec<(f64, f64)> = outcome
                        .pairs
                        .iter()
                        .filter(|p| p.steps == t && p.role == role)
                        .map(|p| (p.loss_exact, p.loss_perturbed))
                        .collect();
                    let q = format!("{}_t{t}", role.name());
                    emit(
                        format!("{name}_{q}.svg"),
                        svg::scatter_with_diagonal(&q, "exact-unlearned loss", "perturbed loss", &pts),
                    )?;
                }
            }
        }
    }
    Ok(written)
}
