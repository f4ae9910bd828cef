//! TOML experiment configuration files.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use unlearn_core::experiments::{ExperimentConfig, ExperimentKind, Grid, ScaleMode};
use unlearn_core::LossFamily;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "UNLEARN_OUTPUT_DIR";
pub const FALLBACK_OUTPUT_DIR: &str = "unlearn-out";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub model: ModelSection,
    pub grid: GridSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    pub workers: Option<usize>,
    #[serde(default)]
    pub timings: bool,
}

fn default_trials() -> usize {
    100
}

fn default_n_test() -> usize {
    10_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_loss")]
    pub loss: LossFamily,
    #[serde(default = "default_nu")]
    pub nu: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            loss: default_loss(),
            nu: default_nu(),
        }
    }
}

fn default_loss() -> LossFamily {
    LossFamily::Logistic
}

fn default_nu() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub p: Vec<usize>,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default = "default_true")]
    pub n_equals_p: bool,
    pub m: Vec<usize>,
    pub lambda: Vec<f64>,
    pub epsilon: Vec<f64>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// `zero`, `theoretical`, `empirical:M0` or `fixed:R`.
    pub scale: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub scale: Option<String>,
    pub n_test: Option<usize>,
    pub timings: bool,
}

pub fn parse(text: &str) -> Result<ConfigFile> {
    Ok(toml::from_str(text)?)
}

pub fn load(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("invalid config {}", path.display()))
}

/// Output directory when neither flag nor config names one.
pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR))
}

impl ConfigFile {
    /// Applies overrides and validates the result.
    pub fn resolve(self, over: &Overrides) -> Result<ExperimentConfig> {
        let scale_text = over.scale.clone().or(self.noise.scale).unwrap_or_else(|| "zero".into());
        let scale_mode: ScaleMode = scale_text.parse().context("noise.scale")?;
        let grid = Grid {
            p: self.grid.p,
            n: self.grid.n,
            n_equals_p: self.grid.n_equals_p,
            m: self.grid.m,
            lambda: self.grid.lambda,
            epsilon: self.grid.epsilon,
        };
        let mut cfg = ExperimentConfig::new(self.experiment.kind, self.model.loss, grid);
        cfg.nu = self.model.nu;
        cfg.trials = over.trials.unwrap_or(self.experiment.trials);
        cfg.seed = over.seed.unwrap_or(self.experiment.seed);
        cfg.n_test = over.n_test.unwrap_or(self.experiment.n_test);
        cfg.workers = over.workers.or(self.experiment.workers);
        cfg.timings = over.timings || self.experiment.timings;
        cfg.scale_mode = scale_mode;
        cfg.output_dir = over
            .output_dir
            .clone()
            .or(self.output.dir)
            .unwrap_or_else(default_output_dir);
        cfg.validate()?;
        Ok(cfg)
    }
}
