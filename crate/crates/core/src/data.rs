//! Datasets, synthetic generators and on-disk formats.
//!
//! Synthetic data follow the proportional high-dimensional design: the true
//! coefficients are standard normal and every feature row is drawn from
//! `N(0, I_p / n)`, so that `var(xᵀβ*) = p/n`.
//!
//! Datasets are exchanged as CSV (`y,x1,…,xp`); models are key-value text
//! files that start with a format-version line. Floats are written with 17
//! significant digits so both formats round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use faer::{Col, Mat};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::glm::{sigmoid, LossFamily, ModelSpec, Regularizer, RegularizerKind};
use crate::solver::Objective;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Conditional law of the response given the linear predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResponseLaw {
    Bernoulli,
    Gaussian { sigma: f64 },
}

/// The generative law of one `(y, x)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmLaw {
    pub beta_star: Col<f64>,
    /// Features are `N(0, I_p / design_n)`.
    pub design_n: usize,
    pub response: ResponseLaw,
}

/// Anything that can produce fresh i.i.d. `(y, x)` test points.
pub trait PointSource {
    fn p(&self) -> usize;
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, Col<f64>);
}

impl GlmLaw {
    fn draw_row<R: Rng + ?Sized>(&self, rng: &mut R, row: &mut [f64]) -> f64 {
        let sd = 1.0 / (self.design_n as f64).sqrt();
        let mut z = 0.0;
        for (k, v) in row.iter_mut().enumerate() {
            *v = sd * rng.sample::<f64, _>(StandardNormal);
            z += *v * self.beta_star[k];
        }
        match self.response {
            ResponseLaw::Bernoulli => f64::from(rng.random_bool(sigmoid(z))),
            ResponseLaw::Gaussian { sigma } => {
                if sigma == 0.0 {
                    z
                } else {
                    z + sigma * rng.sample::<f64, _>(StandardNormal)
                }
            }
        }
    }
}

impl PointSource for GlmLaw {
    fn p(&self) -> usize {
        self.beta_star.nrows()
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, Col<f64>) {
        let mut row = vec![0.0; self.p()];
        let y = self.draw_row(rng, &mut row);
        (y, Col::from_fn(row.len(), |k| row[k]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub seed: Option<u64>,
    /// `logistic`, `linear(sigma=…)`, or `csv:<path>`.
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Mat<f64>,
    pub y: Vec<f64>,
    pub beta_star: Option<Col<f64>>,
    pub law: Option<GlmLaw>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(x: Mat<f64>, y: Vec<f64>, meta: DatasetMeta) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        let finite = y.iter().all(|v| v.is_finite())
            && (0..x.ncols()).all(|k| x.col(k).iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::domain("dataset contains non-finite values"));
        }
        Ok(Dataset {
            x,
            y,
            beta_star: None,
            law: None,
            meta,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn objective(&self, spec: ModelSpec) -> Result<Objective<'_>> {
        Objective::new(spec, self.x.as_ref(), &self.y)
    }

    pub fn row(&self, i: usize) -> Col<f64> {
        Col::from_fn(self.p(), |k| self.x[(i, k)])
    }
}

fn generate<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    response: ResponseLaw,
    generator: String,
    rng: &mut R,
) -> Result<Dataset> {
    if n == 0 || p == 0 {
        return Err(Error::domain("n and p must be at least 1"));
    }
    let beta_star = Col::from_fn(p, |_| rng.sample::<f64, _>(StandardNormal));
    let law = GlmLaw {
        beta_star: beta_star.clone(),
        design_n: n,
        response,
    };
    let mut x = Mat::<f64>::zeros(n, p);
    let mut y = Vec::with_capacity(n);
    let mut row = vec![0.0; p];
    for i in 0..n {
        y.push(law.draw_row(rng, &mut row));
        for (k, &v) in row.iter().enumerate() {
            x[(i, k)] = v;
        }
    }
    Ok(Dataset {
        x,
        y,
        beta_star: Some(beta_star),
        law: Some(law),
        meta: DatasetMeta {
            seed: None,
            generator,
        },
    })
}

/// `β* ~ N(0, I_p)`, `x_i ~ N(0, I_p/n)`, `y_i ~ Bernoulli(σ(x_iᵀβ*))`.
pub fn generate_logistic<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<Dataset> {
    generate(n, p, ResponseLaw::Bernoulli, "logistic".into(), rng)
}

/// Same design, `y_i = x_iᵀβ* + σ z_i`.
pub fn generate_linear<R: Rng + ?Sized>(n: usize, p: usize, sigma: f64, rng: &mut R) -> Result<Dataset> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::domain(format!("sigma must be nonnegative, got {sigma}")));
    }
    generate(
        n,
        p,
        ResponseLaw::Gaussian { sigma },
        format!("linear(sigma={sigma})"),
        rng,
    )
}

/// Generator matching a loss family: Bernoulli responses for logistic,
/// unit-noise Gaussian responses for squared loss.
pub fn generate_for<R: Rng + ?Sized>(loss: LossFamily, n: usize, p: usize, rng: &mut R) -> Result<Dataset> {
    match loss {
        LossFamily::Logistic => generate_logistic(n, p, rng),
        LossFamily::Squared => generate_linear(n, p, 1.0, rng),
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(dataset.n() * dataset.p() * 24);
    out.push('y');
    for k in 1..=dataset.p() {
        let _ = write!(out, ",x{k}");
    }
    out.push('\n');
    for i in 0..dataset.n() {
        out.push_str(&fmt_f64(dataset.y[i]));
        for k in 0..dataset.p() {
            out.push(',');
            out.push_str(&fmt_f64(dataset.x[(i, k)]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads `y,x1,…,xp`. A header-only file yields an empty dataset, which
/// objectives reject.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(1, format!("{other:?}")),
        })?;
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(parse_err(1, "empty file: expected header `y,x1,...,xp`".into()));
    }
    if &header[0] != "y" {
        return Err(parse_err(1, format!("first column must be `y`, found `{}`", &header[0])));
    }
    let p = header.len() - 1;
    if p == 0 {
        return Err(parse_err(1, "no feature columns".into()));
    }
    let mut y = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |pos| pos.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |pos| pos.line());
        if record.len() != p + 1 {
            return Err(parse_err(
                line,
                format!("expected {} columns, found {}", p + 1, record.len()),
            ));
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("column {}: `{cell}` is not a number", c + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {}: non-finite value", c + 1)));
            }
            if c == 0 {
                y.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let n = y.len();
    let x = Mat::from_fn(n, p, |i, k| values[i * p + k]);
    Dataset::new(
        x,
        y,
        DatasetMeta {
            seed: None,
            generator: format!("csv:{}", path.display()),
        },
    )
}

/// A fitted (or unlearned) model as persisted on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub spec: ModelSpec,
    pub n: usize,
    pub seed: Option<u64>,
    pub lineage: String,
    pub beta: Col<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Present on unlearned models.
    pub removal: Option<RemovalInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemovalInfo {
    pub removed: Vec<usize>,
    pub steps: usize,
    pub noise_scale: f64,
    pub epsilon: f64,
}

impl ModelFile {
    pub fn p(&self) -> usize {
        self.beta.nrows()
    }

    /// Rejects a dataset whose feature count differs from the model's.
    pub fn check_compatible(&self, dataset: &Dataset) -> Result<()> {
        if dataset.p() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: dataset.p(),
            });
        }
        Ok(())
    }
}

fn join<T: ToString>(items: impl Iterator<Item = T>) -> String {
    items.map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn save_model(model: &ModelFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(out, "format_version = {MODEL_FORMAT_VERSION}");
    let _ = writeln!(out, "loss = {}", model.spec.loss);
    let _ = writeln!(out, "regularizer = ridge");
    let _ = writeln!(out, "lambda = {}", fmt_f64(model.spec.reg.lambda));
    let _ = writeln!(out, "nu = {}", fmt_f64(model.spec.reg.nu));
    let _ = writeln!(out, "n = {}", model.n);
    let _ = writeln!(out, "p = {}", model.p());
    match model.seed {
        Some(seed) => {
            let _ = writeln!(out, "seed = {seed}");
        }
        None => {
            let _ = writeln!(out, "seed = none");
        }
    }
    let _ = writeln!(out, "lineage = {}", model.lineage);
    let _ = writeln!(out, "iterations = {}", model.iterations);
    let _ = writeln!(out, "grad_norm = {}", fmt_f64(model.grad_norm));
    let _ = writeln!(out, "converged = {}", model.converged);
    if let Some(r) = &model.removal {
        let _ = writeln!(out, "removed = {}", join(r.removed.iter()));
        let _ = writeln!(out, "steps = {}", r.steps);
        let _ = writeln!(out, "noise_scale = {}", fmt_f64(r.noise_scale));
        let _ = writeln!(out, "epsilon = {}", fmt_f64(r.epsilon));
    }
    let _ = writeln!(out, "beta = {}", join(model.beta.iter().map(|&v| fmt_f64(v))));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let mut entries = std::collections::HashMap::new();
    let mut first_key = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: lineno as u64 + 1,
            msg: "expected `key = value`".into(),
        })?;
        let key = key.trim().to_string();
        first_key.get_or_insert_with(|| key.clone());
        entries.insert(key, value.trim().to_string());
    }
    if first_key.as_deref() != Some("format_version") {
        return Err(corrupt("missing format_version line".into()));
    }
    let get = |key: &str| {
        entries
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| corrupt(format!("missing key `{key}`")))
    };
    let num = |key: &str| -> Result<f64> {
        get(key)?
            .parse()
            .map_err(|_| corrupt(format!("`{key}` is not a number")))
    };
    let int = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| corrupt(format!("`{key}` is not an integer")))
    };
    let version: u32 = get("format_version")?
        .parse()
        .map_err(|_| corrupt("bad format_version".into()))?;
    if version != MODEL_FORMAT_VERSION {
        return Err(corrupt(format!(
            "unsupported format_version {version}, expected {MODEL_FORMAT_VERSION}"
        )));
    }
    if get("regularizer")? != "ridge" {
        return Err(corrupt(format!("unknown regularizer `{}`", get("regularizer")?)));
    }
    let loss: LossFamily = get("loss")?.parse()?;
    let reg = Regularizer {
        kind: RegularizerKind::Ridge,
        lambda: num("lambda")?,
        nu: num("nu")?,
    };
    let spec = ModelSpec::new(loss, reg)?;
    let seed = match get("seed")? {
        "none" => None,
        s => Some(s.parse().map_err(|_| corrupt("bad seed".into()))?),
    };
    let beta: Vec<f64> = get("beta")?
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| corrupt("bad coefficient in `beta`".into()))?;
    let p = int("p")?;
    if beta.len() != p {
        return Err(corrupt(format!("`beta` has {} entries, `p` says {p}", beta.len())));
    }
    let converged = match get("converged")? {
        "true" => true,
        "false" => false,
        other => return Err(corrupt(format!("bad `converged` value `{other}`"))),
    };
    let removal = if entries.contains_key("removed") {
        let removed_text = get("removed")?;
        let removed = if removed_text.is_empty() {
            vec![]
        } else {
            removed_text
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| corrupt("bad index in `removed`".into()))?
        };
        Some(RemovalInfo {
            removed,
            steps: int("steps")?,
            noise_scale: num("noise_scale")?,
            epsilon: num("epsilon")?,
        })
    } else {
        None
    };
    Ok(ModelFile {
        spec,
        n: int("n")?,
        seed,
        lineage: get("lineage")?.to_string(),
        beta: Col::from_fn(p, |k| beta[k]),
        grad_norm: num("grad_norm")?,
        iterations: int("iterations")?,
        converged,
        removal,
    })
}
