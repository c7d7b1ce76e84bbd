//! JSON report documents. Every document carries `schema`, `version` and
//! `kind`; readers reject other schemas or versions.

use std::path::Path;

use cbf::Mat;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{FamilyName, ModelSection, StructureName};
use crate::error::{CliError, CliResult};

pub const SCHEMA: &str = "cbf-report";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema: String,
    pub version: u32,
    pub kind: String,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Envelope<T> {
    pub fn new(kind: &str, body: T) -> Self {
        Envelope { schema: SCHEMA.into(), version: VERSION, kind: kind.into(), body }
    }
}

pub fn to_json<T: Serialize>(kind: &str, body: T) -> String {
    let mut s = serde_json::to_string_pretty(&Envelope::new(kind, body)).expect("report serializes");
    s.push('\n');
    s
}

/// Writes to `out`, or stdout when absent.
pub fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn read<T: DeserializeOwned>(path: &Path, kind: &str) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let env: Envelope<T> = serde_json::from_str(&text)
        .map_err(|e| CliError::invalid(format!("{}: not a valid {kind} report: {e}", path.display())))?;
    if env.schema != SCHEMA || env.version != VERSION || env.kind != kind {
        return Err(CliError::invalid(format!(
            "{}: expected {SCHEMA} v{VERSION} kind {kind}, found {} v{} kind {}",
            path.display(),
            env.schema,
            env.version,
            env.kind
        )));
    }
    Ok(env.body)
}

pub fn rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn from_rows(r: &[Vec<f64>], what: &str) -> CliResult<Mat> {
    let n = r.len();
    let c = r.first().map_or(0, |x| x.len());
    if r.iter().any(|x| x.len() != c) {
        return Err(CliError::invalid(format!("{what} is ragged")));
    }
    Ok(Mat::from_fn(n, c, |i, j| r[i][j]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub category: String,
    pub code: i32,
    pub message: String,
}

pub fn error_json(e: &CliError) -> String {
    to_json(
        "error",
        serde_json::json!({ "error": ErrorBody { category: e.category().into(), code: e.code(), message: e.to_string() } }),
    )
}

/// Model description echoed in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEcho {
    pub family: FamilyName,
    pub har: bool,
    pub p: usize,
    pub q: usize,
    pub k: usize,
    pub structure: StructureName,
    pub vt: bool,
}

impl From<&ModelSection> for ModelEcho {
    fn from(m: &ModelSection) -> Self {
        ModelEcho { family: m.family, har: m.har, p: m.p, q: m.q, k: m.k, structure: m.structure, vt: m.vt }
    }
}

impl ModelEcho {
    pub fn section(&self) -> ModelSection {
        ModelSection {
            family: self.family,
            har: self.har,
            p: self.p,
            q: self.q,
            k: self.k,
            structure: self.structure,
            vt: self.vt,
            factor: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub estimate: f64,
    /// `null` when the covariance step was skipped.
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationarityEcho {
    pub rho: f64,
    pub stationary: bool,
}

/// Body of a `fit` report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub model: ModelEcho,
    pub n: usize,
    pub t: usize,
    pub input: Option<String>,
    pub ridge: Option<f64>,
    pub seed: u64,
    pub parameters: Vec<Parameter>,
    /// Full parameter vector (implied intercept for targeting).
    pub theta: Vec<f64>,
    /// Targeting only: `vec` of the sample mean and `(coefficients, ν)`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub s_hat: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub zeta: Option<Vec<f64>>,
    /// Average negative log-likelihood.
    pub neg_loglik: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub cov_flagged: bool,
    pub restarts_used: usize,
    pub stationarity: StationarityEcho,
    /// Per asset, diagonal structure only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub persistence: Option<Vec<f64>>,
    /// Averaged Hessian (full likelihood only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hessian: Option<Vec<Vec<Option<f64>>>>,
    pub covariance: Vec<Vec<Option<f64>>>,
}

pub fn nullable_rows(m: &Mat) -> Vec<Vec<Option<f64>>> {
    (0..m.nrows()).map(|i| m.row(i).iter().map(|&x| x.is_finite().then_some(x)).collect()).collect()
}

pub fn from_nullable_rows(r: &[Vec<Option<f64>>], what: &str) -> CliResult<Mat> {
    let plain: Vec<Vec<f64>> = r.iter().map(|row| row.iter().map(|x| x.unwrap_or(f64::NAN)).collect()).collect();
    from_rows(&plain, what)
}
