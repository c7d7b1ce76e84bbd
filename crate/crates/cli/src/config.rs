//! TOML run configuration. Every section is optional, unknown keys are
//! rejected, and command-line flags override file values.
//!
//! ```toml
//! seed = 42
//! threads = 4
//!
//! [io]
//! input = "data.rcov"
//! out = "fit.json"
//!
//! [model]
//! family = "matrix-f"      # or "wishart"
//! har = false
//! p = 1
//! q = 1
//! k = 1
//! structure = "diagonal"   # or "full"
//! vt = false
//!
//! [diagnose]
//! lags = [2, 3, 4, 5, 6]
//! ```

use std::path::{Path, PathBuf};

use cbf::estimate::{FitOptions, GradientMode, Orders};
use cbf::forecast::FactorRank;
use cbf::model::{AnySpec, CbfSpec, Family, HarSpec, Innovation, Structure};
use cbf::{Mat, SpdMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub io: IoSection,
    pub model: ModelSection,
    pub optimizer: OptimizerSection,
    pub simulate: SimulateSection,
    pub diagnose: DiagnoseSection,
    pub factor: FactorSection,
    pub forecast: ForecastSection,
    pub replicate: ReplicateSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Fit report consumed by `diagnose`.
    pub fit_report: Option<PathBuf>,
    pub ridge: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    MatrixF,
    Wishart,
}

impl From<FamilyName> for Family {
    fn from(f: FamilyName) -> Self {
        match f {
            FamilyName::MatrixF => Family::MatrixF,
            FamilyName::Wishart => Family::Wishart,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureName {
    Diagonal,
    Full,
}

impl From<StructureName> for Structure {
    fn from(s: StructureName) -> Self {
        match s {
            StructureName::Diagonal => Structure::Diagonal,
            StructureName::Full => Structure::Full,
        }
    }
}

/// `"auto"` or a fixed rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum RankSetting {
    Fixed(usize),
    Named(AutoRank),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoRank {
    Auto,
}

impl From<RankSetting> for FactorRank {
    fn from(r: RankSetting) -> Self {
        match r {
            RankSetting::Fixed(r) => FactorRank::Fixed(r),
            RankSetting::Named(AutoRank::Auto) => FactorRank::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub family: FamilyName,
    pub har: bool,
    pub p: usize,
    pub q: usize,
    pub k: usize,
    pub structure: StructureName,
    pub vt: bool,
    pub factor: Option<RankSetting>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            family: FamilyName::MatrixF,
            har: false,
            p: 1,
            q: 1,
            k: 1,
            structure: StructureName::Diagonal,
            vt: false,
            factor: None,
        }
    }
}

impl ModelSection {
    pub fn orders(&self) -> Orders {
        if self.har {
            Orders::Har
        } else {
            Orders::Bekk { p: self.p, q: self.q, k: self.k }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientName {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub gradient: GradientName,
    pub skip_covariance: bool,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = FitOptions::default();
        OptimizerSection {
            grad_tol: d.grad_tol,
            max_iter: d.max_iter,
            restarts: d.restarts,
            gradient: GradientName::Analytic,
            skip_covariance: false,
        }
    }
}

impl OptimizerSection {
    pub fn fit_options(&self, seed: u64) -> CliResult<FitOptions> {
        if !(self.grad_tol > 0.0) || self.max_iter == 0 {
            return Err(CliError::invalid("optimizer.grad_tol must be positive and max_iter at least 1"));
        }
        Ok(FitOptions {
            grad_tol: self.grad_tol,
            max_iter: self.max_iter,
            restarts: self.restarts,
            seed,
            gradient: match self.gradient {
                GradientName::Analytic => GradientMode::Analytic,
                GradientName::FiniteDifference => GradientMode::FiniteDifference,
            },
            skip_covariance: self.skip_covariance,
            ..FitOptions::default()
        })
    }
}

pub type Rows = Vec<Vec<f64>>;

/// Data-generating specification. Without `omega` the three-asset design
/// `Ω = [[.5,.2,.3],[.2,.5,.25],[.3,.25,.5]]`, `A = diag(.4,.55,.5)`,
/// `B = diag(.4,.3,.5)`, `ν = (10, 8)` is used.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub t: usize,
    pub burnin: usize,
    pub omega: Option<Rows>,
    /// `arch[k][i]`: component `k`, lag `i + 1`.
    pub arch: Vec<Vec<Rows>>,
    pub garch: Vec<Vec<Rows>>,
    pub har_daily: Option<Rows>,
    pub har_weekly: Option<Rows>,
    pub har_monthly: Option<Rows>,
    pub nu1: f64,
    pub nu2: Option<f64>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            t: 1000,
            burnin: 500,
            omega: None,
            arch: Vec::new(),
            garch: Vec::new(),
            har_daily: None,
            har_weekly: None,
            har_monthly: None,
            nu1: 10.0,
            nu2: Some(8.0),
        }
    }
}

pub fn matrix(rows: &Rows, what: &str) -> CliResult<Mat> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::invalid(format!("{what} must be a nonempty square matrix")));
    }
    Ok(Mat::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn design_omega() -> Mat {
    Mat::from_row_slice(3, 3, &[0.5, 0.2, 0.3, 0.2, 0.5, 0.25, 0.3, 0.25, 0.5])
}

fn diag3(d: [f64; 3]) -> Mat {
    Mat::from_fn(3, 3, |i, j| if i == j { d[i] } else { 0.0 })
}

impl SimulateSection {
    /// Builds the specification described by this section under `model`.
    pub fn spec(&self, model: &ModelSection) -> CliResult<AnySpec> {
        let innovation = match model.family {
            FamilyName::MatrixF => Innovation::MatrixF {
                nu1: self.nu1,
                nu2: self.nu2.ok_or_else(|| CliError::invalid("simulate.nu2 is required for the matrix-F family"))?,
            },
            FamilyName::Wishart => {
                if self.nu2.is_some() && self.omega.is_some() {
                    return Err(CliError::invalid("simulate.nu2 does not apply to the Wishart family"));
                }
                Innovation::Wishart { df: self.nu1 }
            }
        };
        let structure = model.structure.into();
        let omega = match &self.omega {
            Some(rows) => matrix(rows, "simulate.omega")?,
            None => design_omega(),
        };
        let omega = SpdMatrix::new(omega).map_err(|e| CliError::invalid(format!("simulate.omega: {e}")))?;
        if model.har {
            let get = |m: &Option<Rows>, name: &str| -> CliResult<Mat> {
                match m {
                    Some(rows) => matrix(rows, name),
                    None => Err(CliError::invalid(format!("{name} is required for a HAR specification"))),
                }
            };
            let spec = HarSpec::new(
                omega,
                get(&self.har_daily, "simulate.har_daily")?,
                get(&self.har_weekly, "simulate.har_weekly")?,
                get(&self.har_monthly, "simulate.har_monthly")?,
                innovation,
                structure,
            )?;
            return Ok(spec.into());
        }
        let conv = |blocks: &Vec<Vec<Rows>>, name: &str| -> CliResult<Vec<Vec<Mat>>> {
            blocks.iter().map(|comp| comp.iter().map(|m| matrix(m, name)).collect()).collect()
        };
        let (arch, garch) = if self.omega.is_none() && self.arch.is_empty() && self.garch.is_empty() {
            (vec![vec![diag3([0.4, 0.55, 0.5])]], vec![vec![diag3([0.4, 0.3, 0.5])]])
        } else {
            (conv(&self.arch, "simulate.arch")?, conv(&self.garch, "simulate.garch")?)
        };
        Ok(CbfSpec::new(omega, arch, garch, innovation, structure)?.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceName {
    Derived,
    Influence,
    Printed,
}

impl From<VarianceName> for cbf::diagnose::VarianceForm {
    fn from(v: VarianceName) -> Self {
        use cbf::diagnose::VarianceForm;
        match v {
            VarianceName::Derived => VarianceForm::Derived,
            VarianceName::Influence => VarianceForm::Influence,
            VarianceName::Printed => VarianceForm::Printed,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseSection {
    pub lags: Vec<usize>,
    pub variance: VarianceName,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        DiagnoseSection { lags: cbf::diagnose::DEFAULT_LAGS.to_vec(), variance: VarianceName::Derived }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FactorSection {
    pub rank: RankSetting,
    /// Also fit the `[model]` on the factor series.
    pub fit: bool,
}

impl Default for FactorSection {
    fn default() -> Self {
        FactorSection { rank: RankSetting::Named(AutoRank::Auto), fit: false }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastSection {
    pub window: usize,
    pub horizons: Vec<usize>,
    pub refit_every: usize,
    /// Model name used as the DM reference; defaults to the first model.
    pub reference: Option<String>,
    pub var_har: bool,
    pub sample_mean: bool,
    pub small_sample: bool,
    /// Menu; defaults to VT-CBF-HAR and VT-CAW-HAR.
    pub models: Vec<ModelSection>,
}

impl Default for ForecastSection {
    fn default() -> Self {
        ForecastSection {
            window: 800,
            horizons: vec![1, 5, 10],
            refit_every: 1,
            reference: None,
            var_har: true,
            sample_mean: false,
            small_sample: false,
            models: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Study {
    Table1,
    Table2,
}

/// How `λ` enters the second ARCH lag of the power design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagTwoScale {
    /// `A₂ = λ I`, adding `λ² Y_{t-2}`.
    Coefficient,
    /// `A₂ = √λ I`, adding `λ Y_{t-2}`.
    Weight,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplicateSection {
    pub study: Study,
    /// Replications of the null design (shared by both studies).
    pub reps: usize,
    /// Leading null replications summarized for the estimator table.
    pub estimator_reps: usize,
    /// Replications per nonzero `λ`.
    pub power_reps: usize,
    pub t: usize,
    pub burnin: usize,
    pub lambdas: Vec<f64>,
    pub lags: Vec<usize>,
    pub lag_two: LagTwoScale,
    /// Second degrees of freedom of the simulated innovation.
    pub nu2: f64,
}

impl Default for ReplicateSection {
    fn default() -> Self {
        ReplicateSection {
            study: Study::Table1,
            reps: 500,
            estimator_reps: 200,
            power_reps: 200,
            t: 1000,
            burnin: 500,
            lambdas: vec![0.0, 0.1, 0.15, 0.2],
            lags: cbf::diagnose::DEFAULT_LAGS.to_vec(),
            lag_two: LagTwoScale::Coefficient,
            nu2: 8.0,
        }
    }
}

pub fn parse(text: &str) -> CliResult<RunConfig> {
    toml::from_str(text).map_err(|e| CliError::invalid(format!("config: {}", e.message())))
}

pub fn load(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}
