//! Conditional-mean forecasts, rolling out-of-sample evaluation, forecast
//! losses, Diebold–Mariano comparisons and a componentwise VAR-HAR baseline.
//!
//! Multi-step forecasts iterate the recursion with each unobserved `Y`
//! replaced by its conditional mean `Σ`; because `Σ_t` is linear in past `Y`
//! this is the exact `E(Y_{T+h} | 𝒢_T)`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimate::{fit_mle, fit_vt, to_spec, FitOptions, Orders};
use crate::factor::{eigen_ratios, extract_factors};
use crate::matalg::{mat_norm, sym_eigen_desc, unvech, Mat, MatrixSeries, NormKind, SpdMatrix};
use crate::model::{filter_series, AnySpec, Family, InitState, Specification, Structure, HAR_WINDOWS};
use crate::special::normal_sf;

/// Forecasts for `h = 1..=max_h` from the end of `series`.
pub fn forecast_path<S: Specification + ?Sized>(
    spec: &S,
    series: &MatrixSeries,
    init: &InitState,
    max_h: usize,
) -> Result<Vec<SpdMatrix>> {
    if max_h == 0 {
        return Err(Error::InvalidArgument("forecast horizon must be at least 1".into()));
    }
    let path = filter_series(&spec.recursion(), series, init, max_h)?;
    let t = series.len();
    path.into_iter().skip(t).map(SpdMatrix::new).collect()
}

/// `E(Y_{T+h} | 𝒢_T)`.
pub fn forecast_sigma<S: Specification + ?Sized>(
    spec: &S,
    series: &MatrixSeries,
    init: &InitState,
    h: usize,
) -> Result<SpdMatrix> {
    Ok(forecast_path(spec, series, init, h)?.pop().expect("nonempty path"))
}

/// `‖pred - realized‖` in the chosen norm.
pub fn loss(pred: &Mat, realized: &Mat, kind: NormKind) -> Result<f64> {
    if pred.shape() != realized.shape() {
        return Err(Error::DimensionMismatch { expected: realized.nrows(), actual: pred.nrows() });
    }
    Ok(mat_norm(&(pred - realized), kind))
}

// ---------------------------------------------------------------------------
// Forecasters

/// A model that can be fitted on a window and then produce forecasts.
///
/// `origin` is the number of observations preceding the forecast origin in
/// the full series; the window holds the last `window` of them.
pub trait Forecaster: Sync {
    fn name(&self) -> String;
    fn fit(&self, window: &MatrixSeries, origin: usize) -> Result<Box<dyn Predictor>>;
}

/// A fitted forecaster. Predictions need not be PSD.
pub trait Predictor: Send + Sync {
    fn predict(&self, window: &MatrixSeries, origin: usize, horizons: &[usize]) -> Result<Vec<Mat>>;
}

fn max_of(horizons: &[usize]) -> usize {
    horizons.iter().copied().max().unwrap_or(0)
}

fn pick(path: &[SpdMatrix], horizons: &[usize]) -> Vec<Mat> {
    horizons.iter().map(|&h| path[h - 1].as_mat().clone()).collect()
}

/// Fixed-parameter forecaster (no estimation).
#[derive(Debug, Clone)]
pub struct FixedSpec {
    pub label: String,
    pub spec: AnySpec,
}

impl Forecaster for FixedSpec {
    fn name(&self) -> String {
        self.label.clone()
    }
    fn fit(&self, _: &MatrixSeries, _: usize) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(SpecPredictor { spec: self.spec.clone() }))
    }
}

struct SpecPredictor {
    spec: AnySpec,
}

impl Predictor for SpecPredictor {
    fn predict(&self, window: &MatrixSeries, _: usize, horizons: &[usize]) -> Result<Vec<Mat>> {
        let init = InitState::from_series_mean(window, self.spec.recursion().max_lag());
        Ok(pick(&forecast_path(&self.spec, window, &init, max_of(horizons))?, horizons))
    }
}

/// Predicts the window mean at every horizon.
#[derive(Debug, Clone, Copy, Default)]
pub struct SampleMean;

impl Forecaster for SampleMean {
    fn name(&self) -> String {
        "sample-mean".into()
    }
    fn fit(&self, _: &MatrixSeries, _: usize) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(SampleMean))
    }
}

impl Predictor for SampleMean {
    fn predict(&self, window: &MatrixSeries, _: usize, horizons: &[usize]) -> Result<Vec<Mat>> {
        let m = window.mean().into_inner();
        Ok(vec![m; horizons.len()])
    }
}

/// How the factor rank is chosen inside each window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorRank {
    Fixed(usize),
    /// Eigen-ratio suggestion.
    Auto,
}

/// One CBF-type entry of the model menu.
#[derive(Debug, Clone)]
pub struct CbfForecaster {
    pub label: String,
    pub family: Family,
    pub orders: Orders,
    pub structure: Structure,
    pub vt: bool,
    pub factor: Option<FactorRank>,
    pub options: FitOptions,
}

impl CbfForecaster {
    pub fn new(family: Family, orders: Orders, structure: Structure, vt: bool) -> Self {
        let mut label = String::new();
        if vt {
            label.push_str("VT-");
        }
        label.push_str(match family {
            Family::MatrixF => "CBF",
            Family::Wishart => "CAW",
        });
        match orders {
            Orders::Har => label.push_str("-HAR"),
            Orders::Bekk { p, q, k } => label.push_str(&format!("({p},{q},{k})")),
        }
        let options = FitOptions { skip_covariance: true, ..FitOptions::default() };
        CbfForecaster { label, family, orders, structure, vt, factor: None, options }
    }

    pub fn with_factor(mut self, rank: FactorRank) -> Self {
        self.label = format!("F-{}", self.label);
        self.factor = Some(rank);
        self
    }

    fn estimate(&self, series: &MatrixSeries) -> Result<AnySpec> {
        let theta = if self.vt {
            fit_vt(series, self.orders, self.structure, self.family, &self.options)?.to_param_vector()?
        } else {
            fit_mle(series, self.orders, self.structure, self.family, &self.options)?.theta_hat
        };
        to_spec(&theta)
    }
}

struct FactorPredictor {
    inner: SpecPredictor,
    loadings: Mat,
    static_part: Mat,
}

impl Predictor for FactorPredictor {
    fn predict(&self, window: &MatrixSeries, origin: usize, horizons: &[usize]) -> Result<Vec<Mat>> {
        let f = &self.loadings;
        let ft = f.transpose();
        let reduced = MatrixSeries::new(
            window.iter().map(|y| SpdMatrix::new(&ft * y.as_mat() * f)).collect::<Result<Vec<_>>>()?,
        )?;
        let out = self.inner.predict(&reduced, origin, horizons)?;
        Ok(out.into_iter().map(|s| f * s * &ft + &self.static_part).collect())
    }
}

impl Forecaster for CbfForecaster {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn fit(&self, window: &MatrixSeries, _: usize) -> Result<Box<dyn Predictor>> {
        let Some(rank) = self.factor else {
            return Ok(Box::new(SpecPredictor { spec: self.estimate(window)? }));
        };
        let r = match rank {
            FactorRank::Fixed(r) => r,
            FactorRank::Auto => eigen_ratios(window)?.suggested_r,
        };
        let decomp = extract_factors(window, r)?;
        let spec = self.estimate(&decomp.factor_series)?;
        Ok(Box::new(FactorPredictor {
            inner: SpecPredictor { spec },
            loadings: decomp.loadings,
            static_part: decomp.static_part,
        }))
    }
}

// ---------------------------------------------------------------------------
// VAR-HAR baseline

/// Componentwise HAR regression on `vech(Y_t)`:
/// `y_i,t = c_i + d_i y_i,t-1 + w_i avg5 + m_i avg22`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarHar {
    pub n: usize,
    /// One row per vech coordinate: `(intercept, daily, weekly, monthly)`;
    /// dropped (constant) regressors have coefficient 0.
    pub coefficients: Vec<[f64; 4]>,
}

/// Least squares with intercept; regressors that do not vary are dropped.
fn ols_har(y: &[f64]) -> Result<[f64; 4]> {
    let lags = HAR_WINDOWS[2];
    let regressors = |t: usize| -> [f64; 3] {
        let avg = |w: usize| (1..=w).map(|l| y[t - l]).sum::<f64>() / w as f64;
        [avg(HAR_WINDOWS[0]), avg(HAR_WINDOWS[1]), avg(HAR_WINDOWS[2])]
    };
    let xs: Vec<[f64; 3]> = (lags..y.len()).map(regressors).collect();
    let target = &y[lags..];
    let scale = target.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..3)
        .filter(|&j| {
            let first = xs[0][j];
            xs.iter().any(|x| (x[j] - first).abs() > 1e-12 * scale)
        })
        .collect();
    let k = keep.len() + 1;
    let mut xtx = Mat::zeros(k, k);
    let mut xty = Mat::zeros(k, 1);
    for (x, &v) in xs.iter().zip(target) {
        let row: Vec<f64> = core::iter::once(1.0).chain(keep.iter().map(|&j| x[j])).collect();
        for a in 0..k {
            xty[a] += row[a] * v;
            for b in 0..k {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    let sol =
        xtx.cholesky().ok_or_else(|| Error::Singular("VAR-HAR regressors are rank deficient".into()))?.solve(&xty);
    let mut out = [0.0; 4];
    out[0] = sol[0];
    for (i, &j) in keep.iter().enumerate() {
        out[j + 1] = sol[i + 1];
    }
    Ok(out)
}

/// Fits the baseline on `series` (needs `T > 22`).
pub fn fit_var_har_baseline(series: &MatrixSeries) -> Result<VarHar> {
    let t = series.len();
    if t <= HAR_WINDOWS[2] {
        return Err(Error::InvalidArgument(format!("VAR-HAR needs T > {}, got {t}", HAR_WINDOWS[2])));
    }
    let n = series.n();
    let rows: Vec<Vec<f64>> = series.iter().map(|y| y.vech()).collect();
    let coefficients = (0..rows[0].len())
        .map(|i| ols_har(&rows.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    Ok(VarHar { n, coefficients })
}

impl VarHar {
    /// Iterated forecasts for `h = 1..=max_h` from the end of `series`.
    pub fn forecast_path(&self, series: &MatrixSeries, max_h: usize) -> Result<Vec<Mat>> {
        if series.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: series.n() });
        }
        let need = HAR_WINDOWS[2];
        if series.len() < need {
            return Err(Error::InvalidArgument(format!("VAR-HAR forecasts need {need} observations")));
        }
        let mut hist: Vec<Vec<f64>> = series.as_slice()[series.len() - need..].iter().map(|y| y.vech()).collect();
        let mut out = Vec::with_capacity(max_h);
        for _ in 0..max_h {
            let len = hist.len();
            let next: Vec<f64> = self
                .coefficients
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let avg = |w: usize| (1..=w).map(|l| hist[len - l][i]).sum::<f64>() / w as f64;
                    c[0] + c[1] * avg(HAR_WINDOWS[0]) + c[2] * avg(HAR_WINDOWS[1]) + c[3] * avg(HAR_WINDOWS[2])
                })
                .collect();
            out.push(unvech(&next, self.n)?);
            hist.push(next);
        }
        Ok(out)
    }
}

/// The baseline as a menu entry.
#[derive(Debug, Clone, Copy, Default)]
pub struct VarHarForecaster;

impl Forecaster for VarHarForecaster {
    fn name(&self) -> String {
        "VAR-HAR".into()
    }
    fn fit(&self, window: &MatrixSeries, _: usize) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(fit_var_har_baseline(window)?))
    }
}

impl Predictor for VarHar {
    fn predict(&self, window: &MatrixSeries, _: usize, horizons: &[usize]) -> Result<Vec<Mat>> {
        let path = self.forecast_path(window, max_of(horizons))?;
        Ok(horizons.iter().map(|&h| path[h - 1].clone()).collect())
    }
}

// ---------------------------------------------------------------------------
// Rolling evaluation

/// Rolling-window settings. Every origin forecasts all horizons, so the
/// origins run from `window` to `T - max(horizons)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingConfig {
    pub window: usize,
    pub horizons: Vec<usize>,
    pub refit_every: usize,
}

impl RollingConfig {
    pub fn validate(&self, t: usize) -> Result<()> {
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::InvalidArgument("horizons must be nonempty and at least 1".into()));
        }
        if self.refit_every == 0 {
            return Err(Error::InvalidArgument("refit_every must be at least 1".into()));
        }
        if self.window < 2 || self.window + max_of(&self.horizons) > t {
            return Err(Error::InvalidArgument(format!(
                "window {} plus horizon {} exceeds the series length {t}",
                self.window,
                max_of(&self.horizons)
            )));
        }
        Ok(())
    }

    /// Forecast origins (observation counts), in order.
    pub fn origins(&self, t: usize) -> Vec<usize> {
        (self.window..=t - max_of(&self.horizons)).collect()
    }

    /// Origins grouped by refit; blocks are independent units of work.
    pub fn blocks(&self, t: usize) -> Vec<Vec<usize>> {
        self.origins(t).chunks(self.refit_every).map(|c| c.to_vec()).collect()
    }
}

/// Losses of one model at one horizon, aligned with `EvalReport::origins`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HorizonLosses {
    pub frobenius: Vec<f64>,
    pub spectral: Vec<f64>,
    /// Predictions with a negative eigenvalue.
    pub non_psd: usize,
}

impl HorizonLosses {
    pub fn count(&self) -> usize {
        self.frobenius.len()
    }
    pub fn mean(&self, kind: NormKind) -> f64 {
        let v = self.series(kind);
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }
    pub fn series(&self, kind: NormKind) -> &[f64] {
        match kind {
            NormKind::Frobenius => &self.frobenius,
            NormKind::Spectral => &self.spectral,
        }
    }
}

/// Raw outcome of one block: per origin, per model, per horizon
/// `(frobenius, spectral, psd)`, or `None` if any model failed there.
#[derive(Debug, Clone)]
pub struct BlockOutcome {
    pub origins: Vec<usize>,
    pub losses: Vec<Option<Vec<Vec<(f64, f64, bool)>>>>,
}

/// Aligned rolling evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub models: Vec<String>,
    pub horizons: Vec<usize>,
    /// Retained origins.
    pub origins: Vec<usize>,
    /// Origins dropped because some model failed there.
    pub failed_origins: Vec<usize>,
    /// `cells[model][horizon index]`.
    pub cells: Vec<Vec<HorizonLosses>>,
}

impl EvalReport {
    pub fn cell(&self, model: usize, h: usize) -> Option<&HorizonLosses> {
        let j = self.horizons.iter().position(|&x| x == h)?;
        self.cells.get(model)?.get(j)
    }

    pub fn model_index(&self, name: &str) -> Option<usize> {
        self.models.iter().position(|m| m == name)
    }

    /// DM comparison of two models at horizon `h` (positive statistic: `a`
    /// has larger losses).
    pub fn dm(&self, a: usize, b: usize, h: usize, kind: NormKind) -> Result<DmResult> {
        let missing = || Error::InvalidArgument(format!("no losses for horizon {h}"));
        let la = self.cell(a, h).ok_or_else(missing)?;
        let lb = self.cell(b, h).ok_or_else(missing)?;
        let mut r = dm_test(la.series(kind), lb.series(kind), h)?;
        r.loss_kind = Some(kind);
        Ok(r)
    }
}

fn is_psd(m: &Mat) -> bool {
    let (vals, _) = sym_eigen_desc(m);
    vals.last().is_none_or(|&v| v >= 0.0)
}

/// Evaluates one block: fit every model at the first origin, then forecast
/// from each origin in the block with the fitted parameters.
pub fn eval_block(
    series: &MatrixSeries,
    config: &RollingConfig,
    models: &[&dyn Forecaster],
    origins: &[usize],
) -> BlockOutcome {
    let window_at = |o: usize| series.window(o - config.window, o);
    let first = origins[0];
    let predictors: Vec<Option<Box<dyn Predictor>>> = match window_at(first) {
        Ok(w) => models.iter().map(|m| m.fit(&w, first).ok()).collect(),
        Err(_) => models.iter().map(|_| None).collect(),
    };
    let losses = origins
        .iter()
        .map(|&o| {
            let w = window_at(o).ok()?;
            predictors
                .iter()
                .map(|p| {
                    let preds = p.as_ref()?.predict(&w, o, &config.horizons).ok()?;
                    preds
                        .iter()
                        .zip(&config.horizons)
                        .map(|(pred, &h)| {
                            let y = series.get(o + h - 1).as_mat();
                            let fro = loss(pred, y, NormKind::Frobenius).ok()?;
                            let spe = loss(pred, y, NormKind::Spectral).ok()?;
                            (fro.is_finite() && spe.is_finite()).then(|| (fro, spe, is_psd(pred)))
                        })
                        .collect::<Option<Vec<_>>>()
                })
                .collect::<Option<Vec<_>>>()
        })
        .collect();
    BlockOutcome { origins: origins.to_vec(), losses }
}

/// Merges block outcomes (in any order) into an aligned report.
pub fn assemble(models: Vec<String>, horizons: Vec<usize>, mut blocks: Vec<BlockOutcome>) -> EvalReport {
    blocks.sort_by_key(|b| b.origins[0]);
    let mut cells = vec![vec![HorizonLosses::default(); horizons.len()]; models.len()];
    let mut origins = Vec::new();
    let mut failed_origins = Vec::new();
    for b in blocks {
        for (o, l) in b.origins.into_iter().zip(b.losses) {
            match l {
                None => failed_origins.push(o),
                Some(per_model) => {
                    origins.push(o);
                    for (cell, per_h) in cells.iter_mut().zip(per_model) {
                        for (c, (fro, spe, psd)) in cell.iter_mut().zip(per_h) {
                            c.frobenius.push(fro);
                            c.spectral.push(spe);
                            c.non_psd += usize::from(!psd);
                        }
                    }
                }
            }
        }
    }
    EvalReport { models, horizons, origins, failed_origins, cells }
}

/// Sequential rolling evaluation of a model menu.
pub fn rolling_eval(series: &MatrixSeries, config: &RollingConfig, models: &[&dyn Forecaster]) -> Result<EvalReport> {
    config.validate(series.len())?;
    if models.is_empty() {
        return Err(Error::InvalidArgument("model menu is empty".into()));
    }
    let blocks = config.blocks(series.len()).iter().map(|o| eval_block(series, config, models, o)).collect();
    Ok(assemble(models.iter().map(|m| m.name()).collect(), config.horizons.clone(), blocks))
}

// ---------------------------------------------------------------------------
// Diebold–Mariano

/// Outcome of [`dm_test`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmResult {
    pub statistic: f64,
    /// Two-sided, standard normal reference.
    pub p_value: f64,
    pub horizon: usize,
    pub loss_kind: Option<NormKind>,
    /// The rectangular long-run variance was not positive and Bartlett
    /// weights were used instead.
    pub bartlett_fallback: bool,
    pub n: usize,
}

/// DM test of equal expected loss; `d_t = a_t - b_t`, long-run variance with
/// rectangular weights through lag `h - 1`.
pub fn dm_test(a: &[f64], b: &[f64], h: usize) -> Result<DmResult> {
    dm_test_with(a, b, h, false)
}

/// As [`dm_test`]; `small_sample` applies the Harvey–Leybourne–Newbold
/// scaling `sqrt((N + 1 - 2h + h(h-1)/N) / N)` to the statistic.
pub fn dm_test_with(a: &[f64], b: &[f64], h: usize, small_sample: bool) -> Result<DmResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    let n = a.len();
    if n < 10 {
        return Err(Error::InvalidArgument(format!("DM test needs at least 10 losses, got {n}")));
    }
    if h == 0 || h >= n {
        return Err(Error::InvalidArgument(format!("horizon {h} outside 1..{n}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let autocov = |k: usize| (k..n).map(|t| (d[t] - mean) * (d[t - k] - mean)).sum::<f64>() / n as f64;
    let gammas: Vec<f64> = (0..h).map(autocov).collect();
    let scale = d.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(gammas[0] > 1e-28 * scale * scale) {
        return Err(Error::Degenerate("loss differential has zero variance".into()));
    }
    let mut lrv = gammas[0] + 2.0 * gammas[1..].iter().sum::<f64>();
    let mut bartlett_fallback = false;
    if lrv <= 0.0 {
        bartlett_fallback = true;
        lrv = gammas[0] + 2.0 * (1..h).map(|k| (1.0 - k as f64 / h as f64) * gammas[k]).sum::<f64>();
        if lrv <= 0.0 {
            return Err(Error::Degenerate("long-run variance of the loss differential is not positive".into()));
        }
    }
    let mut statistic = mean / libm::sqrt(lrv / n as f64);
    if small_sample {
        let (nf, hf) = (n as f64, h as f64);
        statistic *= libm::sqrt((nf + 1.0 - 2.0 * hf + hf * (hf - 1.0) / nf) / nf);
    }
    let p_value = (2.0 * normal_sf(statistic.abs())).min(1.0);
    Ok(DmResult { statistic, p_value, horizon: h, loss_kind: None, bartlett_fallback, n })
}
