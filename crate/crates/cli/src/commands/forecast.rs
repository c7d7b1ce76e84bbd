use cbf::forecast::{
    assemble, dm_test_with, eval_block, CbfForecaster, EvalReport, Forecaster, RollingConfig, SampleMean,
    VarHarForecaster,
};
use cbf::{MatrixSeries, NormKind};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{FamilyName, ForecastSection, ModelSection};
use crate::error::{CliError, CliResult};
use crate::report;
use crate::Context;

#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub model: String,
    pub h: usize,
    pub count: usize,
    pub frobenius_mean: f64,
    pub spectral_mean: f64,
    pub non_psd: usize,
    pub frobenius: Vec<f64>,
    pub spectral: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DmRow {
    pub model: String,
    pub reference: String,
    pub h: usize,
    pub loss: String,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub bartlett_fallback: Option<bool>,
    /// Set instead of the statistic when the comparison is degenerate.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ForecastReport {
    pub window: usize,
    pub horizons: Vec<usize>,
    pub refit_every: usize,
    pub models: Vec<String>,
    pub origins: usize,
    pub failed_origins: Vec<usize>,
    pub cells: Vec<Cell>,
    pub reference: String,
    pub dm: Vec<DmRow>,
}

fn default_menu() -> Vec<ModelSection> {
    let har = |family| ModelSection { family, har: true, vt: true, ..ModelSection::default() };
    vec![har(FamilyName::MatrixF), har(FamilyName::Wishart)]
}

/// The configured forecasters, in report order.
pub fn menu(section: &ForecastSection, ctx: &Context) -> CliResult<Vec<Box<dyn Forecaster>>> {
    let models = if section.models.is_empty() { default_menu() } else { section.models.clone() };
    let opts = ctx.cfg.optimizer.fit_options(ctx.seed)?;
    let mut out: Vec<Box<dyn Forecaster>> = Vec::new();
    for m in &models {
        let mut f = CbfForecaster::new(m.family.into(), m.orders(), m.structure.into(), m.vt);
        f.options = cbf::estimate::FitOptions { skip_covariance: true, ..opts.clone() };
        if let Some(r) = m.factor {
            f = f.with_factor(r.into());
        }
        out.push(Box::new(f));
    }
    if section.var_har {
        out.push(Box::new(VarHarForecaster));
    }
    if section.sample_mean {
        out.push(Box::new(SampleMean));
    }
    Ok(out)
}

/// Rolling evaluation with blocks spread over the worker pool.
pub fn evaluate(series: &MatrixSeries, cfg: &RollingConfig, models: &[&dyn Forecaster]) -> CliResult<EvalReport> {
    cfg.validate(series.len())?;
    let blocks = cfg.blocks(series.len());
    let outcomes = blocks.par_iter().map(|o| eval_block(series, cfg, models, o)).collect();
    Ok(assemble(models.iter().map(|m| m.name()).collect(), cfg.horizons.clone(), outcomes))
}

pub fn run(ctx: &Context) -> CliResult<ForecastReport> {
    let section = &ctx.cfg.forecast;
    let series = ctx.load_input()?;
    let cfg =
        RollingConfig { window: section.window, horizons: section.horizons.clone(), refit_every: section.refit_every };
    let menu = menu(section, ctx)?;
    let names: Vec<String> = menu.iter().map(|m| m.name()).collect();
    if let Some(dup) = names.iter().enumerate().find_map(|(i, n)| names[..i].contains(n).then_some(n)) {
        eprintln!("warning: model {dup} appears more than once");
    }
    let refs: Vec<&dyn Forecaster> = menu.iter().map(|b| b.as_ref()).collect();
    let rep = ctx.in_pool(|| evaluate(&series, &cfg, &refs))??;
    let reference = section.reference.clone().unwrap_or_else(|| names[0].clone());
    let ref_idx = rep
        .model_index(&reference)
        .ok_or_else(|| CliError::invalid(format!("reference model {reference:?} is not in the menu {names:?}")))?;
    let mut cells = Vec::new();
    let mut dm = Vec::new();
    for (m, name) in names.iter().enumerate() {
        for &h in &cfg.horizons {
            let c = rep.cell(m, h).expect("cell exists");
            cells.push(Cell {
                model: name.clone(),
                h,
                count: c.count(),
                frobenius_mean: c.mean(NormKind::Frobenius),
                spectral_mean: c.mean(NormKind::Spectral),
                non_psd: c.non_psd,
                frobenius: c.frobenius.clone(),
                spectral: c.spectral.clone(),
            });
            if m == ref_idx {
                continue;
            }
            let r = rep.cell(ref_idx, h).expect("cell exists");
            for kind in [NormKind::Frobenius, NormKind::Spectral] {
                let res = dm_test_with(c.series(kind), r.series(kind), h, section.small_sample);
                let (statistic, p_value, bartlett_fallback, error) = match res {
                    Ok(d) => (Some(d.statistic), Some(d.p_value), Some(d.bartlett_fallback), None),
                    Err(e) => (None, None, None, Some(e.to_string())),
                };
                dm.push(DmRow {
                    model: name.clone(),
                    reference: reference.clone(),
                    h,
                    loss: format!("{kind:?}").to_lowercase(),
                    statistic,
                    p_value,
                    bartlett_fallback,
                    error,
                });
            }
        }
    }
    Ok(ForecastReport {
        window: cfg.window,
        horizons: cfg.horizons.clone(),
        refit_every: cfg.refit_every,
        models: names,
        origins: rep.origins.len(),
        failed_origins: rep.failed_origins.clone(),
        cells,
        reference,
        dm,
    })
}

pub fn cmd(ctx: &Context) -> CliResult<()> {
    let r = run(ctx)?;
    report::emit(ctx.out_path(), &report::to_json("forecast", r))
}
