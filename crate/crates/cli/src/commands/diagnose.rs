use cbf::diagnose::{pi_tests, pi_v_tests, VarianceForm};
use cbf::model::InitState;
use serde::Serialize;

use super::fit::{fit_series, from_report, Fitted};
use crate::config::VarianceName;
use crate::error::{CliError, CliResult};
use crate::report::{self, FitReport};
use crate::Context;

#[derive(Debug, Clone, Serialize)]
pub struct TestRow {
    pub l: usize,
    pub statistic: f64,
    pub p: f64,
    pub dof: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnoseReport {
    /// `pi` for full likelihood fits, `pi_v` for targeted fits.
    pub test: String,
    pub variance: VarianceName,
    pub fit_report: Option<String>,
    pub rows: Vec<TestRow>,
}

pub fn run(ctx: &Context) -> CliResult<DiagnoseReport> {
    let lags = &ctx.cfg.diagnose.lags;
    if lags.is_empty() || lags.contains(&0) {
        return Err(CliError::invalid("diagnose.lags must be nonempty and every lag at least 1"));
    }
    let series = ctx.load_input()?;
    let fitted = match &ctx.fit_report {
        Some(path) => {
            let r: FitReport = report::read(path, "fit")?;
            if r.n != series.n() {
                return Err(CliError::invalid(format!(
                    "fit report is for n={} but the input has n={}",
                    r.n,
                    series.n()
                )));
            }
            from_report(&r)?
        }
        None => {
            let opts = ctx.cfg.optimizer.fit_options(ctx.seed)?;
            fit_series(&series, &ctx.cfg.model, &opts)?
        }
    };
    let form: VarianceForm = ctx.cfg.diagnose.variance.into();
    let (test, results) = match &fitted {
        Fitted::Mle(f) => {
            let init = InitState::from_series_mean(&series, f.theta_hat.shape().max_lag());
            ("pi", pi_tests(f, &series, &init, lags, form)?)
        }
        Fitted::Vt(f) => {
            let init = InitState::from_series_mean(&series, f.shape.max_lag());
            ("pi_v", pi_v_tests(f, &series, &init, lags, form)?)
        }
    };
    Ok(DiagnoseReport {
        test: test.into(),
        variance: ctx.cfg.diagnose.variance,
        fit_report: ctx.fit_report.as_ref().map(|p| p.display().to_string()),
        rows: results
            .into_iter()
            .map(|r| TestRow { l: r.lags, statistic: r.statistic, p: r.p_value, dof: r.dof, flagged: r.flagged })
            .collect(),
    })
}

pub fn cmd(ctx: &Context) -> CliResult<()> {
    let r = run(ctx)?;
    report::emit(ctx.out_path(), &report::to_json("diagnose", r))
}
