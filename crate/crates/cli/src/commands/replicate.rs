use serde::Serialize;

use crate::config::Study;
use crate::error::{CliError, CliResult};
use crate::replicate::{
    estimator_summary, partition, rate_row, run_reps, EstimatorSummary, RateRow, RejectionSummary, Settings, ALPHA,
};
use crate::report;
use crate::Context;

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Summary {
    Table1(EstimatorSummary),
    Table2(RejectionSummary),
}

#[derive(Debug, Serialize)]
pub struct ReplicateReport {
    pub study: Study,
    pub seed: u64,
    pub failures: Vec<String>,
    pub summary: Summary,
}

pub fn run(ctx: &Context) -> CliResult<ReplicateReport> {
    let rc = &ctx.cfg.replicate;
    if rc.t == 0 || rc.reps < 2 {
        return Err(CliError::invalid("replicate needs t >= 1 and at least 2 replications"));
    }
    let base = Settings { seed: ctx.seed, t: rc.t, burnin: rc.burnin, lambda: 0.0, scale: rc.lag_two, nu2: rc.nu2 };
    let mut failures = Vec::new();
    let summary = match rc.study {
        Study::Table1 => {
            let reps = rc.estimator_reps.min(rc.reps).max(2);
            let (ok, bad) = partition(ctx.in_pool(|| run_reps(&base, reps, &[]))?);
            failures.extend(bad);
            Summary::Table1(estimator_summary(&ok, rc.t))
        }
        Study::Table2 => {
            if rc.lags.is_empty() || rc.lags.contains(&0) {
                return Err(CliError::invalid("replicate.lags must be nonempty and at least 1"));
            }
            let mut rows: Vec<RateRow> = Vec::new();
            for &lambda in &rc.lambdas {
                let reps = if lambda == 0.0 { rc.reps } else { rc.power_reps };
                let s = Settings { lambda, ..base };
                let (ok, bad) = partition(ctx.in_pool(|| run_reps(&s, reps, &rc.lags))?);
                rows.push(rate_row(lambda, &ok, bad.len(), &rc.lags));
                failures.extend(bad);
            }
            Summary::Table2(RejectionSummary { t: rc.t, alpha: ALPHA, lag_two: rc.lag_two, rows })
        }
    };
    Ok(ReplicateReport { study: rc.study, seed: ctx.seed, failures, summary })
}

pub fn cmd(ctx: &Context) -> CliResult<()> {
    let r = run(ctx)?;
    report::emit(ctx.out_path(), &report::to_json("replicate", r))
}
