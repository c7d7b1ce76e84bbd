use std::fmt::Write as _;
use std::path::Path;

use cbf::factor::{eigen_ratios, extract_factors, RankDiagnostics};
use cbf::forecast::FactorRank;
use serde::Serialize;

use super::fit::{build_report, fit_series};
use crate::error::{CliError, CliResult};
use crate::report::{self, rows, FitReport};
use crate::{rcov, Context};

/// `i, eigenvalue, ratio` with `ratio = λ_i / λ_{i+1}` (empty on the last row).
pub fn ratio_csv(d: &RankDiagnostics) -> String {
    let mut out = String::from("i,eigenvalue,ratio\n");
    for (i, v) in d.eigenvalues.iter().enumerate() {
        write!(out, "{},{v},", i + 1).unwrap();
        if let Some(r) = d.ratios.get(i) {
            write!(out, "{r}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn matrix_csv(m: &cbf::Mat) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|x| x.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
pub struct FactorReport {
    pub n: usize,
    pub t: usize,
    pub eigenvalues: Vec<f64>,
    pub ratios: Vec<f64>,
    pub suggested_r: usize,
    pub r: usize,
    pub loadings: Vec<Vec<f64>>,
    pub static_part: Vec<Vec<f64>>,
    pub ridge: Option<f64>,
    /// Files written next to this report.
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitReport>,
}

fn write(dir: &Path, name: &str, text: &str, files: &mut Vec<String>) -> CliResult<()> {
    let p = dir.join(name);
    std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))?;
    files.push(name.into());
    Ok(())
}

/// Writes `eigen_ratios.csv`, `loadings.csv`, `factors.rcov`, `static.csv`
/// and `factor.json` into the output directory.
pub fn cmd(ctx: &Context) -> CliResult<()> {
    let dir = ctx.out_path().ok_or_else(|| CliError::invalid("factor needs --out <directory>"))?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let series = ctx.load_input()?;
    let diag = eigen_ratios(&series)?;
    let r = match FactorRank::from(ctx.cfg.factor.rank) {
        FactorRank::Fixed(r) => r,
        FactorRank::Auto => diag.suggested_r,
    };
    let decomp = extract_factors(&series, r)?;
    let mut files = Vec::new();
    write(dir, "eigen_ratios.csv", &ratio_csv(&diag), &mut files)?;
    write(dir, "loadings.csv", &matrix_csv(&decomp.loadings), &mut files)?;
    write(dir, "factors.rcov", &rcov::to_string(&decomp.factor_series), &mut files)?;
    write(dir, "static.csv", &matrix_csv(&decomp.static_part), &mut files)?;
    let fit = if ctx.cfg.factor.fit {
        let opts = ctx.cfg.optimizer.fit_options(ctx.seed)?;
        let fitted = fit_series(&decomp.factor_series, &ctx.cfg.model, &opts)?;
        Some(build_report(ctx, &decomp.factor_series, &ctx.cfg.model, &fitted)?)
    } else {
        None
    };
    files.push("factor.json".into());
    let body = FactorReport {
        n: series.n(),
        t: series.len(),
        eigenvalues: diag.eigenvalues.clone(),
        ratios: diag.ratios.clone(),
        suggested_r: diag.suggested_r,
        r,
        loadings: rows(&decomp.loadings),
        static_part: rows(&decomp.static_part),
        ridge: ctx.ridge,
        files,
        fit,
    };
    report::emit(Some(&dir.join("factor.json")), &report::to_json("factor", body))
}
