use cbf::estimate::{fit_mle, fit_vt, to_spec, FitOptions, FitResult, ParamVector, VtFitResult};
use cbf::model::{check_stationarity, persistence, AnySpec, Structure};
use cbf::MatrixSeries;

use crate::config::ModelSection;
use crate::error::{CliError, CliResult};
use crate::report::{self, nullable_rows, FitReport, ModelEcho, Parameter, StationarityEcho};
use crate::Context;

/// Either estimator's result.
#[derive(Debug, Clone)]
pub enum Fitted {
    Mle(FitResult),
    Vt(VtFitResult),
}

impl Fitted {
    /// Full parameter vector (implied intercept under targeting).
    pub fn theta(&self) -> CliResult<ParamVector> {
        match self {
            Fitted::Mle(f) => Ok(f.theta_hat.clone()),
            Fitted::Vt(f) => Ok(f.to_param_vector()?),
        }
    }
}

pub fn fit_series(series: &MatrixSeries, model: &ModelSection, opts: &FitOptions) -> CliResult<Fitted> {
    let (orders, structure, family) = (model.orders(), model.structure.into(), model.family.into());
    Ok(if model.vt {
        Fitted::Vt(fit_vt(series, orders, structure, family, opts)?)
    } else {
        Fitted::Mle(fit_mle(series, orders, structure, family, opts)?)
    })
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn build_report(
    ctx: &Context,
    series: &MatrixSeries,
    model: &ModelSection,
    fitted: &Fitted,
) -> CliResult<FitReport> {
    let theta = fitted.theta()?;
    let shape = *theta.shape();
    let spec: AnySpec = to_spec(&theta)?;
    let st = check_stationarity(&spec);
    let persistence = (shape.structure == Structure::Diagonal)
        .then(|| (0..shape.n).map(|s| persistence(&spec, s)).collect::<Result<Vec<_>, _>>())
        .transpose()?;
    let t = series.len();
    let mut r = FitReport {
        model: ModelEcho::from(model),
        n: shape.n,
        t,
        input: ctx.input.as_ref().map(|p| p.display().to_string()),
        ridge: ctx.ridge,
        seed: ctx.seed,
        parameters: Vec::new(),
        theta: theta.as_slice().to_vec(),
        s_hat: None,
        zeta: None,
        neg_loglik: 0.0,
        log_likelihood: 0.0,
        converged: false,
        iterations: 0,
        grad_norm: 0.0,
        cov_flagged: false,
        restarts_used: 0,
        stationarity: StationarityEcho { rho: st.rho, stationary: st.stationary },
        persistence,
        hessian: None,
        covariance: Vec::new(),
    };
    match fitted {
        Fitted::Mle(f) => {
            r.parameters = shape
                .names(false)
                .into_iter()
                .zip(theta.as_slice())
                .zip(&f.std_errors)
                .map(|((name, &estimate), &se)| Parameter { name, estimate, std_error: finite(se) })
                .collect();
            r.neg_loglik = f.neg_loglik;
            r.converged = f.converged;
            r.iterations = f.iterations;
            r.grad_norm = f.grad_norm;
            r.cov_flagged = f.cov_flagged;
            r.restarts_used = f.restarts_used;
            r.hessian = Some(nullable_rows(&f.hessian));
            r.covariance = nullable_rows(&f.cov);
        }
        Fitted::Vt(f) => {
            let o = shape.omega_len();
            let names = shape.names(false);
            let zse = f.zeta_std_errors();
            r.parameters = names
                .into_iter()
                .zip(theta.as_slice())
                .enumerate()
                .map(|(i, (name, &estimate))| Parameter {
                    name,
                    estimate,
                    std_error: if i < o { None } else { finite(zse[i - o]) },
                })
                .collect();
            r.s_hat = Some(f.s_hat.clone());
            r.zeta = Some(f.zeta_hat.clone());
            r.neg_loglik = f.neg_loglik;
            r.converged = f.converged;
            r.iterations = f.iterations;
            r.grad_norm = f.grad_norm;
            r.cov_flagged = f.cov_flagged;
            r.restarts_used = f.restarts_used;
            r.covariance = nullable_rows(&f.cov);
        }
    }
    r.log_likelihood = -r.neg_loglik * t as f64;
    Ok(r)
}

/// Rebuilds the estimator result stored in a report.
pub fn from_report(r: &FitReport) -> CliResult<Fitted> {
    let model = r.model.section();
    let shape = cbf::estimate::ModelShape::new(r.n, model.orders(), model.structure.into(), model.family.into())?;
    let theta = ParamVector::new(shape, r.theta.clone())?;
    let cov = report::from_nullable_rows(&r.covariance, "covariance")?;
    let std_errors: Vec<f64> = (0..cov.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    if model.vt {
        let (Some(s_hat), Some(zeta)) = (&r.s_hat, &r.zeta) else {
            return Err(CliError::invalid("targeted fit report lacks s_hat or zeta"));
        };
        Ok(Fitted::Vt(VtFitResult {
            shape,
            s_hat: s_hat.clone(),
            zeta_hat: zeta.clone(),
            cov,
            std_errors,
            neg_loglik: r.neg_loglik,
            converged: r.converged,
            iterations: r.iterations,
            grad_norm: r.grad_norm,
            cov_flagged: r.cov_flagged,
            restarts_used: r.restarts_used,
        }))
    } else {
        let hessian = r.hessian.as_ref().ok_or_else(|| CliError::invalid("fit report lacks the Hessian"))?;
        Ok(Fitted::Mle(FitResult {
            theta_hat: theta,
            neg_loglik: r.neg_loglik,
            cov,
            std_errors,
            converged: r.converged,
            iterations: r.iterations,
            grad_norm: r.grad_norm,
            family: model.family.into(),
            hessian: report::from_nullable_rows(hessian, "hessian")?,
            cov_flagged: r.cov_flagged,
            restarts_used: r.restarts_used,
        }))
    }
}

pub fn run(ctx: &Context) -> CliResult<FitReport> {
    let model = &ctx.cfg.model;
    if model.factor.is_some() {
        return Err(CliError::invalid("model.factor is handled by the factor subcommand (factor.fit = true)"));
    }
    let series = ctx.load_input()?;
    let opts = ctx.cfg.optimizer.fit_options(ctx.seed)?;
    let fitted = fit_series(&series, model, &opts)?;
    build_report(ctx, &series, model, &fitted)
}

pub fn cmd(ctx: &Context) -> CliResult<()> {
    let r = run(ctx)?;
    report::emit(ctx.out_path(), &report::to_json("fit", r))
}
