use cbf::model::{check_stationarity, simulate, AnySpec, Innovation, Specification};
use cbf::{rng, MatrixSeries};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::report::{self, rows, ModelEcho, StationarityEcho};
use crate::{rcov, Context};

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub model: ModelEcho,
    pub seed: u64,
    pub t: usize,
    pub burnin: usize,
    pub omega: Vec<Vec<f64>>,
    /// `arch[k][i]` / `garch[k][j]`, or the three HAR coefficients.
    pub arch: Vec<Vec<Vec<Vec<f64>>>>,
    pub garch: Vec<Vec<Vec<Vec<f64>>>>,
    pub nu: Vec<f64>,
    pub stationarity: StationarityEcho,
    pub output: Option<String>,
}

/// Simulated series and its manifest.
pub fn run(ctx: &Context) -> CliResult<(MatrixSeries, Manifest)> {
    let sim = &ctx.cfg.simulate;
    if sim.t == 0 {
        return Err(CliError::invalid("simulate.t must be at least 1"));
    }
    let spec = sim.spec(&ctx.cfg.model)?;
    let series = simulate(&spec, sim.t, sim.burnin, &mut rng::stream(ctx.seed, 0))?;
    Ok((series, manifest(ctx, &spec)))
}

fn manifest(ctx: &Context, spec: &AnySpec) -> Manifest {
    let blocks = |b: &[Vec<cbf::Mat>]| b.iter().map(|c| c.iter().map(rows).collect()).collect();
    let (omega, arch, garch, innovation) = match spec {
        AnySpec::Cbf(s) => (rows(s.omega().as_mat()), blocks(s.arch()), blocks(s.garch()), s.innovation()),
        AnySpec::Har(s) => {
            let c = s.coefficients();
            (rows(s.omega().as_mat()), vec![c.iter().map(|m| rows(m)).collect()], Vec::new(), s.innovation())
        }
    };
    let nu = match innovation {
        Innovation::MatrixF { nu1, nu2 } => vec![nu1, nu2],
        Innovation::Wishart { df } => vec![df],
    };
    let st = check_stationarity(spec);
    Manifest {
        model: ModelEcho::from(&ctx.cfg.model),
        seed: ctx.seed,
        t: ctx.cfg.simulate.t,
        burnin: ctx.cfg.simulate.burnin,
        omega,
        arch,
        garch,
        nu,
        stationarity: StationarityEcho { rho: st.rho, stationary: st.stationary },
        output: ctx.out.as_ref().map(|p| p.display().to_string()),
    }
}

pub fn cmd(ctx: &Context) -> CliResult<()> {
    let (series, manifest) = run(ctx)?;
    match ctx.out_path() {
        Some(path) => {
            rcov::write(path, &series)?;
            let mut m = path.as_os_str().to_owned();
            m.push(".manifest.json");
            report::emit(Some(std::path::Path::new(&m)), &report::to_json("simulate", manifest))
        }
        None => {
            print!("{}", rcov::to_string(&series));
            Ok(())
        }
    }
}
