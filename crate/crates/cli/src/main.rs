use std::path::PathBuf;
use std::process::ExitCode;

use cbf_cli::commands;
use cbf_cli::config::Study;
use cbf_cli::error::CliResult;
use cbf_cli::{report, Context, Overrides};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cbf", version, about = "Conditional BEKK matrix-F models for realized covariance series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replications and rolling windows.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (directory for `factor`); stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Add eps*I to every input matrix before validation.
    #[arg(long, global = true, value_name = "EPS")]
    ridge: Option<f64>,
    /// Input RcovFile.
    #[arg(long, short, global = true)]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a series from the configured specification.
    Simulate,
    /// Fit the configured model.
    Fit,
    /// Portmanteau tests for a fit (refits unless --fit-report is given).
    Diagnose {
        #[arg(long)]
        fit_report: Option<PathBuf>,
    },
    /// Rolling-window forecast comparison.
    Forecast,
    /// Eigen-ratio table and factor decomposition.
    Factor,
    /// Monte Carlo replication of the simulation studies.
    Replicate {
        #[arg(long, value_parser = parse_study)]
        study: Option<Study>,
        #[arg(long)]
        reps: Option<usize>,
    },
}

fn parse_study(s: &str) -> Result<Study, String> {
    match s {
        "table1" => Ok(Study::Table1),
        "table2" => Ok(Study::Table2),
        _ => Err(format!("unknown study {s:?} (table1 or table2)")),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let g = cli.global;
    let mut ov = Overrides {
        config: g.config,
        seed: g.seed,
        threads: g.threads,
        out: g.out,
        ridge: g.ridge,
        input: g.input,
        fit_report: None,
    };
    if let Command::Diagnose { fit_report } = &cli.command {
        ov.fit_report = fit_report.clone();
    }
    let mut ctx = Context::resolve(ov)?;
    match cli.command {
        Command::Simulate => commands::simulate::cmd(&ctx),
        Command::Fit => commands::fit::cmd(&ctx),
        Command::Diagnose { .. } => commands::diagnose::cmd(&ctx),
        Command::Forecast => commands::forecast::cmd(&ctx),
        Command::Factor => commands::factor::cmd(&ctx),
        Command::Replicate { study, reps } => {
            if let Some(s) = study {
                ctx.cfg.replicate.study = s;
            }
            if let Some(r) = reps {
                ctx.cfg.replicate.reps = r;
            }
            commands::replicate::cmd(&ctx)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            print!("{}", report::error_json(&e));
            ExitCode::from(e.code() as u8)
        }
    }
}
