//! Command-line front end for CBF models: RcovFile I/O, TOML configuration,
//! JSON reports, the pipeline subcommands and the Monte Carlo replication
//! harness.

pub mod commands;
pub mod config;
pub mod error;
pub mod rcov;
pub mod reference;
pub mod replicate;
pub mod report;

use std::path::{Path, PathBuf};

use cbf::MatrixSeries;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 42;

/// Values given on the command line; each overrides its config counterpart.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub ridge: Option<f64>,
    pub input: Option<PathBuf>,
    pub fit_report: Option<PathBuf>,
}

/// Resolved settings for one invocation.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: RunConfig,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub ridge: Option<f64>,
    pub fit_report: Option<PathBuf>,
}

impl Context {
    pub fn resolve(ov: Overrides) -> CliResult<Self> {
        let cfg = match &ov.config {
            Some(p) => config::load(p)?,
            None => RunConfig::default(),
        };
        Ok(Self::from_config(cfg, ov))
    }

    pub fn from_config(cfg: RunConfig, ov: Overrides) -> Self {
        Context {
            seed: ov.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
            threads: ov.threads.or(cfg.threads),
            out: ov.out.or_else(|| cfg.io.out.clone()),
            input: ov.input.or_else(|| cfg.io.input.clone()),
            ridge: ov.ridge.or(cfg.io.ridge),
            fit_report: ov.fit_report.or_else(|| cfg.io.fit_report.clone()),
            cfg,
        }
    }

    pub fn input_path(&self) -> CliResult<&Path> {
        self.input.as_deref().ok_or_else(|| CliError::invalid("no input file (use --input or io.input)"))
    }

    pub fn load_input(&self) -> CliResult<MatrixSeries> {
        rcov::read(self.input_path()?, self.ridge)
    }

    pub fn out_path(&self) -> Option<&Path> {
        self.out.as_deref()
    }

    /// Runs `f` on a worker pool of the configured size.
    pub fn in_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> CliResult<T> {
        match self.threads {
            Some(0) => Err(CliError::invalid("--threads must be at least 1")),
            Some(k) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build()
                    .map_err(|e| CliError::invalid(format!("thread pool: {e}")))?;
                Ok(pool.install(f))
            }
            None => Ok(f()),
        }
    }
}
