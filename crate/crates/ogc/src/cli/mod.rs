//! Command-line front end: scenario loading, run orchestration, and
//! result emission.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

pub use config::{load_scenario, load_scenario_str, ConfigError};
pub use output::{recompute_summary, report, OutputError, ResultBundle};

use crate::sim::{run_episode, run_monte_carlo, SimError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Output(#[from] OutputError),
}

impl CliError {
    /// 1 usage, 2 validation, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Sim(SimError::InvalidScenario(_)) => 2,
            CliError::Sim(_) | CliError::Output(_) => 3,
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub seeds: Option<(u64, u64)>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
}

/// Parses an inclusive `N..M` seed range.
pub fn parse_seed_range(text: &str) -> Result<(u64, u64), CliError> {
    let err = || CliError::Usage(format!("--seeds expects N..M, got `{text}`"));
    let (lo, hi) = text.split_once("..").ok_or_else(err)?;
    let lo: u64 = lo.trim().parse().map_err(|_| err())?;
    let hi: u64 = hi.trim().parse().map_err(|_| err())?;
    if hi < lo {
        return Err(err());
    }
    Ok((lo, hi))
}

/// Loads a scenario, applies flag overrides, runs it, and writes results.
/// Returns the output directory used.
pub fn run_command(scenario_path: &Path, opts: &RunOptions) -> Result<PathBuf, CliError> {
    let (mut scenario, output_section) = load_scenario(scenario_path)?;
    let mut overrides: Vec<(String, String)> = Vec::new();
    if let Some(seed) = opts.seed {
        scenario.rng_seed = seed;
        overrides.push(("override_seed".into(), seed.to_string()));
    }
    if let Some(alpha) = opts.alpha {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(CliError::Usage("--alpha must be positive".into()));
        }
        scenario.step_size_alpha = alpha;
        overrides.push(("override_alpha".into(), format!("{}", alpha)));
    }
    if let Some(epsilon) = opts.epsilon {
        if epsilon < 0.0 || !epsilon.is_finite() {
            return Err(CliError::Usage("--epsilon must be nonnegative".into()));
        }
        scenario.meas_epsilon = epsilon;
        overrides.push(("override_epsilon".into(), format!("{}", epsilon)));
    }

    let dir = opts
        .out
        .clone()
        .or_else(|| output_section.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    if let Some((lo, hi)) = opts.seeds {
        let seeds: Vec<u64> = (lo..=hi).collect();
        let summary = run_monte_carlo(&scenario, &seeds)?;
        output::write_aggregate(&summary, &seeds, &dir)?;
    } else {
        let log = run_episode(&scenario)?;
        let bundle = ResultBundle::from_episode(&log, &overrides);
        bundle.write(&dir)?;
    }
    Ok(dir)
}

/// `validate` entry point: parses and checks a scenario without running it.
pub fn validate_command(scenario_path: &Path) -> Result<(), CliError> {
    load_scenario(scenario_path)?;
    Ok(())
}

/// `report` entry point: rebuilds and returns the summary table text.
pub fn report_command(dir: &Path) -> Result<String, CliError> {
    Ok(report(dir)?)
}
