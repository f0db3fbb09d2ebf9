//! Experiment configuration files (TOML).
//!
//! ```toml
//! schema_version = 1
//!
//! [problem]
//! kind = "affine_inclusion"
//! dim = 50
//! seed = 7
//!
//! [instance]
//! kind = "ppm"
//! lambda = { rule = "constant", value = 1.0 }
//!
//! [params]
//! alpha = 0.3
//! sigma = 0.0
//! beta = 0.3333333333333333
//!
//! [stopping]
//! rho = 1e-8
//! max_iter = 100000
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use ihpe_core::operators::{make_problem, ProblemData, ProblemKind, TestProblem};
use ihpe_core::{AlphaSchedule, HpeParams, InstanceConfig, StoppingRule};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub problem: ProblemSection,
    pub instance: InstanceConfig,
    pub params: ParamsSection,
    #[serde(default)]
    pub stopping: StoppingRule,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

/// Either a generated zoo problem (`kind`, `dim`, `seed`) or explicit
/// operator data loaded from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: Option<ProblemKind>,
    pub dim: Option<usize>,
    pub seed: Option<u64>,
    /// JSON operator data, relative to the config file.
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub sigma: f64,
    /// Give exactly one of `beta` and `tau`.
    pub beta: Option<f64>,
    pub tau: Option<f64>,
    #[serde(default)]
    pub schedule: AlphaSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    #[serde(default = "default_stem")]
    pub stem: String,
    /// Assert the rate bounds when `d₀` is known.
    #[serde(default = "yes")]
    pub check_bounds: bool,
}

fn default_stem() -> String {
    "trace".into()
}

fn yes() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: None, stem: default_stem(), check_bounds: true }
    }
}

/// Grids for `bench`; a missing list means "the value in `[params]`".
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub alpha: Option<Vec<f64>>,
    pub sigma: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub tau: Option<Vec<f64>>,
    pub seed: Option<Vec<u64>>,
}

impl ParamsSection {
    pub fn build(&self) -> Result<HpeParams, CliError> {
        build_params(self.alpha, self.sigma, self.beta, self.tau, self.schedule)
    }
}

pub fn build_params(
    alpha: f64,
    sigma: f64,
    beta: Option<f64>,
    tau: Option<f64>,
    schedule: AlphaSchedule,
) -> Result<HpeParams, CliError> {
    Ok(match (beta, tau) {
        (Some(b), None) => HpeParams::from_beta_with_schedule(alpha, sigma, b, schedule)?,
        (None, Some(t)) => HpeParams::from_tau_with_schedule(alpha, sigma, t, schedule)?,
        _ => return Err(CliError::Usage("[params] needs exactly one of `beta` and `tau`".into())),
    })
}

/// A parsed config together with the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub path: PathBuf,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        let config = ExperimentConfig::parse(&text).map_err(|message| CliError::Config {
            path: path.display().to_string(),
            message,
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, path: path.to_path_buf(), base_dir })
    }

    /// Builds the problem, with `seed` replacing the configured seed of a
    /// generated problem.
    pub fn problem(&self, seed: Option<u64>) -> Result<TestProblem, CliError> {
        let p = &self.config.problem;
        if let Some(rel) = &p.data {
            if p.kind.is_some() || p.dim.is_some() {
                return Err(CliError::Usage("[problem] takes either `data` or `kind`/`dim`, not both".into()));
            }
            let path = self.base_dir.join(rel);
            let text = fs::read_to_string(&path)
                .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
            let data: ProblemData = serde_json::from_str(&text).map_err(|e| CliError::Config {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            return Ok(TestProblem::from_data(data)?);
        }
        let kind = p.kind.ok_or_else(|| CliError::Usage("[problem] needs `kind` or `data`".into()))?;
        let dim = p.dim.ok_or_else(|| CliError::Usage("[problem] needs `dim`".into()))?;
        Ok(make_problem(kind, dim, seed.or(p.seed).unwrap_or(0))?)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let config: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        if config.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                config.schema_version
            ));
        }
        Ok(config)
    }
}
