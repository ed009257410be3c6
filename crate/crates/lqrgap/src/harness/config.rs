//! Experiment configuration, loadable from JSON or TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Eval,
    Opt,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Eval => "eval",
            Task::Opt => "opt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

fn default_sigma() -> f64 {
    1.0
}

fn default_trials() -> usize {
    100
}

/// One experiment: an instance family point, a method list, and a grid of
/// trajectory lengths (eval) or rollout counts (opt).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    /// State dimension.
    pub n: usize,
    /// Input dimension (opt) or excited-subspace dimension (eval).
    pub d: usize,
    /// Contraction factor. For eval it may be replaced by explicit tau/gamma
    /// (then rho = tau + gamma).
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_sigma")]
    pub sigma_w: f64,
    #[serde(default = "default_sigma")]
    pub sigma_u: f64,
    /// Registered method names; empty means every method for the task.
    #[serde(default)]
    pub methods: Vec<String>,
    /// Trajectory lengths T (eval) or rollout counts N (opt).
    pub grid: Vec<usize>,
    /// Fixed horizon for the opt task.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Separate stream for instance generation; defaults to `seed`.
    #[serde(default)]
    pub instance_seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    /// Ridge regularizer for the least-squares fits (default 1e-3).
    #[serde(default)]
    pub ridge: Option<f64>,
    /// Projection radius for REINFORCE (default 2 ||K*||).
    #[serde(default)]
    pub reinforce_zeta: Option<f64>,
    /// Worker threads; default lets rayon decide.
    #[serde(default)]
    pub threads: Option<usize>,
    /// State dimensions for the `sweep` subcommand.
    #[serde(default)]
    pub n_grid: Vec<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        if self.d == 0 || self.d > self.n {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= d <= n, got d = {}, n = {}",
                self.d, self.n
            )));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidConfig("grid must be nonempty".into()));
        }
        if self.trials < 1 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if !(self.sigma_w > 0.0) {
            return Err(Error::InvalidConfig("sigma_w must be positive".into()));
        }
        if self.sigma_u < 0.0 {
            return Err(Error::InvalidConfig("sigma_u must be nonnegative".into()));
        }
        let (tau, gamma) = self.tau_gamma()?;
        let rho = tau + gamma;
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "contraction factor must lie in (0,1), got {rho}"
            )));
        }
        match self.task {
            Task::Eval => {}
            Task::Opt => {
                let horizon = self
                    .horizon
                    .ok_or_else(|| Error::InvalidConfig("opt task needs a horizon".into()))?;
                if horizon < 2 {
                    return Err(Error::InvalidConfig("horizon must be at least 2".into()));
                }
                if !(self.sigma_u > 0.0) {
                    return Err(Error::InvalidConfig(
                        "opt task needs positive exploration noise".into(),
                    ));
                }
            }
        }
        if let Some(r) = self.ridge {
            if r < 0.0 {
                return Err(Error::InvalidConfig("ridge must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// Generation parameters for the evaluation family; for the opt task the
    /// split is irrelevant but the sum still defines rho.
    pub fn tau_gamma(&self) -> Result<(f64, f64)> {
        match (self.tau, self.gamma, self.rho) {
            (Some(t), Some(g), _) => Ok((t, g)),
            (None, None, Some(r)) => Ok((r / 2.0, r / 2.0)),
            _ => Err(Error::InvalidConfig(
                "specify either rho, or both tau and gamma".into(),
            )),
        }
    }

    pub fn rho_value(&self) -> Result<f64> {
        let (t, g) = self.tau_gamma()?;
        Ok(t + g)
    }

    pub fn instance_seed_value(&self) -> u64 {
        self.instance_seed.unwrap_or(self.seed)
    }

    pub fn ridge_value(&self) -> f64 {
        self.ridge.unwrap_or(1e-3)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let by_ext = path.extension().and_then(|e| e.to_str());
        let cfg: ExperimentConfig = match by_ext {
            Some("json") => serde_json::from_str(&text)
                .map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?,
            Some("toml") => toml::from_str(&text)
                .map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?,
            _ => serde_json::from_str(&text)
                .or_else(|_| toml::from_str(&text))
                .map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
