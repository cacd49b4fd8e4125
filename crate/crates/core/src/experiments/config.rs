//! JSON configuration for sweeps and single-model runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{build_generator, steady_state};
use crate::error::{Error, Result};
use crate::experiments::models::{build_da_model, build_ep_model, poisson_model, poisson_model_paired};
use crate::linalg;
use crate::model::{LindbladModel, MatrixJson, ModelJson};
use crate::operator::DensityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    KurSweep,
    EpSweep,
    CicSuite,
    BoundsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub experiment: Experiment,
    pub n_draws: usize,
    pub seed: u64,
    pub omega_e: f64,
    pub gamma_low: f64,
    pub gamma_high: f64,
    pub tau_low: f64,
    pub tau_high: f64,
    /// Weight range; defaults to (0, 1) for activity sweeps and (-1, 1) for currents.
    pub c_low: Option<f64>,
    pub c_high: Option<f64>,
    /// Trajectories per draw for Monte Carlo quantities.
    pub trajectories: usize,
    /// Evaluate the finite-time bounds from `initial_state` instead of the steady state.
    pub transient: bool,
    pub initial_state: InitialState,
    pub grid_points: usize,
    pub output: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::KurSweep,
            n_draws: 1000,
            seed: 0,
            omega_e: 1.0,
            gamma_low: 0.0,
            gamma_high: 1.0,
            tau_low: 0.1,
            tau_high: 10.0,
            c_low: None,
            c_high: None,
            trajectories: 10_000,
            transient: false,
            initial_state: InitialState::Ground,
            grid_points: crate::counting::DEFAULT_GRID_POINTS,
            output: None,
        }
    }
}

impl SweepConfig {
    pub fn for_experiment(experiment: Experiment) -> Self {
        Self { experiment, ..Self::default() }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn weight_range(&self) -> (f64, f64) {
        let (lo, hi) = match self.experiment {
            Experiment::EpSweep => (-1.0, 1.0),
            _ => (0.0, 1.0),
        };
        (self.c_low.unwrap_or(lo), self.c_high.unwrap_or(hi))
    }

    pub fn validate(&self) -> Result<()> {
        let (c_low, c_high) = self.weight_range();
        let bad = |what: &str| Err(Error::InvalidArgument(format!("invalid sweep config: {what}")));
        if self.n_draws == 0 {
            return bad("n_draws must be at least 1");
        }
        if !(self.gamma_low >= 0.0 && self.gamma_low < self.gamma_high) {
            return bad("need 0 <= gamma_low < gamma_high");
        }
        if !(self.tau_low > 0.0 && self.tau_low < self.tau_high) {
            return bad("need 0 < tau_low < tau_high");
        }
        if !(c_low < c_high) {
            return bad("need c_low < c_high");
        }
        if !self.omega_e.is_finite() {
            return bad("omega_e must be finite");
        }
        if self.grid_points < 2 {
            return bad("grid_points must be at least 2");
        }
        Ok(())
    }
}

/// Initial density matrix of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialState {
    Steady,
    Ground,
    MaximallyMixed,
    Basis { index: usize },
    Matrix { rho: MatrixJson },
}

impl InitialState {
    pub fn build(&self, model: &LindbladModel) -> Result<DensityMatrix> {
        let d = model.dim();
        match self {
            Self::Steady => steady_state(&build_generator(model, true)?),
            Self::Ground => Ok(DensityMatrix::basis_state(d, 0)),
            Self::MaximallyMixed => Ok(DensityMatrix::maximally_mixed(d)),
            Self::Basis { index } if *index < d => Ok(DensityMatrix::basis_state(d, *index)),
            Self::Basis { index } => Err(Error::InvalidArgument(format!("basis index {index} out of range"))),
            Self::Matrix { rho } => DensityMatrix::new(linalg::hermitize(&rho.to_matrix(d)?)),
        }
    }

    /// `steady`, `ground`, `mixed` or `basis:<k>`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "steady" => Ok(Self::Steady),
            "ground" => Ok(Self::Ground),
            "mixed" | "maximally_mixed" => Ok(Self::MaximallyMixed),
            _ => s
                .strip_prefix("basis:")
                .and_then(|k| k.parse().ok())
                .map(|index| Self::Basis { index })
                .ok_or_else(|| Error::InvalidArgument(format!("unknown initial state '{s}'"))),
        }
    }
}

/// Which model a run uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelSpec {
    Da { omega_e: f64, rates: [f64; 4] },
    Ep { omega_e: f64, rates: [f64; 6] },
    Poisson { gamma: f64, #[serde(default)] paired: bool },
    File { path: PathBuf },
    Inline { model: ModelJson },
}

impl ModelSpec {
    pub fn build(&self) -> Result<LindbladModel> {
        match self {
            Self::Da { omega_e, rates } => build_da_model(*omega_e, *rates),
            Self::Ep { omega_e, rates } => build_ep_model(*omega_e, *rates),
            Self::Poisson { gamma, paired: false } => poisson_model(*gamma),
            Self::Poisson { gamma, paired: true } => poisson_model_paired(*gamma),
            Self::File { path } => LindbladModel::from_json_str(&std::fs::read_to_string(path)?),
            Self::Inline { model } => model.build(),
        }
    }
}

/// Settings shared by the single-model subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub initial_state: InitialState,
    pub tau: f64,
    /// Counting weights; unit weights when absent.
    pub weights: Option<Vec<f64>>,
    pub trajectories: usize,
    pub seed: u64,
    pub coherent: bool,
    pub grid_points: usize,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::Da { omega_e: 1.0, rates: [0.5; 4] },
            initial_state: InitialState::Steady,
            tau: 1.0,
            weights: None,
            trajectories: 10_000,
            seed: 0,
            coherent: false,
            grid_points: crate::counting::DEFAULT_GRID_POINTS,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_defaults_and_overrides() {
        let cfg = SweepConfig::from_json_str(r#"{"experiment": "ep_sweep", "n_draws": 5}"#).unwrap();
        assert_eq!(cfg.n_draws, 5);
        assert_eq!(cfg.weight_range(), (-1.0, 1.0));
        assert_eq!(SweepConfig::default().weight_range(), (0.0, 1.0));
        assert!(SweepConfig::from_json_str(r#"{"n_draws": 0}"#).is_err());
        assert!(SweepConfig::from_json_str(r#"{"tau_low": 2, "tau_high": 1}"#).is_err());
        assert!(SweepConfig::from_json_str(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn run_config_with_inline_model() {
        let cfg = RunConfig::from_json_str(
            r#"{"model": {"kind": "poisson", "gamma": 0.5}, "initial_state": {"kind": "basis", "index": 0}, "tau": 2}"#,
        )
        .unwrap();
        let model = cfg.model.build().unwrap();
        assert_eq!(model.dim(), 1);
        assert_eq!(cfg.initial_state.build(&model).unwrap().dim(), 1);
    }

    #[test]
    fn initial_state_parsing() {
        assert_eq!(InitialState::parse("basis:2").unwrap(), InitialState::Basis { index: 2 });
        assert_eq!(InitialState::parse("steady").unwrap(), InitialState::Steady);
        assert!(InitialState::parse("excited").is_err());
        let model = build_da_model(1.0, [0.5; 4]).unwrap();
        assert!(InitialState::Basis { index: 3 }.build(&model).is_err());
    }
}
