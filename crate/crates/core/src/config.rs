//! JSON experiment configuration shared by every CLI subcommand.
//!
//! Unknown keys anywhere in the document are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::action::{NormIndex, StepMode};
use crate::error::{Error, Result};
use crate::grid::{Axis, Grid};
use crate::hjdqn::TrainConfig;
use crate::penalty::PenaltyConfig;
use crate::problems::{
    make_constant, make_decay_toy, make_decay_toy_2d, make_lqr_1d, make_shifted_decay, ControlProblem, Lqr1dParams,
};
use crate::solver::SolverConfig;

/// Registry entry naming a control problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Lqr1d {
        #[serde(default)]
        params: Lqr1dParams,
    },
    DecayToy,
    #[serde(rename = "decay_toy_2d")]
    DecayToy2d,
    ShiftedDecay {
        center: f64,
    },
    Constant {
        value: f64,
        discount: f64,
        #[serde(default = "one")]
        state_dim: usize,
        #[serde(default = "one")]
        action_dim: usize,
    },
}

fn one() -> usize {
    1
}

impl ProblemSpec {
    pub fn build(&self) -> Result<ControlProblem> {
        match self {
            ProblemSpec::Lqr1d { params } => make_lqr_1d(*params),
            ProblemSpec::DecayToy => Ok(make_decay_toy()),
            ProblemSpec::DecayToy2d => Ok(make_decay_toy_2d()),
            ProblemSpec::ShiftedDecay { center } => make_shifted_decay(*center),
            ProblemSpec::Constant { value, discount, state_dim, action_dim } => {
                make_constant(*value, *discount, *state_dim, *action_dim)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutSpec {
    pub x0: Vec<f64>,
    pub a0: Vec<f64>,
    pub steps: usize,
    #[serde(default = "free_mode")]
    pub mode: StepMode,
    /// Field file of a previously solved table; solved on the fly when absent.
    #[serde(default)]
    pub table: Option<String>,
}

fn free_mode() -> StepMode {
    StepMode::Free
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualSpec {
    pub points: usize,
    pub seed: u64,
    /// Central fraction of every axis from which nodes are drawn.
    pub keep: f64,
}

impl Default for ResidualSpec {
    fn default() -> Self {
        Self { points: 100, seed: 0, keep: 0.6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    /// State axes first, then action axes.
    #[serde(default)]
    pub grid: Vec<Axis>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(rename = "L", default)]
    pub lipschitz: Option<f64>,
    #[serde(default)]
    pub p: Option<NormIndex>,
    #[serde(rename = "Ls", default)]
    pub ls: Vec<f64>,
    #[serde(default)]
    pub ps: Vec<NormIndex>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub penalty: Option<PenaltyConfig>,
    #[serde(default)]
    pub rollout: Option<RolloutSpec>,
    #[serde(default)]
    pub residual: ResidualSpec,
    #[serde(default)]
    pub train: Option<TrainConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn problem(&self) -> Result<ControlProblem> {
        self.problem.build().map_err(as_config)
    }

    /// Full `(x, a)` grid; its dimension must match the problem.
    pub fn grid(&self, problem: &ControlProblem) -> Result<Grid> {
        let expected = problem.state_dim() + problem.action_dim();
        if self.grid.len() != expected {
            return Err(Error::Config(format!("grid needs {expected} axes, got {}", self.grid.len())));
        }
        Grid::new(self.grid.clone()).map_err(as_config)
    }

    pub fn lipschitz(&self) -> Result<f64> {
        match self.lipschitz {
            Some(l) if l >= 0.0 && l.is_finite() => Ok(l),
            Some(l) => Err(Error::Config(format!("L must be finite and >= 0, got {l}"))),
            None => Err(Error::Config("missing key L".into())),
        }
    }

    pub fn p(&self) -> NormIndex {
        self.p.unwrap_or(NormIndex::TWO)
    }

    pub fn penalty(&self) -> Result<PenaltyConfig> {
        let cfg = self.penalty.ok_or_else(|| Error::Config("missing penalty section".into()))?;
        cfg.validate().map_err(as_config)?;
        Ok(cfg)
    }

    pub fn rollout(&self) -> Result<&RolloutSpec> {
        self.rollout.as_ref().ok_or_else(|| Error::Config("missing rollout section".into()))
    }

    pub fn train(&self) -> Result<&TrainConfig> {
        self.train.as_ref().ok_or_else(|| Error::Config("missing train section".into()))
    }

    pub fn validate_solver(&self, problem: &ControlProblem) -> Result<()> {
        self.solver.validate(problem.discount()).map_err(as_config)
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Numerical(_) | Error::NonConvergence { .. } => e,
        other => Error::Config(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DECAY: &str = r#"{
        "problem": {"name": "decay_toy"},
        "grid": [{"lo": -2, "hi": 2, "count": 21}, {"lo": -2, "hi": 2, "count": 21}],
        "solver": {"time_step": 0.05, "stop_tol": 1e-9},
        "L": 2, "p": "inf", "Ls": [1, 2, 4]
    }"#;

    #[test]
    fn parses_decay_config() {
        let cfg = ExperimentConfig::from_json(DECAY).unwrap();
        let problem = cfg.problem().unwrap();
        assert_eq!(problem.key(), "decay_toy");
        assert_eq!(cfg.grid(&problem).unwrap().node_count(), 441);
        assert_eq!(cfg.p(), NormIndex::INF);
        assert_eq!(cfg.lipschitz().unwrap(), 2.0);
        assert_eq!(cfg.solver.max_sweeps, SolverConfig::default().max_sweeps);
    }

    #[test]
    fn lqr_parameter_block() {
        let cfg = ExperimentConfig::from_json(
            r#"{"problem": {"name": "lqr1d", "params": {"alpha": -2, "beta": 1, "q_cost": 1, "r_cost": 1, "discount": 1}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.problem, ProblemSpec::Lqr1d { params: Lqr1dParams { alpha: -2.0, ..Lqr1dParams::default() } });
        assert!(cfg.problem().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"problem": {"name": "decay_toy"}, "bogus": 1}"#,
            r#"{"problem": {"name": "decay_toy"}, "solver": {"tol": 1}}"#,
            r#"{"problem": {"name": "decay_toy"}, "penalty": {"M": 1, "epsilon": 0.1, "x": 0}}"#,
            r#"{"problem": {"name": "no_such_problem"}}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn penalty_keys() {
        let cfg =
            ExperimentConfig::from_json(r#"{"problem": {"name": "decay_toy"}, "penalty": {"M": 1.5, "epsilon": 0.2}}"#)
                .unwrap();
        assert_eq!(cfg.penalty().unwrap(), PenaltyConfig { half_width: 1.5, epsilon: 0.2 });
    }

    #[test]
    fn grid_dimension_is_checked() {
        let cfg = ExperimentConfig::from_json(
            r#"{"problem": {"name": "decay_toy_2d"}, "grid": [{"lo": -1, "hi": 1, "count": 5}, {"lo": -1, "hi": 1, "count": 5}]}"#,
        )
        .unwrap();
        assert!(matches!(cfg.grid(&cfg.problem().unwrap()), Err(Error::Config(_))));
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::from_json(DECAY).unwrap();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
