//! Penalty approximation of an action box `[-M, M]^m`: the reward becomes
//! `r(x, a) - p(a) / eps` with `p(a) = sum_i (|a_i| - M)_+^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::ControlProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyConfig {
    #[serde(rename = "M")]
    pub half_width: f64,
    pub epsilon: f64,
}

impl PenaltyConfig {
    pub fn new(half_width: f64, epsilon: f64) -> Result<Self> {
        let cfg = Self { half_width, epsilon };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::invalid(format!("penalty M must be positive, got {}", self.half_width)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid(format!("penalty epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// `sum_i max(|a_i| - M, 0)^2`: zero on the closed box, C^1 everywhere.
pub fn box_penalty(a: &[f64], half_width: f64) -> f64 {
    a.iter().map(|x| (x.abs() - half_width).max(0.0).powi(2)).sum()
}

/// Same dynamics with reward `r - box_penalty(a, M) / eps`. The reward bound is
/// dropped since the penalized reward is unbounded below.
pub fn penalized_problem(problem: &ControlProblem, cfg: PenaltyConfig) -> Result<ControlProblem> {
    cfg.validate()?;
    let base = problem.clone();
    let PenaltyConfig { half_width, epsilon } = cfg;
    let key = format!("{}+penalty(M={half_width},eps={epsilon})", problem.key());
    Ok(problem.with_reward(key, move |x, a| base.reward(x, a) - box_penalty(a, half_width) / epsilon))
}
