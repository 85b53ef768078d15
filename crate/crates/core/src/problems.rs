//! Deterministic control problems `x' = f(x, a)` with running reward `r(x, a)` and
//! discount rate `gamma`.
//!
//! Two families are provided: a scalar LQR with a closed-form Riccati value, and a
//! bounded "decay toy" whose dynamics and reward fall off like `1/|a|^2` in the action.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type DynamicsFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
pub type RewardFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
pub type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// An infinite-horizon discounted control problem.
///
/// Immutable after construction; clones share the underlying closures.
#[derive(Clone)]
pub struct ControlProblem {
    key: String,
    state_dim: usize,
    action_dim: usize,
    dynamics: Arc<DynamicsFn>,
    reward: Arc<RewardFn>,
    discount: f64,
    /// Lipschitz constant of `f` (metadata, not enforced).
    pub lipschitz_f: f64,
    /// `sup |r|` when the reward is bounded.
    pub reward_bound: Option<f64>,
    /// Exponent `sigma` in `|f| + |r| <= C / |a|^sigma`, when known.
    pub decay_sigma: Option<f64>,
    analytic_value: Option<Arc<ValueFn>>,
}

impl fmt::Debug for ControlProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlProblem")
            .field("key", &self.key)
            .field("state_dim", &self.state_dim)
            .field("action_dim", &self.action_dim)
            .field("discount", &self.discount)
            .field("lipschitz_f", &self.lipschitz_f)
            .field("reward_bound", &self.reward_bound)
            .field("decay_sigma", &self.decay_sigma)
            .field("analytic_value", &self.analytic_value.is_some())
            .finish()
    }
}

impl ControlProblem {
    pub fn new<F, R>(
        key: impl Into<String>,
        state_dim: usize,
        action_dim: usize,
        discount: f64,
        dynamics: F,
        reward: R,
    ) -> Result<Self>
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        R: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        if state_dim == 0 || action_dim == 0 {
            return Err(Error::invalid("state and action dimensions must be positive"));
        }
        if !(discount > 0.0) || !discount.is_finite() {
            return Err(Error::invalid(format!("discount must be positive, got {discount}")));
        }
        Ok(Self {
            key: key.into(),
            state_dim,
            action_dim,
            dynamics: Arc::new(dynamics),
            reward: Arc::new(reward),
            discount,
            lipschitz_f: 0.0,
            reward_bound: None,
            decay_sigma: None,
            analytic_value: None,
        })
    }

    pub fn with_analytic_value<V>(mut self, value: V) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.analytic_value = Some(Arc::new(value));
        self
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Writes `f(x, a)` into `out`.
    #[inline]
    pub fn dynamics_into(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        (self.dynamics)(x, a, out)
    }

    pub fn dynamics(&self, x: &[f64], a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        self.dynamics_into(x, a, &mut out);
        out
    }

    #[inline]
    pub fn reward(&self, x: &[f64], a: &[f64]) -> f64 {
        (self.reward)(x, a)
    }

    pub fn analytic_value(&self, x: &[f64]) -> Option<f64> {
        self.analytic_value.as_ref().map(|v| v(x))
    }

    pub fn has_analytic_value(&self) -> bool {
        self.analytic_value.is_some()
    }

    /// Same dynamics and discount, different reward. Metadata that depends on the reward
    /// (bound, decay exponent, analytic value) is dropped.
    pub fn with_reward<R>(&self, key: impl Into<String>, reward: R) -> Self
    where
        R: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            key: key.into(),
            reward: Arc::new(reward),
            reward_bound: None,
            decay_sigma: None,
            analytic_value: None,
            ..self.clone()
        }
    }
}

/// Parameters of `x' = alpha x + beta a`, `r = -(q x^2 + r a^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lqr1dParams {
    pub alpha: f64,
    pub beta: f64,
    pub q_cost: f64,
    pub r_cost: f64,
    pub discount: f64,
}

impl Default for Lqr1dParams {
    fn default() -> Self {
        Self { alpha: -1.0, beta: 1.0, q_cost: 1.0, r_cost: 1.0, discount: 1.0 }
    }
}

impl Lqr1dParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.q_cost, self.r_cost, self.discount];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("LQR parameters must be finite"));
        }
        if !(self.r_cost > 0.0) {
            return Err(Error::invalid("r_cost must be positive"));
        }
        if self.q_cost < 0.0 {
            return Err(Error::invalid("q_cost must be nonnegative"));
        }
        if !(self.discount > 0.0) {
            return Err(Error::invalid("discount must be positive"));
        }
        Ok(())
    }

    /// Nonnegative root `P` of `(beta^2/r) P^2 + (gamma - 2 alpha) P - q = 0`.
    pub fn riccati_coefficient(&self) -> Result<f64> {
        self.validate()?;
        let a = self.beta * self.beta / self.r_cost;
        let b = self.discount - 2.0 * self.alpha;
        let q = self.q_cost;
        if q == 0.0 {
            return Ok(0.0);
        }
        if a == 0.0 {
            // Degenerate: no control authority, the equation is linear in P.
            if b <= 0.0 {
                return Err(Error::invalid("uncontrolled LQR with gamma <= 2 alpha has no finite value"));
            }
            return Ok(q / b);
        }
        let disc = b * b + 4.0 * a * q;
        if disc < 0.0 {
            return Err(Error::invalid("Riccati equation has no real root"));
        }
        let sq = disc.sqrt();
        // Cancellation-free form of (-b + sq) / (2a).
        let p = if b > 0.0 { 2.0 * q / (b + sq) } else { (sq - b) / (2.0 * a) };
        Ok(p)
    }
}

pub fn riccati_value_1d(params: &Lqr1dParams, x: f64) -> Result<f64> {
    let p = params.riccati_coefficient()?;
    Ok(-p * x * x)
}

pub fn make_lqr_1d(params: Lqr1dParams) -> Result<ControlProblem> {
    let p = params.riccati_coefficient()?;
    let Lqr1dParams { alpha, beta, q_cost, r_cost, discount } = params;
    let mut problem = ControlProblem::new(
        "lqr1d",
        1,
        1,
        discount,
        move |x, a, out| out[0] = alpha * x[0] + beta * a[0],
        move |x, a| -(q_cost * x[0] * x[0] + r_cost * a[0] * a[0]),
    )?
    .with_analytic_value(move |x| -p * x[0] * x[0]);
    problem.lipschitz_f = alpha.hypot(beta);
    Ok(problem)
}

#[inline]
fn bump(t: f64) -> f64 {
    t / (1.0 + t * t)
}

#[inline]
fn bell(t: f64) -> f64 {
    1.0 / (1.0 + t * t)
}

/// `f = -x/(1+x^2) + a/(1+a^2)`, `r = 1/((1+x^2)(1+a^2))`, `gamma = 2`.
pub fn make_decay_toy() -> ControlProblem {
    let mut problem = ControlProblem::new(
        "decay_toy",
        1,
        1,
        2.0,
        |x, a, out| out[0] = -bump(x[0]) + bump(a[0]),
        |x, a| bell(x[0]) * bell(a[0]),
    )
    .expect("static problem definition");
    problem.lipschitz_f = std::f64::consts::SQRT_2;
    problem.reward_bound = Some(1.0);
    problem.decay_sigma = Some(2.0);
    problem
}

/// Two-action variant: the reward is a product of decay factors in each action
/// coordinate and each action contributes half of the drift.
pub fn make_decay_toy_2d() -> ControlProblem {
    let mut problem = ControlProblem::new(
        "decay_toy_2d",
        1,
        2,
        2.0,
        |x, a, out| out[0] = -bump(x[0]) + 0.5 * (bump(a[0]) + bump(a[1])),
        |x, a| bell(x[0]) * bell(a[0]) * bell(a[1]),
    )
    .expect("static problem definition");
    problem.lipschitz_f = (1.0f64 + 0.25 + 0.25).sqrt();
    problem.reward_bound = Some(1.0);
    problem
}

/// Decay toy whose reward peaks at `a = center` instead of `a = 0`. Used where an
/// action box must actually bind.
pub fn make_shifted_decay(center: f64) -> Result<ControlProblem> {
    if !center.is_finite() {
        return Err(Error::invalid("center must be finite"));
    }
    let mut problem = ControlProblem::new(
        "shifted_decay",
        1,
        1,
        2.0,
        |x, a, out| out[0] = -bump(x[0]) + bump(a[0]),
        move |x, a| bell(x[0]) * bell(a[0] - center),
    )?;
    problem.lipschitz_f = std::f64::consts::SQRT_2;
    problem.reward_bound = Some(1.0);
    Ok(problem)
}

/// `f = 0`, `r = c`. The value is `c / gamma` for every control.
pub fn make_constant(
    value: f64,
    discount: f64,
    state_dim: usize,
    action_dim: usize,
) -> Result<ControlProblem> {
    if !value.is_finite() {
        return Err(Error::invalid("constant reward must be finite"));
    }
    let mut problem = ControlProblem::new(
        "constant",
        state_dim,
        action_dim,
        discount,
        |_, _, out| out.fill(0.0),
        move |_, _| value,
    )?
    .with_analytic_value(move |_| value / discount);
    problem.reward_bound = Some(value.abs());
    Ok(problem)
}
