//! Forward-Euler rollouts that steer the action with the gradient of a Q-function.

use std::io::Write;

use crate::action::{step_action, BoxConstraint, NormIndex, StepMode};
use crate::error::{check_dim, Error, Result};
use crate::problems::ControlProblem;
use crate::solver::QTable;

/// Anything that can supply `D_a Q(x, a)`: a grid table or a network.
pub trait ActionGradientSource {
    fn action_gradient(&self, x: &[f64], a: &[f64]) -> Result<Vec<f64>>;
}

impl ActionGradientSource for QTable {
    fn action_gradient(&self, x: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        QTable::action_gradient(self, x, a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub discounted_return: f64,
    discount: f64,
    time_step: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with columns `t, x_1..x_n, a_1..a_m, reward, cumulative_discounted_return`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.states.first().map_or(0, Vec::len);
        let m = self.actions.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=m).map(|i| format!("a_{i}")));
        header.push("reward".into());
        header.push("cumulative_discounted_return".into());
        w.write_record(&header)?;
        let mut cumulative = 0.0;
        for k in 0..self.len() {
            let t = self.times[k];
            cumulative += self.time_step * (-self.discount * t).exp() * self.rewards[k];
            let mut row = vec![t.to_string()];
            row.extend(self.states[k].iter().map(f64::to_string));
            row.extend(self.actions[k].iter().map(f64::to_string));
            row.push(self.rewards[k].to_string());
            row.push(cumulative.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates `steps` Euler steps of `x' = f(x, a)` while the action follows
/// [`step_action`] with `g = D_a Q(x_k, a_k)`. The return is the left Riemann sum
/// `sum_k h exp(-gamma k h) r(x_k, a_k)`.
#[allow(clippy::too_many_arguments)]
pub fn rollout<S: ActionGradientSource + ?Sized>(
    problem: &ControlProblem,
    source: &S,
    x0: &[f64],
    a0: &[f64],
    lipschitz: f64,
    p: NormIndex,
    h: f64,
    steps: usize,
    mode: StepMode,
    bx: Option<&BoxConstraint>,
) -> Result<Trajectory> {
    check_dim(problem.state_dim(), x0.len())?;
    check_dim(problem.action_dim(), a0.len())?;
    let gamma = problem.discount();
    if !(h > 0.0) || gamma * h >= 1.0 {
        return Err(Error::invalid(format!("rollout needs h > 0 and gamma*h < 1, got h = {h}")));
    }
    if mode != StepMode::Free && bx.is_none() {
        return Err(Error::invalid("constrained step modes require an action box"));
    }
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps),
        states: Vec::with_capacity(steps),
        actions: Vec::with_capacity(steps),
        rewards: Vec::with_capacity(steps),
        discounted_return: 0.0,
        discount: gamma,
        time_step: h,
    };
    let mut x = x0.to_vec();
    let mut a = a0.to_vec();
    let mut fx = vec![0.0; x.len()];
    for k in 0..steps {
        let t = k as f64 * h;
        let r = problem.reward(&x, &a);
        if !r.is_finite() || x.iter().chain(&a).any(|v| !v.is_finite()) {
            return Err(Error::numerical(format!("rollout diverged at step {k}")));
        }
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.actions.push(a.clone());
        traj.rewards.push(r);
        traj.discounted_return += h * (-gamma * t).exp() * r;

        let g = source.action_gradient(&x, &a)?;
        problem.dynamics_into(&x, &a, &mut fx);
        for (xi, fi) in x.iter_mut().zip(&fx) {
            *xi += h * fi;
        }
        a = step_action(&a, &g, lipschitz, p, h, mode, bx)?;
    }
    Ok(traj)
}
