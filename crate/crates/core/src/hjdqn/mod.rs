//! p-HJDQN: Q-learning for Lipschitz-constrained actions with an `l_p` rate bound.

mod mlp;
mod replay;
mod train;

pub use mlp::{mlp_init, soft_update, Adam, MlpParams};
pub use replay::{ReplayBuffer, Transition};
pub use train::{
    random_policy_curve, read_checkpoint, td_target, train, train_observed, write_checkpoint, write_curve_csv,
    CurvePoint, StateBox, StepRecord, TrainConfig, TrainOutcome,
};

impl crate::rollout::ActionGradientSource for MlpParams {
    fn action_gradient(&self, x: &[f64], a: &[f64]) -> crate::Result<Vec<f64>> {
        MlpParams::action_gradient(self, x, a)
    }
}
