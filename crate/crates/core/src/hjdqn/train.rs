use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::mlp::{mlp_init, soft_update_in_place, Adam, MlpParams};
use super::replay::{ReplayBuffer, Transition};
use crate::action::{hamiltonian_maximizer_into, NormIndex};
use crate::error::{check_dim, Error, Result};
use crate::problems::ControlProblem;

// Independent ChaCha streams so that changing one consumer never shifts another.
const STREAM_INIT: u64 = 0;
const STREAM_BATCH: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_RANDOM_POLICY: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub time_step: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub p: NormIndex,
    /// Soft target-update rate `alpha`.
    pub soft_update: f64,
    pub noise_std: f64,
    pub batch_size: usize,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub init_state_box: StateBox,
    pub hidden_dims: Vec<usize>,
    pub buffer_capacity: usize,
    /// Half-width of the uniform action distribution of the random baseline policy.
    pub random_action_range: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            time_step: 0.01,
            lipschitz: 20.0,
            p: NormIndex::TWO,
            soft_update: 0.001,
            noise_std: 0.01,
            batch_size: 32,
            episodes: 200,
            steps_per_episode: 200,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            init_state_box: StateBox { lo: vec![-1.0], hi: vec![1.0] },
            hidden_dims: vec![64, 64],
            buffer_capacity: 100_000,
            random_action_range: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, problem: &ControlProblem) -> Result<()> {
        let h = self.time_step;
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {h}")));
        }
        if problem.discount() * h >= 1.0 {
            return Err(Error::invalid(format!("gamma*h = {} must be < 1", problem.discount() * h)));
        }
        if !(self.lipschitz >= 0.0) || !self.lipschitz.is_finite() {
            return Err(Error::invalid("L must be finite and >= 0"));
        }
        if !(self.soft_update > 0.0 && self.soft_update <= 1.0) {
            return Err(Error::invalid(format!("soft update rate must lie in (0, 1], got {}", self.soft_update)));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::invalid("noise_std must be >= 0"));
        }
        if self.batch_size == 0 || self.episodes == 0 || self.steps_per_episode == 0 || self.buffer_capacity == 0 {
            return Err(Error::invalid("batch size, episodes, steps and buffer capacity must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return Err(Error::invalid("invalid Adam hyperparameters"));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::invalid("hidden widths must be positive"));
        }
        let n = problem.state_dim();
        check_dim(n, self.init_state_box.lo.len())?;
        check_dim(n, self.init_state_box.hi.len())?;
        if self.init_state_box.lo.iter().zip(&self.init_state_box.hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::invalid("init_state_box needs lo <= hi"));
        }
        if !(self.random_action_range >= 0.0) {
            return Err(Error::invalid("random_action_range must be >= 0"));
        }
        Ok(())
    }

    fn layer_dims(&self, problem: &ControlProblem) -> Vec<usize> {
        let mut dims = vec![problem.state_dim() + problem.action_dim()];
        dims.extend(&self.hidden_dims);
        dims.push(1);
        dims
    }
}

/// `h r + (1 - gamma h) q_next`.
pub fn td_target(r: f64, h: f64, gamma: f64, q_next: f64) -> Result<f64> {
    if gamma * h >= 1.0 {
        return Err(Error::invalid(format!("gamma*h = {} must be < 1", gamma * h)));
    }
    Ok(h * r + (1.0 - gamma * h) * q_next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub episode: usize,
    /// Undiscounted `sum_k h r_k` over the episode.
    pub ret: f64,
    pub loss_mean: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: MlpParams,
    pub target: MlpParams,
    pub curve: Vec<CurvePoint>,
}

impl TrainOutcome {
    pub fn mean_last_returns(&self, k: usize) -> f64 {
        mean_tail(&self.curve.iter().map(|c| c.ret).collect::<Vec<_>>(), k)
    }
}

pub(crate) fn mean_tail(values: &[f64], k: usize) -> f64 {
    let k = k.min(values.len()).max(1);
    values[values.len() - k..].iter().sum::<f64>() / k as f64
}

/// What happened on one environment step, passed to the observer of [`train_observed`].
#[derive(Debug, Clone)]
pub struct StepRecord<'a> {
    pub episode: usize,
    pub step: usize,
    pub x: &'a [f64],
    pub a: &'a [f64],
    pub a_next: &'a [f64],
    pub noise: &'a [f64],
}

fn sample_state(bx: &StateBox, rng: &mut ChaCha8Rng) -> Vec<f64> {
    bx.lo.iter().zip(&bx.hi).map(|(&l, &h)| if l < h { rng.gen_range(l..h) } else { l }).collect()
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn train(problem: &ControlProblem, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_observed(problem, cfg, |_| {})
}

/// Runs p-HJDQN for `cfg.episodes` episodes of `cfg.steps_per_episode` steps on
/// `x_{k+1} = x_k + h f(x_k, a_k)`, calling `observe` after every executed step.
pub fn train_observed<F>(problem: &ControlProblem, cfg: &TrainConfig, mut observe: F) -> Result<TrainOutcome>
where
    F: FnMut(&StepRecord<'_>),
{
    cfg.validate(problem)?;
    let (n, m) = (problem.state_dim(), problem.action_dim());
    let h = cfg.time_step;
    let gamma = problem.discount();
    let dims = cfg.layer_dims(problem);

    let mut online = mlp_init(&dims, cfg.seed)?;
    let mut target = online.clone();
    let mut adam = Adam::new(online.params().len(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
    let mut init_rng = stream(cfg.seed, STREAM_INIT);
    let mut batch_rng = stream(cfg.seed, STREAM_BATCH);
    let mut noise_rng = stream(cfg.seed, STREAM_NOISE);
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::invalid(e.to_string()))?;

    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut fx = vec![0.0; n];
    let mut eta = vec![0.0; m];
    let mut eps = vec![0.0; m];
    let mut batch: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(cfg.batch_size);
    let mut targets = Vec::with_capacity(cfg.batch_size);
    let mut a_prime = vec![0.0; m];
    let mut eta_j = vec![0.0; m];

    for episode in 0..cfg.episodes {
        let mut x = sample_state(&cfg.init_state_box, &mut init_rng);
        let mut a = vec![0.0; m];
        let mut ret = 0.0;
        let mut loss_sum = 0.0;
        for step in 0..cfg.steps_per_episode {
            // Execute a_k.
            let r = problem.reward(&x, &a);
            problem.dynamics_into(&x, &a, &mut fx);
            let x_next: Vec<f64> = x.iter().zip(&fx).map(|(xi, fi)| xi + h * fi).collect();
            if !r.is_finite() || x_next.iter().any(|v| !v.is_finite()) {
                return Err(Error::numerical(format!("environment diverged at episode {episode}, step {step}")));
            }
            ret += h * r;
            buffer.push(Transition { x: x.clone(), a: a.clone(), r, x_next: x_next.clone() });

            // Behaviour direction from the online network at (x_k, a_k).
            let g = online.action_gradient(&x, &a)?;
            hamiltonian_maximizer_into(&g, cfg.lipschitz, cfg.p, &mut eta)?;

            // Targets y_j = h r_j + (1 - gamma h) Q_target(x_{j+1}, a_j + h eta_j).
            batch.clear();
            targets.clear();
            for idx in buffer.sample_indices(cfg.batch_size, &mut batch_rng)? {
                let t = buffer.get(idx).expect("sampled index in range");
                let gj = target.action_gradient(&t.x_next, &t.a)?;
                hamiltonian_maximizer_into(&gj, cfg.lipschitz, cfg.p, &mut eta_j)?;
                for i in 0..m {
                    a_prime[i] = t.a[i] + h * eta_j[i];
                }
                let q_next = target.forward(&t.x_next, &a_prime)?;
                targets.push(td_target(t.r, h, gamma, q_next)?);
                batch.push((t.x.clone(), t.a.clone()));
            }
            let (grad, loss) = online.backward(&batch, &targets)?;
            if !loss.is_finite() {
                return Err(Error::numerical(format!("non-finite loss at episode {episode}, step {step}")));
            }
            loss_sum += loss / batch.len() as f64;
            adam.step(&mut online, &grad);
            soft_update_in_place(&mut target, &online, cfg.soft_update);

            // a_{k+1} = a_k + h eta + noise.
            for e in eps.iter_mut() {
                *e = if cfg.noise_std > 0.0 { noise.sample(&mut noise_rng) } else { 0.0 };
            }
            let a_next: Vec<f64> = (0..m).map(|i| a[i] + h * eta[i] + eps[i]).collect();
            observe(&StepRecord { episode, step, x: &x, a: &a, a_next: &a_next, noise: &eps });
            x = x_next;
            a = a_next;
        }
        curve.push(CurvePoint { episode, ret, loss_mean: loss_sum / cfg.steps_per_episode as f64 });
    }
    Ok(TrainOutcome { params: online, target, curve })
}

/// Per-episode returns of a policy drawing each action uniformly from
/// `[-random_action_range, random_action_range]^m`, with the same initial states as
/// [`train`] for the same seed.
pub fn random_policy_curve(problem: &ControlProblem, cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate(problem)?;
    let (n, m) = (problem.state_dim(), problem.action_dim());
    let h = cfg.time_step;
    let mut init_rng = stream(cfg.seed, STREAM_INIT);
    let mut act_rng = stream(cfg.seed, STREAM_RANDOM_POLICY);
    let range = cfg.random_action_range;
    let mut fx = vec![0.0; n];
    let mut returns = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        let mut x = sample_state(&cfg.init_state_box, &mut init_rng);
        let mut ret = 0.0;
        for step in 0..cfg.steps_per_episode {
            let a: Vec<f64> = (0..m).map(|_| if range > 0.0 { act_rng.gen_range(-range..=range) } else { 0.0 }).collect();
            let r = problem.reward(&x, &a);
            problem.dynamics_into(&x, &a, &mut fx);
            for (xi, fi) in x.iter_mut().zip(&fx) {
                *xi += h * fi;
            }
            if !r.is_finite() {
                return Err(Error::numerical(format!("random policy diverged at episode {episode}, step {step}")));
            }
            ret += h * r;
        }
        returns.push(ret);
    }
    Ok(returns)
}

pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["episode", "return", "loss_mean"])?;
    for c in curve {
        w.write_record([c.episode.to_string(), c.ret.to_string(), c.loss_mean.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    layer_dims: Vec<usize>,
    config: TrainConfig,
}

pub fn write_checkpoint(path: &Path, params: &MlpParams, cfg: &TrainConfig) -> Result<()> {
    let header = CheckpointHeader { layer_dims: params.layer_dims().to_vec(), config: cfg.clone() };
    let meta = serde_json::to_string(&header).map_err(|e| Error::Parse(e.to_string()))?;
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# checkpoint {meta}")?;
    writeln!(out, "PARAMS v1")?;
    writeln!(out, "{}", params.params().len())?;
    for v in params.params() {
        writeln!(out, "{v:.16e}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(MlpParams, TrainConfig)> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut header: Option<CheckpointHeader> = None;
    let mut tokens = Vec::new();
    let mut seen_magic = false;
    for line in reader.lines() {
        let line = line?;
        let t = line.trim();
        if let Some(meta) = t.strip_prefix("# checkpoint ") {
            header = Some(serde_json::from_str(meta).map_err(|e| Error::Parse(e.to_string()))?);
        } else if t == "PARAMS v1" {
            seen_magic = true;
        } else if !t.is_empty() && !t.starts_with('#') {
            tokens.push(t.to_string());
        }
    }
    let header = header.ok_or_else(|| Error::Parse("missing checkpoint header".into()))?;
    if !seen_magic || tokens.is_empty() {
        return Err(Error::Parse("missing PARAMS v1 block".into()));
    }
    let count: usize = tokens[0].parse().map_err(|_| Error::Parse("bad parameter count".into()))?;
    let values = tokens[1..]
        .iter()
        .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad parameter {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    check_dim(count, values.len())?;
    Ok((MlpParams::from_parts(header.layer_dims, values)?, header.config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::lp_norm;
    use crate::problems::{make_decay_toy, make_lqr_1d, Lqr1dParams};

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            episodes: 3,
            steps_per_episode: 20,
            batch_size: 4,
            hidden_dims: vec![8],
            ..TrainConfig::default()
        }
    }

    #[test]
    fn td_target_examples() {
        assert!((td_target(2.0, 0.1, 1.0, 5.0).unwrap() - 4.7).abs() < 1e-15);
        assert_eq!(td_target(2.0, 0.0, 1.0, 5.0).unwrap(), 5.0);
        assert!((td_target(3.0, 0.1, 2.0, 1.5).unwrap() - 1.5).abs() < 1e-15);
        assert!(td_target(1.0, 0.5, 2.0, 0.0).is_err());
    }

    #[test]
    fn td_target_is_monotone() {
        let base = td_target(1.0, 0.1, 1.0, 2.0).unwrap();
        assert!(td_target(1.0, 0.1, 1.0, 2.5).unwrap() > base);
        assert!(td_target(1.5, 0.1, 1.0, 2.0).unwrap() > base);
    }

    #[test]
    fn rejects_bad_time_step() {
        let problem = make_decay_toy();
        let cfg = TrainConfig { time_step: 0.5, ..small_cfg() };
        assert!(matches!(train(&problem, &cfg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn frozen_actions_without_noise_or_lipschitz() {
        let problem = make_decay_toy();
        let cfg = TrainConfig { lipschitz: 0.0, noise_std: 0.0, ..small_cfg() };
        train_observed(&problem, &cfg, |rec| assert_eq!(rec.a_next, rec.a)).unwrap();
    }

    #[test]
    fn executed_increments_obey_rate_bound() {
        let problem = make_lqr_1d(Lqr1dParams::default()).unwrap();
        for p in [NormIndex::ONE, NormIndex::TWO, NormIndex::INF] {
            let cfg = TrainConfig { p, noise_std: 0.05, ..small_cfg() };
            let bound = cfg.lipschitz * cfg.time_step + 1e-9;
            train_observed(&problem, &cfg, |rec| {
                let d: Vec<f64> =
                    (0..rec.a.len()).map(|i| rec.a_next[i] - rec.a[i] - rec.noise[i]).collect();
                assert!(lp_norm(&d, p) <= bound);
            })
            .unwrap();
        }
    }

    #[test]
    fn training_is_reproducible() {
        let problem = make_lqr_1d(Lqr1dParams::default()).unwrap();
        let cfg = small_cfg();
        let a = train(&problem, &cfg).unwrap();
        let b = train(&problem, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.curve, b.curve);
        let c = train(&problem, &TrainConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn random_policy_shares_initial_states() {
        let problem = make_lqr_1d(Lqr1dParams::default()).unwrap();
        let cfg = TrainConfig { random_action_range: 0.0, ..small_cfg() };
        let r1 = random_policy_curve(&problem, &cfg).unwrap();
        let r2 = random_policy_curve(&problem, &cfg).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.iter().all(|r| *r <= 0.0));
    }

    #[test]
    fn checkpoint_round_trip() {
        let problem = make_decay_toy();
        let cfg = small_cfg();
        let out = train(&problem, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        write_checkpoint(&path, &out.params, &cfg).unwrap();
        let (params, back_cfg) = read_checkpoint(&path).unwrap();
        assert_eq!(params, out.params);
        assert_eq!(back_cfg, cfg);
    }

    #[test]
    fn curve_csv_header() {
        let curve = vec![CurvePoint { episode: 0, ret: -1.5, loss_mean: 0.25 }];
        let mut buf = Vec::new();
        write_curve_csv(&curve, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "episode,return,loss_mean\n0,-1.5,0.25\n");
    }
}
