//! Fully connected `tanh` network with a scalar output, stored as one flat parameter
//! vector (per layer: row-major weights, then biases).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layer_dims: Vec<usize>,
    params: Vec<f64>,
}

/// Activations of one forward pass, kept for backpropagation.
struct Tape {
    acts: Vec<Vec<f64>>,
}

impl MlpParams {
    /// Parameters from raw storage; `params.len()` must match `layer_dims`.
    pub fn from_parts(layer_dims: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        validate_dims(&layer_dims)?;
        check_dim(param_count(&layer_dims), params.len())?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::numerical("non-finite network parameter"));
        }
        Ok(Self { layer_dims, params })
    }

    pub fn zeros_like(&self) -> Self {
        Self { layer_dims: self.layer_dims.clone(), params: vec![0.0; self.params.len()] }
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    /// Offsets of the weight block and bias block of `layer`.
    fn offsets(&self, layer: usize) -> (usize, usize) {
        let mut off = 0;
        for l in 0..layer {
            off += self.layer_dims[l + 1] * (self.layer_dims[l] + 1);
        }
        let w = off;
        let b = off + self.layer_dims[layer + 1] * self.layer_dims[layer];
        (w, b)
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let (w, b) = self.offsets(layer);
        &self.params[w..b]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        let (_, b) = self.offsets(layer);
        &self.params[b..b + self.layer_dims[layer + 1]]
    }

    fn run(&self, input: &[f64]) -> Tape {
        let mut acts = Vec::with_capacity(self.layer_dims.len());
        acts.push(input.to_vec());
        let last = self.num_layers() - 1;
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let (w_off, b_off) = self.offsets(l);
            let prev = &acts[l];
            let mut out = Vec::with_capacity(n_out);
            for o in 0..n_out {
                let row = &self.params[w_off + o * n_in..w_off + (o + 1) * n_in];
                let z = self.params[b_off + o] + row.iter().zip(prev).map(|(w, x)| w * x).sum::<f64>();
                out.push(if l == last { z } else { z.tanh() });
            }
            acts.push(out);
        }
        Tape { acts }
    }

    fn input(&self, x: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len() + a.len())?;
        Ok(x.iter().chain(a).copied().collect())
    }

    /// `Q_theta(x, a)`.
    pub fn forward(&self, x: &[f64], a: &[f64]) -> Result<f64> {
        let z = self.input(x, a)?;
        Ok(self.run(&z).acts.last().expect("output layer")[0])
    }

    pub fn forward_batch(&self, batch: &[(Vec<f64>, Vec<f64>)]) -> Result<Vec<f64>> {
        batch.iter().map(|(x, a)| self.forward(x, a)).collect()
    }

    /// Backpropagates `dL/dQ = upstream` through `tape`; accumulates parameter gradients
    /// into `grad` (if given) and returns `dL/dinput`.
    fn backprop(&self, tape: &Tape, upstream: f64, mut grad: Option<&mut [f64]>) -> Vec<f64> {
        let mut delta = vec![upstream];
        let last = self.num_layers() - 1;
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            if l != last {
                // tanh' = 1 - tanh^2
                for (d, y) in delta.iter_mut().zip(&tape.acts[l + 1]) {
                    *d *= 1.0 - y * y;
                }
            }
            let (w_off, b_off) = self.offsets(l);
            let prev = &tape.acts[l];
            if let Some(g) = grad.as_deref_mut() {
                for o in 0..n_out {
                    let d = delta[o];
                    let row = &mut g[w_off + o * n_in..w_off + (o + 1) * n_in];
                    for (gw, x) in row.iter_mut().zip(prev) {
                        *gw += d * x;
                    }
                    g[b_off + o] += d;
                }
            }
            let mut next = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                let row = &self.params[w_off + o * n_in..w_off + (o + 1) * n_in];
                for (nx, w) in next.iter_mut().zip(row) {
                    *nx += d * w;
                }
            }
            delta = next;
        }
        delta
    }

    /// `D_a Q_theta(x, a)` by reverse accumulation.
    pub fn action_gradient(&self, x: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        let z = self.input(x, a)?;
        let tape = self.run(&z);
        let dz = self.backprop(&tape, 1.0, None);
        Ok(dz[x.len()..].to_vec())
    }

    /// Gradient of `sum_j (y_j - Q(x_j, a_j))^2` and the loss itself. Samples are
    /// accumulated in index order.
    pub fn backward(&self, batch: &[(Vec<f64>, Vec<f64>)], targets: &[f64]) -> Result<(MlpParams, f64)> {
        if batch.is_empty() {
            return Err(Error::invalid("backward needs a nonempty batch"));
        }
        check_dim(batch.len(), targets.len())?;
        let mut grad = self.zeros_like();
        let mut loss = 0.0;
        for ((x, a), &y) in batch.iter().zip(targets) {
            let z = self.input(x, a)?;
            let tape = self.run(&z);
            let q = tape.acts.last().expect("output layer")[0];
            let err = q - y;
            loss += err * err;
            self.backprop(&tape, 2.0 * err, Some(&mut grad.params));
        }
        Ok((grad, loss))
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::invalid("network needs an input and an output layer"));
    }
    if dims.contains(&0) {
        return Err(Error::invalid("layer widths must be positive"));
    }
    if *dims.last().expect("nonempty") != 1 {
        return Err(Error::invalid(format!("output dimension must be 1, got {}", dims.last().unwrap())));
    }
    Ok(())
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
}

/// Glorot-uniform weights `U(-s, s)`, `s = sqrt(6 / (fan_in + fan_out))`, zero biases.
pub fn mlp_init(layer_dims: &[usize], seed: u64) -> Result<MlpParams> {
    validate_dims(layer_dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(param_count(layer_dims));
    for w in layer_dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
        params.extend((0..fan_in * fan_out).map(|_| rng.gen_range(-s..=s)));
        params.extend(std::iter::repeat_n(0.0, fan_out));
    }
    Ok(MlpParams { layer_dims: layer_dims.to_vec(), params })
}

/// `target <- (1 - alpha) target + alpha online`.
pub fn soft_update(target: &MlpParams, online: &MlpParams, alpha: f64) -> Result<MlpParams> {
    if target.layer_dims != online.layer_dims {
        return Err(Error::invalid("soft update between networks of different shapes"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("soft update rate must lie in [0, 1], got {alpha}")));
    }
    let mut out = target.clone();
    soft_update_in_place(&mut out, online, alpha);
    Ok(out)
}

pub(crate) fn soft_update_in_place(target: &mut MlpParams, online: &MlpParams, alpha: f64) {
    if alpha == 1.0 {
        target.params.copy_from_slice(&online.params);
        return;
    }
    for (t, o) in target.params.iter_mut().zip(&online.params) {
        *t = (1.0 - alpha) * *t + alpha * o;
    }
}

/// Adam optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, learning_rate: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { learning_rate, beta1, beta2, eps, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut MlpParams, grad: &MlpParams) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.params.iter_mut().zip(&grad.params).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(w: &[f64], b: f64) -> MlpParams {
        let mut params = w.to_vec();
        params.push(b);
        MlpParams::from_parts(vec![w.len(), 1], params).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let dims = [3, 64, 64, 1];
        let a = mlp_init(&dims, 7).unwrap();
        assert_eq!(a, mlp_init(&dims, 7).unwrap());
        assert_ne!(a, mlp_init(&dims, 8).unwrap());
        for l in 0..a.num_layers() {
            assert!(a.biases(l).iter().all(|&b| b == 0.0));
            let s = (6.0 / (dims[l] + dims[l + 1]) as f64).sqrt();
            assert!(a.weights(l).iter().all(|w| w.abs() <= s));
        }
        assert!(mlp_init(&[3, 4, 2], 0).is_err());
        assert!(mlp_init(&[3], 0).is_err());
    }

    #[test]
    fn affine_network_forward_and_gradients() {
        let net = affine(&[0.5, -2.0, 3.0], 0.25);
        let q = net.forward(&[1.0, 2.0], &[-1.0]).unwrap();
        assert_eq!(q, 0.5 - 4.0 - 3.0 + 0.25);
        assert_eq!(net.action_gradient(&[1.0, 2.0], &[-1.0]).unwrap(), vec![3.0]);
        // single-sample least squares: 2 (Q - y) (input, 1)
        let y = 1.0;
        let (g, loss) = net.backward(&[(vec![1.0, 2.0], vec![-1.0])], &[y]).unwrap();
        let e = q - y;
        assert_eq!(loss, e * e);
        assert_eq!(g.params(), &[2.0 * e, 4.0 * e, -2.0 * e, 2.0 * e]);
        assert!(net.forward(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn zero_weights_give_output_bias() {
        let mut net = mlp_init(&[2, 5, 1], 1).unwrap();
        net.params_mut().fill(0.0);
        let (_, b_off) = net.offsets(1);
        net.params_mut()[b_off] = 1.75;
        assert_eq!(net.forward(&[0.3], &[-4.0]).unwrap(), 1.75);
    }

    #[test]
    fn ignores_action_when_action_weights_vanish() {
        let mut net = mlp_init(&[3, 4, 1], 2).unwrap();
        let (w_off, _) = net.offsets(0);
        for o in 0..4 {
            net.params_mut()[w_off + o * 3 + 2] = 0.0;
        }
        assert_eq!(net.action_gradient(&[0.1, 0.2], &[0.3]).unwrap(), vec![0.0]);
    }

    #[test]
    fn matching_targets_give_zero_loss() {
        let net = mlp_init(&[2, 8, 1], 3).unwrap();
        let batch = vec![(vec![0.1], vec![0.2]), (vec![-0.5], vec![0.9])];
        let targets = net.forward_batch(&batch).unwrap();
        let (g, loss) = net.backward(&batch, &targets).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.params().iter().all(|&v| v == 0.0));
        assert!(net.backward(&[], &[]).is_err());
    }

    #[test]
    fn batched_forward_matches_single() {
        let net = mlp_init(&[3, 16, 16, 1], 4).unwrap();
        let batch: Vec<(Vec<f64>, Vec<f64>)> =
            (0..6).map(|i| (vec![i as f64 * 0.1, -0.3], vec![0.5 - i as f64 * 0.2])).collect();
        let doubled: Vec<_> = batch.iter().chain(&batch).cloned().collect();
        let out = net.forward_batch(&doubled).unwrap();
        for (i, (x, a)) in doubled.iter().enumerate() {
            assert_eq!(out[i], net.forward(x, a).unwrap());
        }
    }

    #[test]
    fn soft_update_examples() {
        let zero = MlpParams::from_parts(vec![1, 1], vec![0.0, 0.0]).unwrap();
        let two = MlpParams::from_parts(vec![1, 1], vec![2.0, 2.0]).unwrap();
        assert_eq!(soft_update(&zero, &two, 1.0).unwrap(), two);
        assert_eq!(soft_update(&zero, &two, 0.0).unwrap(), zero);
        assert_eq!(soft_update(&zero, &two, 0.5).unwrap().params(), &[1.0, 1.0]);
        let other = MlpParams::from_parts(vec![2, 1], vec![0.0; 3]).unwrap();
        assert!(soft_update(&zero, &other, 0.5).is_err());
    }

    #[test]
    fn soft_update_contracts_toward_online() {
        let t = mlp_init(&[2, 6, 1], 5).unwrap();
        let o = mlp_init(&[2, 6, 1], 6).unwrap();
        let alpha = 0.3;
        let new = soft_update(&t, &o, alpha).unwrap();
        let dist = |a: &MlpParams, b: &MlpParams| {
            a.params().iter().zip(b.params()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
        };
        assert!((dist(&new, &o) - (1.0 - alpha) * dist(&t, &o)).abs() < 1e-12);
    }

    #[test]
    fn adam_reduces_a_quadratic() {
        let mut p = MlpParams::from_parts(vec![1, 1], vec![3.0, -2.0]).unwrap();
        let mut adam = Adam::new(2, 0.1, 0.9, 0.999, 1e-8);
        for _ in 0..500 {
            let g = MlpParams::from_parts(vec![1, 1], p.params().iter().map(|v| 2.0 * v).collect()).unwrap();
            adam.step(&mut p, &g);
        }
        assert!(p.params().iter().all(|v| v.abs() < 1e-2));
    }

    fn random_net(dims: &[usize], seed: u64) -> MlpParams {
        let mut net = mlp_init(dims, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
        for p in net.params_mut() {
            *p += rng.gen_range(-0.3..0.3);
        }
        net
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn action_gradient_matches_finite_differences() {
        let net = random_net(&[3, 7, 5, 1], 11);
        let (x, a) = (vec![0.3, -0.8], vec![0.4]);
        let g = net.action_gradient(&x, &[0.4]).unwrap();
        let step = 1e-5;
        let fd = (net.forward(&x, &[a[0] + step]).unwrap() - net.forward(&x, &[a[0] - step]).unwrap()) / (2.0 * step);
        assert!(rel_err(g[0], fd) < 1e-4, "{} vs {fd}", g[0]);
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let net = random_net(&[2, 6, 1], 12);
        let batch = vec![(vec![0.1], vec![0.5]), (vec![-0.7], vec![1.2])];
        let targets = [0.3, -0.4];
        let (g, _) = net.backward(&batch, &targets).unwrap();
        let loss = |n: &MlpParams| -> f64 {
            batch.iter().zip(&targets).map(|((x, a), y)| (n.forward(x, a).unwrap() - y).powi(2)).sum()
        };
        let step = 1e-5;
        for k in 0..net.params().len() {
            let (mut up, mut down) = (net.clone(), net.clone());
            up.params_mut()[k] += step;
            down.params_mut()[k] -= step;
            let fd = (loss(&up) - loss(&down)) / (2.0 * step);
            assert!(rel_err(g.params()[k], fd) < 1e-4, "param {k}: {} vs {fd}", g.params()[k]);
        }
    }
}
