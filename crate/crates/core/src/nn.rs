//! A small fully connected network: tanh hidden layers, linear output,
//! double precision, exact reverse-mode gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const CHECKPOINT_FORMAT: &str = "coop-cache-mlp";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.biases)
                .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b),
        );
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Activations of every layer for one input, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// `activations[0]` is the input, the last entry the output.
    activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least the input")
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }
}

/// Parameter gradients, shaped like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
    }

    pub fn is_zero(&self) -> bool {
        self.values().all(|g| g == 0.0)
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights
                .iter_mut()
                .chain(l.biases.iter_mut())
                .for_each(|g| *g *= factor);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `theta <- theta + rate * g`
    Ascend,
    /// `theta <- theta - rate * g`
    Descend,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    sizes: Vec<usize>,
    layers: Vec<CheckpointLayer>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointLayer {
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Mlp {
    /// All-zero network with the given layer sizes (input first).
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Mlp {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    /// Xavier-uniform weights, zero biases.
    pub fn xavier<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for l in &mut net.layers {
            let limit = (6.0 / (l.inputs + l.outputs) as f64).sqrt();
            for w in &mut l.weights {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(net)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.inputs == 0
                || l.outputs == 0
                || l.weights.len() != l.inputs * l.outputs
                || l.biases.len() != l.outputs
            {
                return Err(Error::config(format!("layer {k} has inconsistent shape")));
            }
            if k > 0 && layers[k - 1].outputs != l.inputs {
                return Err(Error::config(format!(
                    "layer {k} does not chain onto layer {}",
                    k - 1
                )));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Parameters in layer order, weights before biases.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
    }

    /// Mutable access to the `index`-th parameter in [`Mlp::params`] order.
    pub fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for l in &mut self.layers {
            if index < l.weights.len() {
                return &mut l.weights[index];
            }
            index -= l.weights.len();
            if index < l.biases.len() {
                return &mut l.biases[index];
            }
            index -= l.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// Zeroes the output layer, so the network starts out computing its
    /// output biases only.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().expect("non-empty");
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        last.biases.iter_mut().for_each(|b| *b = 0.0);
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_len() {
            return Err(Error::contract(format!(
                "input of length {} for a network expecting {}",
                input.len(),
                self.input_len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            l.affine(&cur, &mut next);
            if k < last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<ForwardTrace> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(l.outputs);
            l.affine(activations.last().expect("non-empty"), &mut out);
            if k < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(out);
        }
        Ok(ForwardTrace { activations })
    }

    /// Adds `scale * d(output . grad_out)/d(theta)` into `acc`.
    pub fn backward_into(
        &self,
        trace: &ForwardTrace,
        grad_out: &[f64],
        scale: f64,
        acc: &mut Gradients,
    ) -> Result<()> {
        if grad_out.len() != self.output_len() || trace.activations.len() != self.layers.len() + 1 {
            return Err(Error::contract(
                "output gradient or trace does not match the network",
            ));
        }
        let mut delta: Vec<f64> = grad_out.iter().map(|g| g * scale).collect();
        for k in (0..self.layers.len()).rev() {
            let l = &self.layers[k];
            let input = &trace.activations[k];
            let g = &mut acc.layers[k];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.biases[o] += d;
                let row = &mut g.weights[o * l.inputs..(o + 1) * l.inputs];
                row.iter_mut().zip(input).for_each(|(gw, x)| *gw += d * x);
            }
            if k == 0 {
                break;
            }
            // Back through the weights, then through tanh of layer k-1.
            let mut prev = vec![0.0; l.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
            }
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
        Ok(())
    }

    /// Gradient of `output . grad_out` with respect to every parameter.
    pub fn backward(&self, trace: &ForwardTrace, grad_out: &[f64]) -> Result<Gradients> {
        let mut g = Gradients::zeros_like(self);
        self.backward_into(trace, grad_out, 1.0, &mut g)?;
        Ok(g)
    }

    /// One plain gradient step. Fails, leaving the network untouched, if any
    /// updated parameter would be non-finite.
    pub fn sgd_step(&mut self, grads: &Gradients, rate: f64, direction: Direction) -> Result<()> {
        if grads.layers.len() != self.layers.len()
            || grads.layers.iter().zip(&self.layers).any(|(g, l)| {
                g.weights.len() != l.weights.len() || g.biases.len() != l.biases.len()
            })
        {
            return Err(Error::contract("gradient shape does not match the network"));
        }
        let signed = match direction {
            Direction::Ascend => rate,
            Direction::Descend => -rate,
        };
        let finite = self
            .params()
            .zip(grads.values())
            .all(|(p, g)| (p + signed * g).is_finite());
        if !finite {
            return Err(Error::TrainingFault(
                "non-finite parameter after update".into(),
            ));
        }
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights
                .iter_mut()
                .zip(&g.weights)
                .for_each(|(p, d)| *p += signed * d);
            l.biases
                .iter_mut()
                .zip(&g.biases)
                .for_each(|(p, d)| *p += signed * d);
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            sizes: self.sizes(),
            layers: self
                .layers
                .iter()
                .map(|l| CheckpointLayer {
                    weights: l.weights.clone(),
                    biases: l.biases.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&ck)?)
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::config(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        if ck.sizes.len() != ck.layers.len() + 1 {
            return Err(Error::config("checkpoint sizes do not match its layers"));
        }
        let layers = ck
            .layers
            .into_iter()
            .enumerate()
            .map(|(k, l)| Layer {
                inputs: ck.sizes[k],
                outputs: ck.sizes[k + 1],
                weights: l.weights,
                biases: l.biases,
            })
            .collect();
        Self::from_layers(layers)
    }
}

/// Softmax over the entries with `mask[i] == true`; masked entries get 0.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != mask.len() {
        return Err(Error::contract("logits and mask differ in length"));
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::contract("every action is masked"));
    }
    let mut probs: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { (l - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_net(seed: u64) -> (Mlp, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let depth = rng.random_range(1..4);
        let mut sizes = vec![rng.random_range(1..7)];
        for _ in 0..depth {
            sizes.push(rng.random_range(1..7));
        }
        let mut net = Mlp::xavier(&sizes, &mut rng).unwrap();
        for l in &mut net.layers {
            l.biases
                .iter_mut()
                .for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
        let input = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grad_out = (0..*sizes.last().unwrap())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        (net, input, grad_out)
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&[4, 3, 2]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer() {
        let mut net = Mlp::zeros(&[3, 3]).unwrap();
        for i in 0..3 {
            net.layers[0].weights[i * 3 + i] = 1.0;
        }
        assert_eq!(
            net.forward(&[0.3, -1.5, 2.0]).unwrap(),
            vec![0.3, -1.5, 2.0]
        );
    }

    #[test]
    fn forward_matches_straight_line_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let net = Mlp::xavier(&[3, 2, 1], &mut rng).unwrap();
        let x = [0.2, -0.7, 1.1];
        let (w1, w2) = (&net.layers[0].weights, &net.layers[1].weights);
        let h0 = (w1[0] * x[0] + w1[1] * x[1] + w1[2] * x[2]).tanh();
        let h1 = (w1[3] * x[0] + w1[4] * x[1] + w1[5] * x[2]).tanh();
        let y = w2[0] * h0 + w2[1] * h1;
        assert!((net.forward(&x).unwrap()[0] - y).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let net = Mlp::zeros(&[3, 2]).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Contract(_))));
        assert!(Mlp::zeros(&[3]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-5;
        for seed in 0..100 {
            let (net, x, g) = random_net(seed);
            let trace = net.forward_trace(&x).unwrap();
            let analytic: Vec<f64> = net.backward(&trace, &g).unwrap().values().collect();
            for (i, &a) in analytic.iter().enumerate() {
                let mut plus = net.clone();
                *plus.param_mut(i) += h;
                let mut minus = net.clone();
                *minus.param_mut(i) -= h;
                let numeric = (dot(&plus.forward(&x).unwrap(), &g)
                    - dot(&minus.forward(&x).unwrap(), &g))
                    / (2.0 * h);
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                assert!(rel < 1e-4, "seed {seed} param {i}: {a} vs {numeric}");
            }
        }
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let (net, x, g) = random_net(3);
        let trace = net.forward_trace(&x).unwrap();
        assert!(net.backward(&trace, &vec![0.0; g.len()]).unwrap().is_zero());
    }

    #[test]
    fn linear_gradient_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::xavier(&[3, 2], &mut rng).unwrap();
        let x = [1.0, 2.0, -3.0];
        let g = [0.5, -2.0];
        let grads = net.backward(&net.forward_trace(&x).unwrap(), &g).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                assert_eq!(grads.layers[0].weights[o * 3 + i], g[o] * x[i]);
            }
            assert_eq!(grads.layers[0].biases[o], g[o]);
        }
    }

    #[test]
    fn sgd_examples() {
        let (net, x, g) = random_net(4);
        let grads = net.backward(&net.forward_trace(&x).unwrap(), &g).unwrap();
        let mut same = net.clone();
        same.sgd_step(&grads, 0.0, Direction::Descend).unwrap();
        assert_eq!(same, net);

        // f(theta) = theta^2 with theta the bias of a 1x1 layer; g = 2 theta.
        let mut scalar = Mlp::zeros(&[1, 1]).unwrap();
        scalar.layers[0].biases[0] = 1.0;
        let mut g2 = Gradients::zeros_like(&scalar);
        g2.layers[0].biases[0] = 2.0 * scalar.layers[0].biases[0];
        scalar.sgd_step(&g2, 0.1, Direction::Descend).unwrap();
        assert!((scalar.layers[0].biases[0] - 0.8).abs() < 1e-15);

        let mut up = net.clone();
        up.sgd_step(&grads, 0.25, Direction::Ascend).unwrap();
        let mut down = net.clone();
        down.sgd_step(&grads, 0.25, Direction::Descend).unwrap();
        for ((u, d), p) in up.params().zip(down.params()).zip(net.params()) {
            assert!(((u - p) + (d - p)).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_update_is_a_fault() {
        let (mut net, x, g) = random_net(5);
        let mut grads = net.backward(&net.forward_trace(&x).unwrap(), &g).unwrap();
        grads.layers[0].biases[0] = f64::NAN;
        let before = net.clone();
        assert!(matches!(
            net.sgd_step(&grads, 0.1, Direction::Ascend),
            Err(Error::TrainingFault(_))
        ));
        assert_eq!(net, before);
    }

    #[test]
    fn softmax_examples() {
        let p = masked_softmax(&[0.3; 5], &[true, false, true, true, false]).unwrap();
        assert_eq!(p[1], 0.0);
        for i in [0, 2, 3] {
            assert!((p[i] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(
            masked_softmax(&[5.0, 1.0], &[false, true]).unwrap(),
            vec![0.0, 1.0]
        );
        assert!(masked_softmax(&[1.0, 2.0], &[false, false]).is_err());
    }

    #[test]
    fn softmax_sums_to_one_and_is_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let n = rng.random_range(1..30);
            let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
            let mut mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
            mask[0] = true;
            let p = masked_softmax(&logits, &mask).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = logits.iter().map(|l| l + 123.4).collect();
            let q = masked_softmax(&shifted, &mask).unwrap();
            for (a, b) in p.iter().zip(&q) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip_and_validation() {
        let (net, _, _) = random_net(9);
        let text = net.to_checkpoint().unwrap();
        assert_eq!(Mlp::from_checkpoint(&text).unwrap(), net);
        let broken = text.replacen("\"sizes\":[", "\"sizes\":[7,", 1);
        assert!(Mlp::from_checkpoint(&broken).is_err());
    }
}
