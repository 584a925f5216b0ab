//! Small fully connected networks with hand-written reverse-mode gradients
//! and an Adam optimizer. Parameters are exposed as one flat vector so that
//! optimizers and finite-difference checks can treat every network alike.

use rand::Rng;
use std::path::Path;

use crate::vq::ByteReader;
use crate::{Error, Result};

pub const HIDDEN_WIDTH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs x inputs`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Dense {
    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(z + self.biases[o]);
        }
    }
}

/// Feed-forward net: tanh on hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Activations recorded by [`Mlp::forward_trace`]; `activations[0]` is the
/// input and the last entry is the output.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases. `sizes` lists every layer width
    /// from input to output.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for layer in &mut net.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(net)
    }

    /// `input -> 64 -> 64 -> output`.
    pub fn standard<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Result<Self> {
        Self::new(&[input, HIDDEN_WIDTH, HIDDEN_WIDTH, output], rng)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidParameter(
                "network needs at least two nonzero layer sizes".into(),
            ));
        }
        let layers = sizes
            .windows(2)
            .map(|p| Dense {
                inputs: p[0],
                outputs: p[1],
                weights: vec![0.0; p[0] * p[1]],
                biases: vec![0.0; p[1]],
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs)
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Flat parameters: per layer, weights (row-major) then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: flat.len(),
            });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.input_dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            })
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.activations.pop().unwrap())
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.apply(activations.last().unwrap(), &mut out);
            if i != last {
                for v in &mut out {
                    *v = v.tanh();
                }
            }
            activations.push(out);
        }
        Ok(Trace { activations })
    }

    /// Accumulates into `grad` (flat, same layout as [`Mlp::params`]) the
    /// gradient of a scalar loss whose derivative with respect to the
    /// output is `upstream`.
    pub fn backward(&self, trace: &Trace, upstream: &[f64], grad: &mut [f64]) -> Result<()> {
        if upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                actual: upstream.len(),
            });
        }
        if grad.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: grad.len(),
            });
        }
        if trace.activations.len() != self.layers.len() + 1 {
            return Err(Error::ShapeMismatch("trace does not belong to this network".into()));
        }
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for l in &self.layers {
            offsets.push(acc);
            acc += l.param_count();
        }
        // delta holds dL/dz for the pre-activation of the current layer.
        let mut delta = upstream.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.activations[i];
            let base = offsets[i];
            let (gw, gb) = grad[base..base + layer.param_count()].split_at_mut(layer.weights.len());
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                for (g, x) in gw[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            if i == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.inputs];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (p, w) in prev.iter_mut().zip(&layer.weights[o * layer.inputs..(o + 1) * layer.inputs]) {
                    *p += d * w;
                }
            }
            // The input to layer i is tanh of the previous pre-activation.
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
        Ok(())
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Adam {
    pub fn new(param_count: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: vec![0.0; param_count],
            second: vec![0.0; param_count],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::DimensionMismatch {
                expected: self.first.len(),
                actual: params.len().max(grads.len()),
            });
        }
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - self.beta1.powf(t);
        let c2 = 1.0 - self.beta2.powf(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.first[i] = self.beta1 * self.first[i] + (1.0 - self.beta1) * g;
            self.second[i] = self.beta2 * self.second[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first[i] / c1;
            let v_hat = self.second[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// A network, optional extra parameter vector (the actor's log-std) and
/// its optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: Mlp,
    pub extra: Vec<f64>,
    pub optimizer: Adam,
}

impl Checkpoint {
    const MAGIC: &'static [u8; 4] = b"MLPC";
    const VERSION: u32 = 1;

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&Self::VERSION.to_le_bytes());
        let sizes = self.net.sizes();
        out.extend_from_slice(&(sizes.len() as u64).to_le_bytes());
        for s in sizes {
            out.extend_from_slice(&(s as u64).to_le_bytes());
        }
        let push_f64s = |out: &mut Vec<u8>, vs: &[f64]| {
            out.extend_from_slice(&(vs.len() as u64).to_le_bytes());
            for v in vs {
                out.extend_from_slice(&v.to_le_bytes());
            }
        };
        push_f64s(&mut out, &self.net.params());
        push_f64s(&mut out, &self.extra);
        let o = &self.optimizer;
        for v in [o.learning_rate, o.beta1, o.beta2, o.epsilon] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&o.step.to_le_bytes());
        push_f64s(&mut out, &o.first);
        push_f64s(&mut out, &o.second);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        const KIND: &str = "checkpoint";
        let mut r = ByteReader::new(bytes, KIND);
        if r.take(4)? != Self::MAGIC {
            return Err(Error::format(KIND, "bad magic"));
        }
        let version = r.u32()?;
        if version != Self::VERSION {
            return Err(Error::format(KIND, format!("unsupported version {version}")));
        }
        let n_sizes = r.u64()? as usize;
        if n_sizes > 64 {
            return Err(Error::format(KIND, "too many layers"));
        }
        let sizes: Vec<usize> = (0..n_sizes).map(|_| r.u64().map(|s| s as usize)).collect::<Result<_>>()?;
        let mut net = Mlp::zeros(&sizes).map_err(|e| Error::format(KIND, e.to_string()))?;
        let read_f64s = |r: &mut ByteReader| -> Result<Vec<f64>> {
            let n = r.u64()? as usize;
            r.f64_vec(n)
        };
        let params = read_f64s(&mut r)?;
        net.set_params(&params).map_err(|e| Error::format(KIND, e.to_string()))?;
        let extra = read_f64s(&mut r)?;
        let learning_rate = r.f64()?;
        let beta1 = r.f64()?;
        let beta2 = r.f64()?;
        let epsilon = r.f64()?;
        let step = r.u64()?;
        let first = read_f64s(&mut r)?;
        let second = read_f64s(&mut r)?;
        r.finish()?;
        if first.len() != second.len() {
            return Err(Error::format(KIND, "moment lengths differ"));
        }
        Ok(Self {
            net,
            extra,
            optimizer: Adam {
                learning_rate,
                beta1,
                beta2,
                epsilon,
                step,
                first,
                second,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    fn central_difference(net: &Mlp, x: &[f64], loss: impl Fn(&[f64]) -> f64, h: f64) -> Vec<f64> {
        let base = net.params();
        let mut probe = net.clone();
        (0..base.len())
            .map(|i| {
                let mut p = base.clone();
                p[i] = base[i] + h;
                probe.set_params(&p).unwrap();
                let up = loss(&probe.forward(x).unwrap());
                p[i] = base[i] - h;
                probe.set_params(&p).unwrap();
                let down = loss(&probe.forward(x).unwrap());
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&[3, 4, 2]).unwrap();
        assert_eq!(net.forward(&[0.3, -1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn unit_chain_composes_tanh() {
        let mut net = Mlp::zeros(&[1, 1, 1, 1]).unwrap();
        net.set_params(&[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let x = 0.7f64;
        let y = net.forward(&[x]).unwrap()[0];
        assert_eq!(y, x.tanh().tanh());
    }

    #[test]
    fn forward_is_stateless() {
        let net = Mlp::standard(5, 3, &mut rng_from_seed(1)).unwrap();
        let a = net.forward(&[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let _ = net.forward(&[9.0, 9.0, 9.0, 9.0, 9.0]).unwrap();
        assert_eq!(net.forward(&[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap(), a);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let net = Mlp::standard(4, 2, &mut rng_from_seed(2)).unwrap();
        let trace = net.forward_trace(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut grad = vec![0.0; net.param_count()];
        net.backward(&trace, &[0.0, 0.0], &mut grad).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
        assert!(net.backward(&trace, &[0.0], &mut grad).is_err());
    }

    #[test]
    fn linear_layer_matches_closed_form() {
        let mut net = Mlp::new(&[3, 2], &mut rng_from_seed(3)).unwrap();
        net.set_params(&[0.5, -1.0, 0.25, 2.0, 0.0, 1.0, 0.1, -0.3]).unwrap();
        let x = [1.0, 2.0, -1.0];
        let y = [0.5, 1.0];
        let out = net.forward(&x).unwrap();
        let trace = net.forward_trace(&x).unwrap();
        let upstream: Vec<f64> = out.iter().zip(&y).map(|(o, t)| 2.0 * (o - t)).collect();
        let mut grad = vec![0.0; net.param_count()];
        net.backward(&trace, &upstream, &mut grad).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                assert!((grad[o * 3 + i] - upstream[o] * x[i]).abs() < 1e-15);
            }
            assert!((grad[6 + o] - upstream[o]).abs() < 1e-15);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let mut rng = rng_from_seed(seed);
            let net = Mlp::new(&[4, 6, 5, 3], &mut rng).unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let target: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let loss = |out: &[f64]| out.iter().zip(&target).map(|(o, t)| (o - t).powi(2)).sum::<f64>();
            let trace = net.forward_trace(&x).unwrap();
            let upstream: Vec<f64> = trace.output().iter().zip(&target).map(|(o, t)| 2.0 * (o - t)).collect();
            let mut grad = vec![0.0; net.param_count()];
            net.backward(&trace, &upstream, &mut grad).unwrap();
            let numeric = central_difference(&net, &x, loss, 1e-5);
            for (a, n) in grad.iter().zip(&numeric) {
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
                assert!(rel < 1e-4 || (a - n).abs() < 1e-10, "analytic {a} numeric {n}");
            }
        }
    }

    #[test]
    fn adam_first_step_and_zero_gradient() {
        let mut opt = Adam::new(1, 0.01);
        let mut p = [1.0];
        opt.step(&mut p, &[0.0]).unwrap();
        assert_eq!(p, [1.0]);

        let mut opt = Adam::new(2, 0.01);
        let mut p = [1.0, 1.0];
        opt.step(&mut p, &[3.0, -0.2]).unwrap();
        assert!((p[0] - 0.99).abs() < 1e-8);
        assert!((p[1] - 1.01).abs() < 1e-7);

        let mut a = Adam::new(2, 0.01);
        let mut b = a.clone();
        let (mut pa, mut pb) = ([0.3, 0.4], [0.3, 0.4]);
        a.step(&mut pa, &[0.1, 0.2]).unwrap();
        b.step(&mut pb, &[0.1, 0.2]).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(a, b);
    }

    #[test]
    fn sine_regression_descends() {
        let mut rng = rng_from_seed(10);
        let mut net = Mlp::new(&[1, 16, 16, 1], &mut rng).unwrap();
        let xs: Vec<f64> = (0..64).map(|i| -3.0 + 6.0 * i as f64 / 63.0).collect();
        let mse = |net: &Mlp| xs.iter().map(|&x| (net.forward(&[x]).unwrap()[0] - x.sin()).powi(2)).sum::<f64>() / 64.0;
        let initial = mse(&net);
        let mut opt = Adam::new(net.param_count(), 0.01);
        for _ in 0..2000 {
            let mut grad = vec![0.0; net.param_count()];
            for &x in &xs {
                let trace = net.forward_trace(&[x]).unwrap();
                let up = [2.0 * (trace.output()[0] - x.sin()) / 64.0];
                net.backward(&trace, &up, &mut grad).unwrap();
            }
            let mut p = net.params();
            opt.step(&mut p, &grad).unwrap();
            net.set_params(&p).unwrap();
        }
        assert!(mse(&net) <= 0.1 * initial, "{} -> {}", initial, mse(&net));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = rng_from_seed(4);
        let net = Mlp::standard(3, 2, &mut rng).unwrap();
        let mut opt = Adam::new(net.param_count(), 5e-4);
        let mut p = net.params();
        let g: Vec<f64> = (0..p.len()).map(|i| (i as f64).sin()).collect();
        opt.step(&mut p, &g).unwrap();
        let ck = Checkpoint {
            net,
            extra: vec![0.5f64.ln(); 2],
            optimizer: opt,
        };
        let bytes = ck.to_bytes();
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), ck);
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }
}
