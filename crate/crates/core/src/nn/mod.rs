//! Small dense feedforward networks trained with SGD.
//!
//! Hidden layers use ReLU. The output layer is linear for [`OutputKind::Logits`]
//! and [`OutputKind::Linear`], and ReLU for [`OutputKind::NonnegScalar`] so
//! regression predictions are never negative.

mod loss;
mod train;

pub use loss::{loss_value, soft_labels, LossKind, SoftLabel, Target, PROB_FLOOR};
pub(crate) use loss::argmax;
pub(crate) use train::check_compat;
pub use train::{
    evaluate, gradients, predict, train, LrSchedule, MetricValue, Metrics, TrainConfig, TrainOutcome,
};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    /// Unnormalized class scores for `C >= 2` classes.
    Logits(usize),
    /// A single ReLU output.
    NonnegScalar,
    /// Unconstrained vector output (generators, discriminator scores).
    Linear(usize),
}

impl OutputKind {
    pub fn width(&self) -> usize {
        match *self {
            OutputKind::Logits(c) => c,
            OutputKind::NonnegScalar => 1,
            OutputKind::Linear(k) => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetSpec {
    input_dim: usize,
    hidden_widths: Vec<usize>,
    output: OutputKind,
}

impl NetSpec {
    pub fn new(input_dim: usize, hidden_widths: Vec<usize>, output: OutputKind) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidSpec("input_dim must be positive".into()));
        }
        if hidden_widths.is_empty() {
            return Err(Error::InvalidSpec("at least one hidden layer is required".into()));
        }
        if hidden_widths.contains(&0) {
            return Err(Error::InvalidSpec("hidden widths must be positive".into()));
        }
        match output {
            OutputKind::Logits(c) if c < 2 => {
                return Err(Error::InvalidSpec(format!("logits need C >= 2, got {c}")))
            }
            OutputKind::Linear(0) => return Err(Error::InvalidSpec("linear output width must be positive".into())),
            _ => {}
        }
        Ok(NetSpec {
            input_dim,
            hidden_widths,
            output,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_widths(&self) -> &[usize] {
        &self.hidden_widths
    }

    pub fn output(&self) -> OutputKind {
        self.output
    }

    pub fn output_width(&self) -> usize {
        self.output.width()
    }

    /// `(inputs, outputs)` for every layer, input side first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = Vec::with_capacity(self.hidden_widths.len() + 2);
        widths.push(self.input_dim);
        widths.extend(&self.hidden_widths);
        widths.push(self.output.width());
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Fully connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.inputs + inp]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    spec: NetSpec,
    pub layers: Vec<Dense>,
}

/// Parameter-shaped gradient buffer.
pub type Gradients = Vec<Dense>;

/// Output bias of a fresh [`OutputKind::NonnegScalar`] net: the middle of
/// the normalized label range. With a zero bias about one init in ten has a
/// ReLU output that is zero on the whole input range and never recovers.
pub const NONNEG_OUTPUT_BIAS: f64 = 0.5;

/// Weights drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases zero except
/// the [`OutputKind::NonnegScalar`] output bias ([`NONNEG_OUTPUT_BIAS`]).
pub fn init_params(spec: &NetSpec, seed: u64) -> NetParams {
    let mut rng = rng::stream(seed);
    let mut layers: Vec<Dense> = spec
        .layer_shapes()
        .into_iter()
        .map(|(inputs, outputs)| {
            let scale = 1.0 / (inputs as f64).sqrt();
            let mut layer = Dense::zeros(inputs, outputs);
            for w in &mut layer.weights {
                *w = rng.random_range(-scale..scale);
            }
            layer
        })
        .collect();
    if spec.output() == OutputKind::NonnegScalar {
        if let Some(last) = layers.last_mut() {
            last.bias[0] = NONNEG_OUTPUT_BIAS;
        }
    }
    NetParams {
        spec: spec.clone(),
        layers,
    }
}

impl NetParams {
    pub fn zeros(spec: &NetSpec) -> Self {
        NetParams {
            spec: spec.clone(),
            layers: spec.layer_shapes().into_iter().map(|(i, o)| Dense::zeros(i, o)).collect(),
        }
    }

    /// Builds parameters from explicit layers, checking shapes and finiteness.
    pub fn from_layers(spec: NetSpec, layers: Vec<Dense>) -> Result<Self> {
        let shapes = spec.layer_shapes();
        if shapes.len() != layers.len() {
            return Err(Error::InvalidSpec(format!(
                "expected {} layers, found {}",
                shapes.len(),
                layers.len()
            )));
        }
        for ((i, o), l) in shapes.into_iter().zip(&layers) {
            if l.inputs != i || l.outputs != o || l.weights.len() != i * o || l.bias.len() != o {
                return Err(Error::InvalidSpec(format!("layer shape mismatch: expected {o}x{i}")));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("network parameters".into()));
            }
        }
        Ok(NetParams { spec, layers })
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn zero_grads(&self) -> Gradients {
        self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim,
                found: features.len(),
            });
        }
        let mut ws = Workspace::new(self);
        Ok(ws.forward(self, features).to_vec())
    }

    /// Number of scalar parameters.
    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Reusable activation buffers for one network.
#[derive(Debug, Clone)]
pub struct Workspace {
    /// `acts[0]` is the input; `acts[k+1]` is the output of layer `k`.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl Workspace {
    pub fn new(params: &NetParams) -> Self {
        let mut acts = vec![vec![0.0; params.spec.input_dim]];
        let mut pre = Vec::new();
        for l in &params.layers {
            acts.push(vec![0.0; l.outputs]);
            pre.push(vec![0.0; l.outputs]);
        }
        let widest = acts.iter().map(Vec::len).max().unwrap_or(0);
        Workspace {
            acts,
            pre,
            delta: Vec::with_capacity(widest),
            delta_next: Vec::with_capacity(widest),
        }
    }

    /// Runs the network; the returned slice is the output layer. Panics on
    /// a feature-length mismatch.
    pub fn forward(&mut self, params: &NetParams, features: &[f64]) -> &[f64] {
        assert_eq!(features.len(), params.spec.input_dim, "feature length");
        self.acts[0].copy_from_slice(features);
        let last = params.layers.len() - 1;
        let relu_out = params.spec.output == OutputKind::NonnegScalar;
        for (k, layer) in params.layers.iter().enumerate() {
            let (before, after) = self.acts.split_at_mut(k + 1);
            let input = &before[k];
            let out = &mut after[0];
            let pre = &mut self.pre[k];
            for o in 0..layer.outputs {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                let z = layer.bias[o] + row.iter().zip(input.iter()).map(|(w, a)| w * a).sum::<f64>();
                pre[o] = z;
                out[o] = if k < last || relu_out { z.max(0.0) } else { z };
            }
        }
        &self.acts[last + 1]
    }

    /// Accumulates `scale * dL/dparams` into `grads` given `d_output` for the
    /// last forward pass; optionally writes `dL/dinput` (unscaled).
    pub fn backward(
        &mut self,
        params: &NetParams,
        d_output: &[f64],
        scale: f64,
        grads: &mut Gradients,
        d_input: Option<&mut [f64]>,
    ) {
        let last = params.layers.len() - 1;
        let relu_out = params.spec.output == OutputKind::NonnegScalar;
        self.delta.clear();
        self.delta.extend_from_slice(d_output);
        for k in (0..=last).rev() {
            let layer = &params.layers[k];
            let pre = &self.pre[k];
            if k < last || relu_out {
                for (d, &z) in self.delta.iter_mut().zip(pre) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = &self.acts[k];
            let g = &mut grads[k];
            for o in 0..layer.outputs {
                let d = self.delta[o] * scale;
                if d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, a) in row.iter_mut().zip(input) {
                    *gw += d * a;
                }
            }
            if k == 0 && d_input.is_none() {
                break;
            }
            self.delta_next.clear();
            self.delta_next.resize(layer.inputs, 0.0);
            for o in 0..layer.outputs {
                let d = self.delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (dn, w) in self.delta_next.iter_mut().zip(row) {
                    *dn += d * w;
                }
            }
            std::mem::swap(&mut self.delta, &mut self.delta_next);
        }
        if let Some(out) = d_input {
            out.copy_from_slice(&self.delta);
        }
    }
}

/// SGD with classical momentum and L2 weight decay.
#[derive(Debug, Clone)]
pub struct Sgd {
    velocity: Gradients,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Sgd {
    pub fn new(params: &NetParams, momentum: f64, weight_decay: f64) -> Self {
        Sgd {
            velocity: params.zero_grads(),
            momentum,
            weight_decay,
        }
    }

    pub fn step(&mut self, params: &mut NetParams, grads: &Gradients, lr: f64) {
        for ((layer, g), v) in params.layers.iter_mut().zip(grads).zip(&mut self.velocity) {
            let wd = self.weight_decay;
            for ((w, gw), vw) in layer.weights.iter_mut().zip(&g.weights).zip(&mut v.weights) {
                *vw = self.momentum * *vw + gw + wd * *w;
                *w -= lr * *vw;
            }
            for ((b, gb), vb) in layer.bias.iter_mut().zip(&g.bias).zip(&mut v.bias) {
                *vb = self.momentum * *vb + gb;
                *b -= lr * *vb;
            }
        }
    }
}

pub(crate) fn clear_grads(grads: &mut Gradients) {
    for g in grads {
        g.weights.fill(0.0);
        g.bias.fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(hidden: Vec<usize>, out: OutputKind) -> NetSpec {
        NetSpec::new(2, hidden, out).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let s = spec(vec![5, 3], OutputKind::Logits(3));
        assert_eq!(init_params(&s, 4), init_params(&s, 4));
        assert_ne!(init_params(&s, 4), init_params(&s, 5));
    }

    #[test]
    fn empty_hidden_rejected() {
        assert!(matches!(NetSpec::new(2, vec![], OutputKind::Logits(3)), Err(Error::InvalidSpec(_))));
        assert!(NetSpec::new(2, vec![3], OutputKind::Logits(1)).is_err());
    }

    #[test]
    fn weight_shapes() {
        let p = init_params(&spec(vec![4], OutputKind::Logits(3)), 0);
        assert_eq!((p.layers[0].outputs, p.layers[0].inputs), (4, 2));
        assert_eq!((p.layers[1].outputs, p.layers[1].inputs), (3, 4));
        assert!(p.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        let bound = 1.0 / 2f64.sqrt();
        assert!(p.layers[0].weights.iter().all(|w| w.abs() <= bound));
        let r = init_params(&spec(vec![4], OutputKind::NonnegScalar), 0);
        assert!(r.layers[0].bias.iter().all(|&b| b == 0.0));
        assert_eq!(r.layers[1].bias, vec![NONNEG_OUTPUT_BIAS]);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = NetParams::zeros(&spec(vec![4], OutputKind::Logits(3)));
        assert_eq!(p.forward(&[1.0, -2.0]).unwrap(), vec![0.0; 3]);
        let p = NetParams::zeros(&spec(vec![4], OutputKind::NonnegScalar));
        assert_eq!(p.forward(&[1.0, -2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let p = init_params(&spec(vec![4], OutputKind::Logits(3)), 0);
        assert!(matches!(
            p.forward(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    /// Dense-algebra oracle written independently of `Workspace`.
    fn oracle_forward(p: &NetParams, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let n = p.layers.len();
        for (k, l) in p.layers.iter().enumerate() {
            let mut z = vec![0.0; l.outputs];
            for (o, zo) in z.iter_mut().enumerate() {
                let mut acc = l.bias[o];
                for (i, ai) in a.iter().enumerate() {
                    acc += l.weight(o, i) * ai;
                }
                *zo = acc;
            }
            let relu = k + 1 < n || p.spec().output() == OutputKind::NonnegScalar;
            a = z.into_iter().map(|v| if relu { v.max(0.0) } else { v }).collect();
        }
        a
    }

    #[test]
    fn forward_matches_matrix_oracle() {
        let p = init_params(&spec(vec![7, 5], OutputKind::Logits(4)), 17);
        let x = [0.3, -1.7];
        let got = p.forward(&x).unwrap();
        for (g, e) in got.iter().zip(oracle_forward(&p, &x)) {
            assert!((g - e).abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn nonneg_head_never_negative(seed in 0u64..500, x0 in -50.0f64..50.0, x1 in -50.0f64..50.0) {
            let p = init_params(&spec(vec![6], OutputKind::NonnegScalar), seed);
            prop_assert!(p.forward(&[x0, x1]).unwrap()[0] >= 0.0);
        }
    }
}
