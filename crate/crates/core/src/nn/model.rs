use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attention::{AttentionDims, AttentionModule, AttentionTrace};
use super::dense::{Activation, DenseNet, DenseTrace};
use super::features::{stream_matrix, Ablation, ObsFeatures, N_SECTORS};
use super::matrix::Matrix;
use super::params::ParamSet;
use crate::error::{Error, Result};
use crate::sim::{Action, V_MAX};

pub const ACTION_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub ablation: Ablation,
    pub attention: AttentionDims,
    /// Hidden widths of the output network.
    pub output_hidden: Vec<usize>,
}

impl NetworkConfig {
    pub fn full(ablation: Ablation) -> Self {
        Self {
            ablation,
            attention: AttentionDims::full(),
            output_hidden: vec![128, 64, 64],
        }
    }

    /// Same topology with narrow layers, for gradient checks and smoke runs.
    pub fn reduced(ablation: Ablation) -> Self {
        Self {
            ablation,
            attention: AttentionDims {
                embedding: vec![16, 16],
                score_hidden: vec![8],
                feature: vec![8, 8],
            },
            output_hidden: vec![32, 32],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.attention.validate()?;
        if self.output_hidden.iter().any(|&w| w == 0) {
            return Err(Error::Config("output widths must be positive".into()));
        }
        Ok(())
    }

    fn stream_width(&self) -> usize {
        self.ablation.streams().len() * self.attention.output_dim()
    }
}

/// The attention streams shared in structure by actor and critic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub streams: Vec<AttentionModule>,
}

#[derive(Debug, Clone)]
pub struct EncoderTrace {
    pub streams: Vec<AttentionTrace>,
    /// Stream outputs concatenated in stream order.
    pub features: Matrix,
}

impl Encoder {
    fn init(config: &NetworkConfig, rng: &mut impl Rng) -> Self {
        Self {
            streams: config
                .ablation
                .streams()
                .iter()
                .map(|k| AttentionModule::init(k.input_dim(), &config.attention, rng))
                .collect(),
        }
    }

    fn forward(&self, ablation: Ablation, batch: &[&ObsFeatures]) -> Result<EncoderTrace> {
        let streams = ablation
            .streams()
            .iter()
            .zip(&self.streams)
            .map(|(&kind, module)| module.forward(stream_matrix(batch, kind)?, N_SECTORS))
            .collect::<Result<Vec<_>>>()?;
        let outputs: Vec<&Matrix> = streams.iter().map(|t| &t.output).collect();
        let features = Matrix::hcat(&outputs)?;
        Ok(EncoderTrace { streams, features })
    }

    fn backward(&self, trace: &EncoderTrace, grad_features: &Matrix, grads: &mut Encoder) {
        let widths: Vec<usize> = self.streams.iter().map(AttentionModule::output_dim).collect();
        let parts = grad_features.hsplit(&widths);
        for (((module, t), g), gm) in self.streams.iter().zip(&trace.streams).zip(&parts).zip(&mut grads.streams) {
            module.backward(t, g, gm, false);
        }
    }

    fn validate(&self, config: &NetworkConfig) -> Result<()> {
        let kinds = config.ablation.streams();
        if self.streams.len() != kinds.len() {
            return Err(Error::Shape(format!(
                "{} attention streams but ablation {} needs {}",
                self.streams.len(),
                config.ablation.name(),
                kinds.len()
            )));
        }
        for (m, k) in self.streams.iter().zip(kinds) {
            m.validate()?;
            if m.input_dim() != k.input_dim() || m.dims() != config.attention {
                return Err(Error::Shape(format!("{k:?} stream shape does not match the configuration")));
            }
        }
        Ok(())
    }
}

impl ParamSet for Encoder {
    fn tensors(&self) -> Vec<&[f64]> {
        self.streams.iter().flat_map(|s| s.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.streams.iter_mut().flat_map(|s| s.tensors_mut()).collect()
    }
}

fn output_widths(input: usize, hidden: &[usize], out: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend_from_slice(hidden);
    w.push(out);
    w
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maps output pre-activations to `v = v_max * sigmoid(a0)`, `w = pi * tanh(a1)`.
pub fn bound_action(a0: f64, a1: f64) -> Action {
    Action::new(V_MAX * sigmoid(a0), PI * a1.tanh())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actor {
    pub config: NetworkConfig,
    pub encoder: Encoder,
    pub output: DenseNet,
}

#[derive(Debug, Clone)]
pub struct ActorTrace {
    pub encoder: EncoderTrace,
    pub output: DenseTrace,
    /// Bounded actions, `batch x 2` as (v, w).
    pub actions: Matrix,
}

impl Actor {
    pub fn init(config: NetworkConfig, rng: &mut impl Rng) -> Self {
        let encoder = Encoder::init(&config, rng);
        let output = DenseNet::init(
            &output_widths(config.stream_width(), &config.output_hidden, ACTION_DIM),
            Activation::None,
            rng,
        );
        Self { config, encoder, output }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.encoder.validate(&self.config)?;
        self.output.validate()?;
        if self.output.widths() != output_widths(self.config.stream_width(), &self.config.output_hidden, ACTION_DIM) {
            return Err(Error::Shape("actor output net does not match the configuration".into()));
        }
        Ok(())
    }

    pub fn forward(&self, batch: &[&ObsFeatures]) -> Result<ActorTrace> {
        let encoder = self.encoder.forward(self.config.ablation, batch)?;
        let output = self.output.forward(encoder.features.clone())?;
        let pre = output.output();
        let mut actions = Matrix::zeros(pre.rows, ACTION_DIM);
        for r in 0..pre.rows {
            let a = bound_action(pre.get(r, 0), pre.get(r, 1));
            actions.row_mut(r).copy_from_slice(&a.to_array());
        }
        Ok(ActorTrace { encoder, output, actions })
    }

    /// Deterministic action for one observation.
    pub fn act(&self, obs: &ObsFeatures) -> Result<Action> {
        let t = self.forward(&[obs])?;
        Ok(Action::new(t.actions.get(0, 0), t.actions.get(0, 1)))
    }

    /// Accumulates parameter gradients for upstream `grad_actions` on the
    /// bounded actions.
    pub fn backward(&self, trace: &ActorTrace, grad_actions: &Matrix, grads: &mut Actor) {
        self.backward_penalized(trace, grad_actions, 0.0, grads);
    }

    /// Like [`Actor::backward`], with `pre_scale * a_pre` added to the
    /// gradient of each pre-squash output. That is the gradient of
    /// `pre_scale / 2 * sum(a_pre^2)`, which keeps the squashing functions
    /// out of saturation.
    pub fn backward_penalized(&self, trace: &ActorTrace, grad_actions: &Matrix, pre_scale: f64, grads: &mut Actor) {
        let pre = trace.output.output();
        let mut g = Matrix::zeros(pre.rows, ACTION_DIM);
        for r in 0..pre.rows {
            let (a0, a1) = (pre.get(r, 0), pre.get(r, 1));
            let s = sigmoid(a0);
            let t = a1.tanh();
            g.row_mut(r)[0] = grad_actions.get(r, 0) * V_MAX * s * (1.0 - s) + pre_scale * a0;
            g.row_mut(r)[1] = grad_actions.get(r, 1) * PI * (1.0 - t * t) + pre_scale * a1;
        }
        let d_features = self.output.backward(&trace.output, &g, &mut grads.output);
        self.encoder.backward(&trace.encoder, &d_features, &mut grads.encoder);
    }
}

impl ParamSet for Actor {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.encoder.tensors();
        t.extend(self.output.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.encoder.tensors_mut();
        t.extend(self.output.tensors_mut());
        t
    }
}

/// Q-network; the action joins the stream features at the output-net input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    pub config: NetworkConfig,
    pub encoder: Encoder,
    pub output: DenseNet,
}

#[derive(Debug, Clone)]
pub struct CriticTrace {
    pub encoder: EncoderTrace,
    pub output: DenseTrace,
}

impl CriticTrace {
    pub fn q(&self) -> &Matrix {
        self.output.output()
    }
}

impl Critic {
    pub fn init(config: NetworkConfig, rng: &mut impl Rng) -> Self {
        let encoder = Encoder::init(&config, rng);
        let output = DenseNet::init(
            &output_widths(config.stream_width() + ACTION_DIM, &config.output_hidden, 1),
            Activation::None,
            rng,
        );
        Self { config, encoder, output }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.encoder.validate(&self.config)?;
        self.output.validate()?;
        if self.output.widths() != output_widths(self.config.stream_width() + ACTION_DIM, &self.config.output_hidden, 1) {
            return Err(Error::Shape("critic output net does not match the configuration".into()));
        }
        Ok(())
    }

    pub fn forward(&self, batch: &[&ObsFeatures], actions: &Matrix) -> Result<CriticTrace> {
        let encoder = self.encode(batch)?;
        let output = self.head(&encoder, actions)?;
        Ok(CriticTrace { encoder, output })
    }

    /// Attention streams only; the result can be reused for several actions.
    pub fn encode(&self, batch: &[&ObsFeatures]) -> Result<EncoderTrace> {
        self.encoder.forward(self.config.ablation, batch)
    }

    /// Output network on encoded observations and an action batch.
    pub fn head(&self, encoder: &EncoderTrace, actions: &Matrix) -> Result<DenseTrace> {
        if actions.rows != encoder.features.rows || actions.cols != ACTION_DIM {
            return Err(Error::Shape("critic actions must be batch x 2".into()));
        }
        self.output.forward(Matrix::hcat(&[&encoder.features, actions])?)
    }

    pub fn q_value(&self, obs: &ObsFeatures, action: Action) -> Result<f64> {
        let t = self.forward(&[obs], &Matrix::row_vector(action.to_array().to_vec()))?;
        Ok(t.q().data[0])
    }

    /// Accumulates parameter gradients and returns the gradient with
    /// respect to the action input.
    pub fn backward(&self, trace: &CriticTrace, grad_q: &Matrix, grads: &mut Critic) -> Matrix {
        self.backward_parts(&trace.encoder, &trace.output, grad_q, grads)
    }

    pub fn backward_parts(&self, encoder: &EncoderTrace, head: &DenseTrace, grad_q: &Matrix, grads: &mut Critic) -> Matrix {
        let d_input = self.output.backward(head, grad_q, &mut grads.output);
        let mut parts = d_input.hsplit(&[self.config.stream_width(), ACTION_DIM]);
        self.encoder.backward(encoder, &parts[0], &mut grads.encoder);
        parts.pop().unwrap()
    }

    /// Gradient of `sum(grad_q * Q)` with respect to the action input only.
    pub fn action_gradient(&self, head: &DenseTrace, grad_q: &Matrix) -> Matrix {
        let mut scratch = self.output.clone();
        scratch.fill(0.0);
        let d_input = self.output.backward(head, grad_q, &mut scratch);
        d_input.hsplit(&[self.config.stream_width(), ACTION_DIM]).pop().unwrap()
    }
}

impl ParamSet for Critic {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.encoder.tensors();
        t.extend(self.output.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.encoder.tensors_mut();
        t.extend(self.output.tensors_mut());
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn features(seed: u64) -> ObsFeatures {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = |n: usize| (0..n).map(|_| rng.random_range(-3.0f32..3.0)).collect::<Vec<f32>>();
        ObsFeatures {
            scan_xy: v(360),
            prev_scan_xy: v(360),
            tagd: v(120),
            waypoints: v(10).try_into().unwrap(),
        }
    }

    #[test]
    fn zero_preactivation_maps_to_half_speed() {
        let a = bound_action(0.0, 0.0);
        assert_eq!((a.v, a.w), (0.5, 0.0));
    }

    #[test]
    fn outputs_stay_bounded() {
        for (k, ablation) in Ablation::ALL.into_iter().enumerate() {
            let mut actor = Actor::init(NetworkConfig::reduced(ablation), &mut ChaCha8Rng::seed_from_u64(k as u64));
            actor.scale(40.0);
            for s in 0..5 {
                let a = actor.act(&features(s)).unwrap();
                assert!((0.0..=1.0).contains(&a.v) && (-PI..=PI).contains(&a.w));
            }
        }
    }

    #[test]
    fn zero_critic_is_zero() {
        let mut critic = Critic::init(NetworkConfig::reduced(Ablation::None), &mut ChaCha8Rng::seed_from_u64(0));
        critic.fill(0.0);
        assert_eq!(critic.q_value(&features(1), Action::new(0.3, 0.1)).unwrap(), 0.0);
    }

    #[test]
    fn critic_separates_actions() {
        let critic = Critic::init(NetworkConfig::reduced(Ablation::None), &mut ChaCha8Rng::seed_from_u64(2));
        let f = features(3);
        let a = critic.q_value(&f, Action::new(0.2, -1.0)).unwrap();
        let b = critic.q_value(&f, Action::new(0.9, 1.0)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn full_widths() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let actor = Actor::init(NetworkConfig::full(Ablation::None), &mut rng);
        assert_eq!(actor.encoder.streams[0].embedding.widths(), vec![14, 256, 128, 64]);
        assert_eq!(actor.encoder.streams[1].embedding.widths(), vec![22, 256, 128, 64]);
        assert_eq!(actor.encoder.streams[0].score.widths(), vec![64, 60, 50, 1]);
        assert_eq!(actor.encoder.streams[0].feature.widths(), vec![64, 80, 50, 30]);
        assert_eq!(actor.output.widths(), vec![60, 128, 64, 64, 2]);
        let critic = Critic::init(NetworkConfig::full(Ablation::None), &mut rng);
        assert_eq!(critic.output.widths(), vec![62, 128, 64, 64, 1]);
        actor.validate().unwrap();
        critic.validate().unwrap();
    }

    #[test]
    fn init_within_fan_in_bound() {
        let actor = Actor::init(NetworkConfig::reduced(Ablation::None), &mut ChaCha8Rng::seed_from_u64(9));
        let nets = actor.encoder.streams.iter().flat_map(|s| [&s.embedding, &s.score, &s.feature]).chain([&actor.output]);
        for net in nets {
            for l in &net.layers {
                let b = 1.0 / (l.in_dim as f64).sqrt();
                assert!(l.weights.iter().all(|w| w.abs() <= b));
                assert!(l.bias.iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn missing_stream_features_are_rejected() {
        let actor = Actor::init(NetworkConfig::reduced(Ablation::A3), &mut ChaCha8Rng::seed_from_u64(1));
        let mut f = features(0);
        f.prev_scan_xy.clear();
        assert!(matches!(actor.act(&f), Err(Error::Shape(_))));
    }
}
