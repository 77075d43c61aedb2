#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stnav::nn::{Activation, Actor, Critic, DenseNet, DenseTrace, Matrix, ObsFeatures, ParamSet};
use stnav::nn::model::{Encoder, EncoderTrace};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_features(rng: &mut impl Rng) -> ObsFeatures {
    let mut v = |n: usize| -> Vec<f32> { (0..n).map(|_| rng.random_range(-3.0f32..3.0)).collect() };
    ObsFeatures {
        scan_xy: v(360),
        prev_scan_xy: v(360),
        tagd: v(120),
        waypoints: v(10).try_into().unwrap(),
    }
}

/// Largest relative error between two gradients, `|a - n| / max(|a|, |n|, floor)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> (f64, usize) {
    analytic
        .iter()
        .zip(numeric)
        .enumerate()
        .map(|(i, (a, n))| ((a - n).abs() / a.abs().max(n.abs()).max(floor), i))
        .fold((0.0, 0), |acc, x| if x.0 > acc.0 { x } else { acc })
}

/// Central differences of `loss` over every parameter of `net`.
pub fn numeric_gradient<P: ParamSet + Clone>(net: &P, eps: f64, loss: impl Fn(&P) -> f64) -> Vec<f64> {
    let mut probe = net.clone();
    let shapes = net.shapes();
    let mut out = Vec::with_capacity(net.param_count());
    for (t, &len) in shapes.iter().enumerate() {
        for i in 0..len {
            let orig = probe.tensors()[t][i];
            probe.tensors_mut()[t][i] = orig + eps;
            let plus = loss(&probe);
            probe.tensors_mut()[t][i] = orig - eps;
            let minus = loss(&probe);
            probe.tensors_mut()[t][i] = orig;
            out.push((plus - minus) / (2.0 * eps));
        }
    }
    out
}

/// Actor loss `sum(c * actions)` and its analytic gradient.
pub fn actor_check(actor: &Actor, batch: &[&ObsFeatures], weights: &Matrix, eps: f64) -> (Vec<f64>, Vec<f64>) {
    let trace = actor.forward(batch).unwrap();
    let mut grads = actor.clone();
    grads.fill(0.0);
    actor.backward(&trace, weights, &mut grads);
    let loss = |a: &Actor| -> f64 {
        let t = a.forward(batch).unwrap();
        t.actions.data.iter().zip(&weights.data).map(|(x, c)| x * c).sum()
    };
    (grads.flatten(), numeric_gradient(actor, eps, loss))
}

/// Critic loss `sum(c * Q)`; returns parameter gradients and action gradients.
pub fn critic_check(
    critic: &Critic,
    batch: &[&ObsFeatures],
    actions: &Matrix,
    weights: &Matrix,
    eps: f64,
) -> ((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>)) {
    let trace = critic.forward(batch, actions).unwrap();
    let mut grads = critic.clone();
    grads.fill(0.0);
    let d_action = critic.backward(&trace, weights, &mut grads);
    let q_loss = |c: &Critic, a: &Matrix| -> f64 {
        let t = c.forward(batch, a).unwrap();
        t.q().data.iter().zip(&weights.data).map(|(x, w)| x * w).sum()
    };
    let numeric = numeric_gradient(critic, eps, |c| q_loss(c, actions));
    let mut numeric_action = Vec::new();
    for i in 0..actions.data.len() {
        let mut plus = actions.clone();
        plus.data[i] += eps;
        let mut minus = actions.clone();
        minus.data[i] -= eps;
        numeric_action.push((q_loss(critic, &plus) - q_loss(critic, &minus)) / (2.0 * eps));
    }
    ((grads.flatten(), numeric), (d_action.data, numeric_action))
}

/// Smallest `|z|` over all rectified pre-activations recorded in `trace`.
pub fn min_relu_margin(net: &DenseNet, trace: &DenseTrace) -> f64 {
    let mut m = f64::INFINITY;
    for (k, layer) in net.layers.iter().enumerate() {
        let rectified = k + 1 < net.layers.len() || net.output_activation == Activation::Relu;
        if !rectified {
            continue;
        }
        let x = &trace.values[k];
        for r in 0..x.rows {
            for o in 0..layer.out_dim {
                let w = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let z = layer.bias[o] + w.iter().zip(x.row(r)).map(|(a, b)| a * b).sum::<f64>();
                m = m.min(z.abs());
            }
        }
    }
    m
}

fn encoder_margin(enc: &Encoder, trace: &EncoderTrace) -> f64 {
    enc.streams
        .iter()
        .zip(&trace.streams)
        .map(|(s, t)| {
            min_relu_margin(&s.embedding, &t.embedding)
                .min(min_relu_margin(&s.score, &t.score))
                .min(min_relu_margin(&s.feature, &t.feature))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Distance of the actor's and critic's rectifiers from their kinks for
/// this batch; central differences are only meaningful when it exceeds the
/// perturbation reach.
pub fn kink_margin(actor: &Actor, critic: &Critic, batch: &[&ObsFeatures], actions: &Matrix) -> f64 {
    let ta = actor.forward(batch).unwrap();
    let tc = critic.forward(batch, actions).unwrap();
    encoder_margin(&actor.encoder, &ta.encoder)
        .min(min_relu_margin(&actor.output, &ta.output))
        .min(encoder_margin(&critic.encoder, &tc.encoder))
        .min(min_relu_margin(&critic.output, &tc.output))
}
