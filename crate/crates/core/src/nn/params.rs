use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anything made of flat `f64` parameter tensors in a fixed order.
///
/// Gradients use the same type as the parameters they belong to, so a
/// gradient set is shape-congruent by construction.
pub trait ParamSet {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn shapes(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.len()).collect()
    }

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.fill(value);
        }
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    fn squared_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum()
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }
}

/// Gradient container, shape-identical to the parameter set `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<P>(pub P);

impl<P: ParamSet + Clone> GradientSet<P> {
    pub fn zeros_like(params: &P) -> Self {
        let mut g = params.clone();
        g.fill(0.0);
        Self(g)
    }
}

/// Polyak averaging `target <- tau * online + (1 - tau) * target`.
pub fn soft_update<P: ParamSet>(target: &mut P, online: &P, tau: f64) {
    for (t, o) in target.tensors_mut().into_iter().zip(online.tensors()) {
        for (tv, ov) in t.iter_mut().zip(o) {
            *tv = tau * ov + (1.0 - tau) * *tv;
        }
    }
}

/// Euclidean distance between two congruent parameter sets.
pub fn param_distance<P: ParamSet>(a: &P, b: &P) -> f64 {
    a.tensors()
        .iter()
        .zip(b.tensors())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam optimizer state for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub params: AdamParams,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<P: ParamSet>(params: AdamParams, like: &P) -> Self {
        let zeros: Vec<Vec<f64>> = like.shapes().into_iter().map(|n| vec![0.0; n]).collect();
        Self {
            params,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Gradient-descent step on `target` using `grad`.
    pub fn update<P: ParamSet>(&mut self, target: &mut P, grad: &GradientSet<P>) -> Result<()> {
        let shapes = target.shapes();
        if shapes != grad.0.shapes() || shapes.len() != self.m.len() {
            return Err(Error::Shape("optimizer state does not match parameters".into()));
        }
        self.step += 1;
        let AdamParams { lr, beta1, beta2, eps } = self.params;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in target
            .tensors_mut()
            .into_iter()
            .zip(grad.0.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                p[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
            }
        }
        Ok(())
    }
}
