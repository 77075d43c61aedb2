use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dense::{Activation, DenseNet, DenseTrace};
use super::matrix::{axpy, dot, Matrix};
use super::params::ParamSet;
use crate::error::{Error, Result};

/// Layer widths of one attention module, excluding the input width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionDims {
    /// Embedding widths; the last entry is the embedding size.
    pub embedding: Vec<usize>,
    /// Hidden widths of the score net (its output is a scalar).
    pub score_hidden: Vec<usize>,
    /// Feature widths; the last entry is the stream output size.
    pub feature: Vec<usize>,
}

impl AttentionDims {
    pub fn full() -> Self {
        Self {
            embedding: vec![256, 128, 64],
            score_hidden: vec![60, 50],
            feature: vec![80, 50, 30],
        }
    }

    pub fn output_dim(&self) -> usize {
        *self.feature.last().expect("feature widths are non-empty")
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding.is_empty() || self.feature.is_empty() {
            return Err(Error::Config("embedding and feature widths must be non-empty".into()));
        }
        if self.embedding.iter().chain(&self.score_hidden).chain(&self.feature).any(|&w| w == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// Location-based attention: every input is weighted by a score computed
/// from its own embedding, and the output is the weighted feature sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionModule {
    pub embedding: DenseNet,
    pub score: DenseNet,
    pub feature: DenseNet,
}

#[derive(Debug, Clone)]
pub struct AttentionTrace {
    pub n_inputs: usize,
    pub embedding: DenseTrace,
    pub score: DenseTrace,
    pub feature: DenseTrace,
    /// Softmax weights, `batch x n_inputs`.
    pub weights: Matrix,
    /// `batch x feature_dim`.
    pub output: Matrix,
}

fn widths(input: usize, rest: &[usize]) -> Vec<usize> {
    let mut w = vec![input];
    w.extend_from_slice(rest);
    w
}

impl AttentionModule {
    pub fn init(input_dim: usize, dims: &AttentionDims, rng: &mut impl Rng) -> Self {
        let e_dim = *dims.embedding.last().unwrap();
        let mut score = dims.score_hidden.clone();
        score.push(1);
        Self {
            embedding: DenseNet::init(&widths(input_dim, &dims.embedding), Activation::Relu, rng),
            score: DenseNet::init(&widths(e_dim, &score), Activation::None, rng),
            feature: DenseNet::init(&widths(e_dim, &dims.feature), Activation::None, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.embedding.in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.feature.out_dim()
    }

    pub fn dims(&self) -> AttentionDims {
        let s = self.score.widths();
        AttentionDims {
            embedding: self.embedding.widths()[1..].to_vec(),
            score_hidden: s[1..s.len() - 1].to_vec(),
            feature: self.feature.widths()[1..].to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.embedding.validate()?;
        self.score.validate()?;
        self.feature.validate()?;
        let e = self.embedding.out_dim();
        if self.score.in_dim() != e || self.feature.in_dim() != e || self.score.out_dim() != 1 {
            return Err(Error::Shape("score/feature nets must consume the embedding and score must be scalar".into()));
        }
        Ok(())
    }

    /// `u` stacks `n_inputs` consecutive rows per batch item.
    pub fn forward(&self, u: Matrix, n_inputs: usize) -> Result<AttentionTrace> {
        if n_inputs == 0 || u.rows == 0 {
            return Err(Error::Usage("attention over an empty input set".into()));
        }
        if u.rows % n_inputs != 0 {
            return Err(Error::Shape(format!("{} rows are not a multiple of {n_inputs}", u.rows)));
        }
        let batch = u.rows / n_inputs;
        let embedding = self.embedding.forward(u)?;
        let score = self.score.forward(embedding.output().clone())?;
        let feature = self.feature.forward(embedding.output().clone())?;

        let s = &score.output().data;
        let f = feature.output();
        let mut weights = Matrix::zeros(batch, n_inputs);
        let mut output = Matrix::zeros(batch, f.cols);
        for b in 0..batch {
            let scores = &s[b * n_inputs..(b + 1) * n_inputs];
            let w = weights.row_mut(b);
            softmax_into(scores, w);
            let y = output.row_mut(b);
            for (i, &wi) in w.iter().enumerate() {
                axpy(wi, f.row(b * n_inputs + i), y);
            }
        }
        Ok(AttentionTrace {
            n_inputs,
            embedding,
            score,
            feature,
            weights,
            output,
        })
    }

    /// Accumulates parameter gradients for upstream `grad_output`
    /// (`batch x feature_dim`). The input gradient is only formed when
    /// `need_input` is set.
    pub fn backward(
        &self,
        trace: &AttentionTrace,
        grad_output: &Matrix,
        grads: &mut AttentionModule,
        need_input: bool,
    ) -> Option<Matrix> {
        let n = trace.n_inputs;
        let batch = trace.weights.rows;
        let f = trace.feature.output();
        let mut d_feature = Matrix::zeros(f.rows, f.cols);
        let mut d_score = Matrix::zeros(f.rows, 1);
        for b in 0..batch {
            let w = trace.weights.row(b);
            let dy = grad_output.row(b);
            let mut dw = vec![0.0; n];
            for i in 0..n {
                let row = b * n + i;
                axpy(w[i], dy, d_feature.row_mut(row));
                dw[i] = dot(f.row(row), dy);
            }
            let mean: f64 = w.iter().zip(&dw).map(|(a, c)| a * c).sum();
            for i in 0..n {
                d_score.data[b * n + i] = w[i] * (dw[i] - mean);
            }
        }
        let mut d_embed = self.feature.backward(&trace.feature, &d_feature, &mut grads.feature);
        let from_score = self.score.backward(&trace.score, &d_score, &mut grads.score);
        for (a, c) in d_embed.data.iter_mut().zip(&from_score.data) {
            *a += c;
        }
        if need_input {
            Some(self.embedding.backward(&trace.embedding, &d_embed, &mut grads.embedding))
        } else {
            self.embedding.accumulate_grads(&trace.embedding, &d_embed, &mut grads.embedding);
            None
        }
    }
}

/// Softmax with max subtraction.
pub fn softmax_into(scores: &[f64], out: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

impl ParamSet for AttentionModule {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.embedding.tensors();
        t.extend(self.score.tensors());
        t.extend(self.feature.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.embedding.tensors_mut();
        t.extend(self.score.tensors_mut());
        t.extend(self.feature.tensors_mut());
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> AttentionModule {
        let dims = AttentionDims {
            embedding: vec![6, 5],
            score_hidden: vec![4],
            feature: vec![4, 3],
        };
        AttentionModule::init(4, &dims, &mut ChaCha8Rng::seed_from_u64(3))
    }

    #[test]
    fn singleton_gets_full_weight() {
        let m = small();
        let u = Matrix::row_vector(vec![0.2, -0.4, 1.0, 0.5]);
        let t = m.forward(u.clone(), 1).unwrap();
        assert_eq!(t.weights.data, vec![1.0]);
        let direct = m.feature.forward(m.embedding.forward(u).unwrap().output().clone()).unwrap();
        assert_eq!(t.output.data, direct.output().data);
    }

    #[test]
    fn identical_inputs_split_evenly() {
        let m = small();
        let row = vec![0.2, -0.4, 1.0, 0.5];
        let u = Matrix::from_vec(2, 4, [row.clone(), row].concat()).unwrap();
        let t = m.forward(u, 2).unwrap();
        assert_eq!(t.weights.data, vec![0.5, 0.5]);
    }

    #[test]
    fn empty_set_is_usage_error() {
        let m = small();
        assert!(matches!(m.forward(Matrix::zeros(0, 4), 1), Err(Error::Usage(_))));
        assert!(matches!(m.forward(Matrix::zeros(3, 4), 0), Err(Error::Usage(_))));
    }

    #[test]
    fn softmax_survives_large_scores() {
        let mut out = [0.0; 3];
        softmax_into(&[1000.0, 999.0, -1000.0], &mut out);
        assert!(out.iter().all(|v| v.is_finite()));
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dims_round_trip() {
        assert_eq!(
            small().dims(),
            AttentionDims {
                embedding: vec![6, 5],
                score_hidden: vec![4],
                feature: vec![4, 3],
            }
        );
    }
}
