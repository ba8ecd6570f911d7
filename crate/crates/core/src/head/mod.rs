//! Dirichlet prediction head.
//!
//! Raw scores `z = Aᵀx + b` are mapped to Dirichlet parameters by
//!
//! ```text
//! α̂ = α₀⁰·softmax(z) + n·softmax(W z)
//! ```
//!
//! so that `Σ α̂ = α₀⁰ + n` for any number of observed responses `n`, the same
//! parameter sum a true posterior has. A linear score map on feature vectors
//! stands in for a visual backbone.

mod chernoff;
mod train;

pub use chernoff::{
    chernoff, chernoff_grad, chernoff_grad_raw, chernoff_raw, BHATTACHARYYA_TAU,
};
pub use train::{train_from, train_head, training_loss, TrainConfig, TrainExample, TrainReport};

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::softmax;
use crate::types::DirichletParams;

#[derive(Debug, Clone, PartialEq)]
pub struct HeadModel {
    feature_dim: usize,
    categories: usize,
    /// Score map `A`, row-major `d × (C + 1)`.
    pub score_weights: Vec<f64>,
    /// Score bias, length `C + 1`.
    pub score_bias: Vec<f64>,
    /// Mixing matrix `W`, row-major `(C + 1) × (C + 1)`.
    pub mix: Vec<f64>,
    alpha0_sum: f64,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct Forward {
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    pub sigma: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl HeadModel {
    /// Zero score map and zero bias with `W = I`: predicts the uniform prior
    /// scaled to `α₀⁰ + n`.
    pub fn zeros(feature_dim: usize, categories: usize, alpha0_sum: f64) -> Result<Self> {
        let mix = (0..categories * categories)
            .map(|i| if i / categories == i % categories { 1.0 } else { 0.0 })
            .collect();
        Self::from_parts(
            feature_dim,
            categories,
            alloc::vec![0.0; feature_dim * categories],
            alloc::vec![0.0; categories],
            mix,
            alpha0_sum,
        )
    }

    pub fn from_parts(
        feature_dim: usize,
        categories: usize,
        score_weights: Vec<f64>,
        score_bias: Vec<f64>,
        mix: Vec<f64>,
        alpha0_sum: f64,
    ) -> Result<Self> {
        if categories < 2 {
            return Err(Error::InvalidArgument("head needs at least two categories"));
        }
        let expect = |expected: usize, actual: usize| {
            if expected == actual {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected, actual })
            }
        };
        expect(feature_dim * categories, score_weights.len())?;
        expect(categories, score_bias.len())?;
        expect(categories * categories, mix.len())?;
        if !(alpha0_sum.is_finite() && alpha0_sum > 0.0) {
            return Err(Error::InvalidArgument("alpha0_sum must be positive"));
        }
        if score_weights.iter().chain(&score_bias).chain(&mix).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("head parameters"));
        }
        Ok(Self {
            feature_dim,
            categories,
            score_weights,
            score_bias,
            mix,
            alpha0_sum,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn alpha0_sum(&self) -> f64 {
        self.alpha0_sum
    }

    pub fn parameter_count(&self) -> usize {
        self.score_weights.len() + self.score_bias.len() + self.mix.len()
    }

    fn check_features(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: features.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        Ok(())
    }

    pub(crate) fn forward_full(&self, features: &[f64], n: f64) -> Forward {
        let k = self.categories;
        let mut z = self.score_bias.clone();
        for (x, row) in features.iter().zip(self.score_weights.chunks_exact(k)) {
            for (zk, a) in z.iter_mut().zip(row) {
                *zk += x * a;
            }
        }
        let wz: Vec<f64> = self
            .mix
            .chunks_exact(k)
            .map(|row| row.iter().zip(&z).map(|(w, v)| w * v).sum())
            .collect();
        let s = softmax(&z);
        let sigma = softmax(&wz);
        let alpha = s
            .iter()
            .zip(&sigma)
            .map(|(sk, gk)| self.alpha0_sum * sk + n * gk)
            .collect();
        Forward { z, s, sigma, alpha }
    }
}

/// `α̂ = α₀⁰·softmax(z) + n·softmax(Wz)`.
pub fn head_forward(model: &HeadModel, features: &[f64], n: u64) -> Result<DirichletParams> {
    model.check_features(features)?;
    DirichletParams::new(model.forward_full(features, n as f64).alpha)
}

/// Prediction at a chosen response depth; `n = 0` gives the learned prior.
pub fn predict(model: &HeadModel, features: &[f64], n: u64) -> Result<DirichletParams> {
    head_forward(model, features, n)
}
