//! Mini-batch Adam training of the head against inferred posteriors.
//!
//! The objective is the weighted mean Chernoff distance
//! `Σ w_i J(α̂_i, α_i) / Σ w_i`, predictions first, with each example's `α̂`
//! evaluated at that example's own response count. The learning rate ramps up
//! linearly over `warmup_iters` optimizer steps.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::chernoff::{chernoff_grad_into, chernoff_unchecked};
use super::HeadModel;
use crate::error::{Error, Result};
use crate::math::{ceil, sqrt};
use crate::rng::derived_rng;
use crate::types::DirichletParams;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub features: Vec<f64>,
    pub target: DirichletParams,
    pub n: u64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Linear warm-up length in optimizer steps; `None` means `⌈2/(1-β₂)⌉`.
    pub warmup_iters: Option<usize>,
    pub batch_size: usize,
    pub epochs: usize,
    pub tau: f64,
    /// Standard deviation of the initial score map.
    pub init_scale: f64,
    /// Keep the epoch with the lowest validation loss instead of the last one.
    pub select_best: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            beta1: 0.9,
            beta2: 0.995,
            epsilon: 1e-8,
            warmup_iters: None,
            batch_size: 256,
            epochs: 300,
            tau: 0.5,
            init_scale: 0.01,
            select_best: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn warmup(&self) -> usize {
        self.warmup_iters
            .unwrap_or_else(|| ceil(2.0 / (1.0 - self.beta2)) as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be positive"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidArgument("tau must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidArgument("Adam betas must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainReport {
    pub initial_train_loss: f64,
    pub initial_val_loss: f64,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch (1-based) the returned model comes from; 0 is the initialization.
    pub selected_epoch: usize,
    pub steps: usize,
}

/// Weighted mean Chernoff distance of the model over a set of examples.
pub fn training_loss(model: &HeadModel, examples: &[TrainExample], tau: f64) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, ex) in examples.iter().enumerate() {
        check_example(model, ex)?;
        let fwd = model.forward_full(&ex.features, ex.n as f64);
        let j = chernoff_unchecked(&fwd.alpha, ex.target.alpha(), tau);
        if !j.is_finite() {
            return Err(Error::NanLoss {
                iteration: 0,
                example: i,
            });
        }
        num += ex.weight * j;
        den += ex.weight;
    }
    if den <= 0.0 {
        return Err(Error::InvalidArgument("example weights sum to zero"));
    }
    Ok(num / den)
}

fn check_example(model: &HeadModel, ex: &TrainExample) -> Result<()> {
    model.check_features(&ex.features)?;
    if ex.target.len() != model.categories() {
        return Err(Error::DimensionMismatch {
            expected: model.categories(),
            actual: ex.target.len(),
        });
    }
    if !(ex.weight.is_finite() && ex.weight >= 0.0) {
        return Err(Error::InvalidArgument("example weights must be finite and non-negative"));
    }
    Ok(())
}

struct Gradient {
    weights: Vec<f64>,
    bias: Vec<f64>,
    mix: Vec<f64>,
}

impl Gradient {
    fn zeros(model: &HeadModel) -> Self {
        Self {
            weights: alloc::vec![0.0; model.score_weights.len()],
            bias: alloc::vec![0.0; model.score_bias.len()],
            mix: alloc::vec![0.0; model.mix.len()],
        }
    }

    fn clear(&mut self) {
        for v in self.weights.iter_mut().chain(&mut self.bias).chain(&mut self.mix) {
            *v = 0.0;
        }
    }
}

/// Adds `scale · ∂J/∂θ` for one example to `grad` and returns `J`.
fn accumulate(
    model: &HeadModel,
    ex: &TrainExample,
    tau: f64,
    scale: f64,
    grad: &mut Gradient,
    scratch: &mut [f64],
) -> f64 {
    let k = model.categories();
    let n = ex.n as f64;
    let fwd = model.forward_full(&ex.features, n);
    let j = chernoff_unchecked(&fwd.alpha, ex.target.alpha(), tau);
    chernoff_grad_into(&fwd.alpha, ex.target.alpha(), tau, scratch);

    // Through s = softmax(z): dz = s ⊙ (ds - ⟨s, ds⟩), ds = α₀⁰ g.
    let s_dot: f64 = fwd.s.iter().zip(scratch.iter()).map(|(s, g)| s * g).sum();
    let mut dz: Vec<f64> = fwd
        .s
        .iter()
        .zip(scratch.iter())
        .map(|(s, g)| model.alpha0_sum() * s * (g - s_dot))
        .collect();
    // Through σ = softmax(Wz): du = σ ⊙ (dσ - ⟨σ, dσ⟩), dσ = n g.
    if n > 0.0 {
        let sig_dot: f64 = fwd.sigma.iter().zip(scratch.iter()).map(|(s, g)| s * g).sum();
        for (row, (sig, g)) in fwd.sigma.iter().zip(scratch.iter()).enumerate() {
            let du = n * sig * (g - sig_dot);
            let w_row = &model.mix[row * k..(row + 1) * k];
            let dw_row = &mut grad.mix[row * k..(row + 1) * k];
            for i in 0..k {
                dw_row[i] += scale * du * fwd.z[i];
                dz[i] += w_row[i] * du;
            }
        }
    }
    for (b, d) in grad.bias.iter_mut().zip(&dz) {
        *b += scale * d;
    }
    for (x, row) in ex.features.iter().zip(grad.weights.chunks_exact_mut(k)) {
        for (a, d) in row.iter_mut().zip(&dz) {
            *a += scale * x * d;
        }
    }
    j
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
}

impl Adam {
    fn new(len: usize) -> Self {
        Self {
            m: alloc::vec![0.0; len],
            v: alloc::vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, cfg: &TrainConfig, params: &mut [&mut [f64]], grads: [&[f64]; 3]) {
        self.t += 1;
        let warmup = cfg.warmup();
        let lr = if warmup == 0 {
            cfg.learning_rate
        } else {
            cfg.learning_rate * (self.t as f64 / warmup as f64).min(1.0)
        };
        let bc1 = 1.0 - libm::pow(cfg.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(cfg.beta2, self.t as f64);
        let mut idx = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            for (pi, gi) in p.iter_mut().zip(g) {
                let m = &mut self.m[idx];
                let v = &mut self.v[idx];
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gi;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gi * gi;
                *pi -= lr * (*m / bc1) / (sqrt(*v / bc2) + cfg.epsilon);
                idx += 1;
            }
        }
    }
}

/// Trains a fresh head. Model selection uses `val` when it is non-empty and
/// the training set otherwise.
pub fn train_head(
    train: &[TrainExample],
    val: &[TrainExample],
    alpha0_sum: f64,
    cfg: &TrainConfig,
) -> Result<(HeadModel, TrainReport)> {
    cfg.validate()?;
    let first = train.first().ok_or(Error::EmptyInput("training set"))?;
    let (dim, categories) = (first.features.len(), first.target.len());

    let mut init = derived_rng(cfg.seed, "head-init", 0);
    let mut model = HeadModel::zeros(dim, categories, alpha0_sum)?;
    for a in &mut model.score_weights {
        *a = cfg.init_scale * init.sample::<f64, _>(StandardNormal);
    }
    for ex in train.iter().chain(val) {
        check_example(&model, ex)?;
    }
    train_from(model, train, val, cfg)
}

/// Continues training from an existing model.
pub fn train_from(
    mut model: HeadModel,
    train: &[TrainExample],
    val: &[TrainExample],
    cfg: &TrainConfig,
) -> Result<(HeadModel, TrainReport)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    let selection = if val.is_empty() { train } else { val };
    let mut report = TrainReport {
        initial_train_loss: training_loss(&model, train, cfg.tau)?,
        initial_val_loss: training_loss(&model, selection, cfg.tau)?,
        ..TrainReport::default()
    };
    let mut best = (report.initial_val_loss, model.clone(), 0);

    let mut adam = Adam::new(model.parameter_count());
    let mut grad = Gradient::zeros(&model);
    let mut scratch = alloc::vec![0.0; model.categories()];
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.epochs {
        if cfg.batch_size < train.len() {
            order.shuffle(&mut derived_rng(cfg.seed, "head-epoch", epoch as u64));
        }
        for batch in order.chunks(cfg.batch_size) {
            grad.clear();
            let weight: f64 = batch.iter().map(|&i| train[i].weight).sum();
            if weight <= 0.0 {
                continue;
            }
            for &i in batch {
                let ex = &train[i];
                let j = accumulate(&model, ex, cfg.tau, ex.weight / weight, &mut grad, &mut scratch);
                if !j.is_finite() || scratch.iter().any(|g| !g.is_finite()) {
                    return Err(Error::NanLoss {
                        iteration: adam.t,
                        example: i,
                    });
                }
            }
            let HeadModel {
                score_weights,
                score_bias,
                mix,
                ..
            } = &mut model;
            adam.step(
                cfg,
                &mut [score_weights.as_mut_slice(), score_bias.as_mut_slice(), mix.as_mut_slice()],
                [&grad.weights, &grad.bias, &grad.mix],
            );
        }
        let train_loss = training_loss(&model, train, cfg.tau).map_err(|e| match e {
            Error::NanLoss { example, .. } => Error::NanLoss {
                iteration: adam.t,
                example,
            },
            other => other,
        })?;
        let val_loss = training_loss(&model, selection, cfg.tau)?;
        report.train_loss.push(train_loss);
        report.val_loss.push(val_loss);
        if val_loss < best.0 {
            best = (val_loss, model.clone(), epoch);
        }
    }
    report.steps = adam.t;
    if cfg.select_best {
        report.selected_epoch = best.2;
        Ok((best.1, report))
    } else {
        report.selected_epoch = cfg.epochs;
        Ok((model, report))
    }
}
