//! Synthetic crowd simulator.
//!
//! Each task draws `q_t ~ Dirichlet(α₀)`, then `repeats` answers i.i.d. from
//! `Categorical(q_t)` (identical in law to the two-stage solvability and
//! conditional factorization), then a feature vector
//! `x = M·ln(q_t + ε) + N(0, σ²I)` through a fixed seed-derived map `M`.
//! Everything a task needs is drawn from its own stream, in that order.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::math::{ln, softmax};
use crate::rng::{derived_rng, task_rng, RandomStream};
use crate::types::{DirichletParams, ResponseRecord, ResponseSet, SoftLabel, TaskRecord};

/// Offset inside `ln(q + ε)` for the feature map and synthetic predictor.
pub const LOG_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SimConfig {
    pub num_tasks: usize,
    /// Proper category count `C`.
    pub num_proper: usize,
    /// Task-generating Dirichlet parameters, length `C + 1`.
    pub alpha0: Vec<f64>,
    pub repeats: usize,
    pub feature_dim: usize,
    pub feature_noise: f64,
    pub predictor_temperature: f64,
    pub predictor_noise: f64,
    /// Consecutive tasks sharing one group (frame) for grouped splitting.
    pub tasks_per_group: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_tasks: 1000,
            num_proper: 2,
            alpha0: alloc::vec![0.5, 0.5, 0.15],
            repeats: 20,
            feature_dim: 8,
            feature_noise: 0.1,
            predictor_temperature: 1.0,
            predictor_noise: 0.1,
            tasks_per_group: 4,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_tasks == 0 {
            return Err(Error::InvalidArgument("num_tasks must be at least 1"));
        }
        if self.num_proper == 0 {
            return Err(Error::EmptyScheme);
        }
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be at least 1"));
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidArgument("feature_dim must be at least 1"));
        }
        if self.tasks_per_group == 0 {
            return Err(Error::InvalidArgument("tasks_per_group must be at least 1"));
        }
        if !(self.predictor_temperature.is_finite() && self.predictor_temperature > 0.0) {
            return Err(Error::InvalidArgument("predictor_temperature must be positive"));
        }
        if !(self.feature_noise >= 0.0 && self.predictor_noise >= 0.0) {
            return Err(Error::InvalidArgument("noise levels must be non-negative"));
        }
        if self.alpha0.len() != self.num_proper + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.num_proper + 1,
                actual: self.alpha0.len(),
            });
        }
        DirichletParams::new(self.alpha0.clone()).map(|_| ())
    }

    pub fn categories(&self) -> usize {
        self.num_proper + 1
    }

    pub fn task_id(&self, index: usize) -> alloc::string::String {
        format!("t{index:06}")
    }
}

/// Draws from `Dirichlet(α)`. Gamma variates are combined in log space so
/// very small concentrations cannot underflow the whole vector to zero.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &DirichletParams, rng: &mut R) -> SoftLabel {
    let log_gammas: Vec<f64> = alpha
        .alpha()
        .iter()
        .map(|&a| ln_gamma_variate(a, rng))
        .collect();
    let q = softmax(&log_gammas);
    // softmax floors at MIN_POSITIVE; renormalize exactly onto the simplex.
    let sum: f64 = q.iter().sum();
    SoftLabel::from_raw(q.into_iter().map(|v| v / sum).collect())
}

fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        return ln(g);
    }
    // G(a) = G(a + 1) · U^(1/a)
    let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    ln(g) + ln(u) / shape
}

/// Categorical draw from a soft label by inversion.
pub fn sample_categorical<R: Rng + ?Sized>(q: &SoftLabel, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let probs = q.as_slice();
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Rounding left u above the cumulative sum: take the last positive entry.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Tasks with ground-truth soft labels, no responses or features yet.
pub fn gen_tasks(cfg: &SimConfig) -> Result<Vec<TaskRecord>> {
    cfg.validate()?;
    let alpha0 = DirichletParams::new(cfg.alpha0.clone())?;
    Ok((0..cfg.num_tasks)
        .map(|i| {
            let mut rng = task_rng(cfg.seed, &cfg.task_id(i));
            new_task(cfg, &alpha0, i, &mut rng)
        })
        .collect())
}

fn new_task(cfg: &SimConfig, alpha0: &DirichletParams, i: usize, rng: &mut RandomStream) -> TaskRecord {
    let mut task = TaskRecord::new(cfg.task_id(i));
    task.group = Some(format!("f{:06}", i / cfg.tasks_per_group));
    task.true_q = Some(sample_dirichlet(alpha0, rng));
    task
}

/// `repeats` i.i.d. answers from the task's ground-truth soft label.
pub fn gen_responses<R: Rng + ?Sized>(
    task: &TaskRecord,
    repeats: usize,
    rng: &mut R,
) -> Result<ResponseSet> {
    let q = task
        .true_q
        .as_ref()
        .ok_or_else(|| Error::MissingTrueLabel(task.task_id.clone()))?;
    Ok((0..repeats)
        .map(|r| ResponseRecord {
            task_id: task.task_id.clone(),
            annotator_id: Some(format!("r{r:03}")),
            answer: sample_categorical(q, rng),
        })
        .collect())
}

/// Fixed linear map from `ln(q + ε)` to feature space, `d × (C + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    dim: usize,
    categories: usize,
    // row-major d × (C + 1)
    matrix: Vec<f64>,
}

impl FeatureMap {
    pub fn from_config(cfg: &SimConfig) -> Self {
        let categories = cfg.categories();
        let mut rng = derived_rng(cfg.seed, "feature-map", 0);
        let scale = 1.0 / crate::math::sqrt(categories as f64);
        let matrix = (0..cfg.feature_dim * categories)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            dim: cfg.feature_dim,
            categories,
            matrix,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// Noise-free image of a soft label.
    pub fn apply(&self, q: &SoftLabel) -> Vec<f64> {
        let logq: Vec<f64> = q.as_slice().iter().map(|v| ln(v + LOG_EPSILON)).collect();
        self.matrix
            .chunks_exact(self.categories)
            .map(|row| row.iter().zip(&logq).map(|(m, l)| m * l).sum())
            .collect()
    }
}

pub fn gen_features<R: Rng + ?Sized>(
    task: &TaskRecord,
    map: &FeatureMap,
    noise: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let q = task
        .true_q
        .as_ref()
        .ok_or_else(|| Error::MissingTrueLabel(task.task_id.clone()))?;
    let mut x = map.apply(q);
    if noise > 0.0 {
        for v in &mut x {
            *v += noise * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(x)
}

/// Full simulated dataset: ground truth, responses and features per task.
pub fn simulate(cfg: &SimConfig) -> Result<Vec<TaskRecord>> {
    cfg.validate()?;
    let alpha0 = DirichletParams::new(cfg.alpha0.clone())?;
    let map = FeatureMap::from_config(cfg);
    (0..cfg.num_tasks)
        .map(|i| {
            let mut rng = task_rng(cfg.seed, &cfg.task_id(i));
            let mut task = new_task(cfg, &alpha0, i, &mut rng);
            task.responses = gen_responses(&task, cfg.repeats, &mut rng)?;
            task.features = Some(gen_features(&task, &map, cfg.feature_noise, &mut rng)?);
            Ok(task)
        })
        .collect()
}

/// Oracle-with-noise stand-in for a trained head:
/// `α̂ = (α₀⁰ + n)·softmax(ln(q + ε)/temperature + N(0, noise²))` with
/// `α₀⁰ = C + 1`.
pub fn synthetic_predictor<R: Rng + ?Sized>(
    task: &TaskRecord,
    n: u64,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<DirichletParams> {
    let q = task
        .true_q
        .as_ref()
        .ok_or_else(|| Error::MissingTrueLabel(task.task_id.clone()))?;
    let logits: Vec<f64> = q
        .as_slice()
        .iter()
        .map(|v| {
            let mut z = ln(v + LOG_EPSILON) / cfg.predictor_temperature;
            if cfg.predictor_noise > 0.0 {
                z += cfg.predictor_noise * rng.sample::<f64, _>(StandardNormal);
            }
            z
        })
        .collect();
    let total = q.len() as f64 + n as f64;
    DirichletParams::new(softmax(&logits).into_iter().map(|p| total * p).collect())
}
