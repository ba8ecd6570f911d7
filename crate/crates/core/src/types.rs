//! Domain types shared by every module.
//!
//! All category-indexed vectors are ordered `(proper..., cs)`: the "can't
//! solve" category always sits at index `C`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Tolerance on `Σ q = 1` for [`SoftLabel`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Answer space: `C` named proper categories followed by the `cs` category.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CategoryScheme {
    proper: Vec<String>,
    cs: String,
}

impl CategoryScheme {
    pub fn new<I, S>(proper: I, cs: impl Into<String>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let proper: Vec<String> = proper.into_iter().map(Into::into).collect();
        let cs = cs.into();
        if proper.is_empty() {
            return Err(Error::EmptyScheme);
        }
        for (i, name) in proper.iter().enumerate() {
            if proper[..i].contains(name) || *name == cs {
                return Err(Error::DuplicateCategory(name.clone()));
            }
        }
        Ok(Self { proper, cs })
    }

    /// Scheme with `C` anonymous proper categories `c0..c{C-1}` and `cs`.
    pub fn anonymous(num_proper: usize) -> Result<Self> {
        Self::new((0..num_proper).map(|i| alloc::format!("c{i}")), "cs")
    }

    /// Number of proper categories `C`.
    pub fn num_proper(&self) -> usize {
        self.proper.len()
    }

    /// Total category count `C + 1`.
    pub fn len(&self) -> usize {
        self.proper.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cs_index(&self) -> usize {
        self.proper.len()
    }

    pub fn proper_names(&self) -> &[String] {
        &self.proper
    }

    pub fn cs_name(&self) -> &str {
        &self.cs
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        match index {
            i if i < self.proper.len() => Some(&self.proper[i]),
            i if i == self.proper.len() => Some(&self.cs),
            _ => None,
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        if name == self.cs {
            return Some(self.cs_index());
        }
        self.proper.iter().position(|n| n == name)
    }
}

/// One observed answer `(t, r, a)`. Annotator identity is carried along but
/// never used by inference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseRecord {
    pub task_id: String,
    pub annotator_id: Option<String>,
    pub answer: usize,
}

impl ResponseRecord {
    pub fn new(task_id: impl Into<String>, answer: usize) -> Self {
        Self {
            task_id: task_id.into(),
            annotator_id: None,
            answer,
        }
    }
}

/// The multiset of answers for one task.
pub type ResponseSet = Vec<ResponseRecord>;

/// Per-category answer frequencies `n_t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector {
    counts: Vec<u64>,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            counts: alloc::vec![0; len],
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn increment(&mut self, category: usize) {
        self.counts[category] += 1;
    }

    /// Empirical response distribution `n / N`, `None` when no answers.
    pub fn frequencies(&self) -> Option<SoftLabel> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let n = total as f64;
        Some(SoftLabel {
            q: self.counts.iter().map(|&c| c as f64 / n).collect(),
        })
    }
}

impl core::ops::Add for &CountVector {
    type Output = CountVector;

    fn add(self, rhs: &CountVector) -> CountVector {
        CountVector {
            counts: self
                .counts
                .iter()
                .zip(&rhs.counts)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

/// Strictly positive Dirichlet concentration vector over `C + 1` categories.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::EmptyInput("Dirichlet parameters"));
        }
        if let Some((index, &value)) = alpha
            .iter()
            .enumerate()
            .find(|(_, &a)| !(a.is_finite() && a > 0.0))
        {
            return Err(Error::InvalidParameter { index, value });
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

/// A point on the probability simplex over `C + 1` categories.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabel {
    q: Vec<f64>,
}

impl SoftLabel {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.len() < 2 {
            return Err(Error::InvalidSoftLabel("needs at least two categories"));
        }
        if q.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidSoftLabel("components must lie in [0, 1]"));
        }
        let sum: f64 = q.iter().sum();
        if math::abs(sum - 1.0) > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidSoftLabel("components must sum to 1"));
        }
        Ok(Self { q })
    }

    /// Normalizes a non-negative weight vector onto the simplex.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidSoftLabel("weights must be finite and non-negative"));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidSoftLabel("weights sum to zero"));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn one_hot(len: usize, index: usize) -> Self {
        let mut q = alloc::vec![0.0; len];
        q[index] = 1.0;
        Self { q }
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            q: alloc::vec![1.0 / len as f64; len],
        }
    }

    pub(crate) fn from_raw(q: Vec<f64>) -> Self {
        Self { q }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Number of proper categories `C`.
    pub fn num_proper(&self) -> usize {
        self.q.len() - 1
    }

    pub fn cs(&self) -> f64 {
        self.q[self.q.len() - 1]
    }

    /// Solvability `π = 1 - q^cs`.
    pub fn solvability(&self) -> f64 {
        1.0 - self.cs()
    }

    /// Conditional distribution over proper categories `p^k = q^k / π`;
    /// `None` when all mass sits on `cs`.
    pub fn conditional(&self) -> Option<Vec<f64>> {
        let proper = &self.q[..self.q.len() - 1];
        let mass: f64 = proper.iter().sum();
        (mass > 0.0).then(|| proper.iter().map(|v| v / mass).collect())
    }

    /// Hard label: the first index attaining the maximum, so `cs` loses ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.q.iter().enumerate().skip(1) {
            if v > self.q[best] {
                best = k;
            }
        }
        best
    }
}

/// One task: identifier, optional features and ground truth, and its answers.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    pub task_id: String,
    /// Grouping key for splitting (an image frame); defaults to the task id.
    pub group: Option<String>,
    pub features: Option<Vec<f64>>,
    pub true_q: Option<SoftLabel>,
    pub responses: ResponseSet,
}

impl TaskRecord {
    pub fn new(task_id: impl Into<String>) -> Self {
        Self {
            task_id: task_id.into(),
            group: None,
            features: None,
            true_q: None,
            responses: Vec::new(),
        }
    }

    pub fn group_key(&self) -> &str {
        self.group.as_deref().unwrap_or(&self.task_id)
    }

    pub fn answers(&self) -> impl Iterator<Item = usize> + '_ {
        self.responses.iter().map(|r| r.answer)
    }
}

/// Disjoint train/validation/test partition of task ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// Counts answers per category.
pub fn tally(responses: &[ResponseRecord], scheme: &CategoryScheme) -> Result<CountVector> {
    tally_answers(
        responses.iter().map(|r| (r.task_id.as_str(), r.answer)),
        scheme.len(),
    )
}

pub(crate) fn tally_answers<'a>(
    answers: impl Iterator<Item = (&'a str, usize)>,
    categories: usize,
) -> Result<CountVector> {
    let mut counts = CountVector::zeros(categories);
    for (position, (task_id, answer)) in answers.enumerate() {
        if answer >= categories {
            return Err(Error::InvalidAnswer {
                task_id: task_id.into(),
                position,
                answer,
                categories,
            });
        }
        counts.increment(answer);
    }
    Ok(counts)
}
