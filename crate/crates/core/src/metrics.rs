//! Soft-label functionals, loss weights, evaluation reports and
//! geometric-median ensembling.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, exp, ln, sqrt};
use crate::types::SoftLabel;

/// Exponential solvability penalty `η(π) = exp(γ(1 - π))`, with `γ` chosen so
/// that `η(π₀) = η₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AmbiguityConfig {
    pub eta0: f64,
    pub pi0: f64,
}

impl Default for AmbiguityConfig {
    fn default() -> Self {
        Self { eta0: 0.4, pi0: 0.8 }
    }
}

impl AmbiguityConfig {
    pub fn new(eta0: f64, pi0: f64) -> Result<Self> {
        if !(eta0 > 0.0 && eta0 < 1.0) {
            return Err(Error::InvalidArgument("eta0 must lie in (0, 1)"));
        }
        if !(pi0 > 0.0 && pi0 < 1.0) {
            return Err(Error::InvalidArgument("pi0 must lie in (0, 1)"));
        }
        Ok(Self { eta0, pi0 })
    }

    /// `γ = ln(η₀) / (1 - π₀)`
    pub fn gamma(&self) -> f64 {
        ln(self.eta0) / (1.0 - self.pi0)
    }

    pub fn eta(&self, solvability: f64) -> f64 {
        exp(self.gamma() * (1.0 - solvability))
    }
}

/// Ambiguity in `[0, 1]`: one minus the scaled normalized `ℓ₁` distance of
/// the conditional distribution from uniform, and 1 when all mass is on `cs`.
pub fn ambiguity(q: &SoftLabel, cfg: &AmbiguityConfig) -> Result<f64> {
    let c = q.num_proper();
    if c < 2 {
        return Err(Error::AmbiguityUndefined);
    }
    let Some(p) = q.conditional() else {
        return Ok(1.0);
    };
    let c = c as f64;
    let spread: f64 = p.iter().map(|pk| abs(pk - 1.0 / c)).sum();
    let eta = cfg.eta(q.solvability());
    Ok((1.0 - 0.5 * eta * c / (c - 1.0) * spread).clamp(0.0, 1.0))
}

/// Min-max scaled top score: 0 at uniform, 1 at one-hot.
pub fn confidence(q: &SoftLabel) -> f64 {
    let c = q.num_proper() as f64;
    let top = q.as_slice().iter().copied().fold(0.0, f64::max);
    (((c + 1.0) * top - 1.0) / c).clamp(0.0, 1.0)
}

/// `D(q̂, q) = max_k |q̂^k - q^k| / max{q^k, 1 - q^k}`.
pub fn soft_distance(q_hat: &SoftLabel, q_ref: &SoftLabel) -> f64 {
    q_hat
        .as_slice()
        .iter()
        .zip(q_ref.as_slice())
        .map(|(h, r)| abs(h - r) / r.max(1.0 - r))
        .fold(0.0, f64::max)
}

/// `H(q | q̂) = -Σ q^k ln q̂^k`; `+∞` when `q̂` misses support of `q`.
pub fn cross_entropy(q_ref: &SoftLabel, q_hat: &SoftLabel) -> f64 {
    let mut h = 0.0;
    for (&r, &p) in q_ref.as_slice().iter().zip(q_hat.as_slice()) {
        if r > 0.0 {
            if p <= 0.0 {
                return f64::INFINITY;
            }
            h -= r * ln(p);
        }
    }
    h
}

/// Class weights `w(y) = (T + |𝒞|) / (|𝒞|·(T_y + 1))` from per-class
/// majority-vote counts, `T = Σ T_y`.
pub fn hard_weights(class_counts: &[u64]) -> Result<Vec<f64>> {
    if class_counts.len() < 2 {
        return Err(Error::InvalidArgument("class weights need at least two categories"));
    }
    let total: u64 = class_counts.iter().sum();
    let classes = class_counts.len() as f64;
    Ok(class_counts
        .iter()
        .map(|&t_y| (total as f64 + classes) / (classes * (t_y as f64 + 1.0)))
        .collect())
}

/// `w̃(q) = Σ q^y w(y)`.
pub fn soft_weight(q: &SoftLabel, weights: &[f64]) -> Result<f64> {
    if q.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            actual: weights.len(),
        });
    }
    Ok(q.as_slice().iter().zip(weights).map(|(a, b)| a * b).sum())
}

/// Hard and soft evaluation metrics over a task set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[allow(non_snake_case)]
pub struct MetricsReport {
    pub n_tasks: usize,
    pub acc: f64,
    /// `None` when `cs` is never predicted.
    pub prec_cs: Option<f64>,
    /// `None` when `cs` never is the reference majority.
    pub rec_cs: Option<f64>,
    pub mean_D: f64,
    pub mean_D_weighted: f64,
    pub mean_H: f64,
    pub mean_H_weighted: f64,
    /// Tasks whose cross-entropy is infinite (prediction misses support).
    pub n_infinite_H: usize,
}

/// Compares point predictions against reference soft labels, aligned by
/// position. Weighted means use `w̃` of the reference label; with no class
/// weights every task weighs one.
pub fn evaluate(
    predictions: &[SoftLabel],
    references: &[SoftLabel],
    class_weights: Option<&[f64]>,
) -> Result<MetricsReport> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput("evaluation task set"));
    }
    if predictions.len() != references.len() {
        return Err(Error::DimensionMismatch {
            expected: predictions.len(),
            actual: references.len(),
        });
    }
    let (mut correct, mut cs_predicted, mut cs_actual, mut cs_hit) = (0usize, 0usize, 0usize, 0usize);
    let (mut sum_d, mut sum_dw, mut sum_h, mut sum_hw, mut sum_w) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut infinite = 0;
    for (pred, reference) in predictions.iter().zip(references) {
        if pred.len() != reference.len() {
            return Err(Error::DimensionMismatch {
                expected: reference.len(),
                actual: pred.len(),
            });
        }
        let cs = reference.len() - 1;
        let (hat, truth) = (pred.argmax(), reference.argmax());
        correct += usize::from(hat == truth);
        cs_predicted += usize::from(hat == cs);
        cs_actual += usize::from(truth == cs);
        cs_hit += usize::from(hat == cs && truth == cs);

        let w = match class_weights {
            Some(weights) => soft_weight(reference, weights)?,
            None => 1.0,
        };
        let d = soft_distance(pred, reference);
        let h = cross_entropy(reference, pred);
        infinite += usize::from(h.is_infinite());
        sum_d += d;
        sum_dw += w * d;
        sum_h += h;
        sum_hw += w * h;
        sum_w += w;
    }
    let n = predictions.len() as f64;
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(MetricsReport {
        n_tasks: predictions.len(),
        acc: correct as f64 / n,
        prec_cs: ratio(cs_hit, cs_predicted),
        rec_cs: ratio(cs_hit, cs_actual),
        mean_D: sum_d / n,
        mean_D_weighted: sum_dw / sum_w,
        mean_H: sum_h / n,
        mean_H_weighted: sum_hw / sum_w,
        n_infinite_H: infinite,
    })
}

/// Convergence limits for [`geometric_median`].
pub const MEDIAN_TOLERANCE: f64 = 1e-10;
pub const MEDIAN_MAX_ITERS: usize = 10_000;

/// Sum of Euclidean distances from `x` to every point.
pub fn median_objective(x: &[f64], points: &[SoftLabel]) -> f64 {
    points.iter().map(|p| euclid(x, p.as_slice())).sum()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Weiszfeld iteration with the Vardi–Zhang step at data points, started
/// from the centroid. The fixed point is projected back onto the simplex.
pub fn geometric_median(points: &[SoftLabel]) -> Result<SoftLabel> {
    let first = points.first().ok_or(Error::EmptyInput("geometric median points"))?;
    let dim = first.len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: p.len(),
        });
    }
    let m = points.len() as f64;
    let mut x: Vec<f64> = (0..dim)
        .map(|k| points.iter().map(|p| p.as_slice()[k]).sum::<f64>() / m)
        .collect();

    for _ in 0..MEDIAN_MAX_ITERS {
        let mut numer = alloc::vec![0.0; dim];
        let mut denom = 0.0;
        let mut coincident = 0.0;
        for p in points {
            let d = euclid(&x, p.as_slice());
            if d < 1e-14 {
                coincident += 1.0;
                continue;
            }
            for (n, v) in numer.iter_mut().zip(p.as_slice()) {
                *n += v / d;
            }
            denom += 1.0 / d;
        }
        if denom == 0.0 {
            break;
        }
        let weiszfeld: Vec<f64> = numer.iter().map(|n| n / denom).collect();
        let next: Vec<f64> = if coincident > 0.0 {
            // r = ‖Σ (p_i - x)/d_i‖ over non-coincident points.
            let r = sqrt(
                numer
                    .iter()
                    .zip(&x)
                    .map(|(n, xi)| {
                        let g = n - denom * xi;
                        g * g
                    })
                    .sum(),
            );
            if r <= coincident {
                break;
            }
            let beta = coincident / r;
            weiszfeld
                .iter()
                .zip(&x)
                .map(|(t, xi)| (1.0 - beta) * t + beta * xi)
                .collect()
        } else {
            weiszfeld
        };
        let step = euclid(&next, &x);
        x = next;
        if step < MEDIAN_TOLERANCE {
            break;
        }
    }
    SoftLabel::from_weights(&x.iter().map(|v| v.max(0.0)).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sl(q: &[f64]) -> SoftLabel {
        SoftLabel::new(q.to_vec()).unwrap()
    }

    #[test]
    fn gamma_pins_eta_at_pi0() {
        let cfg = AmbiguityConfig::default();
        assert!(((0.2 * cfg.gamma()).exp() - 0.4).abs() < 1e-12);
        assert!((cfg.gamma() + 4.581453659).abs() < 1e-8);
        assert_eq!(cfg.eta(1.0), 1.0);
        assert!(cfg.gamma() < 0.0);
    }

    #[test]
    fn ambiguity_examples() {
        let cfg = AmbiguityConfig::default();
        assert!(ambiguity(&sl(&[0.0, 1.0, 0.0]), &cfg).unwrap().abs() < 1e-15);
        assert_eq!(ambiguity(&sl(&[0.0, 0.0, 1.0]), &cfg).unwrap(), 1.0);
        // π = 0.95, η = exp(-0.05·4.5815) ≈ 0.7953, Σ|p - ½| = 2·(0.9/0.95 - ½)
        let eta = (0.05 * cfg.gamma()).exp();
        let spread = 2.0 * (0.9 / 0.95 - 0.5);
        let expected = 1.0 - eta * spread;
        let got = ambiguity(&sl(&[0.05, 0.9, 0.05]), &cfg).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.288).abs() < 1e-3, "{got}");
        assert_eq!(
            ambiguity(&sl(&[0.5, 0.5]), &cfg),
            Err(Error::AmbiguityUndefined)
        );
        // Uniform conditional gives 1 regardless of solvability.
        assert!((ambiguity(&sl(&[0.45, 0.45, 0.1]), &cfg).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn confidence_examples() {
        assert_eq!(confidence(&SoftLabel::one_hot(3, 1)), 1.0);
        assert!(confidence(&SoftLabel::uniform(3)).abs() < 1e-15);
        assert!((confidence(&sl(&[0.03, 0.9, 0.07])) - 0.85).abs() < 1e-12);
    }

    #[test]
    fn distance_examples() {
        assert!((soft_distance(&sl(&[0.03, 0.9, 0.07]), &sl(&[0.0, 1.0, 0.0])) - 0.1).abs() < 1e-15);
        let q = sl(&[0.2, 0.3, 0.5]);
        assert_eq!(soft_distance(&q, &q), 0.0);
        assert_eq!(soft_distance(&SoftLabel::one_hot(3, 0), &SoftLabel::one_hot(3, 2)), 1.0);
    }

    #[test]
    fn cross_entropy_examples() {
        let hat = sl(&[0.2, 0.5, 0.3]);
        assert!((cross_entropy(&SoftLabel::one_hot(3, 1), &hat) + 0.5f64.ln()).abs() < 1e-15);
        let u = SoftLabel::uniform(3);
        assert!((cross_entropy(&u, &u) - 3f64.ln()).abs() < 1e-12);
        assert!(cross_entropy(&u, &SoftLabel::one_hot(3, 0)).is_infinite());
    }

    #[test]
    fn cross_entropy_minimized_at_reference() {
        let q = sl(&[0.2, 0.5, 0.3]);
        let at_q = cross_entropy(&q, &q);
        let step = 1e-3;
        let mut best = (f64::INFINITY, [0.0; 3]);
        let n = (1.0 / step) as usize;
        for i in 1..n {
            for j in 1..(n - i) {
                let a = i as f64 * step;
                let b = j as f64 * step;
                let h = cross_entropy(&q, &SoftLabel::from_raw(vec![a, b, 1.0 - a - b]));
                if h < best.0 {
                    best = (h, [a, b, 1.0 - a - b]);
                }
            }
        }
        assert!(best.0 >= at_q - 1e-12);
        for (g, t) in best.1.iter().zip(q.as_slice()) {
            assert!((g - t).abs() < 2e-3);
        }
    }

    #[test]
    fn hard_weight_examples() {
        let w = hard_weights(&[4, 5, 1]).unwrap();
        assert!((w[0] - 13.0 / 15.0).abs() < 1e-15);
        let w = hard_weights(&[0, 10]).unwrap();
        assert!((w[0] - 12.0 / 2.0).abs() < 1e-15);
        assert!(hard_weights(&[10]).is_err());
    }

    #[test]
    fn soft_weight_examples() {
        let w = [2.0, 4.0, 1.0];
        assert_eq!(soft_weight(&SoftLabel::one_hot(3, 1), &w).unwrap(), 4.0);
        assert!((soft_weight(&SoftLabel::uniform(3), &w).unwrap() - 7.0 / 3.0).abs() < 1e-15);
        assert_eq!(soft_weight(&sl(&[0.5, 0.5, 0.0]), &w).unwrap(), 3.0);
        assert!(soft_weight(&SoftLabel::uniform(2), &w).is_err());
    }

    #[test]
    fn evaluate_self_comparison() {
        let refs = vec![sl(&[0.1, 0.8, 0.1]), sl(&[0.1, 0.1, 0.8]), sl(&[0.6, 0.3, 0.1])];
        let report = evaluate(&refs, &refs, Some(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(report.acc, 1.0);
        assert_eq!(report.mean_D, 0.0);
        assert_eq!(report.mean_D_weighted, 0.0);
        assert_eq!(report.prec_cs, Some(1.0));
        assert_eq!(report.rec_cs, Some(1.0));
    }

    #[test]
    fn evaluate_nulls_and_accuracy() {
        let refs = vec![sl(&[0.1, 0.8, 0.1]), sl(&[0.7, 0.2, 0.1])];
        let preds = vec![sl(&[0.1, 0.8, 0.1]), sl(&[0.2, 0.7, 0.1])];
        let report = evaluate(&preds, &refs, None).unwrap();
        assert_eq!(report.acc, 0.5);
        assert_eq!(report.prec_cs, None);
        assert_eq!(report.rec_cs, None);
        assert!(evaluate(&[], &[], None).is_err());
    }

    #[test]
    fn weighted_means_collapse_with_equal_weights() {
        let refs = vec![sl(&[0.1, 0.8, 0.1]), sl(&[0.7, 0.2, 0.1]), sl(&[0.3, 0.3, 0.4])];
        let preds = vec![sl(&[0.2, 0.7, 0.1]), sl(&[0.5, 0.4, 0.1]), sl(&[0.1, 0.3, 0.6])];
        let r = evaluate(&preds, &refs, Some(&[2.5, 2.5, 2.5])).unwrap();
        assert!((r.mean_D - r.mean_D_weighted).abs() < 1e-12);
        assert!((r.mean_H - r.mean_H_weighted).abs() < 1e-12);
    }

    #[test]
    fn geometric_median_trivial_cases() {
        let p = sl(&[0.2, 0.3, 0.5]);
        let m = geometric_median(core::slice::from_ref(&p)).unwrap();
        for (a, b) in m.as_slice().iter().zip(p.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        let pair = [sl(&[0.6, 0.2, 0.2]), sl(&[0.2, 0.6, 0.2])];
        let m = geometric_median(&pair).unwrap();
        for (a, b) in m.as_slice().iter().zip([0.4, 0.4, 0.2]) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(geometric_median(&[]).is_err());
    }

    #[test]
    fn geometric_median_matches_grid_minimizer() {
        let points = [sl(&[0.7, 0.2, 0.1]), sl(&[0.1, 0.6, 0.3]), sl(&[0.2, 0.1, 0.7])];
        let m = geometric_median(&points).unwrap();
        let step = 1e-3;
        let n = (1.0 / step) as usize;
        let mut best = (f64::INFINITY, [0.0; 3]);
        for i in 0..=n {
            for j in 0..=(n - i) {
                let x = [i as f64 * step, j as f64 * step, 1.0 - (i + j) as f64 * step];
                let f = median_objective(&x, &points);
                if f < best.0 {
                    best = (f, x);
                }
            }
        }
        for (a, b) in m.as_slice().iter().zip(best.1) {
            assert!((a - b).abs() < 1e-3, "{m:?} vs {best:?}");
        }
        assert!(median_objective(m.as_slice(), &points) <= best.0 + 1e-9);
    }

    #[test]
    fn geometric_median_can_sit_on_a_data_point() {
        // A majority of identical points pins the median on them.
        let points = [
            sl(&[0.8, 0.1, 0.1]),
            sl(&[0.8, 0.1, 0.1]),
            sl(&[0.8, 0.1, 0.1]),
            sl(&[0.1, 0.8, 0.1]),
            sl(&[0.1, 0.1, 0.8]),
        ];
        let m = geometric_median(&points).unwrap();
        for (a, b) in m.as_slice().iter().zip([0.8, 0.1, 0.1]) {
            assert!((a - b).abs() < 1e-8, "{m:?}");
        }
    }
}
