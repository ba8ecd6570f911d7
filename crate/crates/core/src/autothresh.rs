//! Automation-correctness curves and confidence-threshold calibration.
//!
//! A threshold `c` retains the tasks whose predicted confidence is `≥ c`.
//! A curve evaluates every observed confidence value as a threshold, so its
//! first point retains everything and its last retains the most confident
//! tasks only. Thresholds for a target accuracy are chosen per bootstrap
//! realization on validation data and then applied to held-out test data.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{floor, map_indices, quantile_sorted};
use crate::rng::derived_rng;

pub const DEFAULT_BOOTSTRAP: usize = 1024;
pub const DEFAULT_TARGET_ACCURACY: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvePoint {
    pub threshold: f64,
    pub automation: f64,
    /// `None` when nothing is retained.
    pub accuracy: Option<f64>,
}

/// A calibrated threshold, or the decision to automate nothing.
/// Serialized as a number, with `null` for [`Threshold::AbstainAll`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(into = "Option<f64>", from = "Option<f64>")
)]
pub enum Threshold {
    Value(f64),
    AbstainAll,
}

impl Threshold {
    /// `+∞` for [`Threshold::AbstainAll`].
    pub fn as_f64(self) -> f64 {
        match self {
            Self::Value(c) => c,
            Self::AbstainAll => f64::INFINITY,
        }
    }

    pub fn from_f64(c: f64) -> Self {
        if c.is_infinite() && c > 0.0 {
            Self::AbstainAll
        } else {
            Self::Value(c)
        }
    }

    pub fn retains(self, confidence: f64) -> bool {
        match self {
            Self::Value(c) => confidence >= c,
            Self::AbstainAll => false,
        }
    }
}

impl From<Threshold> for Option<f64> {
    fn from(t: Threshold) -> Self {
        match t {
            Threshold::Value(c) => Some(c),
            Threshold::AbstainAll => None,
        }
    }
}

impl From<Option<f64>> for Threshold {
    fn from(c: Option<f64>) -> Self {
        c.map_or(Self::AbstainAll, Self::Value)
    }
}

fn check_aligned(confidences: &[f64], correct: &[bool]) -> Result<()> {
    if confidences.is_empty() {
        return Err(Error::EmptyInput("confidences"));
    }
    if confidences.len() != correct.len() {
        return Err(Error::DimensionMismatch {
            expected: confidences.len(),
            actual: correct.len(),
        });
    }
    if confidences.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("confidences"));
    }
    Ok(())
}

/// The point reached by one arbitrary threshold.
pub fn point_at(confidences: &[f64], correct: &[bool], threshold: Threshold) -> Result<CurvePoint> {
    check_aligned(confidences, correct)?;
    let (mut kept, mut hits) = (0usize, 0usize);
    for (&c, &ok) in confidences.iter().zip(correct) {
        if threshold.retains(c) {
            kept += 1;
            hits += usize::from(ok);
        }
    }
    Ok(CurvePoint {
        threshold: threshold.as_f64(),
        automation: kept as f64 / confidences.len() as f64,
        accuracy: (kept > 0).then(|| hits as f64 / kept as f64),
    })
}

/// One point per distinct confidence value, thresholds ascending.
pub fn curve(confidences: &[f64], correct: &[bool]) -> Result<Vec<CurvePoint>> {
    check_aligned(confidences, correct)?;
    let mut order: Vec<usize> = (0..confidences.len()).collect();
    // Descending confidence; index order breaks ties for determinism.
    order.sort_by(|&a, &b| confidences[b].total_cmp(&confidences[a]).then(a.cmp(&b)));
    let total = confidences.len() as f64;
    let mut points = Vec::new();
    let (mut kept, mut hits) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let c = confidences[order[i]];
        while i < order.len() && confidences[order[i]] == c {
            kept += 1;
            hits += usize::from(correct[order[i]]);
            i += 1;
        }
        points.push(CurvePoint {
            threshold: c,
            automation: kept as f64 / total,
            accuracy: Some(hits as f64 / kept as f64),
        });
    }
    points.reverse();
    Ok(points)
}

/// Smallest threshold on a curve whose retained accuracy reaches `target`.
pub fn smallest_threshold(curve: &[CurvePoint], target: f64) -> Threshold {
    curve
        .iter()
        .find(|p| p.accuracy.is_some_and(|a| a >= target))
        .map_or(Threshold::AbstainAll, |p| Threshold::Value(p.threshold))
}

/// Task indices of one bootstrap resample, drawn with replacement.
pub fn resample_indices(len: usize, seed: u64, realization: usize) -> Vec<usize> {
    let mut rng = derived_rng(seed, "bootstrap", realization as u64);
    (0..len).map(|_| rng.random_range(0..len)).collect()
}

fn resampled(confidences: &[f64], correct: &[bool], idx: &[usize]) -> (Vec<f64>, Vec<bool>) {
    (
        idx.iter().map(|&i| confidences[i]).collect(),
        idx.iter().map(|&i| correct[i]).collect(),
    )
}

/// Accuracy quantiles across bootstrap curves at one threshold of the
/// full-sample curve.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BandPoint {
    pub threshold: f64,
    /// Automation of the full sample at this threshold.
    pub automation: f64,
    pub acc_q025: Option<f64>,
    pub acc_q50: Option<f64>,
    pub acc_q975: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapCurves {
    pub curves: Vec<Vec<CurvePoint>>,
    pub band: Vec<BandPoint>,
}

/// `B` resampled curves plus 2.5/50/97.5% accuracy bands on the threshold
/// grid of the full-sample curve. Realizations with nothing retained at a
/// grid threshold do not enter that threshold's quantiles.
pub fn bootstrap_curves(
    confidences: &[f64],
    correct: &[bool],
    b: usize,
    seed: u64,
) -> Result<BootstrapCurves> {
    check_aligned(confidences, correct)?;
    if b == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one realization"));
    }
    let grid = curve(confidences, correct)?;
    let per_realization: Vec<(Vec<CurvePoint>, Vec<Option<f64>>)> = map_indices(b, |r| {
        let idx = resample_indices(confidences.len(), seed, r);
        let (conf, ok) = resampled(confidences, correct, &idx);
        let realized = curve(&conf, &ok).expect("resample of valid input");
        let at_grid = grid
            .iter()
            .map(|p| {
                point_at(&conf, &ok, Threshold::Value(p.threshold))
                    .expect("resample of valid input")
                    .accuracy
            })
            .collect();
        (realized, at_grid)
    });

    let band = grid
        .iter()
        .enumerate()
        .map(|(g, p)| {
            let mut accs: Vec<f64> = per_realization.iter().filter_map(|(_, a)| a[g]).collect();
            accs.sort_by(f64::total_cmp);
            let q = |level: f64| (!accs.is_empty()).then(|| quantile_sorted(&accs, level));
            BandPoint {
                threshold: p.threshold,
                automation: p.automation,
                acc_q025: q(0.025),
                acc_q50: q(0.5),
                acc_q975: q(0.975),
            }
        })
        .collect();
    Ok(BootstrapCurves {
        curves: per_realization.into_iter().map(|(c, _)| c).collect(),
        band,
    })
}

/// One threshold per bootstrap realization of the validation curve.
pub fn select_threshold(
    confidences: &[f64],
    correct: &[bool],
    target_accuracy: f64,
    b: usize,
    seed: u64,
) -> Result<Vec<Threshold>> {
    check_aligned(confidences, correct)?;
    if !(target_accuracy > 0.0 && target_accuracy <= 1.0) {
        return Err(Error::InvalidArgument("target accuracy must lie in (0, 1]"));
    }
    if b == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one realization"));
    }
    Ok(map_indices(b, |r| {
        let idx = resample_indices(confidences.len(), seed, r);
        let (conf, ok) = resampled(confidences, correct, &idx);
        smallest_threshold(&curve(&conf, &ok).expect("resample of valid input"), target_accuracy)
    }))
}

/// Median of realized thresholds, `+∞` counting as the largest value.
pub fn deployment_threshold(thresholds: &[Threshold]) -> Result<Threshold> {
    if thresholds.is_empty() {
        return Err(Error::EmptyInput("thresholds"));
    }
    let mut values: Vec<f64> = thresholds.iter().map(|t| t.as_f64()).collect();
    values.sort_by(f64::total_cmp);
    // Interpolating against +∞ yields +∞ or NaN; take the lower middle then.
    let mid = quantile_sorted(&values, 0.5);
    Ok(if mid.is_nan() {
        Threshold::from_f64(values[floor((values.len() - 1) as f64 * 0.5) as usize])
    } else {
        Threshold::from_f64(mid)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

fn interval(values: &mut [f64]) -> Option<Interval> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(Interval {
        lo: quantile_sorted(values, 0.025),
        hi: quantile_sorted(values, 0.975),
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdEvaluation {
    pub automation_ci: Interval,
    /// `None` when no threshold retains any test task.
    pub accuracy_ci: Option<Interval>,
    /// Fraction of thresholds that are the abstain-all sentinel.
    pub abstention_rate: f64,
}

/// Applies every threshold to the test set and reports marginal 95%
/// intervals of automation and accuracy.
pub fn evaluate_thresholds(
    confidences: &[f64],
    correct: &[bool],
    thresholds: &[Threshold],
) -> Result<ThresholdEvaluation> {
    check_aligned(confidences, correct)?;
    if thresholds.is_empty() {
        return Err(Error::EmptyInput("thresholds"));
    }
    let mut automation = Vec::with_capacity(thresholds.len());
    let mut accuracy = Vec::with_capacity(thresholds.len());
    let mut abstained = 0usize;
    for &t in thresholds {
        if t == Threshold::AbstainAll {
            abstained += 1;
            automation.push(0.0);
            continue;
        }
        let p = point_at(confidences, correct, t)?;
        automation.push(p.automation);
        accuracy.extend(p.accuracy);
    }
    Ok(ThresholdEvaluation {
        automation_ci: interval(&mut automation).expect("non-empty thresholds"),
        accuracy_ci: interval(&mut accuracy),
        abstention_rate: abstained as f64 / thresholds.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdCalibration {
    pub target_accuracy: f64,
    pub thresholds: Vec<Threshold>,
    pub deployment_threshold: Threshold,
    pub test: ThresholdEvaluation,
}

/// Validation-side selection followed by test-side evaluation.
pub fn calibrate(
    val_confidences: &[f64],
    val_correct: &[bool],
    test_confidences: &[f64],
    test_correct: &[bool],
    target_accuracy: f64,
    b: usize,
    seed: u64,
) -> Result<ThresholdCalibration> {
    let thresholds = select_threshold(val_confidences, val_correct, target_accuracy, b, seed)?;
    let test = evaluate_thresholds(test_confidences, test_correct, &thresholds)?;
    Ok(ThresholdCalibration {
        target_accuracy,
        deployment_threshold: deployment_threshold(&thresholds)?,
        thresholds,
        test,
    })
}

/// One equidistant bin of predicted ambiguity.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `None` for empty bins.
    pub mean_predicted: Option<f64>,
    pub mean_actual: Option<f64>,
    pub mean_distance: Option<f64>,
}

/// Bins tasks on `[0, 1]` by predicted ambiguity and averages predicted and
/// actual ambiguity and soft-label distance within each bin. The last bin is
/// closed on the right.
pub fn ambiguity_calibration(
    predicted: &[f64],
    actual: &[f64],
    distances: &[f64],
    bins: usize,
) -> Result<Vec<CalibrationBin>> {
    if bins < 2 {
        return Err(Error::InvalidArgument("ambiguity calibration needs at least two bins"));
    }
    for other in [actual.len(), distances.len()] {
        if other != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: predicted.len(),
                actual: other,
            });
        }
    }
    let width = 1.0 / bins as f64;
    let mut sums = alloc::vec![(0usize, 0.0, 0.0, 0.0); bins];
    for ((&p, &a), &d) in predicted.iter().zip(actual).zip(distances) {
        if !p.is_finite() {
            return Err(Error::NonFinite("predicted ambiguity"));
        }
        let bin = (floor(p.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        let s = &mut sums[bin];
        s.0 += 1;
        s.1 += p;
        s.2 += a;
        s.3 += d;
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(i, (count, p, a, d))| {
            let mean = |v: f64| (count > 0).then(|| v / count as f64);
            CalibrationBin {
                lo: i as f64 * width,
                hi: (i + 1) as f64 * width,
                count,
                mean_predicted: mean(p),
                mean_actual: mean(a),
                mean_distance: mean(d),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const TOY_CONF: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
    const TOY_OK: [bool; 4] = [false, true, true, true];

    #[test]
    fn toy_curve() {
        let c = curve(&TOY_CONF, &TOY_OK).unwrap();
        let expected = [(0.2, 1.0, 0.75), (0.4, 0.75, 1.0), (0.6, 0.5, 1.0), (0.8, 0.25, 1.0)];
        assert_eq!(c.len(), 4);
        for (p, (t, a, acc)) in c.iter().zip(expected) {
            assert_eq!((p.threshold, p.automation, p.accuracy), (t, a, Some(acc)));
        }
        let mid = point_at(&TOY_CONF, &TOY_OK, Threshold::Value(0.5)).unwrap();
        assert_eq!((mid.automation, mid.accuracy), (0.5, Some(1.0)));
        let below = point_at(&TOY_CONF, &TOY_OK, Threshold::Value(0.0)).unwrap();
        assert_eq!((below.automation, below.accuracy), (1.0, Some(0.75)));
        assert!(curve(&[], &[]).is_err());
    }

    #[test]
    fn ties_collapse_to_one_point() {
        let c = curve(&[0.5, 0.5, 0.9], &[true, false, true]).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].automation, 1.0);
        assert!((c[0].accuracy.unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn all_correct_curve_is_flat() {
        let conf = [0.1, 0.3, 0.3, 0.7, 0.9];
        for p in curve(&conf, &[true; 5]).unwrap() {
            assert_eq!(p.accuracy, Some(1.0));
        }
    }

    #[test]
    fn smallest_threshold_cases() {
        let c = curve(&TOY_CONF, &TOY_OK).unwrap();
        assert_eq!(smallest_threshold(&c, 1.0), Threshold::Value(0.4));
        assert_eq!(smallest_threshold(&c, 0.7), Threshold::Value(0.2));
        let wrong = curve(&TOY_CONF, &[false; 4]).unwrap();
        assert_eq!(smallest_threshold(&wrong, 0.5), Threshold::AbstainAll);
    }

    #[test]
    fn single_realization_band_is_the_curve() {
        let conf = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let ok = [false, true, false, true, true, true];
        let boot = bootstrap_curves(&conf, &ok, 1, 3).unwrap();
        assert_eq!(boot.curves.len(), 1);
        for p in &boot.band {
            assert_eq!(p.acc_q025, p.acc_q975);
        }
        let all = bootstrap_curves(&conf, &[true; 6], 64, 3).unwrap();
        for p in &all.band {
            assert_eq!((p.acc_q025, p.acc_q975), (Some(1.0), Some(1.0)));
        }
    }

    #[test]
    fn full_automation_band_matches_bootstrap_of_the_mean() {
        use rand::SeedableRng;
        let n = 400;
        let conf: Vec<f64> = (0..n).map(|i| (i as f64 * 0.618) % 1.0).collect();
        let ok: Vec<bool> = (0..n).map(|i| i % 5 != 0).collect();
        let boot = bootstrap_curves(&conf, &ok, 1024, 11).unwrap();
        let full = &boot.band[0];
        assert_eq!(full.automation, 1.0);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut means: Vec<f64> = (0..4096)
            .map(|_| (0..n).filter(|_| ok[rng.random_range(0..n)]).count() as f64 / n as f64)
            .collect();
        means.sort_by(f64::total_cmp);
        assert!((full.acc_q025.unwrap() - quantile_sorted(&means, 0.025)).abs() < 0.01);
        assert!((full.acc_q50.unwrap() - quantile_sorted(&means, 0.5)).abs() < 0.01);
        assert!((full.acc_q975.unwrap() - quantile_sorted(&means, 0.975)).abs() < 0.01);
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let conf: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37) % 1.0).collect();
        let ok: Vec<bool> = (0..50).map(|i| i % 3 != 0).collect();
        let a = bootstrap_curves(&conf, &ok, 32, 5).unwrap();
        let b = bootstrap_curves(&conf, &ok, 32, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            select_threshold(&conf, &ok, 0.9, 32, 5).unwrap(),
            select_threshold(&conf, &ok, 0.9, 32, 5).unwrap()
        );
    }

    #[test]
    fn high_accuracy_already_retains_all() {
        let thresholds = select_threshold(&TOY_CONF, &[true; 4], 0.9, 16, 1).unwrap();
        for t in &thresholds {
            let Threshold::Value(c) = t else { panic!("abstained") };
            assert!(TOY_CONF.contains(c));
        }
        let none = select_threshold(&TOY_CONF, &[false; 4], 0.9, 16, 1).unwrap();
        assert!(none.iter().all(|t| *t == Threshold::AbstainAll));
    }

    #[test]
    fn evaluation_of_identical_thresholds_has_zero_width() {
        let eval = evaluate_thresholds(&TOY_CONF, &TOY_OK, &[Threshold::Value(0.4); 10]).unwrap();
        assert_eq!(eval.automation_ci, Interval { lo: 0.75, hi: 0.75 });
        assert_eq!(eval.accuracy_ci, Some(Interval { lo: 1.0, hi: 1.0 }));
        assert_eq!(eval.abstention_rate, 0.0);
    }

    #[test]
    fn abstentions_count_as_zero_automation() {
        let ts = [Threshold::AbstainAll, Threshold::AbstainAll, Threshold::Value(0.2)];
        let eval = evaluate_thresholds(&TOY_CONF, &TOY_OK, &ts).unwrap();
        assert!((eval.abstention_rate - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(eval.automation_ci.lo, 0.0);
        assert_eq!(eval.accuracy_ci, Some(Interval { lo: 0.75, hi: 0.75 }));
        assert_eq!(deployment_threshold(&ts).unwrap(), Threshold::AbstainAll);
        assert_eq!(
            deployment_threshold(&[Threshold::Value(0.2), Threshold::Value(0.4), Threshold::Value(0.9)])
                .unwrap(),
            Threshold::Value(0.4)
        );
    }

    #[test]
    fn calibration_bins() {
        let amb = [0.05, 0.15, 0.55, 0.95, 1.0];
        let bins = ambiguity_calibration(&amb, &amb, &[0.0; 5], 10).unwrap();
        assert_eq!(bins.len(), 10);
        for b in &bins {
            assert_eq!(b.mean_predicted, b.mean_actual);
        }
        assert_eq!(bins[9].count, 2);
        assert_eq!(bins[3].mean_predicted, None);

        let constant = ambiguity_calibration(&[0.3; 4], &[0.1, 0.2, 0.3, 0.4], &[0.0; 4], 5).unwrap();
        assert_eq!(constant.iter().filter(|b| b.count > 0).count(), 1);
        assert!(ambiguity_calibration(&[0.3], &[0.3], &[0.0], 1).is_err());
    }

    #[test]
    fn threshold_list_order_does_not_matter() {
        let ts = vec![Threshold::Value(0.6), Threshold::Value(0.2), Threshold::AbstainAll, Threshold::Value(0.4)];
        let mut rev = ts.clone();
        rev.reverse();
        assert_eq!(
            evaluate_thresholds(&TOY_CONF, &TOY_OK, &ts).unwrap(),
            evaluate_thresholds(&TOY_CONF, &TOY_OK, &rev).unwrap()
        );
    }
}
