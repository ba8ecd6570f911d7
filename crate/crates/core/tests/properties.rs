use crowdprior_core::autothresh::{curve, evaluate_thresholds, select_threshold, Threshold};
use crowdprior_core::bayes::{posterior, posterior_mean, posterior_mode, uniform_prior_of_len};
use crowdprior_core::head::{chernoff_raw, head_forward, HeadModel};
use crowdprior_core::metrics::{ambiguity, confidence, soft_distance, AmbiguityConfig};
use crowdprior_core::priors::blend_prior;
use crowdprior_core::sim::{gen_responses, gen_tasks, SimConfig};
use crowdprior_core::split::{split_dataset, DEFAULT_RATIOS};
use crowdprior_core::{tally, CategoryScheme, CountVector, DirichletParams, ResponseRecord, SoftLabel, TaskRecord};
use proptest::prelude::*;

fn simplex(len: usize) -> impl Strategy<Value = SoftLabel> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter_map("zero mass", |w| SoftLabel::from_weights(&w).ok())
}

fn simplex_point() -> impl Strategy<Value = SoftLabel> {
    (2usize..6).prop_flat_map(simplex)
}

fn alpha(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..30.0, len)
}

fn assert_simplex(q: &SoftLabel) {
    let sum: f64 = q.as_slice().iter().sum();
    assert!((sum - 1.0).abs() < 1e-9 && q.as_slice().iter().all(|&v| v >= 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn tally_and_posterior_ignore_response_order(
        answers in prop::collection::vec(0usize..4, 0..30),
        prior in alpha(4),
        seed in any::<u64>(),
    ) {
        let scheme = CategoryScheme::anonymous(3).unwrap();
        let responses: Vec<ResponseRecord> = answers.iter().map(|&a| ResponseRecord::new("t", a)).collect();
        let mut shuffled = responses.clone();
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state ^= state << 13; state ^= state >> 7; state ^= state << 17;
            shuffled.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let a = tally(&responses, &scheme).unwrap();
        let b = tally(&shuffled, &scheme).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.total(), answers.len() as u64);
        let prior = DirichletParams::new(prior).unwrap();
        prop_assert_eq!(posterior(&prior, &a).unwrap(), posterior(&prior, &b).unwrap());
    }

    #[test]
    fn point_estimates_are_on_the_simplex(prior in alpha(3), counts in prop::collection::vec(0u64..20, 3)) {
        let post = posterior(&DirichletParams::new(prior).unwrap(), &CountVector::new(counts)).unwrap();
        assert_simplex(&posterior_mode(&post));
        assert_simplex(&posterior_mean(&post));
    }

    #[test]
    fn uniform_mode_is_frequency(counts in prop::collection::vec(0u64..50, 2..6)) {
        let counts = CountVector::new(counts);
        prop_assume!(counts.total() > 0);
        let mode = posterior_mode(&posterior(&uniform_prior_of_len(counts.len()), &counts).unwrap());
        for (m, &n) in mode.as_slice().iter().zip(counts.counts()) {
            prop_assert!((m - n as f64 / counts.total() as f64).abs() <= 1e-12);
        }
    }

    #[test]
    fn ambiguity_is_invariant_under_proper_permutations(q in (3usize..7).prop_flat_map(simplex), rot in 0usize..5) {
        let cfg = AmbiguityConfig::default();
        let c = q.num_proper();
        let mut permuted = q.as_slice().to_vec();
        permuted[..c].rotate_left(rot % c);
        permuted[..c].reverse();
        let p = SoftLabel::new(permuted).unwrap();
        let (a, b) = (ambiguity(&q, &cfg).unwrap(), ambiguity(&p, &cfg).unwrap());
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn ambiguity_falls_as_conditional_spreads(pi in 0.05f64..1.0, t in 0.0f64..1.0, s in 0.0f64..1.0) {
        // Binary solvable part p = (½ + x/2, ½ - x/2) at fixed solvability.
        let cfg = AmbiguityConfig::default();
        let at = |x: f64| {
            let q = SoftLabel::new(vec![pi * (0.5 + x / 2.0), pi * (0.5 - x / 2.0), 1.0 - pi]).unwrap();
            ambiguity(&q, &cfg).unwrap()
        };
        let (lo, hi) = if t < s { (t, s) } else { (s, t) };
        prop_assert!(at(hi) <= at(lo) + 1e-12);
    }

    #[test]
    fn confidence_is_bounded(q in simplex_point()) {
        let c = confidence(&q);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&c));
    }

    #[test]
    fn confidence_extremes(len in 2usize..8, k in 0usize..8) {
        prop_assert!(confidence(&SoftLabel::uniform(len)).abs() < 1e-12);
        prop_assert!((confidence(&SoftLabel::one_hot(len, k % len)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn confidence_is_zero_only_for_uniform(q in simplex_point()) {
        let uniform = 1.0 / q.len() as f64;
        if q.as_slice().iter().any(|v| (v - uniform).abs() > 1e-6) {
            prop_assert!(confidence(&q) > 0.0);
        }
    }

    #[test]
    fn chernoff_is_positive_off_the_diagonal(a in alpha(3), b in alpha(3), tau in 0.05f64..0.95) {
        prop_assume!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-3));
        prop_assert!(chernoff_raw(&a, &b, tau).unwrap() > 0.0);
        prop_assert_eq!(chernoff_raw(&a, &a, tau).unwrap(), 0.0);
    }

    #[test]
    fn head_sum_invariant(
        weights in prop::collection::vec(-5.0f64..5.0, 12),
        bias in prop::collection::vec(-5.0f64..5.0, 3),
        mix in prop::collection::vec(-3.0f64..3.0, 9),
        x in prop::collection::vec(-4.0f64..4.0, 4),
        n in 0u64..500,
    ) {
        let model = HeadModel::from_parts(4, 3, weights, bias, mix, 3.0).unwrap();
        let out = head_forward(&model, &x, n).unwrap();
        prop_assert!((out.alpha_sum() - (3.0 + n as f64)).abs() < 1e-9);
        prop_assert!(out.alpha().iter().all(|&a| a > 0.0));
    }

    #[test]
    fn blend_keeps_parameter_sum(weights in prop::collection::vec(0.01f64..1.0, 3), blend in 0.0f64..1.0) {
        let total: f64 = weights.iter().sum();
        let pred = DirichletParams::new(weights.iter().map(|w| 3.0 * w / total).collect()).unwrap();
        let blended = blend_prior(&pred, blend).unwrap();
        prop_assert!((blended.alpha_sum() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn automation_strictly_decreases(conf in prop::collection::vec(0.0f64..1.0, 1..60), seed in any::<u64>()) {
        let correct: Vec<bool> = conf.iter().enumerate().map(|(i, _)| (seed >> (i % 64)) & 1 == 1).collect();
        let points = curve(&conf, &correct).unwrap();
        prop_assert_eq!(points[0].automation, 1.0);
        for pair in points.windows(2) {
            prop_assert!(pair[0].threshold < pair[1].threshold);
            prop_assert!(pair[0].automation > pair[1].automation);
        }
        prop_assert!(points.iter().all(|p| p.accuracy.is_some()));
    }

    #[test]
    fn threshold_is_monotone_in_target(
        conf in prop::collection::vec(0.0f64..1.0, 5..40),
        bits in any::<u64>(),
        lo in 0.5f64..1.0,
        hi in 0.5f64..1.0,
    ) {
        let (lo, hi) = if lo < hi { (lo, hi) } else { (hi, lo) };
        let correct: Vec<bool> = (0..conf.len()).map(|i| (bits >> (i % 64)) & 1 == 1).collect();
        let a = select_threshold(&conf, &correct, lo, 16, bits).unwrap();
        let b = select_threshold(&conf, &correct, hi, 16, bits).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(x.as_f64() <= y.as_f64());
        }
    }

    #[test]
    fn threshold_evaluation_intervals_are_ordered(
        conf in prop::collection::vec(0.0f64..1.0, 2..40),
        thresholds in prop::collection::vec(prop::option::of(0.0f64..1.0), 1..30),
    ) {
        let correct: Vec<bool> = conf.iter().map(|&c| c > 0.3).collect();
        let ts: Vec<Threshold> = thresholds.into_iter().map(Threshold::from).collect();
        let eval = evaluate_thresholds(&conf, &correct, &ts).unwrap();
        prop_assert!(eval.automation_ci.lo <= eval.automation_ci.hi);
        if let Some(acc) = eval.accuracy_ci {
            prop_assert!(acc.lo <= acc.hi);
        }
        let mut reversed = ts.clone();
        reversed.reverse();
        prop_assert_eq!(eval, evaluate_thresholds(&conf, &correct, &reversed).unwrap());
    }

    #[test]
    fn simulated_responses_total_repeats(repeats in 1usize..40, num_tasks in 1usize..20, seed in any::<u64>()) {
        let cfg = SimConfig { num_tasks, repeats, seed, ..SimConfig::default() };
        let scheme = CategoryScheme::anonymous(cfg.num_proper).unwrap();
        for task in gen_tasks(&cfg).unwrap() {
            let mut rng = crowdprior_core::rng::task_rng(seed, &task.task_id);
            let responses = gen_responses(&task, repeats, &mut rng).unwrap();
            prop_assert_eq!(tally(&responses, &scheme).unwrap().total(), repeats as u64);
            assert_simplex(task.true_q.as_ref().unwrap());
        }
    }

    #[test]
    fn splits_partition_by_group(num_groups in 3usize..60, per_group in 1usize..5, seed in any::<u64>()) {
        let tasks: Vec<TaskRecord> = (0..num_groups * per_group)
            .map(|i| {
                let mut t = TaskRecord::new(format!("t{i}"));
                t.group = Some(format!("g{}", i / per_group));
                t
            })
            .collect();
        let split = split_dataset(&tasks, DEFAULT_RATIOS, |t| t.group_key(), seed).unwrap();
        let mut all: Vec<&String> = split.train.iter().chain(&split.val).chain(&split.test).collect();
        prop_assert_eq!(all.len(), tasks.len());
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), tasks.len());
        let group_of = |id: &String| tasks.iter().find(|t| &t.task_id == id).unwrap().group_key().to_owned();
        let train: std::collections::BTreeSet<String> = split.train.iter().map(group_of).collect();
        for id in split.val.iter().chain(&split.test) {
            prop_assert!(!train.contains(&group_of(id)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100_000))]

    #[test]
    fn distance_is_bounded_and_zero_on_the_diagonal(q in simplex(3), r in simplex(3)) {
        let d = soft_distance(&q, &r);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        prop_assert_eq!(soft_distance(&q, &q), 0.0);
    }
}
