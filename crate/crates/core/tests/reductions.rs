mod common;

use fifa_core::dataset::LabeledDataset;
use fifa_core::gaussian::{sample, GaussianSpec};
use fifa_core::metrics::Confusion;
use fifa_core::model::{train, LinearScorer, TrainConfig};
use fifa_core::reductions::{
    best_response, build_constraints, error_rate, expgrad, grid_search, iteration_cap, lagrangian, lambda_grid,
    member_stats, moments, reduction_labels, select_point, BestResponseConfig, ConstraintSystem, ExpGradConfig,
    RandomizedClassifier,
};
use fifa_core::{rng, ConstraintKind, LossKind, MarginSchedule};
use proptest::prelude::*;
use rand::Rng;

/// Scorer with `f_0 = 0` and `f_1 = x_0 − c`.
fn threshold(c: f64, d: usize) -> LinearScorer<f64> {
    let mut w = vec![0.0; 2 * d];
    w[d] = 1.0;
    LinearScorer::from_parts(2, d, w, Some(vec![0.0, -c]), false).unwrap()
}

fn random_scorer(seed: u64, d: usize) -> LinearScorer<f64> {
    let mut r = rng::stream(seed, "scorer", 0);
    let w: Vec<f64> = (0..2 * d).map(|_| r.gen_range(-1.0..1.0)).collect();
    LinearScorer::from_parts(2, d, w, Some(vec![0.0, r.gen_range(-0.5..0.5)]), false).unwrap()
}

fn dataset(xs: &[f64], labels: Vec<usize>, attrs: Vec<usize>) -> LabeledDataset<f64> {
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    LabeledDataset::from_rows(&rows, labels, attrs, 2, 2).unwrap()
}

fn schedule(delta: Vec<Vec<f64>>) -> MarginSchedule {
    MarginSchedule::from_margins(delta, ConstraintKind::Eo).unwrap()
}

fn br(epochs: usize) -> BestResponseConfig {
    BestResponseConfig {
        loss: LossKind::SoftmaxCrossEntropy,
        train: TrainConfig {
            step_size: 0.05,
            epochs,
            ..TrainConfig::default()
        },
    }
}

/// Group 2 sits further along `β`, so a plain scorer has unequal error rates.
fn unfair(seed: u64, n: usize) -> LabeledDataset<f64> {
    let spec = GaussianSpec {
        mu1: vec![0.0, 0.0],
        mu2: vec![1.0, 0.5],
        beta: vec![1.5, 0.0],
        pi: [[0.7, 0.3], [0.3, 0.7]],
        alpha: 1.0,
    };
    sample(&spec, n / 2, n - n / 2, seed).unwrap()
}

/// `μ̂_j` by looping over rows, straight from event membership.
fn loop_moments(preds: &[usize], data: &LabeledDataset<f64>, system: &ConstraintSystem) -> Vec<f64> {
    system
        .events
        .iter()
        .map(|e| {
            let (mut hit, mut n) = (0.0, 0.0);
            for j in 0..data.len() {
                if e.contains(data.labels()[j], data.attributes()[j]) {
                    n += 1.0;
                    hit += preds[j] as f64;
                }
            }
            hit / n
        })
        .collect()
}

#[test]
fn constraint_shapes() {
    let data = common::random_dataset(1, 40, 1, 2, 3);
    let eo = build_constraints(ConstraintKind::Eo, &data, 0.1).unwrap();
    assert_eq!((eo.n_events(), eo.n_rows()), (8, 12));
    for k in (0..eo.n_rows()).step_by(2) {
        for j in 0..eo.n_events() {
            assert_eq!(eo.coefficient(k, j), -eo.coefficient(k + 1, j));
        }
    }
    assert!(eo.c.iter().all(|&v| v == 0.0));
    assert!(eo.c_hat.iter().all(|&v| v == 0.1));
    let zero = build_constraints(ConstraintKind::Dp, &data, 0.0).unwrap();
    assert!(zero.c_hat.iter().all(|&v| v == 0.0));
    assert!(zero.events.iter().all(|e| e.label.is_none()));
    let eqopt = build_constraints(ConstraintKind::EqOpt, &data, 0.0).unwrap();
    assert!(eqopt.events.iter().all(|e| e.label == Some(1)));
    assert!(build_constraints(ConstraintKind::Eo, &data, -0.1).is_err());
    let multi = common::random_dataset(1, 40, 1, 3, 2);
    assert!(build_constraints(ConstraintKind::Eo, &multi, 0.1).is_err());
}

#[test]
fn hand_built_residuals() {
    let data = dataset(
        &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
        vec![0, 0, 0, 0, 1, 1, 1, 1],
        vec![0, 0, 1, 1, 0, 0, 1, 1],
    );
    let system = build_constraints(ConstraintKind::Eo, &data, 0.0).unwrap();
    // predicts 1 on x ≥ 3: rates (a0,0)=0, (a1,0)=1/2, (*,0)=1/4 and 1 everywhere on y = 1
    let h = threshold(2.5, 1);
    let mu = moments(&h, &data, &system, None).unwrap();
    assert_eq!(mu, vec![0.0, 0.5, 0.25, 1.0, 1.0, 1.0]);
    assert_eq!(
        system.residual(&mu),
        vec![-0.25, 0.25, 0.25, -0.25, 0.0, 0.0, 0.0, 0.0]
    );
    assert_eq!(error_rate(&h, &data, &system, None).unwrap(), 1.0 / 8.0);
}

#[test]
fn perfect_classifier_has_unit_positive_moment() {
    let data = dataset(&[0.0, 1.0, 2.0, 3.0], vec![0, 0, 1, 1], vec![0, 1, 0, 1]);
    let system = build_constraints(ConstraintKind::Eo, &data, 0.0).unwrap();
    let mu = moments(&threshold(1.5, 1), &data, &system, None).unwrap();
    let star_one = system.events.iter().position(|e| e.label == Some(1) && e.attribute.is_none()).unwrap();
    assert_eq!(mu[star_one], 1.0);
}

#[test]
fn moments_match_loop_oracle() {
    for seed in 0..50 {
        let data = common::random_dataset(seed, 20, 3, 2, 2);
        let h = random_scorer(seed, 3);
        let mut r = rng::stream(seed, "deltas", 0);
        let sched = schedule((0..2).map(|_| (0..2).map(|_| r.gen_range(0.0..0.7)).collect()).collect());
        let scores = h.score_all(&data).unwrap();
        let shifted: Vec<usize> = (0..data.len())
            .map(|j| {
                let (y, a) = (data.labels()[j], data.attributes()[j]);
                let mut f0 = scores[2 * j];
                let mut f1 = scores[2 * j + 1];
                if y == 0 {
                    f0 -= sched.delta[0][a];
                } else {
                    f1 -= sched.delta[1][a];
                }
                usize::from(f1 > f0)
            })
            .collect();
        let plain = h.predict_all(&data).unwrap();
        for kind in [ConstraintKind::Eo, ConstraintKind::Dp, ConstraintKind::EqOpt] {
            let system = build_constraints(kind, &data, 0.05).unwrap();
            let got = moments(&h, &data, &system, None).unwrap();
            let want = loop_moments(&plain, &data, &system);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-15);
            }
            let got = moments(&h, &data, &system, Some(&sched)).unwrap();
            let want = loop_moments(&shifted, &data, &system);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-15);
            }
            let wrong = shifted.iter().zip(data.labels()).filter(|(p, y)| p != y).count();
            let err = error_rate(&h, &data, &system, Some(&sched)).unwrap();
            assert_eq!(err, wrong as f64 / 20.0);
        }
    }
}

#[test]
fn huge_margins_zero_every_moment() {
    let data = common::random_dataset(3, 60, 2, 2, 2);
    let system = build_constraints(ConstraintKind::Eo, &data, 0.0).unwrap();
    // every true logit is pushed far down, so h_Δ is wrong on every row: the
    // rate of correct decisions is 0 on every event
    let sched = schedule(vec![vec![1e6, 1e6], vec![1e6, 1e6]]);
    let h = random_scorer(3, 2);
    let mu = moments(&h, &data, &system, Some(&sched)).unwrap();
    for (e, v) in system.events.iter().zip(&mu) {
        let correct = if e.label == Some(1) { *v } else { 1.0 - v };
        assert_eq!(correct, 0.0);
    }
    assert_eq!(error_rate(&h, &data, &system, Some(&sched)).unwrap(), 1.0);
}

#[test]
fn zero_schedule_reproduces_the_plain_reduction() {
    for seed in 0..30 {
        let data = common::random_dataset(seed + 100, 50, 2, 2, 3);
        let zero = MarginSchedule::zeros(2, 3, ConstraintKind::Eo);
        let members: Vec<_> = (0..3).map(|i| random_scorer(seed * 7 + i, 2)).collect();
        let q = RandomizedClassifier::new(members, vec![0.2, 0.3, 0.5]).unwrap();
        for kind in [ConstraintKind::Eo, ConstraintKind::Dp, ConstraintKind::EqOpt] {
            let system = build_constraints(kind, &data, 0.02).unwrap();
            let lambda: Vec<f64> = (0..system.n_rows()).map(|k| 0.1 * (k % 3) as f64).collect();
            let a = moments(&q, &data, &system, None).unwrap();
            let b = moments(&q, &data, &system, Some(&zero)).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-12);
            }
            let ea = error_rate(&q, &data, &system, None).unwrap();
            let eb = error_rate(&q, &data, &system, Some(&zero)).unwrap();
            assert!((ea - eb).abs() <= 1e-12);
            let la = lagrangian(&q, &lambda, &data, &system, None).unwrap();
            let lb = lagrangian(&q, &lambda, &data, &system, Some(&zero)).unwrap();
            assert!((la - lb).abs() <= 1e-12);
        }
    }
}

#[test]
fn lagrangian_hand_fixture() {
    // x = 0..11, y alternates, a = ⌊i/2⌋ mod 2; scorer f_1 − f_0 = x − 5.5
    let xs: Vec<f64> = (0..12).map(|i| i as f64).collect();
    let labels: Vec<usize> = (0..12).map(|i| i % 2).collect();
    let attrs: Vec<usize> = (0..12).map(|i| (i / 2) % 2).collect();
    let data = dataset(&xs, labels, attrs);
    let system = build_constraints(ConstraintKind::Eo, &data, 0.05).unwrap();
    let sched = schedule(vec![vec![0.5, 0.0], vec![0.0, 1.0]]);
    // h_Δ: (y0,a0) fires for x > 5 -> {8}; (y0,a1) x > 5.5 -> {6,10};
    // (y1,a0) x > 5.5 -> {9}; (y1,a1) x > 6.5 -> {7,11}. Six of twelve are wrong.
    let h = threshold(5.5, 1);
    let lambda = [0.1, 0.2, 0.3, 0.0, 0.0, 0.4, 0.5, 0.0];
    let third = 1.0 / 3.0;
    let mu = moments(&h, &data, &system, Some(&sched)).unwrap();
    let want = [third, 2.0 * third, 0.5, third, 2.0 * third, 0.5];
    for (g, w) in mu.iter().zip(want) {
        assert!((g - w).abs() < 1e-15);
    }
    // residuals are ±1/6 − 0.05; λᵀr = (−0.1 + 0.2 + 0.3 + 0.4 + 0.5)/6 − 0.05·1.5
    let l = lagrangian(&h, &lambda, &data, &system, Some(&sched)).unwrap();
    assert!((l - 77.0 / 120.0).abs() < 1e-14, "{l}");
    assert_eq!(lagrangian(&h, &[0.0; 8], &data, &system, Some(&sched)).unwrap(), 0.5);
}

#[test]
fn lagrangian_is_affine_in_lambda() {
    let mut r = rng::stream(5, "affine", 0);
    for seed in 0..40 {
        let data = common::random_dataset(seed, 40, 2, 2, 2);
        let system = build_constraints(ConstraintKind::Eo, &data, 0.03).unwrap();
        let h = random_scorer(seed, 2);
        let l0: Vec<f64> = (0..8).map(|_| r.gen_range(0.0..0.2)).collect();
        let l1: Vec<f64> = (0..8).map(|_| r.gen_range(0.0..0.2)).collect();
        let t: f64 = r.gen_range(0.0..1.0);
        let mid: Vec<f64> = l0.iter().zip(&l1).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        let f = |l: &[f64]| lagrangian(&h, l, &data, &system, None).unwrap();
        assert!((f(&mid) - ((1.0 - t) * f(&l0) + t * f(&l1))).abs() < 1e-9);
    }
}

#[test]
fn negative_or_misshaped_multipliers_are_rejected() {
    let data = common::random_dataset(2, 30, 1, 2, 2);
    let system = build_constraints(ConstraintKind::Eo, &data, 0.0).unwrap();
    let h = random_scorer(1, 1);
    assert!(lagrangian(&h, &[0.0; 7], &data, &system, None).is_err());
    let mut l = vec![0.0; 8];
    l[3] = -0.1;
    assert!(lagrangian(&h, &l, &data, &system, None).is_err());
    assert!(reduction_labels(&l, &data, &system).is_err());
}

#[test]
fn reduction_costs_hand_fixture() {
    // DP on ten rows: events (a0), (a1), (*) of sizes 5, 5, 10
    let labels = vec![0, 0, 0, 1, 1, 0, 0, 1, 1, 1];
    let attrs = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
    let data = dataset(&[0.0; 10], labels, attrs);
    let system = build_constraints(ConstraintKind::Dp, &data, 0.0).unwrap();
    // Mᵀλ = (1, −0.5, −0.5), so predicting 1 costs +0.15 on a0 rows and −0.15 on a1 rows
    let cs = reduction_labels(&[1.0, 0.0, 0.0, 0.5], &data, &system).unwrap();
    assert_eq!(cs.labels, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
    let want = [0.25, 0.25, 0.25, 0.05, 0.05, 0.05, 0.05, 0.25, 0.25, 0.25];
    for (g, w) in cs.weights.iter().zip(want) {
        assert!((g - w).abs() < 1e-15, "{g} vs {w}");
    }
}

#[test]
fn heavy_plus_row_flips_positives_in_that_event() {
    let data = common::random_dataset(9, 80, 2, 2, 2);
    let system = build_constraints(ConstraintKind::Eo, &data, 0.0).unwrap();
    // row 6 is + (μ_(a1,1) − μ_(*,1)): large weight makes predicting 1 on (a1, 1) expensive
    let mut lambda = vec![0.0; 8];
    lambda[6] = 1e3;
    let cs = reduction_labels(&lambda, &data, &system).unwrap();
    for j in 0..data.len() {
        let (y, a) = (data.labels()[j], data.attributes()[j]);
        if y == 1 && a == 1 {
            assert_eq!(cs.labels[j], 0);
        }
        if y == 0 {
            assert_eq!(cs.labels[j], 0);
        }
    }
    assert!(cs.labels.iter().zip(data.labels()).any(|(l, y)| *l == 1 && *y == 1));
}

#[test]
fn zero_multiplier_best_response_is_plain_training() {
    let data = unfair(4, 300);
    let system = build_constraints(ConstraintKind::Eo, &data, 0.05).unwrap();
    let sched = schedule(vec![vec![0.1, 0.3], vec![0.2, 0.0]]);
    let config = br(30);
    let h = best_response(&[0.0; 8], &data, &system, &sched, &config, None).unwrap();
    let w = vec![1.0 / data.len() as f64; data.len()];
    let plain = train(&data, None, &w, config.loss, &sched, &config.train).unwrap();
    assert_eq!(h, plain);
}

#[test]
fn expgrad_on_fair_separable_data_stops_quickly() {
    // two well-separated clusters, attributes independent of everything
    let mut r = rng::stream(1, "fair", 0);
    let mut rows = Vec::new();
    let (mut labels, mut attrs) = (Vec::new(), Vec::new());
    for j in 0..200 {
        let y = j % 2;
        let c = if y == 1 { 3.0 } else { -3.0 };
        rows.push(vec![c + r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]);
        labels.push(y);
        attrs.push((j / 2) % 2);
    }
    let data = LabeledDataset::from_rows(&rows, labels, attrs, 2, 2).unwrap();
    let system = build_constraints(ConstraintKind::Eo, &data, 0.5).unwrap();
    let mut cfg = ExpGradConfig::new(1.0, 0.1, br(60));
    cfg.eta = Some(2.0);
    cfg.max_iters = Some(60);
    let out = expgrad(&data, &system, &MarginSchedule::zeros(2, 2, ConstraintKind::Eo), &cfg).unwrap();
    assert!(out.certificate.converged, "{:?}", out.certificate);
    assert!(out.certificate.gap <= 0.1);
    assert!(out.certificate.iterations <= 20, "{}", out.certificate.iterations);
    assert!(out.lambda_hat.iter().sum::<f64>() <= 0.2);
    assert_eq!(error_rate(&out.classifier, &data, &system, None).unwrap(), 0.0);
}

fn unfair_run() -> (LabeledDataset<f64>, ConstraintSystem, ExpGradConfig) {
    let data = unfair(2, 400);
    let system = build_constraints(ConstraintKind::Eo, &data, 0.05).unwrap();
    let mut cfg = ExpGradConfig::new(1.0, 0.05, br(40));
    cfg.eta = Some(2.0);
    cfg.max_iters = Some(15);
    cfg.warm_epochs = Some(15);
    (data, system, cfg)
}

#[test]
fn expgrad_is_deterministic_and_keeps_multipliers_feasible() {
    let (data, system, cfg) = unfair_run();
    let sched = schedule(vec![vec![0.05, 0.0], vec![0.1, 0.02]]);
    let a = expgrad(&data, &system, &sched, &cfg).unwrap();
    let b = expgrad(&data, &system, &sched, &cfg).unwrap();
    assert_eq!(a.classifier, b.classifier);
    assert_eq!(a.lambda_hat, b.lambda_hat);
    assert_eq!(a.certificate, b.certificate);
    for log in &a.history {
        assert!(log.lambda.iter().all(|&l| l >= 0.0));
        assert!(log.lambda.iter().sum::<f64>() <= cfg.b + 1e-12);
    }
    assert!(a.lambda_hat.iter().all(|&l| l >= 0.0) && a.lambda_hat.iter().sum::<f64>() <= cfg.b + 1e-12);
    assert!((a.classifier.q().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let c = &a.certificate;
    assert!(c.upper >= c.lower - 1e-12);
    assert_eq!(c.cap, iteration_cap(c.rho, cfg.b, system.n_rows(), cfg.nu));
    if c.converged {
        assert!(c.iterations <= c.cap);
    }
}

#[test]
fn expgrad_beats_the_plain_violation() {
    let (data, system, mut cfg) = unfair_run();
    cfg.nu = 0.1;
    cfg.max_iters = Some(40);
    let zero = MarginSchedule::zeros(2, 2, ConstraintKind::Eo);
    let out = expgrad(&data, &system, &zero, &cfg).unwrap();
    let plain = train(&data, None, &vec![1.0; data.len()], LossKind::SoftmaxCrossEntropy, &zero, &cfg.best_response.train)
        .unwrap();
    let worst = |mu: Vec<f64>| system.residual(&mu).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let fair = worst(moments(&out.classifier, &data, &system, None).unwrap());
    let base = worst(moments(&plain, &data, &system, None).unwrap());
    assert!(base > 0.05, "fixture should be unfair, worst residual {base}");
    assert!(fair < base, "{fair} vs {base}");
}

#[test]
fn grid_of_zero_is_plain_weighted_training() {
    let data = unfair(5, 200);
    let system = build_constraints(ConstraintKind::Eo, &data, 0.05).unwrap();
    let zero = MarginSchedule::zeros(2, 2, ConstraintKind::Eo);
    let config = br(25);
    let out = grid_search(&data, &system, &zero, &[vec![0.0; 8]], &config).unwrap();
    let w = vec![1.0 / data.len() as f64; data.len()];
    let plain = train(&data, None, &w, config.loss, &zero, &config.train).unwrap();
    assert_eq!(out.scorer, plain);
    assert_eq!(out.selected, 0);
}

#[test]
fn grid_selection_matches_recomputation() {
    let data = unfair(6, 200);
    let system = build_constraints(ConstraintKind::Eo, &data, 0.05).unwrap();
    let sched = schedule(vec![vec![0.0, 0.1], vec![0.2, 0.0]]);
    let mut grid = lambda_grid(&system, 1.0, 4).unwrap();
    grid.push(grid[1].clone());
    let out = grid_search(&data, &system, &sched, &grid, &br(25)).unwrap();
    assert_eq!(out.points.len(), 5);
    assert_eq!(out.points[1], out.points[4]);

    // exhaustive re-evaluation of the rule from the logged reports
    let feasible: Vec<usize> = (0..5).filter(|&i| out.points[i].train.fairness_violation <= 0.05).collect();
    let want = if feasible.is_empty() {
        (0..5)
            .min_by(|&a, &b| {
                let (x, y) = (out.points[a].train.fairness_violation, out.points[b].train.fairness_violation);
                x.partial_cmp(&y).unwrap().then(a.cmp(&b))
            })
            .unwrap()
    } else {
        *feasible
            .iter()
            .min_by(|&&a, &&b| {
                let (x, y) = (out.points[a].train.combined_loss, out.points[b].train.combined_loss);
                x.partial_cmp(&y).unwrap().then(a.cmp(&b))
            })
            .unwrap()
    };
    assert_eq!(out.selected, want);
    assert_eq!(out.feasible, !feasible.is_empty());
    assert_eq!(select_point(&out.points, 0.05), Some((want, !feasible.is_empty())));

    // the report is the true-label evaluation of the selected scorer
    let preds = out.scorer.predict_all(&data).unwrap();
    let report = Confusion::from_predictions(&data, &preds).unwrap().report(ConstraintKind::Eo).unwrap();
    assert_eq!(report, out.points[out.selected].train);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn moments_are_probabilities(seed in any::<u64>(), d in 0.0f64..3.0) {
        let data = common::random_dataset(seed, 30, 2, 2, 2);
        let system = build_constraints(ConstraintKind::Eo, &data, 0.1).unwrap();
        let sched = schedule(vec![vec![d, 0.0], vec![0.0, d]]);
        let h = random_scorer(seed, 2);
        for s in [None, Some(&sched)] {
            let stats = member_stats(&h, &data, &system, s).unwrap();
            prop_assert!(stats.mu.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((0.0..=1.0).contains(&stats.err));
        }
    }

    #[test]
    fn mixture_weights_sum_to_one(q in prop::collection::vec(0.0f64..10.0, 1..6)) {
        prop_assume!(q.iter().sum::<f64>() > 0.0);
        let members: Vec<_> = (0..q.len()).map(|i| random_scorer(i as u64, 2)).collect();
        let mix = RandomizedClassifier::new(members, q).unwrap();
        prop_assert!((mix.q().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(mix.q().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn reduction_weights_are_cost_gaps(seed in any::<u64>(), scale in 0.0f64..2.0) {
        let data = common::random_dataset(seed, 24, 1, 2, 2);
        let system = build_constraints(ConstraintKind::Eo, &data, 0.0).unwrap();
        let mut r = rng::stream(seed, "lambda", 0);
        let lambda: Vec<f64> = (0..8).map(|_| scale * r.gen::<f64>()).collect();
        let cs = reduction_labels(&lambda, &data, &system).unwrap();
        prop_assert!(cs.weights.iter().all(|&w| w >= 0.0 && w.is_finite()));
        // flipping every decision from the reduction label never lowers the Lagrangian
        let sizes = system.event_sizes(&data).unwrap();
        let coef = system.transpose_apply(&lambda);
        for j in 0..data.len() {
            let (y, a) = (data.labels()[j], data.attributes()[j]);
            let c0 = if y == 1 { 1.0 / 24.0 } else { 0.0 };
            let mut c1 = if y == 0 { 1.0 / 24.0 } else { 0.0 };
            for (e, (v, n)) in system.events.iter().zip(coef.iter().zip(&sizes)) {
                if e.contains(y, a) {
                    c1 += v / *n as f64;
                }
            }
            let chosen = if cs.labels[j] == 1 { c1 } else { c0 };
            prop_assert!(chosen <= c0.min(c1) + 1e-15);
            prop_assert!((cs.weights[j] - (c0 - c1).abs()).abs() < 1e-15);
        }
    }
}
