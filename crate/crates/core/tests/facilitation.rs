use proptest::prelude::*;
use rand::seq::index::sample;
use rand::Rng;
use w2s_core::facilitation::*;
use w2s_core::modelkit::*;
use w2s_core::rng::{derive_seed, rng_for};
use w2s_core::taskgen::*;
use w2s_oracles::forward::mlp_layers;
use w2s_oracles::gradient::finite_diff_grad;

fn random_inputs(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_for(seed, "inputs");
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
}

/// Linear two-class model with class-0 weights `w0`, class-1 weights `w1`.
fn linear(w0: &[f64], w1: &[f64]) -> Model {
    let mut m = init_model(ModelConfig::new(0, w0.len(), 2, 0)).unwrap();
    let params: Vec<f64> = w0.iter().chain(w1).copied().chain([0.0, 0.0]).collect();
    m.params = params;
    m
}

fn queries(seed: u64, size: usize) -> Dataset {
    gen_task(&TaskSpec::new(Family::NestedSpheres).with_size(size), seed).unwrap()
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|a| a.abs()).sum()
}

#[test]
fn linear_attributions_match_the_closed_form() {
    let w0 = [0.5, -1.0, 2.0, 0.0];
    let w1 = [-0.5, 1.0, 0.5, 3.0];
    let m = linear(&w0, &w1);
    for x in random_inputs(20, 4, 1) {
        let e = explain(&m, &x).unwrap();
        let z: Vec<f64> = (0..2)
            .map(|c| (0..4).map(|j| [w0, w1][c][j] * x[j]).sum())
            .collect();
        let c = usize::from(z[1] > z[0]);
        let raw: Vec<f64> = (0..4).map(|j| ([w0, w1][c][j] - [w0, w1][1 - c][j]) * x[j]).collect();
        let n = l1(&raw);
        assert_eq!(e.predicted_class, c);
        for (a, r) in e.attributions.iter().zip(&raw) {
            assert!((a - r / n).abs() < 1e-12);
        }
    }
}

#[test]
fn mlp_attributions_match_finite_differences_of_the_oracle() {
    let m = init_model(ModelConfig::new(2, 5, 2, 4)).unwrap();
    let widths = m.config.widths();
    for x in random_inputs(10, 5, 2) {
        let e = explain(&m, &x).unwrap();
        let c = e.predicted_class;
        let margin = |xs: &[f64]| {
            let z = mlp_layers(&m.params, &widths, xs).pop().unwrap();
            z[c] - z[1 - c]
        };
        let g = finite_diff_grad(&margin, &x, &(0..5).collect::<Vec<_>>(), 1e-6);
        let raw: Vec<f64> = g.iter().zip(&x).map(|(g, x)| g * x).collect();
        let n = l1(&raw);
        for (a, r) in e.attributions.iter().zip(&raw) {
            assert!((a - r / n).abs() < 1e-6, "{a} vs {}", r / n);
        }
    }
}

#[test]
fn dead_feature_gets_zero_attribution() {
    // Feature 3 duplicates feature 0 but carries no weight.
    let m = linear(&[1.0, -2.0, 0.5, 0.0], &[-1.0, 0.5, 1.0, 0.0]);
    for mut x in random_inputs(10, 4, 3) {
        x[3] = x[0];
        let e = explain(&m, &x).unwrap();
        assert_eq!(e.attributions[3], 0.0);
        assert!(!e.degenerate);
    }
}

#[test]
fn judge_ignores_masked_dead_features() {
    let judge = linear(&[0.0, 0.0, 1.0, -1.0], &[0.0, 0.0, -1.0, 1.0]);
    let e = Explanation {
        attributions: vec![0.5, -0.5, 0.0, 0.0],
        predicted_class: 0,
        confidence: 0.5,
        degenerate: false,
    };
    for x in random_inputs(20, 4, 5) {
        assert_eq!(judge_score(&e, &x, &judge, 2, &[0.3, -0.7, 0.0, 0.0]).unwrap(), 0.0);
    }
}

#[test]
fn uniform_explanations_score_like_random_masks() {
    let d = 8;
    let k = 2;
    // Every feature pushes class 0 equally, so the judge is symmetric in its inputs.
    let judge = linear(&vec![0.6; d], &vec![-0.6; d]);
    let xs = random_inputs(400, d, 9);
    let means = vec![0.0; d];
    let uniform = Explanation {
        attributions: vec![1.0 / d as f64; d],
        predicted_class: 0,
        confidence: 0.5,
        degenerate: true,
    };
    let mut rng = rng_for(9, "masks");
    for _trial in 0..20 {
        let mut got = 0.0;
        let mut baseline = 0.0;
        for x in &xs {
            let mut e = uniform.clone();
            e.predicted_class = judge.predict(x).unwrap();
            got += judge_score(&e, x, &judge, k, &means).unwrap();
            let picked = sample(&mut rng, d, k).into_vec();
            let mut masked = x.clone();
            for j in picked {
                masked[j] = means[j];
            }
            let before = judge.forward(x).unwrap()[e.predicted_class];
            let after = judge.forward(&masked).unwrap()[e.predicted_class];
            baseline += ((before - after) / before).clamp(0.0, 1.0);
        }
        let (got, baseline) = (got / xs.len() as f64, baseline / xs.len() as f64);
        assert!((got - baseline).abs() < 0.05, "{got} vs {baseline}");
    }
}

#[test]
fn debate_of_identical_explanations_is_a_tie() {
    let judge = init_model(ModelConfig::new(0, 4, 2, 1)).unwrap();
    let cfg = AlignConfig::new(judge);
    let m = init_model(ModelConfig::new(1, 4, 2, 2)).unwrap();
    for x in random_inputs(10, 4, 7) {
        let e = explain(&m, &x).unwrap();
        let r = debate(&e, &e, &x, &cfg, &[0.0; 4], 0).unwrap();
        assert_eq!(r.score, 0.0);
        assert_eq!(r.winner, Winner::Tie);
    }
}

#[test]
fn facilitated_copy_tracks_a_same_size_teacher() {
    let mut passed = 0;
    for seed in 0..10 {
        let q = queries(seed, 1000);
        let tc = TrainConfig::new(0.3, seed).with_epochs(10);
        let teacher = train(
            &init_model(ModelConfig::new(2, q.dim(), 2, seed)).unwrap(),
            &LabeledData::new(q.features(), q.soft_labels()).unwrap(),
            &tc,
            &CrossEntropy,
        )
        .unwrap()
        .model;
        let frozen = teacher.clone();
        let student = init_model(ModelConfig::new(2, q.dim(), 2, derive_seed(seed, "student"))).unwrap();
        let out = facilitate(&student, &teacher, &q, &TrainConfig::new(1.0, seed).with_epochs(20)).unwrap();
        assert_eq!(teacher, frozen);
        let xs = q.features();
        let (a, b) = (out.predict_all(&xs).unwrap(), teacher.predict_all(&xs).unwrap());
        let agree = a.iter().zip(&b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64;
        if agree > 0.95 {
            passed += 1;
        }
        // Distillation loss on the queries never ends above where it started.
        let targets = LabeledData::new(xs.clone(), teacher.forward_all(&xs).unwrap()).unwrap();
        let p = Progress { step: 0, total: 1 };
        assert!(
            batch_objective(&out, &targets, &CrossEntropy, p, None)
                <= batch_objective(&student, &targets, &CrossEntropy, p, None)
        );
    }
    assert!(passed >= 9, "{passed}/10");
}

#[test]
fn facilitate_rejects_mismatched_models() {
    let q = queries(0, 100);
    let a = init_model(ModelConfig::new(1, q.dim(), 2, 0)).unwrap();
    let b = init_model(ModelConfig::new(1, q.dim() + 1, 2, 0)).unwrap();
    assert!(facilitate(&a, &b, &q, &TrainConfig::new(0.1, 0)).is_err());
}

struct AlignSetup {
    strong: Model,
    weak: Model,
    judge: Model,
    q: Dataset,
}

fn align_setup(seed: u64) -> AlignSetup {
    let q = queries(seed, 200);
    let tc = TrainConfig::new(0.3, seed).with_epochs(2);
    let judge = train_judge(&q, ModelConfig::new(0, q.dim(), 2, seed), &tc).unwrap();
    let weak = train(
        &init_model(ModelConfig::new(0, q.dim(), 2, derive_seed(seed, "weak"))).unwrap(),
        &LabeledData::new(q.features(), q.soft_labels()).unwrap(),
        &tc,
        &CrossEntropy,
    )
    .unwrap()
    .model;
    let strong = init_model(ModelConfig::new(2, q.dim(), 2, derive_seed(seed, "strong"))).unwrap();
    AlignSetup { strong, weak, judge, q }
}

#[test]
fn zero_lambda_alignment_is_facilitation_toward_the_weak_model() {
    let s = align_setup(3);
    let tc = TrainConfig::new(0.2, 3).with_epochs(2);
    let mut cfg = AlignConfig::new(s.judge.clone());
    cfg.lambda = 0.0;
    cfg.rounds = 1;
    let (aligned, _) = align(&s.strong, &s.weak, &s.q, &cfg, &tc).unwrap();
    assert_eq!(aligned, facilitate(&s.strong, &s.weak, &s.q, &tc).unwrap());

    cfg.rounds = 3;
    let (aligned, records) = align(&s.strong, &s.weak, &s.q, &cfg, &tc).unwrap();
    let mut want = s.strong.clone();
    for round in 0..3 {
        want = facilitate(&want, &s.weak, &s.q, &round_config(&tc, round)).unwrap();
    }
    assert_eq!(aligned, want);
    assert_eq!(records.len(), 3 * s.q.len());
}

#[test]
fn alignment_leaves_weak_model_and_judge_untouched() {
    let s = align_setup(4);
    let (weak, judge) = (s.weak.clone(), s.judge.clone());
    let mut cfg = AlignConfig::new(s.judge.clone());
    cfg.rounds = 2;
    let (aligned, records) = align(&s.strong, &s.weak, &s.q, &cfg, &TrainConfig::new(0.2, 4)).unwrap();
    assert_eq!(s.weak, weak);
    assert_eq!(cfg.judge, judge);
    assert_ne!(aligned, s.strong);
    for r in &records {
        assert_eq!(r.winner, Winner::from_score(r.score));
        assert!((l1(&r.explanation_strong.attributions) - 1.0).abs() < 1e-9);
        assert!((l1(&r.explanation_weak.attributions) - 1.0).abs() < 1e-9);
        assert_eq!(r.judge_capacity, 0);
    }
    assert_eq!(win_fraction_by_round(&records).len(), 2);
}

#[test]
fn alignment_is_deterministic() {
    let s = align_setup(5);
    let mut cfg = AlignConfig::new(s.judge.clone());
    cfg.rounds = 2;
    let tc = TrainConfig::new(0.2, 5);
    assert_eq!(
        align(&s.strong, &s.weak, &s.q, &cfg, &tc).unwrap(),
        align(&s.strong, &s.weak, &s.q, &cfg, &tc).unwrap()
    );
}

#[test]
fn bad_align_configs_are_rejected() {
    let s = align_setup(6);
    let tc = TrainConfig::new(0.2, 6);
    for (lambda, rounds, topk) in [(-1.0, 1, 1), (f64::NAN, 1, 1), (1.0, 0, 1), (1.0, 1, 0), (1.0, 1, 99)] {
        let mut cfg = AlignConfig::new(s.judge.clone());
        cfg.lambda = lambda;
        cfg.rounds = rounds;
        cfg.topk = topk;
        assert!(align(&s.strong, &s.weak, &s.q, &cfg, &tc).is_err());
    }
    assert_eq!(AlignConfig::new(s.judge.clone()).topk, s.q.dim().div_ceil(4));
}

#[test]
fn transcripts_round_trip() {
    let s = align_setup(7);
    let mut cfg = AlignConfig::new(s.judge.clone());
    cfg.rounds = 2;
    let (_, records) = align(&s.strong, &s.weak, &s.q, &cfg, &TrainConfig::new(0.2, 7)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("debates.jsonl");
    write_transcript(&records, &path).unwrap();
    let back = read_transcript(&path).unwrap();
    assert_eq!(back, records.iter().map(TranscriptRecord::from).collect::<Vec<_>>());
    std::fs::write(&path, "{\"round\":1}\n").unwrap();
    assert!(read_transcript(&path).is_err());
}

#[test]
fn surrogate_gradient_matches_oracle_differences() {
    for instance in 0..20u64 {
        let mut rng = rng_for(instance, "surrogate");
        let cap = instance as usize % 4;
        let d = 3 + instance as usize % 3;
        let model = init_model(ModelConfig::new(cap, d, 2, instance)).unwrap();
        let xs = random_inputs(5, d, instance);
        let targets: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                let p = rng.random_range(0.05..0.95);
                vec![p, 1.0 - p]
            })
            .collect();
        let weak_attributions: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = l1(&v);
                v.iter().map(|a| a / n).collect()
            })
            .collect();
        let objective = AlignObjective {
            lambda: rng.random_range(0.1..3.0),
            lost: (0..5).map(|_| rng.random_bool(0.7)).collect(),
            classes: xs.iter().map(|x| model.predict(x).unwrap()).collect(),
            weak_attributions,
        };
        let data = LabeledData::new(xs, targets).unwrap();
        let p = Progress { step: 0, total: 1 };
        let mut analytic = vec![0.0; model.params.len()];
        batch_objective(&model, &data, &objective, p, Some(&mut analytic));
        let f = |params: &[f64]| {
            let mut m = model.clone();
            m.params = params.to_vec();
            batch_objective(&m, &data, &objective, p, None)
        };
        let coords: Vec<usize> = (0..model.params.len()).collect();
        let numeric = finite_diff_grad(&f, &model.params, &coords, 1e-5);
        for (a, n) in analytic.iter().zip(&numeric) {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
            assert!(rel < 1e-4, "instance {instance}: {a} vs {n}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn explanations_have_unit_l1_norm(seed in 0u64..10_000, cap in 0usize..4, x in prop::collection::vec(-5.0f64..5.0, 6)) {
        let m = init_model(ModelConfig::new(cap, 6, 2, seed)).unwrap();
        let e = explain(&m, &x).unwrap();
        prop_assert!((l1(&e.attributions) - 1.0).abs() < 1e-9);
        prop_assert!(e.attributions.iter().all(|a| a.is_finite()));
        prop_assert!((0.0..=1.0).contains(&e.confidence));
        prop_assert_eq!(e, explain(&m, &x).unwrap());
    }

    #[test]
    fn judge_scores_stay_in_unit_interval(seed in 0u64..10_000, k in 1usize..=6, x in prop::collection::vec(-5.0f64..5.0, 6)) {
        let judge = init_model(ModelConfig::new(1, 6, 2, seed)).unwrap();
        let m = init_model(ModelConfig::new(2, 6, 2, seed + 1)).unwrap();
        let e = explain(&m, &x).unwrap();
        let s = judge_score(&e, &x, &judge, k, &[0.1; 6]).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn debate_is_antisymmetric_and_compositional(seed in 0u64..10_000, x in prop::collection::vec(-3.0f64..3.0, 5), k in 1usize..=5) {
        let judge = init_model(ModelConfig::new(0, 5, 2, seed)).unwrap();
        let mut cfg = AlignConfig::new(judge.clone());
        cfg.topk = k;
        let a = explain(&init_model(ModelConfig::new(2, 5, 2, seed + 1)).unwrap(), &x).unwrap();
        let b = explain(&init_model(ModelConfig::new(1, 5, 2, seed + 2)).unwrap(), &x).unwrap();
        let means = [0.2, -0.1, 0.0, 0.3, -0.4];
        let ab = debate(&a, &b, &x, &cfg, &means, 0).unwrap();
        let ba = debate(&b, &a, &x, &cfg, &means, 0).unwrap();
        prop_assert_eq!(ab.score, -ba.score);
        let sa = judge_score(&a, &x, &judge, k, &means).unwrap();
        let sb = judge_score(&b, &x, &judge, k, &means).unwrap();
        prop_assert_eq!(ab.score, sa - sb);
        prop_assert_eq!(ab.winner, Winner::from_score(sa - sb));
    }
}
