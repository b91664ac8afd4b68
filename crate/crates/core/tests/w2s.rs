use proptest::prelude::*;
use w2s_core::modelkit::*;
use w2s_core::rng::derive_seed;
use w2s_core::taskgen::*;
use w2s_core::w2s::*;

fn accuracy(m: &Model, ds: &Dataset) -> f64 {
    let p = m.predict_all(&ds.features()).unwrap();
    let t = ds.truths();
    p.iter().zip(&t).filter(|(a, b)| a == b).count() as f64 / t.len() as f64
}

struct Setup {
    supervisor: Model,
    split: SplitPair,
    weak: WeakLabelSet,
}

fn setup(family: Family, seed: u64, size: usize) -> Setup {
    let data = gen_task(&TaskSpec::new(family).with_size(size), seed).unwrap();
    let cfg = ModelConfig::new(0, data.dim(), 2, seed);
    let (supervisor, split) = make_weak_supervisor(&data, cfg, &TrainConfig::new(0.3, seed)).unwrap();
    let weak = generate_weak_labels(&supervisor, &split.d2).unwrap();
    Setup { supervisor, split, weak }
}

fn student_cfg(seed: u64) -> TrainConfig {
    TrainConfig::new(0.3, seed).with_epochs(2).with_metric(EarlyStopMetric::WeakAgreement)
}

fn student(cap: usize, d: usize, seed: u64) -> Model {
    init_model(ModelConfig::new(cap, d, 2, derive_seed(seed, "student"))).unwrap()
}

#[test]
fn weak_supervisor_beats_chance_on_noisy_linear() {
    let mut wins = 0;
    for seed in 0..10 {
        let s = setup(Family::NoisyLinear, seed, 600);
        if accuracy(&s.supervisor, &s.split.d2) > 0.5 {
            wins += 1;
        }
    }
    assert!(wins >= 9, "{wins}/10");
}

#[test]
fn supervisor_never_sees_d2_groups_and_is_deterministic() {
    let a = setup(Family::XorOfSubsets, 3, 400);
    let b = setup(Family::XorOfSubsets, 3, 400);
    assert!(a.split.d1.group_ids().is_disjoint(&a.split.d2.group_ids()));
    assert_eq!(a.supervisor, b.supervisor);
    assert_eq!(a.weak, b.weak);
}

#[test]
fn weak_labels_match_forward_calls_and_supervisor_accuracy() {
    let s = setup(Family::NestedSpheres, 1, 400);
    assert_eq!(s.weak.len(), s.split.d2.len());
    for (label, ex) in s.weak.labels.iter().zip(&s.split.d2.examples) {
        assert_eq!(label, &s.supervisor.forward(&ex.features).unwrap());
        assert!((label.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    let truth = s.split.d2.truths();
    let weak_acc = s.weak.hard().iter().zip(&truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64;
    assert_eq!(weak_acc, accuracy(&s.supervisor, &s.split.d2));
}

#[test]
fn weak_labels_round_trip_through_files() {
    let s = setup(Family::NestedSpheres, 2, 200);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.jsonl");
    write_weak_labels(&s.weak, &path).unwrap();
    let line = std::fs::read_to_string(&path).unwrap();
    let first: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    for key in ["idx", "label", "supervisor_capacity"] {
        assert!(first.get(key).is_some());
    }
    assert_eq!(read_weak_labels(&path, &s.weak.source_task).unwrap(), s.weak);
}

#[test]
fn same_capacity_student_tracks_its_supervisor() {
    let mut gaps = Vec::new();
    for seed in 0..10 {
        let s = setup(Family::NoisyLinear, seed, 600);
        let st = train_student_baseline(&student(0, s.split.d2.dim(), seed), &s.weak, &s.split.d2, &student_cfg(seed)).unwrap();
        gaps.push((accuracy(&st.model, &s.split.d1) - accuracy(&s.supervisor, &s.split.d1)).abs());
    }
    gaps.sort_by(f64::total_cmp);
    let median = 0.5 * (gaps[4] + gaps[5]);
    assert!(median < 0.1, "{gaps:?}");
}

#[test]
fn student_training_never_reads_ground_truth() {
    let s = setup(Family::XorOfSubsets, 4, 400);
    let d = s.split.d2.dim();
    let init = |c: usize| init_model(ModelConfig::new(c, d, 2, 9));
    let mut mc = MethodConfig::new(Method::Bootstrap);
    mc.chain = vec![1, 2];
    mc.gen_epochs = 1;
    let before = label_reads();
    train_student_baseline(&student(2, d, 4), &s.weak, &s.split.d2, &student_cfg(4)).unwrap();
    train_student_confidence(&student(2, d, 4), &s.weak, &s.split.d2, &mc, &student_cfg(4)).unwrap();
    train_student_bootstrap(&init, &s.weak, &s.split.d2, &mc, &student_cfg(4), &CrossEntropy).unwrap();
    generative_finetune(&student(2, d, 4), &s.split.d2.features(), &mc).unwrap();
    train_student(Recipe::FULL, &init, 2, &s.weak, &s.split.d2, &mc, &student_cfg(4)).unwrap();
    assert_eq!(label_reads(), before);
    // The counter does move when truth is read.
    let _ = s.split.d2.truths();
    assert!(label_reads() > before);
}

#[test]
fn students_require_weak_agreement_stopping() {
    let s = setup(Family::XorOfSubsets, 4, 200);
    let cfg = TrainConfig::new(0.3, 0);
    assert!(train_student_baseline(&student(1, s.split.d2.dim(), 0), &s.weak, &s.split.d2, &cfg).is_err());
}

#[test]
fn confidence_loss_examples() {
    let pred = [0.8, 0.2];
    let weak = [0.6, 0.4];
    let ft = [1.0, 0.0];
    assert_eq!(confidence_loss(&pred, &weak, &ft, 0.0), cross_entropy(&pred, &weak));
    assert_eq!(confidence_loss(&pred, &weak, &ft, 1.0), cross_entropy(&pred, &ft));
    let hand = 0.5 * -(0.6 * 0.8f64.ln() + 0.4 * 0.2f64.ln()) + 0.5 * -(0.8f64.ln());
    assert!((confidence_loss(&pred, &weak, &ft, 0.5) - hand).abs() < 1e-15);
}

#[test]
fn threshold_examples() {
    assert_eq!(threshold_self(&[0.9, 0.1], &[0.2, 0.8]), vec![1.0, 0.0]);
    assert_eq!(threshold_self(&[0.5, 0.5], &[0.3, 0.7]), vec![0.0, 1.0]);
}

#[test]
fn alpha_schedule_examples() {
    assert_eq!(alpha_at(0, 100, 0.75).unwrap(), 0.0);
    assert_eq!(alpha_at(20, 100, 0.75).unwrap(), 0.75);
    assert_eq!(alpha_at(10, 100, 0.5).unwrap(), 0.25);
    assert_eq!(alpha_at(100, 100, 0.5).unwrap(), 0.5);
    assert!(alpha_at(0, 0, 0.5).is_err());
    // Top half of the ladder 0..=8 gets 0.75.
    assert_eq!(default_alpha_max(MAX_CAPACITY, MAX_CAPACITY), 0.75);
    assert_eq!(default_alpha_max(5, 8), 0.75);
    assert_eq!(default_alpha_max(4, 8), 0.5);
    assert_eq!(default_alpha_max(0, 8), 0.5);
}

#[test]
fn zero_alpha_confidence_is_bit_identical_to_baseline() {
    let s = setup(Family::ParityOfKBits, 5, 400);
    let st = student(2, s.split.d2.dim(), 5);
    let mut mc = MethodConfig::new(Method::AuxConfidence);
    mc.alpha_max = 0.0;
    let a = train_student_baseline(&st, &s.weak, &s.split.d2, &student_cfg(5)).unwrap();
    let b = train_student_confidence(&st, &s.weak, &s.split.d2, &mc, &student_cfg(5)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_stage_bootstrap_is_bit_identical_to_baseline() {
    let s = setup(Family::XorOfSubsets, 6, 400);
    let d = s.split.d2.dim();
    let init = |c: usize| Ok(student(c, d, 6));
    let mut mc = MethodConfig::new(Method::Bootstrap);
    mc.chain = vec![3];
    mc.bootstrap_rounds = 1;
    let a = train_student_baseline(&student(3, d, 6), &s.weak, &s.split.d2, &student_cfg(6)).unwrap();
    let b = train_student_bootstrap(&init, &s.weak, &s.split.d2, &mc, &student_cfg(6), &CrossEntropy).unwrap();
    assert_eq!(a, b.result);
}

#[test]
fn bootstrap_stages_pass_valid_labels_and_decay_the_rate() {
    let s = setup(Family::XorOfSubsets, 7, 400);
    let d = s.split.d2.dim();
    let init = |c: usize| Ok(student(c, d, 7));
    let mut mc = MethodConfig::new(Method::Bootstrap);
    mc.chain = vec![1, 2, 3];
    mc.lr_decay_per_stage = 10.0;
    let trace = train_student_bootstrap(&init, &s.weak, &s.split.d2, &mc, &student_cfg(7), &CrossEntropy).unwrap();
    assert_eq!(trace.final_labels.len(), s.split.d2.len());
    for l in &trace.final_labels.labels {
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert_eq!(trace.stages.len(), 2 * mc.bootstrap_rounds);
    for st in &trace.stages {
        let want = 0.3 / 10f64.powi(st.stage as i32);
        assert!((st.learning_rate - want).abs() < 1e-15);
    }
    for stage in 0..2 {
        let chosen: Vec<_> = trace.stages.iter().filter(|r| r.stage == stage && r.selected).collect();
        assert_eq!(chosen.len(), 1);
        let best = trace.stages.iter().filter(|r| r.stage == stage).map(|r| r.input_agreement).fold(f64::MIN, f64::max);
        assert_eq!(chosen[0].input_agreement, best);
    }
}

#[test]
fn bootstrap_rejects_bad_chains() {
    let s = setup(Family::XorOfSubsets, 7, 200);
    let d = s.split.d2.dim();
    let init = |c: usize| Ok(student(c, d, 7));
    let mut mc = MethodConfig::new(Method::Bootstrap);
    mc.chain = vec![2, 1];
    assert!(train_student_bootstrap(&init, &s.weak, &s.split.d2, &mc, &student_cfg(7), &CrossEntropy).is_err());
    mc.chain = vec![1, 2];
    assert!(train_student(Recipe::from(Method::Bootstrap), &init, 3, &s.weak, &s.split.d2, &mc, &student_cfg(7)).is_err());
}

#[test]
fn generative_finetune_leaves_the_head_alone_and_reduces_loss() {
    let mut decreased = 0;
    for seed in 0..10 {
        let data = gen_task(&TaskSpec::new(Family::NestedSpheres).with_size(400), seed).unwrap();
        let m = student(2, data.dim(), seed);
        let mut mc = MethodConfig::new(Method::GenerativeFinetune);
        mc.gen_lr = 0.05;
        mc.gen_epochs = 3;
        let r = denoise(&m, &data.features(), &mc, seed).unwrap();
        let off = m.head_offset;
        assert_eq!(r.model.params[off..], m.params[off..]);
        assert_ne!(r.model.params[..off], m.params[..off]);
        if r.losses.last().unwrap() < &r.losses[0] {
            decreased += 1;
        }
    }
    assert!(decreased >= 9, "{decreased}/10");
}

#[test]
fn generative_finetune_rejects_width_mismatch() {
    let m = student(2, 4, 0);
    assert!(generative_finetune(&m, &[vec![0.0; 5]], &MethodConfig::new(Method::GenerativeFinetune)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn threshold_matches_brute_force(p in 0.0f64..=1.0, w in 0.0f64..=1.0, tie in any::<bool>()) {
        let pred = if tie { [0.5, 0.5] } else { [p, 1.0 - p] };
        let weak = [w, 1.0 - w];
        let want = if pred[0] > pred[1] { 0 } else if pred[1] > pred[0] { 1 } else if weak[1] > weak[0] { 1 } else { 0 };
        let got = threshold_self(&pred, &weak);
        prop_assert_eq!(got.iter().position(|&v| v == 1.0).unwrap(), want);
        prop_assert_eq!(got.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn alpha_is_linear_then_flat(step in 0usize..1000, total in 1usize..1000, a in 0.0f64..=1.0) {
        let step = step.min(total);
        let got = alpha_at(step, total, a).unwrap();
        let want = a * (step as f64 / (0.2 * total as f64)).min(1.0);
        prop_assert!((got - want).abs() < 1e-12);
    }
}
