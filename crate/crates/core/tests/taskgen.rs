use std::collections::BTreeSet;

use proptest::prelude::*;
use w2s_core::taskgen::*;
use w2s_oracles::minimax;

fn board_of(meta: &str) -> (String, usize) {
    let mut parts = meta.split(';');
    let board = parts.next().unwrap().trim_start_matches("board=").to_string();
    let mv = parts.next().unwrap().trim_start_matches("move=").parse().unwrap();
    (board, mv)
}

#[test]
fn xor_class_balance_is_near_half() {
    let spec = TaskSpec::new(Family::XorOfSubsets).with_dim(4).with_size(256);
    for seed in 0..5 {
        let ds = gen_task(&spec, seed).unwrap();
        // Count positives by the label rule (posterior > 1/2) directly.
        let positives = ds.examples.iter().filter(|e| e.soft_label()[1] > 0.5).count() as f64;
        assert!((positives - 128.0).abs() <= 25.6, "seed {seed}: {positives}");
    }
}

#[test]
fn suite_yields_one_dataset_per_spec() {
    let suite: Vec<TaskSpec> = Family::ALL.iter().map(|&f| TaskSpec::new(f).with_size(100)).collect();
    let a = gen_synthetic_suite(&suite, 9).unwrap();
    let b = gen_synthetic_suite(&suite, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 4);
    for (ds, spec) in a.iter().zip(&suite) {
        assert_eq!(ds.task_id, spec.family.name());
        assert!(ds.concept_names.len() >= 2);
    }
}

#[test]
fn every_bestmove_label_matches_the_minimax_oracle() {
    let n = legal_nonterminal_positions().len();
    let ds = gen_bestmove_task(0, n).unwrap();
    let mut pairs = 0;
    for pos in legal_nonterminal_positions() {
        pairs += pos.legal_moves().len();
    }
    assert_eq!(ds.len(), pairs);
    let mut cache = std::collections::HashMap::new();
    for ex in &ds.examples {
        let (board, mv) = board_of(ex.meta.as_deref().unwrap());
        let optimal = cache
            .entry(board.clone())
            .or_insert_with(|| minimax::minimax_solve(&board).unwrap().value)
            .clone();
        assert_eq!(ex.truth() == 1, optimal.contains(&mv), "{board} move {mv}");
    }
}

#[test]
fn bestmove_pair_count_is_sum_of_legal_moves() {
    let ds = gen_bestmove_task(4, 40).unwrap();
    let boards: BTreeSet<String> = ds.examples.iter().map(|e| board_of(e.meta.as_deref().unwrap()).0).collect();
    assert_eq!(boards.len(), 40);
    // Independent count: empty cells of each sampled board.
    let expected: usize = boards.iter().map(|b| b.chars().filter(|&c| c == '.').count()).sum();
    assert_eq!(ds.len(), expected);
}

#[test]
fn empty_board_every_opening_draws() {
    assert_eq!(minimax::game_value(".........").unwrap().value, 0);
    let core = solve_position(&Board::empty()).unwrap();
    let oracle = minimax::minimax_solve(".........").unwrap().value;
    assert_eq!(core, oracle);
    // One label per move, all equal.
    let ds = gen_bestmove_task(0, legal_nonterminal_positions().len()).unwrap();
    let empties: Vec<_> = ds.examples.iter().filter(|e| e.meta.as_deref().unwrap().starts_with("board=.........;")).collect();
    assert_eq!(empties.len(), 9);
    assert!(empties.iter().all(|e| e.soft_label() == empties[0].soft_label()));
}

#[test]
fn optimal_sets_are_symmetry_invariant() {
    for pos in legal_nonterminal_positions().iter().step_by(7) {
        let board = pos.render();
        let optimal = solve_position(pos).unwrap();
        for map in minimax::symmetries() {
            let image = minimax::transform(&board, &map);
            let mut mapped: Vec<usize> = optimal.iter().map(|&m| minimax::transform_move(m, &map)).collect();
            mapped.sort();
            assert_eq!(solve_position(&Board::parse(&image).unwrap()).unwrap(), mapped, "{board} -> {image}");
        }
    }
}

#[test]
fn bestmove_rejects_bad_counts() {
    assert!(gen_bestmove_task(0, 0).is_err());
    assert!(gen_bestmove_task(0, legal_nonterminal_positions().len() + 1).is_err());
}

fn grouped(n: usize, sizes: &[usize]) -> Dataset {
    let mut examples = Vec::new();
    let mut g = 0u64;
    let mut it = sizes.iter().cycle();
    while examples.len() < n {
        let s = (*it.next().unwrap()).min(n - examples.len());
        for _ in 0..s {
            examples.push(Example::new(vec![examples.len() as f64, 0.0], vec![0.5, 0.5], g).unwrap());
        }
        g += 1;
    }
    Dataset::new("toy", examples).unwrap()
}

#[test]
fn singleton_groups_halve_exactly() {
    let ds = grouped(100, &[1]);
    let s = grouped_split(&ds, 0.5, 3).unwrap();
    assert_eq!((s.d1.len(), s.d2.len()), (50, 50));
}

#[test]
fn large_group_lands_whole() {
    let mut sizes = vec![60];
    sizes.extend(std::iter::repeat_n(1, 40));
    let ds = grouped(100, &sizes);
    let s = grouped_split(&ds, 0.5, 1).unwrap();
    let in_d1 = s.d1.examples.iter().filter(|e| e.group_id == 0).count();
    let in_d2 = s.d2.examples.iter().filter(|e| e.group_id == 0).count();
    assert!(in_d1 == 0 || in_d2 == 0);
    assert_eq!(in_d1 + in_d2, 60);
}

#[test]
fn single_group_is_rejected() {
    let ds = grouped(10, &[10]);
    assert!(grouped_split(&ds, 0.5, 0).is_err());
}

#[test]
fn dataset_round_trips_through_jsonl() {
    let ds = gen_task(&TaskSpec::new(Family::NestedSpheres).with_size(80), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    write_dataset(&ds, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["task_id", "idx", "group", "features", "soft_label", "concepts"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    let back = read_dataset(&path).unwrap();
    // Concept names are not persisted; everything else is.
    assert_eq!(back.examples, ds.examples);
    assert_eq!(back.concept_labels, ds.concept_labels);
}

/// Best achievable |d1| under whole-group assignment, by brute force over subsets.
fn best_count(sizes: &[usize], target: f64) -> usize {
    let mut best = None::<usize>;
    for mask in 1..(1u32 << sizes.len()) - 1 {
        let c: usize = (0..sizes.len()).filter(|i| mask >> i & 1 == 1).map(|i| sizes[i]).sum();
        best = match best {
            Some(b) if (b as f64 - target).abs() <= (c as f64 - target).abs() => Some(b),
            _ => Some(c),
        };
    }
    best.unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn splits_never_leak_and_cover_everything(sizes in prop::collection::vec(1usize..6, 2..12), frac in 0.1f64..0.9, seed in 0u64..1000) {
        let n: usize = sizes.iter().sum();
        let ds = grouped(n, &sizes);
        let s = grouped_split(&ds, frac, seed).unwrap();
        let g1 = s.d1.group_ids();
        let g2 = s.d2.group_ids();
        prop_assert!(g1.is_disjoint(&g2));
        prop_assert_eq!(g1.union(&g2).cloned().collect::<BTreeSet<_>>(), ds.group_ids());
        prop_assert_eq!(s.d1.len() + s.d2.len(), n);
        let target = frac * n as f64;
        let best = best_count(&sizes, target);
        prop_assert!(((s.d1.len() as f64) - target).abs() <= (best as f64 - target).abs() + 1e-9);
    }

    #[test]
    fn generators_are_pure(seed in 0u64..500, fam in 0usize..4) {
        let spec = TaskSpec::new(Family::ALL[fam]).with_size(64);
        let a = gen_task(&spec, seed).unwrap();
        prop_assert_eq!(&a, &gen_task(&spec, seed).unwrap());
        for ex in &a.examples {
            prop_assert!((ex.soft_label().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(ex.features.iter().all(|v| v.is_finite()));
        }
    }
}
