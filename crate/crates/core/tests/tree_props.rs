mod common;

use std::collections::HashMap;

use prosody_core::gaussian::{accumulate, node_log_likelihood};
use prosody_core::phonetics::{Question, WordEntry};
use prosody_core::tree::{best_split_for_leaf, group_by_word, grow_tree, route_word, TreeConfig};
use prosody_core::ProsodySample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    words: Vec<WordEntry>,
    samples: Vec<ProsodySample>,
    questions: Vec<Question>,
}

fn instance(seed: u64, num_words: usize, num_questions: u32, d: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<WordEntry> = (0..num_words)
        .map(|i| common::random_word(&mut rng, format!("w{i}"), 9))
        .collect();
    let tokens: Vec<usize> = (0..num_words).map(|_| rng.random_range(1..=8)).collect();
    let samples = common::random_samples(&mut rng, &words, &tokens, d);
    let questions = (0..num_questions)
        .map(|id| common::random_question(&mut rng, id))
        .collect();
    Instance {
        words,
        samples,
        questions,
    }
}

fn leaf_ll_total(inst: &Instance, cfg: &TreeConfig) -> (f64, usize) {
    let classes = common::classes();
    let (tree, _) = grow_tree(&inst.words, &inst.samples, &inst.questions, &classes, cfg).unwrap();
    let by_name: HashMap<&str, &WordEntry> =
        inst.words.iter().map(|w| (w.word.as_str(), w)).collect();
    let mut members: HashMap<String, Vec<&[f64]>> = HashMap::new();
    for s in &inst.samples {
        let leaf = route_word(&tree, by_name[s.word.as_str()], &inst.questions, &classes).unwrap();
        members
            .entry(leaf.to_string())
            .or_default()
            .push(&s.embedding);
    }
    let d = inst.samples[0].embedding.len();
    let total = members
        .values()
        .map(|xs| {
            node_log_likelihood(&accumulate(d, xs.iter().copied()).unwrap(), cfg.floor).unwrap()
        })
        .sum();
    (total, tree.num_leaves())
}

#[test]
fn best_split_matches_enumeration() {
    let classes = common::classes();
    for seed in 0..10 {
        let inst = instance(seed, 30, 8, 3);
        let groups = group_by_word(&inst.words, &inst.samples).unwrap();
        let choice = best_split_for_leaf(&groups, &inst.questions, &classes, 1e-9, 2).unwrap();

        // Enumerate every question's gain from raw tokens.
        let by_name: HashMap<&str, &WordEntry> =
            inst.words.iter().map(|w| (w.word.as_str(), w)).collect();
        let all: Vec<&[f64]> = inst
            .samples
            .iter()
            .map(|s| s.embedding.as_slice())
            .collect();
        let parent = common::self_log_likelihood(&all, 1e-9);
        let mut best: Option<(u32, f64)> = None;
        for q in &inst.questions {
            let (yes, no): (Vec<&ProsodySample>, Vec<&ProsodySample>) = inst
                .samples
                .iter()
                .partition(|s| q.answer(by_name[s.word.as_str()], &classes).unwrap());
            if yes.len() < 2 || no.len() < 2 {
                continue;
            }
            let yes: Vec<&[f64]> = yes.iter().map(|s| s.embedding.as_slice()).collect();
            let no: Vec<&[f64]> = no.iter().map(|s| s.embedding.as_slice()).collect();
            let gain = common::self_log_likelihood(&yes, 1e-9)
                + common::self_log_likelihood(&no, 1e-9)
                - parent;
            if best.is_none_or(|(_, g)| gain > g + 1e-9) {
                best = Some((q.id, gain));
            }
        }
        match (choice, best) {
            (None, None) => {}
            (Some(c), Some((id, gain))) => {
                assert_eq!(c.question_id, id, "seed {seed}");
                assert!((c.gain - gain).abs() < 1e-6, "seed {seed}");
            }
            other => panic!("seed {seed}: {other:?}"),
        }
    }
}

#[test]
fn each_split_adds_exactly_its_gain() {
    let classes = common::classes();
    for seed in 0..8 {
        let inst = instance(100 + seed, 40, 8, 4);
        let cfg = TreeConfig {
            max_leaves: 6,
            min_leaf: 3,
            floor: 1e-9,
            ..TreeConfig::default()
        };
        let (_, trace) =
            grow_tree(&inst.words, &inst.samples, &inst.questions, &classes, &cfg).unwrap();
        let (mut before, _) = leaf_ll_total(
            &inst,
            &TreeConfig {
                max_leaves: 1,
                ..cfg
            },
        );
        assert!((before - trace.root_ll).abs() < 1e-6);
        for split in &trace.splits {
            let (after, leaves) = leaf_ll_total(
                &inst,
                &TreeConfig {
                    max_leaves: split.step + 1,
                    ..cfg
                },
            );
            assert_eq!(leaves, split.step + 1);
            assert!(
                (after - (before + split.gain)).abs() < 1e-6,
                "seed {seed} step {}",
                split.step
            );
            assert!((after - split.total_leaf_ll).abs() < 1e-6);
            before = after;
        }
    }
}

#[test]
fn trace_invariants_hold() {
    let classes = common::classes();
    for seed in 0..20 {
        let inst = instance(200 + seed, 25, 6, 2);
        let cfg = TreeConfig {
            max_leaves: 8,
            min_leaf: 2,
            ..TreeConfig::default()
        };
        let (tree, trace) =
            grow_tree(&inst.words, &inst.samples, &inst.questions, &classes, &cfg).unwrap();
        let n = inst.samples.len() as f64;
        let mut prev_ll = trace.root_ll;
        let mut prev_avg = n;
        for s in &trace.splits {
            assert!(s.total_leaf_ll >= prev_ll);
            assert!(s.avg_samples_per_leaf < prev_avg);
            assert_eq!(s.avg_samples_per_leaf, n / (s.step + 1) as f64);
            prev_ll = s.total_leaf_ll;
            prev_avg = s.avg_samples_per_leaf;
        }
        assert_eq!(tree.num_leaves(), trace.splits.len() + 1);
        tree.validate(&inst.questions).unwrap();
    }
}

#[test]
fn growth_is_deterministic() {
    let inst = instance(77, 30, 8, 3);
    let cfg = TreeConfig {
        min_leaf: 2,
        ..TreeConfig::default()
    };
    let a = grow_tree(
        &inst.words,
        &inst.samples,
        &inst.questions,
        &common::classes(),
        &cfg,
    )
    .unwrap();
    let b = grow_tree(
        &inst.words,
        &inst.samples,
        &inst.questions,
        &common::classes(),
        &cfg,
    )
    .unwrap();
    assert_eq!(a, b);
}
