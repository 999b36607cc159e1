#![allow(dead_code)]

use std::f64::consts::PI;

use prosody_core::phonetics::{PhonemeClassTable, Question, QuestionKind, WordEntry};
use prosody_core::ProsodySample;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;

pub const INVENTORY: [&str; 16] = [
    "AA", "AE", "IY", "UW", "OW", "M", "N", "NG", "P", "T", "K", "S", "Z", "F", "L", "R",
];

/// A random valid word with 1..=max_len phonemes.
pub fn random_word(rng: &mut impl Rng, name: String, max_len: usize) -> WordEntry {
    let len = rng.random_range(1..=max_len);
    let phonemes: Vec<String> = (0..len)
        .map(|_| INVENTORY.choose(rng).unwrap().to_string())
        .collect();
    let mut breaks = vec![0];
    for i in 1..len {
        if rng.random_bool(0.4) {
            breaks.push(i);
        }
    }
    let stress = if rng.random_bool(0.8) {
        Some(rng.random_range(0..breaks.len()))
    } else {
        None
    };
    WordEntry::new(name, phonemes, breaks, stress).unwrap()
}

pub fn random_question(rng: &mut impl Rng, id: u32) -> Question {
    let classes = ["Vowel", "Nasal", "Plosive", "Fricative", "Liquid"];
    let kind = *QuestionKind::ALL.choose(rng).unwrap();
    match kind {
        QuestionKind::PhonemeCountGt => Question::new(id, kind, Some(rng.random_range(1..8)), None),
        QuestionKind::SyllableCountGt => {
            Question::new(id, kind, Some(rng.random_range(1..4)), None)
        }
        QuestionKind::StressOnSyllable => {
            Question::new(id, kind, Some(rng.random_range(0..3)), None)
        }
        QuestionKind::EndsClosedSyllable => Question::new(id, kind, None, None),
        _ => Question::new(id, kind, None, Some(classes.choose(rng).unwrap())),
    }
}

/// Tokens for each word: a per-word mean plus unit noise.
pub fn random_samples(
    rng: &mut impl Rng,
    words: &[WordEntry],
    tokens: &[usize],
    d: usize,
) -> Vec<ProsodySample> {
    let mut out = Vec::new();
    for (w, &count) in words.iter().zip(tokens) {
        let center: Vec<f64> = (0..d)
            .map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for t in 0..count {
            out.push(ProsodySample {
                token_id: format!("{}#{t}", w.word),
                word: w.word.clone(),
                embedding: center
                    .iter()
                    .map(|c| c + rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            });
        }
    }
    out
}

pub fn classes() -> PhonemeClassTable {
    PhonemeClassTable::default_arpabet()
}

/// Sum of per-sample diagonal Gaussian log densities under the two-pass ML
/// fit of `xs` itself.
pub fn self_log_likelihood(xs: &[&[f64]], floor: f64) -> f64 {
    let n = xs.len() as f64;
    let d = xs[0].len();
    let mut total = 0.0;
    for j in 0..d {
        let mu = xs.iter().map(|x| x[j]).sum::<f64>() / n;
        let var = (xs.iter().map(|x| (x[j] - mu).powi(2)).sum::<f64>() / n).max(floor);
        for x in xs {
            total += -0.5 * (2.0 * PI * var).ln() - (x[j] - mu).powi(2) / (2.0 * var);
        }
    }
    total
}
