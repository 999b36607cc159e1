//! Synthetic corpora with planted structure, and the metrics used to score
//! recovery of that structure.
//!
//! Word archetypes differ in phoneme count (`3 + 3k` phonemes for archetype
//! `k`), optionally also in the class of the first phoneme. Inside an
//! archetype, embeddings come from a diagonal GMM with unit variance whose
//! means sit on scaled basis vectors, so every pair of means is exactly
//! `component_separation` apart.

use std::collections::HashMap;
use std::hash::Hash;
use std::io::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::ProsodySample;
use crate::phonetics::{PhonemeClassTable, Question, QuestionKind, WordEntry};
use crate::tagger::ProsodyTag;
use crate::tree::GrowthTrace;

/// Distinct phoneme-count profiles available to the generator.
pub const MAX_COUNT_PROFILES: usize = 16;

const VOWELS: [&str; 6] = ["AA", "AE", "EH", "IY", "OW", "UW"];
const NASALS: [&str; 3] = ["M", "N", "NG"];
const PLOSIVES: [&str; 6] = ["B", "D", "G", "K", "P", "T"];
const OTHER_CONSONANTS: [&str; 7] = ["F", "S", "SH", "V", "Z", "L", "R"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_leaf_archetypes: usize,
    pub words_per_archetype: usize,
    pub tokens_per_word: usize,
    pub components_per_archetype: usize,
    pub d: usize,
    /// Distance between planted component means, in units of the
    /// within-component standard deviation (fixed at 1).
    pub component_separation: f64,
    pub seed: u64,
    /// Also distinguish archetypes by first-phoneme class (nasal vs plosive).
    pub class_features: bool,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            num_leaf_archetypes: 10,
            words_per_archetype: 50,
            tokens_per_word: 10,
            components_per_archetype: 5,
            d: 16,
            component_separation: 8.0,
            seed: 0,
            class_features: false,
        }
    }
}

impl SynthSpec {
    pub fn max_archetypes(&self) -> usize {
        if self.class_features {
            2 * MAX_COUNT_PROFILES
        } else {
            MAX_COUNT_PROFILES
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_leaf_archetypes", self.num_leaf_archetypes),
            ("words_per_archetype", self.words_per_archetype),
            ("tokens_per_word", self.tokens_per_word),
            ("components_per_archetype", self.components_per_archetype),
            ("d", self.d),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::SynthSpec(format!("{name} must be at least 1")));
        }
        if !(self.component_separation > 0.0 && self.component_separation.is_finite()) {
            return Err(Error::SynthSpec(
                "component_separation must be positive".into(),
            ));
        }
        if self.num_leaf_archetypes > self.max_archetypes() {
            return Err(Error::SynthSpec(format!(
                "{} archetypes requested but only {} distinct phonetic profiles exist",
                self.num_leaf_archetypes,
                self.max_archetypes()
            )));
        }
        if self.components_per_archetype > self.d {
            return Err(Error::SynthSpec(format!(
                "{} components cannot be equidistant in {} dimensions",
                self.components_per_archetype, self.d
            )));
        }
        Ok(())
    }

    fn phoneme_count(&self, archetype: usize) -> usize {
        let profile = if self.class_features {
            archetype / 2
        } else {
            archetype
        };
        3 + 3 * profile
    }

    fn count_profiles(&self) -> usize {
        if self.class_features {
            self.num_leaf_archetypes.div_ceil(2)
        } else {
            self.num_leaf_archetypes
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub token_id: String,
    pub archetype: usize,
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub records: Vec<TruthRecord>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_json_lines(&self, mut sink: impl Write) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut sink, r)?;
            sink.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub lexicon: Vec<WordEntry>,
    pub questions: Vec<Question>,
    pub classes: PhonemeClassTable,
    pub samples: Vec<ProsodySample>,
    pub truth: GroundTruth,
}

fn make_word(spec: &SynthSpec, archetype: usize, index: usize, rng: &mut ChaCha8Rng) -> WordEntry {
    let len = spec.phoneme_count(archetype);
    let mut phonemes = Vec::with_capacity(len);
    for i in 0..len {
        let symbol = if i % 2 == 1 {
            VOWELS.choose(rng)
        } else if i == 0 && spec.class_features {
            if archetype.is_multiple_of(2) {
                NASALS.choose(rng)
            } else {
                PLOSIVES.choose(rng)
            }
        } else {
            match rng.random_range(0..3) {
                0 => NASALS.choose(rng),
                1 => PLOSIVES.choose(rng),
                _ => OTHER_CONSONANTS.choose(rng),
            }
        };
        phonemes.push(symbol.expect("non-empty inventory").to_string());
    }
    let syllable_breaks: Vec<usize> = (0..len).step_by(2).collect();
    let stress = rng.random_range(0..syllable_breaks.len());
    WordEntry::new(
        format!("arch{archetype}_w{index}"),
        phonemes,
        syllable_breaks,
        Some(stress),
    )
    .expect("generated words are valid")
}

fn make_questions(spec: &SynthSpec) -> Vec<Question> {
    let mut qs = Vec::new();
    let mut push = |kind, int: Option<i64>, class: Option<&str>| {
        qs.push(Question::new(qs.len() as u32, kind, int, class));
    };
    for profile in 0..spec.count_profiles().saturating_sub(1) {
        push(
            QuestionKind::PhonemeCountGt,
            Some((3 + 3 * profile + 1) as i64),
            None,
        );
    }
    if spec.class_features {
        push(QuestionKind::StartsWithClass, None, Some("Nasal"));
    } else {
        push(QuestionKind::StartsWithClass, None, Some("Nasal"));
        push(QuestionKind::StartsWithClass, None, Some("Fricative"));
    }
    push(QuestionKind::EndsClosedSyllable, None, None);
    push(QuestionKind::ContainsClass, None, Some("Liquid"));
    push(QuestionKind::EndsWithClass, None, Some("Fricative"));
    push(QuestionKind::StressOnSyllable, Some(0), None);
    qs
}

/// Generates a corpus; identical specs give identical corpora.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.d;
    let half_sep = spec.component_separation / std::f64::consts::SQRT_2;

    let mut lexicon = Vec::new();
    let mut samples = Vec::new();
    let mut truth = GroundTruth::default();
    for a in 0..spec.num_leaf_archetypes {
        let center: Vec<f64> = (0..d)
            .map(|_| 2.0 * spec.component_separation * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for w in 0..spec.words_per_archetype {
            let entry = make_word(spec, a, w, &mut rng);
            for t in 0..spec.tokens_per_word {
                let component = (w * spec.tokens_per_word + t) % spec.components_per_archetype;
                let embedding = (0..d)
                    .map(|j| {
                        let offset = if j == component { half_sep } else { 0.0 };
                        center[j] + offset + rng.sample::<f64, _>(StandardNormal)
                    })
                    .collect();
                let token_id = format!("{}_t{t}", entry.word);
                truth.records.push(TruthRecord {
                    token_id: token_id.clone(),
                    archetype: a,
                    component,
                });
                samples.push(ProsodySample {
                    token_id,
                    word: entry.word.clone(),
                    embedding,
                });
            }
            lexicon.push(entry);
        }
    }
    Ok(SynthCorpus {
        lexicon,
        questions: make_questions(spec),
        classes: PhonemeClassTable::default_arpabet(),
        samples,
        truth,
    })
}

fn comb2(n: u64) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index between two labelings of the same items.
///
/// When both partitions are trivial in the same way (the chance-corrected
/// denominator vanishes) the result is 1.
pub fn ari_from_labels<A: Hash + Eq, B: Hash + Eq>(a: &[A], b: &[B]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::TokenMismatch(format!(
            "{} vs {} labels",
            a.len(),
            b.len()
        )));
    }
    let mut joint: HashMap<(&A, &B), u64> = HashMap::new();
    let mut rows: HashMap<&A, u64> = HashMap::new();
    let mut cols: HashMap<&B, u64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = joint.values().map(|&c| comb2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| comb2(c)).sum();
    let total = comb2(a.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// ARI between predicted tags and the planted (archetype, component) labels.
pub fn adjusted_rand_index(pred: &HashMap<String, ProsodyTag>, truth: &GroundTruth) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::TokenMismatch(format!(
            "{} predicted tokens vs {} ground-truth tokens",
            pred.len(),
            truth.len()
        )));
    }
    let mut predicted = Vec::with_capacity(truth.len());
    let mut planted = Vec::with_capacity(truth.len());
    for r in &truth.records {
        let tag = pred.get(&r.token_id).ok_or_else(|| {
            Error::TokenMismatch(format!("token `{}` has no prediction", r.token_id))
        })?;
        predicted.push(tag);
        planted.push((r.archetype, r.component));
    }
    ari_from_labels(&predicted, &planted)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthRow {
    pub num_leaves: usize,
    pub total_leaf_ll: f64,
    pub avg_samples_per_leaf: f64,
}

/// One row for the single-leaf tree plus one per split.
pub fn growth_report(trace: &GrowthTrace) -> Vec<GrowthRow> {
    let mut rows = vec![GrowthRow {
        num_leaves: 1,
        total_leaf_ll: trace.root_ll,
        avg_samples_per_leaf: trace.num_samples as f64,
    }];
    rows.extend(trace.splits.iter().map(|s| GrowthRow {
        num_leaves: s.step + 1,
        total_leaf_ll: s.total_leaf_ll,
        avg_samples_per_leaf: s.avg_samples_per_leaf,
    }));
    rows
}

pub fn write_growth_csv(rows: &[GrowthRow], mut sink: impl Write) -> Result<()> {
    writeln!(sink, "num_leaves,total_leaf_ll,avg_samples_per_leaf")?;
    for r in rows {
        writeln!(
            sink,
            "{},{},{}",
            r.num_leaves, r.total_leaf_ll, r.avg_samples_per_leaf
        )?;
    }
    Ok(())
}
