//! Two-stage tagging: phonetic decision tree, then one GMM per leaf.
//!
//! A tag is the leaf letter followed by the component index (`"d3"`). The
//! model file is one self-contained JSON document that embeds the question
//! set and class table the tree was grown with.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{self, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{ProsodySample, DEFAULT_VAR_FLOOR};
use crate::gmm::{assign_component, fit_gmm, GmmConfig, LeafGmm};
use crate::phonetics::{PhonemeClassTable, Question, WordEntry};
use crate::tree::{group_by_word, grow_tree_from_groups, DecisionTree, GrowthTrace, TreeConfig};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProsodyTag {
    pub leaf: String,
    pub component: usize,
}

impl ProsodyTag {
    pub fn new(leaf: impl Into<String>, component: usize) -> Self {
        ProsodyTag {
            leaf: leaf.into(),
            component,
        }
    }
}

impl fmt::Display for ProsodyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.leaf, self.component)
    }
}

impl FromStr for ProsodyTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let split = s.find(|c: char| c.is_ascii_digit()).unwrap_or(s.len());
        let (leaf, digits) = s.split_at(split);
        let valid = !leaf.is_empty()
            && leaf.bytes().all(|b| b.is_ascii_lowercase())
            && !digits.is_empty()
            && digits.bytes().all(|b| b.is_ascii_digit());
        if !valid {
            return Err(Error::InvalidTag(s.to_string()));
        }
        let component = digits
            .parse()
            .map_err(|_| Error::InvalidTag(s.to_string()))?;
        Ok(ProsodyTag::new(leaf, component))
    }
}

impl Serialize for ProsodyTag {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProsodyTag {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggerConfig {
    /// Embedding dimension; `0` means infer from the data.
    pub d: usize,
    /// Gaussian components per leaf.
    pub m: usize,
    pub max_leaves: usize,
    pub min_gain: f64,
    pub min_leaf: usize,
    pub floor: f64,
    pub seed: u64,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            d: 0,
            m: 5,
            max_leaves: 10,
            min_gain: 0.0,
            min_leaf: 10,
            floor: DEFAULT_VAR_FLOOR,
            seed: 0,
            max_iters: 200,
            rel_tol: 1e-6,
        }
    }
}

impl TaggerConfig {
    pub fn tree(&self) -> TreeConfig {
        TreeConfig {
            max_leaves: self.max_leaves,
            min_gain: self.min_gain,
            min_leaf: self.min_leaf,
            floor: self.floor,
        }
    }

    pub fn gmm(&self) -> GmmConfig {
        GmmConfig {
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            floor: self.floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("components must be at least 1".into()));
        }
        if self.rel_tol.is_nan() || self.rel_tol < 0.0 {
            return Err(Error::Config("rel_tol must be non-negative".into()));
        }
        self.tree().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerModel {
    pub format_version: u64,
    pub config: TaggerConfig,
    pub classes: PhonemeClassTable,
    pub questions: Vec<Question>,
    pub tree: DecisionTree,
    pub gmms: BTreeMap<String, LeafGmm>,
    pub leaf_sample_counts: BTreeMap<String, usize>,
    pub growth_trace: GrowthTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenTag {
    pub token_id: String,
    pub word: String,
    pub tag: ProsodyTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutput {
    pub model: TaggerModel,
    /// Tags of the training tokens, in input order.
    pub tags: Vec<TokenTag>,
}

fn check_questions(questions: &[Question], classes: &PhonemeClassTable) -> Result<()> {
    let mut seen = HashSet::new();
    for q in questions {
        if !seen.insert(q.id) {
            return Err(Error::DuplicateQuestion(q.id));
        }
        q.validate(classes)?;
    }
    Ok(())
}

/// Grows the tree on all samples, then fits one GMM per leaf. Leaf `i` is
/// seeded with `config.seed ^ i`.
pub fn fit(
    lexicon: &[WordEntry],
    samples: &[ProsodySample],
    questions: &[Question],
    classes: &PhonemeClassTable,
    config: &TaggerConfig,
) -> Result<FitOutput> {
    config.validate()?;
    classes.validate()?;
    check_questions(questions, classes)?;
    let dim = samples.first().ok_or(Error::EmptyCorpus)?.embedding.len();
    if config.d != 0 && config.d != dim {
        return Err(Error::DimensionMismatch {
            expected: config.d,
            found: dim,
        });
    }

    let groups = group_by_word(lexicon, samples)?;
    let (tree, growth_trace) = grow_tree_from_groups(&groups, questions, classes, &config.tree())?;

    let mut leaf_of_word: HashMap<&str, usize> = HashMap::with_capacity(groups.len());
    for g in &groups {
        leaf_of_word.insert(
            g.entry.word.as_str(),
            tree.route(&g.entry, questions, classes)?,
        );
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); tree.num_leaves()];
    for (i, s) in samples.iter().enumerate() {
        members[leaf_of_word[s.word.as_str()]].push(i);
    }

    let gmm_config = config.gmm();
    let mut gmms = BTreeMap::new();
    let mut leaf_sample_counts = BTreeMap::new();
    let mut fitted: Vec<LeafGmm> = Vec::with_capacity(members.len());
    for (leaf, idxs) in members.iter().enumerate() {
        let letter = &tree.leaf_letters[leaf];
        let points: Vec<&[f64]> = idxs
            .iter()
            .map(|&i| samples[i].embedding.as_slice())
            .collect();
        let m = if points.len() < config.m {
            log::warn!(
                "leaf {letter} has {} samples; fitting {} components instead of {}",
                points.len(),
                points.len().max(1),
                config.m
            );
            points.len().max(1)
        } else {
            config.m
        };
        let fit = fit_gmm(&points, m, config.seed ^ leaf as u64, &gmm_config)?;
        log::debug!(
            "leaf {letter}: {} samples, {} EM iterations, {} re-seeds",
            points.len(),
            fit.iterations,
            fit.reseeds
        );
        gmms.insert(letter.clone(), fit.gmm.clone());
        leaf_sample_counts.insert(letter.clone(), points.len());
        fitted.push(fit.gmm);
    }

    let mut tags = Vec::with_capacity(samples.len());
    for s in samples {
        let leaf = leaf_of_word[s.word.as_str()];
        tags.push(TokenTag {
            token_id: s.token_id.clone(),
            word: s.word.clone(),
            tag: ProsodyTag::new(
                tree.leaf_letters[leaf].clone(),
                assign_component(&s.embedding, &fitted[leaf])?,
            ),
        });
    }

    let model = TaggerModel {
        format_version: FORMAT_VERSION,
        config: TaggerConfig { d: dim, ..*config },
        classes: classes.clone(),
        questions: questions.to_vec(),
        tree,
        gmms,
        leaf_sample_counts,
        growth_trace,
    };
    Ok(FitOutput { model, tags })
}

impl TaggerModel {
    /// Routes `word` through the tree and picks the maximum-posterior component.
    pub fn tag(&self, word: &WordEntry, e: &[f64]) -> Result<ProsodyTag> {
        if e.len() != self.config.d {
            return Err(Error::DimensionMismatch {
                expected: self.config.d,
                found: e.len(),
            });
        }
        let leaf = self.tree.route(word, &self.questions, &self.classes)?;
        let letter = &self.tree.leaf_letters[leaf];
        let gmm = self
            .gmms
            .get(letter)
            .ok_or_else(|| Error::ModelCorruption(format!("leaf {letter} has no GMM")))?;
        Ok(ProsodyTag::new(letter.clone(), assign_component(e, gmm)?))
    }

    /// Every tag the model can emit: leaves in creation order, components ascending.
    pub fn tag_inventory(&self) -> Vec<ProsodyTag> {
        let mut out = Vec::new();
        for letter in &self.tree.leaf_letters {
            let m = self.gmms.get(letter).map_or(0, LeafGmm::num_components);
            out.extend((0..m).map(|k| ProsodyTag::new(letter.clone(), k)));
        }
        out
    }

    /// Structural checks run after loading.
    pub fn validate(&self) -> Result<()> {
        self.classes.validate()?;
        check_questions(&self.questions, &self.classes)?;
        self.tree.validate(&self.questions)?;
        if self.config.d == 0 || self.config.m == 0 {
            return Err(Error::ModelCorruption(
                "config has zero dimension or components".into(),
            ));
        }
        if self.gmms.len() != self.tree.num_leaves() {
            return Err(Error::ModelCorruption(
                "GMM count differs from leaf count".into(),
            ));
        }
        for letter in &self.tree.leaf_letters {
            let gmm = self
                .gmms
                .get(letter)
                .ok_or_else(|| Error::ModelCorruption(format!("leaf {letter} has no GMM")))?;
            if gmm.dim() != self.config.d {
                return Err(Error::ModelCorruption(format!(
                    "leaf {letter} GMM has dimension {}, config says {}",
                    gmm.dim(),
                    self.config.d
                )));
            }
            if gmm.num_components() > self.config.m {
                return Err(Error::ModelCorruption(format!(
                    "leaf {letter} has too many components"
                )));
            }
        }
        Ok(())
    }
}

pub fn tag_inventory(model: &TaggerModel) -> Vec<ProsodyTag> {
    model.tag_inventory()
}

/// Writes floats in scientific notation with 17 significant digits.
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn save_model(model: &TaggerModel, mut sink: impl Write) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(&mut sink, FullPrecision);
    model.serialize(&mut ser)?;
    sink.write_all(b"\n")?;
    Ok(())
}

pub fn model_to_bytes(model: &TaggerModel) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    save_model(model, &mut buf)?;
    Ok(buf)
}

pub fn load_model(mut source: impl Read) -> Result<TaggerModel> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::ModelCorruption("missing format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let model: TaggerModel = serde_json::from_value(value)?;
    model.validate()?;
    Ok(model)
}

pub fn write_tags(tags: &[TokenTag], mut sink: impl Write) -> Result<()> {
    for t in tags {
        serde_json::to_writer(&mut sink, t)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}
