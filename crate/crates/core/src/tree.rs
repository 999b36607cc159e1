//! Binary decision tree over word types, grown by globally greedy
//! log-likelihood gain.
//!
//! At every step each leaf proposes its best question; the leaf with the
//! largest gain is split. Leaves are indexed in creation order and named by
//! [`leaf_letter`]. When a leaf splits, its yes-child keeps the parent's
//! index and the no-child takes the next free one, so the indices of an
//! `l`-leaf tree are exactly `0..l`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    node_log_likelihood, split_gain, ProsodySample, SufficientStats, DEFAULT_VAR_FLOOR,
};
use crate::phonetics::{PhonemeClassTable, Question, WordEntry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_leaves: usize,
    pub min_gain: f64,
    /// Minimum number of tokens on each side of a split.
    pub min_leaf: usize,
    pub floor: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_leaves: 10,
            min_gain: 0.0,
            min_leaf: 10,
            floor: DEFAULT_VAR_FLOOR,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_leaves == 0 {
            return Err(Error::Config("max_leaves must be at least 1".into()));
        }
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return Err(Error::Config("variance floor must be positive".into()));
        }
        if self.min_gain.is_nan() {
            return Err(Error::Config("min_gain must not be NaN".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum TreeNode {
    Internal {
        question_id: u32,
        yes_child: usize,
        no_child: usize,
    },
    Leaf {
        leaf_index: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub leaf_letters: Vec<String>,
}

/// Letter name of the `index`-th leaf: `a`..`z`, then `aa`, `ab`, ...
pub fn leaf_letter(index: usize) -> String {
    let mut n = index + 1;
    let mut out = Vec::new();
    while n > 0 {
        let rem = (n - 1) % 26;
        out.push(b'a' + rem as u8);
        n = (n - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

impl DecisionTree {
    pub fn single_leaf() -> Self {
        DecisionTree {
            nodes: vec![TreeNode::Leaf { leaf_index: 0 }],
            leaf_letters: vec![leaf_letter(0)],
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.leaf_letters.len()
    }

    /// Longest root-to-leaf path, counted in questions.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], idx: usize) -> usize {
            match nodes[idx] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Internal {
                    yes_child,
                    no_child,
                    ..
                } => 1 + walk(nodes, yes_child).max(walk(nodes, no_child)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Checks that the nodes form a proper binary tree rooted at 0 whose leaves
    /// use every index in `0..num_leaves` once and whose questions all exist.
    pub fn validate(&self, questions: &[Question]) -> Result<()> {
        let corrupt = |msg: String| Error::ModelCorruption(msg);
        if self.nodes.is_empty() {
            return Err(corrupt("tree has no nodes".into()));
        }
        let mut visited = vec![false; self.nodes.len()];
        let mut leaf_seen = vec![false; self.leaf_letters.len()];
        let mut stack = vec![0usize];
        while let Some(idx) = stack.pop() {
            if idx >= self.nodes.len() || visited[idx] {
                return Err(corrupt(format!(
                    "node {idx} is out of range or reached twice"
                )));
            }
            visited[idx] = true;
            match &self.nodes[idx] {
                TreeNode::Leaf { leaf_index } => match leaf_seen.get_mut(*leaf_index) {
                    Some(seen) if !*seen => *seen = true,
                    _ => {
                        return Err(corrupt(format!(
                            "leaf index {leaf_index} is invalid or repeated"
                        )))
                    }
                },
                TreeNode::Internal {
                    question_id,
                    yes_child,
                    no_child,
                } => {
                    if !questions.iter().any(|q| q.id == *question_id) {
                        return Err(corrupt(format!(
                            "question {question_id} is not in the question set"
                        )));
                    }
                    stack.push(*no_child);
                    stack.push(*yes_child);
                }
            }
        }
        if visited.iter().any(|v| !v) {
            return Err(corrupt("tree has unreachable nodes".into()));
        }
        if leaf_seen.iter().any(|s| !s) {
            return Err(corrupt("some leaf letters have no leaf node".into()));
        }
        Ok(())
    }

    /// Leaf index reached by answering the tree's questions about `word`.
    pub fn route(
        &self,
        word: &WordEntry,
        questions: &[Question],
        classes: &PhonemeClassTable,
    ) -> Result<usize> {
        let mut idx = 0;
        // A well-formed tree never needs more steps than it has nodes.
        for _ in 0..=self.nodes.len() {
            match self.nodes.get(idx) {
                Some(TreeNode::Leaf { leaf_index }) => return Ok(*leaf_index),
                Some(TreeNode::Internal {
                    question_id,
                    yes_child,
                    no_child,
                }) => {
                    let q = questions
                        .iter()
                        .find(|q| q.id == *question_id)
                        .ok_or_else(|| {
                            Error::ModelCorruption(format!(
                                "question {question_id} is not in the question set"
                            ))
                        })?;
                    idx = if q.answer(word, classes)? {
                        *yes_child
                    } else {
                        *no_child
                    };
                }
                None => return Err(Error::ModelCorruption(format!("node {idx} does not exist"))),
            }
        }
        Err(Error::ModelCorruption("routing did not terminate".into()))
    }
}

/// Leaf letter reached by `word`; total for any valid word, seen or unseen.
pub fn route_word<'t>(
    tree: &'t DecisionTree,
    word: &WordEntry,
    questions: &[Question],
    classes: &PhonemeClassTable,
) -> Result<&'t str> {
    let leaf = tree.route(word, questions, classes)?;
    tree.leaf_letters
        .get(leaf)
        .map(String::as_str)
        .ok_or_else(|| Error::ModelCorruption(format!("leaf index {leaf} has no letter")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    /// 1-based split count; the tree has `step + 1` leaves after this split.
    pub step: usize,
    pub leaf_split: String,
    pub question_id: u32,
    pub gain: f64,
    pub total_leaf_ll: f64,
    pub avg_samples_per_leaf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTrace {
    pub num_samples: usize,
    /// Log-likelihood of the single-leaf tree.
    pub root_ll: f64,
    pub splits: Vec<SplitRecord>,
}

/// The tokens of one word type, summarized.
#[derive(Debug, Clone, PartialEq)]
pub struct WordGroup {
    pub entry: WordEntry,
    pub stats: SufficientStats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub question_id: u32,
    pub gain: f64,
}

/// `answers[q][w]`: answer of the `q`-th question (ascending id) for word `w`.
struct AnswerMatrix {
    question_ids: Vec<u32>,
    answers: Vec<Vec<bool>>,
}

impl AnswerMatrix {
    fn build<'a>(
        words: impl Iterator<Item = &'a WordEntry> + Clone,
        questions: &[Question],
        classes: &PhonemeClassTable,
    ) -> Result<Self> {
        let mut sorted: Vec<&Question> = questions.iter().collect();
        sorted.sort_by_key(|q| q.id);
        let mut answers = Vec::with_capacity(sorted.len());
        for q in &sorted {
            answers.push(
                words
                    .clone()
                    .map(|w| q.answer(w, classes))
                    .collect::<Result<Vec<bool>>>()?,
            );
        }
        Ok(AnswerMatrix {
            question_ids: sorted.iter().map(|q| q.id).collect(),
            answers,
        })
    }
}

struct Partition {
    choice: SplitChoice,
    yes_words: Vec<usize>,
    no_words: Vec<usize>,
    yes_stats: SufficientStats,
    no_stats: SufficientStats,
}

fn best_partition(
    words: &[usize],
    parent: &SufficientStats,
    word_stats: &[SufficientStats],
    matrix: &AnswerMatrix,
    floor: f64,
    min_leaf: usize,
) -> Result<Option<Partition>> {
    let dim = parent.dim();
    let mut best: Option<(usize, f64, SufficientStats, SufficientStats)> = None;
    for (qi, answers) in matrix.answers.iter().enumerate() {
        let mut yes = SufficientStats::zeros(dim);
        let mut no = SufficientStats::zeros(dim);
        for &w in words {
            if answers[w] {
                yes += &word_stats[w];
            } else {
                no += &word_stats[w];
            }
        }
        if yes.n < min_leaf.max(1) || no.n < min_leaf.max(1) {
            continue;
        }
        let gain = split_gain(parent, &yes, &no, floor)?;
        // Strict comparison keeps the smallest question id on ties.
        if best.as_ref().is_none_or(|(_, g, _, _)| gain > *g) {
            best = Some((qi, gain, yes, no));
        }
    }
    Ok(best.map(|(qi, gain, yes_stats, no_stats)| {
        let (yes_words, no_words) = words.iter().partition(|&&w| matrix.answers[qi][w]);
        Partition {
            choice: SplitChoice {
                question_id: matrix.question_ids[qi],
                gain,
            },
            yes_words,
            no_words,
            yes_stats,
            no_stats,
        }
    }))
}

/// Best question for one leaf, or `None` if no question leaves at least
/// `min_leaf` tokens on both sides. Ties go to the smallest question id.
pub fn best_split_for_leaf(
    groups: &[WordGroup],
    questions: &[Question],
    classes: &PhonemeClassTable,
    floor: f64,
    min_leaf: usize,
) -> Result<Option<SplitChoice>> {
    let Some(first) = groups.first() else {
        return Ok(None);
    };
    let mut parent = SufficientStats::zeros(first.stats.dim());
    for g in groups {
        parent += &g.stats;
    }
    let matrix = AnswerMatrix::build(groups.iter().map(|g| &g.entry), questions, classes)?;
    let stats: Vec<SufficientStats> = groups.iter().map(|g| g.stats.clone()).collect();
    let words: Vec<usize> = (0..groups.len()).collect();
    Ok(best_partition(&words, &parent, &stats, &matrix, floor, min_leaf)?.map(|p| p.choice))
}

/// Groups samples by word type in order of first appearance.
pub fn group_by_word(lexicon: &[WordEntry], samples: &[ProsodySample]) -> Result<Vec<WordGroup>> {
    let dim = samples.first().ok_or(Error::EmptyCorpus)?.embedding.len();
    let by_name: HashMap<&str, &WordEntry> = lexicon.iter().map(|w| (w.word.as_str(), w)).collect();
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<WordGroup> = Vec::new();
    for s in samples {
        let slot = match index.get(s.word.as_str()) {
            Some(&i) => i,
            None => {
                let entry = by_name
                    .get(s.word.as_str())
                    .ok_or_else(|| Error::UnknownWord(s.word.clone()))?;
                groups.push(WordGroup {
                    entry: (*entry).clone(),
                    stats: SufficientStats::zeros(dim),
                });
                index.insert(s.word.as_str(), groups.len() - 1);
                groups.len() - 1
            }
        };
        groups[slot].stats.push(&s.embedding)?;
    }
    Ok(groups)
}

struct GrowingLeaf {
    node: usize,
    candidate: Option<Partition>,
}

/// Grows the tree until `max_leaves` is reached, the best gain drops below
/// `min_gain`, or no leaf admits a valid split.
pub fn grow_tree(
    lexicon: &[WordEntry],
    samples: &[ProsodySample],
    questions: &[Question],
    classes: &PhonemeClassTable,
    config: &TreeConfig,
) -> Result<(DecisionTree, GrowthTrace)> {
    config.validate()?;
    let groups = group_by_word(lexicon, samples)?;
    grow_tree_from_groups(&groups, questions, classes, config)
}

pub fn grow_tree_from_groups(
    groups: &[WordGroup],
    questions: &[Question],
    classes: &PhonemeClassTable,
    config: &TreeConfig,
) -> Result<(DecisionTree, GrowthTrace)> {
    config.validate()?;
    let first = groups.first().ok_or(Error::EmptyCorpus)?;
    let matrix = AnswerMatrix::build(groups.iter().map(|g| &g.entry), questions, classes)?;
    let word_stats: Vec<SufficientStats> = groups.iter().map(|g| g.stats.clone()).collect();

    let mut root_stats = SufficientStats::zeros(first.stats.dim());
    for s in &word_stats {
        root_stats += s;
    }
    let num_samples = root_stats.n;
    if num_samples == 0 {
        return Err(Error::EmptyCorpus);
    }
    let root_ll = node_log_likelihood(&root_stats, config.floor)?;

    let mut tree = DecisionTree::single_leaf();
    let mut trace = GrowthTrace {
        num_samples,
        root_ll,
        splits: Vec::new(),
    };
    let propose = |words: &[usize], stats: &SufficientStats| {
        best_partition(
            words,
            stats,
            &word_stats,
            &matrix,
            config.floor,
            config.min_leaf,
        )
    };
    let root_words: Vec<usize> = (0..groups.len()).collect();
    let mut leaves = vec![GrowingLeaf {
        node: 0,
        candidate: if config.max_leaves > 1 {
            propose(&root_words, &root_stats)?
        } else {
            None
        },
    }];
    let mut total_ll = root_ll;

    while leaves.len() < config.max_leaves {
        // Strict comparison keeps the earliest-created leaf on ties.
        let mut chosen: Option<(usize, f64)> = None;
        for (i, leaf) in leaves.iter().enumerate() {
            if let Some(c) = &leaf.candidate {
                if chosen.is_none_or(|(_, g)| c.choice.gain > g) {
                    chosen = Some((i, c.choice.gain));
                }
            }
        }
        let Some((leaf_idx, gain)) = chosen else {
            break;
        };
        if gain < config.min_gain {
            break;
        }

        let leaf = &mut leaves[leaf_idx];
        let part = leaf.candidate.take().expect("chosen leaf has a candidate");
        let yes_node = tree.nodes.len();
        let no_node = yes_node + 1;
        let new_index = tree.leaf_letters.len();
        tree.nodes[leaf.node] = TreeNode::Internal {
            question_id: part.choice.question_id,
            yes_child: yes_node,
            no_child: no_node,
        };
        tree.nodes.push(TreeNode::Leaf {
            leaf_index: leaf_idx,
        });
        tree.nodes.push(TreeNode::Leaf {
            leaf_index: new_index,
        });
        tree.leaf_letters.push(leaf_letter(new_index));

        let at_capacity = leaves.len() + 1 >= config.max_leaves;
        let yes_candidate = if at_capacity {
            None
        } else {
            propose(&part.yes_words, &part.yes_stats)?
        };
        let no_candidate = if at_capacity {
            None
        } else {
            propose(&part.no_words, &part.no_stats)?
        };
        leaves[leaf_idx] = GrowingLeaf {
            node: yes_node,
            candidate: yes_candidate,
        };
        leaves.push(GrowingLeaf {
            node: no_node,
            candidate: no_candidate,
        });

        total_ll += gain;
        let step = trace.splits.len() + 1;
        trace.splits.push(SplitRecord {
            step,
            leaf_split: leaf_letter(leaf_idx),
            question_id: part.choice.question_id,
            gain,
            total_leaf_ll: total_ll,
            avg_samples_per_leaf: num_samples as f64 / leaves.len() as f64,
        });
        log::debug!(
            "split {step}: leaf {} on question {} (gain {gain:.4}, total {total_ll:.4})",
            leaf_letter(leaf_idx),
            part.choice.question_id
        );
    }
    Ok((tree, trace))
}
