//! Unsupervised word-level prosody tagging.
//!
//! Words are first grouped by a binary decision tree whose questions look
//! only at phonetic content; the tree is grown greedily by the Gaussian
//! log-likelihood gain of each split. Inside every leaf a diagonal GMM
//! clusters the prosody embeddings, and a token is tagged with its leaf
//! letter plus the maximum-posterior component, e.g. `d3`.
//!
//! ```
//! use prosody_core::{synth, tagger};
//!
//! let corpus = synth::generate(&synth::SynthSpec {
//!     num_leaf_archetypes: 2,
//!     words_per_archetype: 10,
//!     tokens_per_word: 10,
//!     components_per_archetype: 2,
//!     d: 4,
//!     ..Default::default()
//! })?;
//! let config = tagger::TaggerConfig { max_leaves: 2, m: 2, ..Default::default() };
//! let out = tagger::fit(&corpus.lexicon, &corpus.samples, &corpus.questions, &corpus.classes, &config)?;
//! assert_eq!(out.model.tag_inventory().len(), 4);
//! # Ok::<(), prosody_core::Error>(())
//! ```

pub mod embeddings;
pub mod error;
pub mod gaussian;
pub mod gmm;
pub mod phonetics;
pub mod synth;
pub mod tagger;
pub mod tree;

pub use error::{Error, Result};
pub use gaussian::{ProsodySample, SufficientStats};
pub use gmm::{GmmComponent, GmmConfig, LeafGmm};
pub use phonetics::{PhonemeClassTable, Question, QuestionKind, WordEntry};
pub use tagger::{ProsodyTag, TaggerConfig, TaggerModel};
pub use tree::{DecisionTree, GrowthTrace, TreeConfig};
