use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use prosody_core::embeddings::{
    read_embeddings, write_embeddings_binary, write_embeddings_json, EmbeddingSet,
};
use prosody_core::phonetics::{
    default_questions, load_lexicon, load_questions, write_class_table, write_lexicon,
    write_questions,
};
use prosody_core::synth::{self, growth_report, write_growth_csv, SynthSpec};
use prosody_core::tagger::{self, load_model, save_model, write_tags, TokenTag};
use prosody_core::tree::TreeNode;
use prosody_core::{Error, PhonemeClassTable, TaggerConfig, TaggerModel, WordEntry};

use crate::output::{open, write_atomic, write_to};
use crate::{CliError, FitArgs, InspectArgs, StatsArgs, SynthArgs, TagArgs};

fn read_lexicon(path: &Path) -> Result<Vec<WordEntry>, CliError> {
    Ok(load_lexicon(open(path)?)?)
}

fn read_embedding_file(path: &Path) -> Result<EmbeddingSet, CliError> {
    Ok(read_embeddings(open(path)?)?)
}

fn read_model(path: &Path) -> Result<TaggerModel, CliError> {
    Ok(load_model(open(path)?)?)
}

fn default_trace_path(model: &Path) -> PathBuf {
    let mut name: OsString = model.as_os_str().to_owned();
    name.push(".trace.csv");
    PathBuf::from(name)
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let config = TaggerConfig {
        d: 0,
        m: args.components as usize,
        max_leaves: args.max_leaves as usize,
        min_gain: args.min_gain,
        min_leaf: args.min_leaf as usize,
        floor: args.var_floor,
        seed: args.seed,
        ..TaggerConfig::default()
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let lexicon = read_lexicon(&args.lexicon)?;
    let embeddings = read_embedding_file(&args.embeddings)?;
    let classes = match &args.classes {
        Some(p) => PhonemeClassTable::from_reader(open(p)?)?,
        None => PhonemeClassTable::default_arpabet(),
    };
    let questions = match &args.questions {
        Some(p) => load_questions(open(p)?, &classes)?,
        None => default_questions(),
    };
    log::info!(
        "fitting on {} tokens of {} word types, d = {}",
        embeddings.len(),
        lexicon.len(),
        embeddings.dim
    );

    let out = tagger::fit(&lexicon, &embeddings.samples, &questions, &classes, &config)?;
    let model = &out.model;
    let trace_path = args
        .trace_csv
        .unwrap_or_else(|| default_trace_path(&args.model));

    write_atomic(&args.model, |w| save_model(model, w))?;
    write_atomic(&trace_path, |w| {
        write_growth_csv(&growth_report(&model.growth_trace), w)
    })?;
    if let Some(p) = &args.out {
        write_atomic(p, |w| write_tags(&out.tags, w))?;
    }

    let trace = &model.growth_trace;
    let final_ll = trace
        .splits
        .last()
        .map_or(trace.root_ll, |s| s.total_leaf_ll);
    println!("leaves: {}", model.tree.num_leaves());
    println!("tags: {}", model.tag_inventory().len());
    println!("total leaf log-likelihood: {final_ll:.6}");
    println!("model: {}", args.model.display());
    println!("trace: {}", trace_path.display());
    Ok(())
}

pub fn tag(args: TagArgs) -> Result<(), CliError> {
    let model = read_model(&args.model)?;
    let lexicon = read_lexicon(&args.lexicon)?;
    let embeddings = read_embedding_file(&args.embeddings)?;
    if embeddings.dim != model.config.d {
        return Err(Error::DimensionMismatch {
            expected: model.config.d,
            found: embeddings.dim,
        }
        .into());
    }

    let by_word: HashMap<&str, &WordEntry> = lexicon.iter().map(|w| (w.word.as_str(), w)).collect();
    let mut tags = Vec::with_capacity(embeddings.len());
    for s in &embeddings.samples {
        let entry = by_word
            .get(s.word.as_str())
            .ok_or_else(|| Error::UnknownWord(s.word.clone()))?;
        tags.push(TokenTag {
            token_id: s.token_id.clone(),
            word: s.word.clone(),
            tag: model.tag(entry, &s.embedding)?,
        });
    }
    write_to(args.out.as_deref(), |w| write_tags(&tags, w))
}

fn write_leaf_csv(model: &TaggerModel, w: &mut dyn Write) -> prosody_core::Result<()> {
    writeln!(w, "leaf,samples,weights")?;
    for letter in &model.tree.leaf_letters {
        let count = model.leaf_sample_counts.get(letter).copied().unwrap_or(0);
        let weights: Vec<String> = model.gmms[letter]
            .components()
            .iter()
            .map(|c| format!("{:.6}", c.weight))
            .collect();
        writeln!(w, "{letter},{count},{}", weights.join(" "))?;
    }
    Ok(())
}

pub fn stats(args: StatsArgs) -> Result<(), CliError> {
    let model = read_model(&args.model)?;
    let rows = growth_report(&model.growth_trace);
    write_to(args.trace_csv.as_deref(), |w| write_growth_csv(&rows, w))?;
    if args.trace_csv.is_none() && args.out.is_none() {
        println!();
    }
    write_to(args.out.as_deref(), |w| write_leaf_csv(&model, w))
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    let spec = SynthSpec {
        num_leaf_archetypes: args.archetypes,
        words_per_archetype: args.words,
        tokens_per_word: args.tokens,
        components_per_archetype: args.components,
        d: args.dim,
        component_separation: args.separation,
        seed: args.seed,
        class_features: args.class_features,
    };
    spec.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let corpus = synth::generate(&spec)?;

    fs::create_dir_all(&args.out).map_err(|source| CliError::Io {
        path: args.out.clone(),
        source,
    })?;
    let dir = &args.out;
    write_atomic(&dir.join("lexicon.jsonl"), |w| {
        write_lexicon(&corpus.lexicon, w)
    })?;
    write_atomic(&dir.join("questions.jsonl"), |w| {
        write_questions(&corpus.questions, w)
    })?;
    write_atomic(&dir.join("classes.json"), |w| {
        write_class_table(&corpus.classes, w)
    })?;
    let embeddings_name = if args.binary {
        write_atomic(&dir.join("embeddings.bin"), |w| {
            write_embeddings_binary(spec.d, &corpus.samples, w)
        })?;
        "embeddings.bin"
    } else {
        write_atomic(&dir.join("embeddings.jsonl"), |w| {
            write_embeddings_json(&corpus.samples, w)
        })?;
        "embeddings.jsonl"
    };
    write_atomic(&dir.join("truth.jsonl"), |w| {
        corpus.truth.write_json_lines(w)
    })?;

    println!(
        "{} words, {} tokens written to {} (lexicon.jsonl questions.jsonl classes.json {embeddings_name} truth.jsonl)",
        corpus.lexicon.len(),
        corpus.samples.len(),
        dir.display()
    );
    Ok(())
}

fn print_node(model: &TaggerModel, idx: usize, indent: usize, label: &str) {
    let pad = "  ".repeat(indent);
    match &model.tree.nodes[idx] {
        TreeNode::Internal {
            question_id,
            yes_child,
            no_child,
        } => {
            let text = model
                .questions
                .iter()
                .find(|q| q.id == *question_id)
                .map_or_else(|| "?".to_string(), |q| q.to_string());
            println!("{pad}{label}q{question_id}: {text}");
            print_node(model, *yes_child, indent + 1, "yes -> ");
            print_node(model, *no_child, indent + 1, "no  -> ");
        }
        TreeNode::Leaf { leaf_index } => {
            let letter = &model.tree.leaf_letters[*leaf_index];
            let count = model.leaf_sample_counts.get(letter).copied().unwrap_or(0);
            let weights: Vec<String> = model.gmms[letter]
                .components()
                .iter()
                .map(|c| format!("{:.3}", c.weight))
                .collect();
            println!(
                "{pad}{label}leaf {letter}: {count} samples, weights [{}]",
                weights.join(", ")
            );
        }
    }
}

pub fn inspect(args: InspectArgs) -> Result<(), CliError> {
    let model = read_model(&args.model)?;
    let trace = &model.growth_trace;
    println!(
        "{} leaves, {} tags, depth {}, d = {}, {} training samples",
        model.tree.num_leaves(),
        model.tag_inventory().len(),
        model.tree.depth(),
        model.config.d,
        trace.num_samples
    );
    print_node(&model, 0, 0, "");
    if !trace.splits.is_empty() {
        println!("splits:");
        for s in &trace.splits {
            println!(
                "  {:>3}  leaf {:<3} q{:<4} gain {:>14.4}  total {:>16.4}",
                s.step, s.leaf_split, s.question_id, s.gain, s.total_leaf_ll
            );
        }
    }
    Ok(())
}
