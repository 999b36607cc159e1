//! Word phonetic content and the question set evaluated against it.
//!
//! Phoneme symbols are opaque strings. Everything class-related (vowels,
//! nasals, ...) comes from a [`PhonemeClassTable`] loaded as data, so the
//! question set can be swapped for an HTS-style list without code changes.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the class that defines vowels; required by [`QuestionKind::EndsClosedSyllable`].
pub const VOWEL_CLASS: &str = "Vowel";

const DEFAULT_QUESTIONS: &str = include_str!("../data/default_questions.jsonl");
const DEFAULT_CLASSES: &str = include_str!("../data/default_classes.json");

/// A word type: the unit routed by the decision tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordEntry {
    pub word: String,
    pub phonemes: Vec<String>,
    pub syllable_breaks: Vec<usize>,
    pub stress_syllable: Option<usize>,
}

impl WordEntry {
    /// Builds and validates a word entry.
    pub fn new(
        word: impl Into<String>,
        phonemes: Vec<String>,
        syllable_breaks: Vec<usize>,
        stress_syllable: Option<usize>,
    ) -> Result<Self> {
        let entry = WordEntry {
            word: word.into(),
            phonemes,
            syllable_breaks,
            stress_syllable,
        };
        entry.validate()?;
        Ok(entry)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidWord {
            word: self.word.clone(),
            reason,
        };
        if self.phonemes.is_empty() {
            return Err(invalid("phoneme list is empty".into()));
        }
        match self.syllable_breaks.first() {
            Some(0) => {}
            Some(first) => {
                return Err(invalid(format!(
                    "syllable_breaks must start at 0, got {first}"
                )))
            }
            None => return Err(invalid("syllable_breaks is empty".into())),
        }
        if self.syllable_breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(
                "syllable_breaks must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = self.syllable_breaks.last() {
            if last >= self.phonemes.len() {
                return Err(invalid(format!(
                    "syllable break {last} out of range for {} phonemes",
                    self.phonemes.len()
                )));
            }
        }
        if let Some(stress) = self.stress_syllable {
            if stress >= self.num_syllables() {
                return Err(invalid(format!(
                    "stress syllable {stress} out of range for {} syllables",
                    self.num_syllables()
                )));
            }
        }
        Ok(())
    }

    pub fn num_phonemes(&self) -> usize {
        self.phonemes.len()
    }

    pub fn num_syllables(&self) -> usize {
        self.syllable_breaks.len()
    }
}

/// Mapping from class name to the phoneme symbols it contains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhonemeClassTable {
    classes: BTreeMap<String, BTreeSet<String>>,
}

impl PhonemeClassTable {
    pub fn new(classes: BTreeMap<String, BTreeSet<String>>) -> Result<Self> {
        let table = PhonemeClassTable { classes };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.classes.contains_key(VOWEL_CLASS) {
            return Err(Error::InvalidClassTable(format!(
                "class `{VOWEL_CLASS}` must be defined"
            )));
        }
        if let Some((name, _)) = self.classes.iter().find(|(_, set)| set.is_empty()) {
            return Err(Error::InvalidClassTable(format!("class `{name}` is empty")));
        }
        Ok(())
    }

    /// Reads a class table from a single JSON object.
    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let table: PhonemeClassTable = serde_json::from_reader(reader)?;
        table.validate()?;
        Ok(table)
    }

    /// A broad ARPAbet class table.
    pub fn default_arpabet() -> Self {
        Self::from_reader(DEFAULT_CLASSES.as_bytes()).expect("bundled class table is valid")
    }

    pub fn get(&self, name: &str) -> Option<&BTreeSet<String>> {
        self.classes.get(name)
    }

    pub fn contains_class(&self, name: &str) -> bool {
        self.classes.contains_key(name)
    }

    pub fn is_member(&self, class: &str, phoneme: &str) -> Result<bool> {
        self.classes
            .get(class)
            .map(|set| set.contains(phoneme))
            .ok_or_else(|| Error::UnknownClass(class.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.classes.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuestionKind {
    PhonemeCountGt,
    SyllableCountGt,
    EndsClosedSyllable,
    StartsWithClass,
    EndsWithClass,
    ContainsClass,
    StressOnSyllable,
}

impl QuestionKind {
    pub const ALL: [QuestionKind; 7] = [
        QuestionKind::PhonemeCountGt,
        QuestionKind::SyllableCountGt,
        QuestionKind::EndsClosedSyllable,
        QuestionKind::StartsWithClass,
        QuestionKind::EndsWithClass,
        QuestionKind::ContainsClass,
        QuestionKind::StressOnSyllable,
    ];

    fn needs_int(self) -> bool {
        matches!(
            self,
            QuestionKind::PhonemeCountGt
                | QuestionKind::SyllableCountGt
                | QuestionKind::StressOnSyllable
        )
    }

    fn needs_class(self) -> bool {
        matches!(
            self,
            QuestionKind::StartsWithClass
                | QuestionKind::EndsWithClass
                | QuestionKind::ContainsClass
        )
    }
}

/// A boolean predicate over a word's phonetic content.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: u32,
    pub kind: QuestionKind,
    pub int_param: Option<i64>,
    pub class_param: Option<String>,
}

impl Question {
    pub fn new(
        id: u32,
        kind: QuestionKind,
        int_param: Option<i64>,
        class_param: Option<&str>,
    ) -> Self {
        Question {
            id,
            kind,
            int_param,
            class_param: class_param.map(str::to_string),
        }
    }

    /// Checks parameter presence and resolves the class name against `classes`.
    pub fn validate(&self, classes: &PhonemeClassTable) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidQuestion {
            id: self.id,
            reason: reason.to_string(),
        };
        if self.kind.needs_int() {
            match self.int_param {
                Some(v) if v >= 0 => {}
                Some(_) => return Err(invalid("int_param must be non-negative")),
                None => return Err(invalid("int_param is required")),
            }
        }
        if self.kind.needs_class() {
            let class = self
                .class_param
                .as_deref()
                .ok_or_else(|| invalid("class_param is required"))?;
            if !classes.contains_class(class) {
                return Err(Error::UnknownClass(class.to_string()));
            }
        }
        if self.kind == QuestionKind::EndsClosedSyllable && !classes.contains_class(VOWEL_CLASS) {
            return Err(Error::UnknownClass(VOWEL_CLASS.to_string()));
        }
        Ok(())
    }

    /// Evaluates the question on `word`.
    pub fn answer(&self, word: &WordEntry, classes: &PhonemeClassTable) -> Result<bool> {
        let int = || -> Result<usize> {
            self.int_param
                .filter(|v| *v >= 0)
                .map(|v| v as usize)
                .ok_or_else(|| Error::InvalidQuestion {
                    id: self.id,
                    reason: "int_param is required".into(),
                })
        };
        let class = || -> Result<&str> {
            self.class_param
                .as_deref()
                .ok_or_else(|| Error::InvalidQuestion {
                    id: self.id,
                    reason: "class_param is required".into(),
                })
        };
        // WordEntry guarantees at least one phoneme.
        let first = &word.phonemes[0];
        let last = &word.phonemes[word.phonemes.len() - 1];
        Ok(match self.kind {
            QuestionKind::PhonemeCountGt => word.num_phonemes() > int()?,
            QuestionKind::SyllableCountGt => word.num_syllables() > int()?,
            QuestionKind::EndsClosedSyllable => !classes.is_member(VOWEL_CLASS, last)?,
            QuestionKind::StartsWithClass => classes.is_member(class()?, first)?,
            QuestionKind::EndsWithClass => classes.is_member(class()?, last)?,
            QuestionKind::ContainsClass => {
                let set = classes
                    .get(class()?)
                    .ok_or_else(|| Error::UnknownClass(class().unwrap_or_default().to_string()))?;
                word.phonemes.iter().any(|p| set.contains(p))
            }
            QuestionKind::StressOnSyllable => word.stress_syllable == Some(int()?),
        })
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.int_param, self.class_param.as_deref()) {
            (QuestionKind::PhonemeCountGt, Some(n), _) => write!(f, "more than {n} phonemes?"),
            (QuestionKind::SyllableCountGt, Some(n), _) => write!(f, "more than {n} syllables?"),
            (QuestionKind::EndsClosedSyllable, _, _) => write!(f, "ends with a closed syllable?"),
            (QuestionKind::StartsWithClass, _, Some(c)) => write!(f, "starts with {c}?"),
            (QuestionKind::EndsWithClass, _, Some(c)) => write!(f, "ends with {c}?"),
            (QuestionKind::ContainsClass, _, Some(c)) => write!(f, "contains {c}?"),
            (QuestionKind::StressOnSyllable, Some(n), _) => write!(f, "stress on syllable {n}?"),
            (kind, _, _) => write!(f, "{kind:?}"),
        }
    }
}

/// Free-function form of [`Question::answer`].
pub fn answer_question(q: &Question, w: &WordEntry, classes: &PhonemeClassTable) -> Result<bool> {
    q.answer(w, classes)
}

fn for_each_json_line<T, F>(source: impl BufRead, mut f: F) -> Result<()>
where
    T: serde::de::DeserializeOwned,
    F: FnMut(usize, T) -> Result<()>,
{
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        f(line_no, value)?;
    }
    Ok(())
}

/// Reads a JSON-lines lexicon. Duplicate word identifiers are rejected.
pub fn load_lexicon(source: impl BufRead) -> Result<Vec<WordEntry>> {
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for_each_json_line(source, |_, entry: WordEntry| {
        entry.validate()?;
        if !seen.insert(entry.word.clone()) {
            return Err(Error::DuplicateWord(entry.word));
        }
        entries.push(entry);
        Ok(())
    })?;
    Ok(entries)
}

pub fn write_lexicon(entries: &[WordEntry], mut sink: impl Write) -> Result<()> {
    for entry in entries {
        serde_json::to_writer(&mut sink, entry)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a JSON-lines question set and validates it against `classes`.
pub fn load_questions(source: impl BufRead, classes: &PhonemeClassTable) -> Result<Vec<Question>> {
    let mut seen = HashSet::new();
    let mut questions = Vec::new();
    for_each_json_line(source, |_, q: Question| {
        if !seen.insert(q.id) {
            return Err(Error::DuplicateQuestion(q.id));
        }
        q.validate(classes)?;
        questions.push(q);
        Ok(())
    })?;
    Ok(questions)
}

pub fn write_questions(questions: &[Question], mut sink: impl Write) -> Result<()> {
    for q in questions {
        serde_json::to_writer(&mut sink, q)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_class_table(classes: &PhonemeClassTable, mut sink: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut sink, classes)?;
    sink.write_all(b"\n")?;
    Ok(())
}

/// The bundled question set, valid against [`PhonemeClassTable::default_arpabet`].
pub fn default_questions() -> Vec<Question> {
    load_questions(
        DEFAULT_QUESTIONS.as_bytes(),
        &PhonemeClassTable::default_arpabet(),
    )
    .expect("bundled question set is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ph(symbols: &[&str]) -> Vec<String> {
        symbols.iter().map(|s| s.to_string()).collect()
    }

    fn classes() -> PhonemeClassTable {
        let mut map = BTreeMap::new();
        map.insert(
            "Vowel".to_string(),
            ["AE", "IY"].iter().map(|s| s.to_string()).collect(),
        );
        map.insert(
            "Plosive".to_string(),
            ["K", "T"].iter().map(|s| s.to_string()).collect(),
        );
        PhonemeClassTable::new(map).unwrap()
    }

    fn word_of_len(n: usize) -> WordEntry {
        let phonemes = (0..n)
            .map(|i| if i % 2 == 0 { "K" } else { "AE" }.to_string())
            .collect();
        WordEntry::new(format!("w{n}"), phonemes, vec![0], Some(0)).unwrap()
    }

    #[test]
    fn phoneme_count_is_strictly_greater() {
        let q = Question::new(0, QuestionKind::PhonemeCountGt, Some(4), None);
        assert!(q.answer(&word_of_len(5), &classes()).unwrap());
        assert!(!q.answer(&word_of_len(4), &classes()).unwrap());
    }

    #[test]
    fn closed_syllable_checks_final_phoneme() {
        let cat = WordEntry::new("cat", ph(&["K", "AE", "T"]), vec![0], Some(0)).unwrap();
        let q = Question::new(0, QuestionKind::EndsClosedSyllable, None, None);
        assert!(q.answer(&cat, &classes()).unwrap());
        let key = WordEntry::new("key", ph(&["K", "IY"]), vec![0], Some(0)).unwrap();
        assert!(!q.answer(&key, &classes()).unwrap());
    }

    #[test]
    fn unknown_class_is_named() {
        let q = Question::new(3, QuestionKind::ContainsClass, None, Some("Nasal"));
        let err = q.answer(&word_of_len(3), &classes()).unwrap_err();
        assert!(err.to_string().contains("Nasal"));
        assert!(matches!(q.validate(&classes()), Err(Error::UnknownClass(c)) if c == "Nasal"));
    }

    #[test]
    fn word_invariants() {
        assert!(WordEntry::new("x", vec![], vec![0], None).is_err());
        assert!(WordEntry::new("x", ph(&["K"]), vec![], None).is_err());
        assert!(WordEntry::new("x", ph(&["K", "AE"]), vec![1], None).is_err());
        assert!(WordEntry::new("x", ph(&["K", "AE", "T"]), vec![0, 2, 2], None).is_err());
        assert!(WordEntry::new("x", ph(&["K", "AE"]), vec![0], Some(1)).is_err());
        assert!(WordEntry::new("x", ph(&["K", "AE", "T"]), vec![0, 2], Some(1)).is_ok());
    }

    #[test]
    fn lexicon_loading() {
        let one =
            r#"{"word":"cat","phonemes":["K","AE","T"],"syllable_breaks":[0],"stress_syllable":0}"#;
        assert_eq!(load_lexicon(one.as_bytes()).unwrap().len(), 1);
        assert!(load_lexicon("".as_bytes()).unwrap().is_empty());

        let bad = r#"{"word":"bad","phonemes":["K","AE","T","S"],"syllable_breaks":[0,5],"stress_syllable":null}"#;
        match load_lexicon(bad.as_bytes()) {
            Err(Error::InvalidWord { word, .. }) => assert_eq!(word, "bad"),
            other => panic!("expected validation error, got {other:?}"),
        }

        let dup = format!("{one}\n{one}\n");
        assert!(matches!(
            load_lexicon(dup.as_bytes()),
            Err(Error::DuplicateWord(_))
        ));

        let malformed = format!("{one}\n{{\"word\": 3}}\n");
        assert!(matches!(
            load_lexicon(malformed.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn question_loading() {
        let table = classes();
        let two = "{\"id\":0,\"kind\":\"PhonemeCountGt\",\"int_param\":4,\"class_param\":null}\n\
                   {\"id\":1,\"kind\":\"EndsClosedSyllable\",\"int_param\":null,\"class_param\":null}\n";
        assert_eq!(load_questions(two.as_bytes(), &table).unwrap().len(), 2);

        let dup = "{\"id\":0,\"kind\":\"PhonemeCountGt\",\"int_param\":4,\"class_param\":null}\n\
                   {\"id\":0,\"kind\":\"EndsClosedSyllable\",\"int_param\":null,\"class_param\":null}\n";
        assert!(matches!(
            load_questions(dup.as_bytes(), &table),
            Err(Error::DuplicateQuestion(0))
        ));

        let nasal =
            "{\"id\":0,\"kind\":\"ContainsClass\",\"int_param\":null,\"class_param\":\"Nasal\"}\n";
        assert!(matches!(
            load_questions(nasal.as_bytes(), &table),
            Err(Error::UnknownClass(_))
        ));

        let bad_kind = "{\"id\":0,\"kind\":\"IsLoud\",\"int_param\":null,\"class_param\":null}\n";
        assert!(matches!(
            load_questions(bad_kind.as_bytes(), &table),
            Err(Error::Parse { .. })
        ));

        let negative =
            "{\"id\":0,\"kind\":\"PhonemeCountGt\",\"int_param\":-1,\"class_param\":null}\n";
        assert!(load_questions(negative.as_bytes(), &table).is_err());
    }

    #[test]
    fn class_table_requires_vowel() {
        let mut map = BTreeMap::new();
        map.insert(
            "Nasal".to_string(),
            ["M"].iter().map(|s| s.to_string()).collect(),
        );
        assert!(PhonemeClassTable::new(map.clone()).is_err());
        map.insert("Vowel".to_string(), BTreeSet::new());
        assert!(PhonemeClassTable::new(map).is_err());
    }

    #[test]
    fn bundled_question_set_covers_every_kind() {
        let qs = default_questions();
        assert!(qs.len() >= 18);
        for kind in QuestionKind::ALL {
            assert!(qs.iter().any(|q| q.kind == kind), "{kind:?} missing");
        }
    }
}
