//! Embedding files: JSON lines or the `PTE1` binary layout.
//!
//! Binary layout: magic `PTE1`, `u32` LE dimension, then per record a `u16` LE
//! word length, UTF-8 word, `u16` LE token-id length, UTF-8 token id and
//! `d` little-endian `f32` values. Readers sniff the magic.

use std::collections::HashSet;
use std::io::{BufRead, ErrorKind, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::ProsodySample;

pub const BINARY_MAGIC: &[u8; 4] = b"PTE1";

/// A validated set of samples sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub dim: usize,
    pub samples: Vec<ProsodySample>,
}

impl EmbeddingSet {
    /// Validates finiteness, a common dimension and token-id uniqueness.
    pub fn new(samples: Vec<ProsodySample>) -> Result<Self> {
        let dim = samples.first().map_or(0, |s| s.embedding.len());
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if s.embedding.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.embedding.len(),
                });
            }
            if dim == 0 {
                return Err(Error::InvalidEmbedding {
                    token: s.token_id.clone(),
                    reason: "embedding is empty".into(),
                });
            }
            if s.embedding.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidEmbedding {
                    token: s.token_id.clone(),
                    reason: "non-finite component".into(),
                });
            }
            if !seen.insert(s.token_id.as_str()) {
                return Err(Error::DuplicateToken(s.token_id.clone()));
            }
        }
        Ok(EmbeddingSet { dim, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    token_id: String,
    word: String,
    embedding: Vec<f64>,
}

/// Reads either format, choosing by the leading magic bytes.
pub fn read_embeddings(mut source: impl BufRead) -> Result<EmbeddingSet> {
    let is_binary = {
        let head = source.fill_buf()?;
        head.len() >= 4 && &head[..4] == BINARY_MAGIC
    };
    let samples = if is_binary {
        read_binary(source)?
    } else {
        read_json_lines(source)?
    };
    EmbeddingSet::new(samples)
}

fn read_json_lines(source: impl BufRead) -> Result<Vec<ProsodySample>> {
    let mut out = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(ProsodySample {
            token_id: rec.token_id,
            word: rec.word,
            embedding: rec.embedding,
        });
    }
    Ok(out)
}

fn read_exact_or_eof(source: &mut impl Read, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => {
                return Err(Error::Io(std::io::Error::new(
                    ErrorKind::UnexpectedEof,
                    "truncated embedding record",
                )))
            }
            Ok(k) => filled += k,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(true)
}

fn read_string(source: &mut impl Read, record: usize) -> Result<String> {
    let mut len = [0u8; 2];
    source.read_exact(&mut len)?;
    let mut bytes = vec![0u8; u16::from_le_bytes(len) as usize];
    source.read_exact(&mut bytes)?;
    String::from_utf8(bytes).map_err(|e| Error::Parse {
        line: record,
        message: format!("invalid UTF-8: {e}"),
    })
}

fn read_binary(mut source: impl Read) -> Result<Vec<ProsodySample>> {
    let mut header = [0u8; 8];
    source.read_exact(&mut header)?;
    let dim = u32::from_le_bytes([header[4], header[5], header[6], header[7]]) as usize;
    let mut out = Vec::new();
    let mut values = vec![0u8; dim * 4];
    loop {
        let record = out.len() + 1;
        let mut len = [0u8; 2];
        if !read_exact_or_eof(&mut source, &mut len)? {
            break;
        }
        let mut word = vec![0u8; u16::from_le_bytes(len) as usize];
        source.read_exact(&mut word)?;
        let word = String::from_utf8(word).map_err(|e| Error::Parse {
            line: record,
            message: format!("invalid UTF-8: {e}"),
        })?;
        let token_id = read_string(&mut source, record)?;
        source.read_exact(&mut values)?;
        let embedding = values
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        out.push(ProsodySample {
            token_id,
            word,
            embedding,
        });
    }
    Ok(out)
}

pub fn write_embeddings_json(samples: &[ProsodySample], mut sink: impl Write) -> Result<()> {
    for s in samples {
        serde_json::to_writer(
            &mut sink,
            &JsonRecord {
                token_id: s.token_id.clone(),
                word: s.word.clone(),
                embedding: s.embedding.clone(),
            },
        )?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes the binary layout; values are narrowed to `f32`.
pub fn write_embeddings_binary(
    dim: usize,
    samples: &[ProsodySample],
    mut sink: impl Write,
) -> Result<()> {
    sink.write_all(BINARY_MAGIC)?;
    sink.write_all(&(dim as u32).to_le_bytes())?;
    for s in samples {
        if s.embedding.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.embedding.len(),
            });
        }
        for text in [&s.word, &s.token_id] {
            let len = u16::try_from(text.len()).map_err(|_| Error::InvalidEmbedding {
                token: s.token_id.clone(),
                reason: "identifier longer than 65535 bytes".into(),
            })?;
            sink.write_all(&len.to_le_bytes())?;
            sink.write_all(text.as_bytes())?;
        }
        for v in &s.embedding {
            sink.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}
