//! Sentences, tokenization and the tab-separated dataset format.

use std::path::Path;

use crate::error::DataError;
use crate::mr::{Signature, TypedResult};

/// Domain files and toy corpora shipped with the crate.
pub mod bundled {
    pub const GEO_DOMAIN: &str = include_str!("../data/geo.domain");
    pub const JOBS_DOMAIN: &str = include_str!("../data/jobs.domain");
    pub const TOY_TRAIN: &str = include_str!("../data/toy_train.tsv");
    pub const TOY_HELDOUT: &str = include_str!("../data/toy_heldout.tsv");
}

/// Lowercases, splits on whitespace and detaches punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut cur = String::new();
        for c in word.chars() {
            if c.is_ascii_punctuation() && !matches!(c, '\'' | '-' | '_') {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            } else {
                cur.extend(c.to_lowercase());
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub pos: Option<Vec<String>>,
}

impl Sentence {
    pub fn new(text: &str) -> Sentence {
        Sentence {
            tokens: tokenize(text),
            pos: None,
        }
    }

    pub fn from_tokens<S: AsRef<str>>(tokens: &[S]) -> Sentence {
        Sentence {
            tokens: tokens.iter().map(|t| t.as_ref().to_string()).collect(),
            pos: None,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn word(&self, i: usize) -> Option<&str> {
        self.tokens.get(i).map(String::as_str)
    }

    pub fn tags(&self) -> Option<&[String]> {
        self.pos.as_deref()
    }
}

impl std::fmt::Display for Sentence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

#[derive(Clone, Debug)]
pub struct Example {
    pub id: usize,
    pub sentence: Sentence,
    pub mr: TypedResult,
}

/// Reads `question<TAB>mr[<TAB>tags]` lines. Blank lines and `#` comments
/// are ignored; ids count examples from 0 in file order.
pub fn parse_dataset(text: &str, signature: &Signature) -> Result<Vec<Example>, DataError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(DataError::Format {
                line: line_no,
                msg: format!("expected 2 or 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let mut sentence = Sentence::new(fields[0]);
        if sentence.is_empty() {
            return Err(DataError::Format {
                line: line_no,
                msg: "empty question".into(),
            });
        }
        if let Some(tags) = fields.get(2) {
            let tags: Vec<String> = tags.split_whitespace().map(String::from).collect();
            if tags.len() != sentence.len() {
                return Err(DataError::Format {
                    line: line_no,
                    msg: format!("{} tags for {} tokens", tags.len(), sentence.len()),
                });
            }
            sentence.pos = Some(tags);
        }
        let readings = signature
            .parse_readings(fields[1])
            .map_err(|error| DataError::Mr { line: line_no, error })?;
        if readings.len() > 1 {
            log::warn!(
                "line {}: `{}` has {} readings; using {}",
                line_no,
                fields[1],
                readings.len(),
                readings[0]
            );
        }
        out.push(Example {
            id: out.len(),
            sentence,
            mr: readings.into_iter().next().expect("parse_readings is nonempty"),
        });
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>, signature: &Signature) -> Result<Vec<Example>, DataError> {
    parse_dataset(&std::fs::read_to_string(path)?, signature)
}
