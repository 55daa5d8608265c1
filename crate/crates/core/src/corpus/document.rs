use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::{split_words, DrugLexicon};
use crate::error::{Result, VidError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    /// Class index; `Negative` is 0.
    pub fn index(self) -> usize {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Label::Negative),
            1 => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn one_hot(self) -> [f64; 2] {
        match self {
            Label::Negative => [1.0, 0.0],
            Label::Positive => [0.0, 1.0],
        }
    }
}

/// One user posting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: Option<Label>,
}

impl Document {
    pub fn labeled(id: impl Into<String>, text: impl Into<String>, label: Label) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label: Some(label),
        }
    }

    pub fn unlabeled(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label: None,
        }
    }

    pub fn mentions_drug(&self, drugs: &DrugLexicon) -> bool {
        split_words(&self.text).any(|w| drugs.contains(&w))
    }
}

/// Result of reading a corpus file.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub documents: Vec<Document>,
    /// Rows skipped because they contain no drug mention.
    pub dropped: usize,
}

/// Reads a tab-separated corpus: `id<TAB>label<TAB>text` (label 0 or 1) when
/// `labeled`, else `id<TAB>text`. Blank lines are ignored.
pub fn load_corpus(path: &Path, labeled: bool, drugs: &DrugLexicon) -> Result<LoadedCorpus> {
    let text = fs::read_to_string(path)?;
    let parse_err = |line: usize, message: String| VidError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut seen = HashSet::new();
    let mut documents = Vec::new();
    let mut dropped = 0;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let doc = match (labeled, fields.as_slice()) {
            (true, [id, label, text]) => {
                let label = match *label {
                    "0" => Label::Negative,
                    "1" => Label::Positive,
                    other => return Err(parse_err(line_no, format!("label must be 0 or 1, got {other:?}"))),
                };
                Document::labeled(*id, *text, label)
            }
            (false, [id, text]) => Document::unlabeled(*id, *text),
            (false, [_, _, _]) => {
                return Err(VidError::Schema(format!(
                    "{}:{line_no}: labeled row in an unlabeled corpus",
                    path.display()
                )))
            }
            (true, [_, _]) => {
                return Err(VidError::Schema(format!(
                    "{}:{line_no}: unlabeled row in a labeled corpus",
                    path.display()
                )))
            }
            (_, f) => {
                let want = if labeled { 3 } else { 2 };
                return Err(parse_err(line_no, format!("expected {want} tab-separated fields, got {}", f.len())));
            }
        };
        if doc.id.is_empty() {
            return Err(parse_err(line_no, "empty document id".into()));
        }
        if !seen.insert(doc.id.clone()) {
            return Err(VidError::DuplicateId(doc.id));
        }
        if doc.mentions_drug(drugs) {
            documents.push(doc);
        } else {
            dropped += 1;
        }
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} documents without a drug mention", path.display());
    }
    Ok(LoadedCorpus { documents, dropped })
}

/// Serializes documents in the corpus file format.
pub fn corpus_text(docs: &[Document], labeled: bool) -> Result<String> {
    let mut out = String::new();
    for d in docs {
        if d.id.contains(['\t', '\n']) || d.text.contains(['\t', '\n']) {
            return Err(VidError::Schema(format!("document {:?} contains a tab or newline", d.id)));
        }
        match (labeled, d.label) {
            (true, Some(l)) => writeln!(out, "{}\t{}\t{}", d.id, l.index(), d.text),
            (false, _) => writeln!(out, "{}\t{}", d.id, d.text),
            (true, None) => return Err(VidError::Schema(format!("document {:?} has no label", d.id))),
        }
        .expect("writing to a String");
    }
    Ok(out)
}

pub fn write_corpus(path: &Path, docs: &[Document], labeled: bool) -> Result<()> {
    crate::io::write_atomic(path, corpus_text(docs, labeled)?.as_bytes())
}

/// Checks id uniqueness and label presence (`labeled`) or absence.
pub fn validate_corpus(docs: &[Document], labeled: bool) -> Result<()> {
    let mut seen = HashSet::new();
    for d in docs {
        if !seen.insert(d.id.as_str()) {
            return Err(VidError::DuplicateId(d.id.clone()));
        }
        if d.label.is_some() != labeled {
            return Err(VidError::Schema(format!(
                "document {:?} {} a label",
                d.id,
                if labeled { "lacks" } else { "carries" }
            )));
        }
    }
    Ok(())
}
