use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Result, VidError};

pub const PAD_TOKEN: &str = "[PAD]";
pub const UNK_TOKEN: &str = "[UNK]";
pub const CLS_TOKEN: &str = "[CLS]";
pub const SEP_TOKEN: &str = "[SEP]";

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const CLS_ID: usize = 2;
pub const SEP_ID: usize = 3;

const RESERVED: [&str; 4] = [PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN];

/// Set of lowercase drug names. Each name is a single word token.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DrugLexicon {
    names: BTreeSet<String>,
}

impl DrugLexicon {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            names: names
                .into_iter()
                .map(|s| s.as_ref().trim().to_lowercase())
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.names.contains(token)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Reads one lowercase name per line; blank lines are skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(Self::new(text.lines()))
    }

    pub fn to_text(&self) -> String {
        self.names.iter().map(|n| format!("{n}\n")).collect()
    }
}

/// Token ↔ id map with reserved ids `[PAD]=0, [UNK]=1, [CLS]=2, [SEP]=3`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    drugs: DrugLexicon,
}

impl Vocabulary {
    /// Builds a vocabulary from the word tokens of `texts` plus every drug
    /// name. Non-reserved tokens are ordered lexicographically.
    pub fn build<'a, I>(texts: I, drugs: &DrugLexicon) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut words: BTreeSet<String> = drugs.iter().map(str::to_string).collect();
        for text in texts {
            words.extend(split_words(text));
        }
        let tokens = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(words.into_iter().filter(|w| !RESERVED.contains(&w.as_str())))
            .collect();
        Self::from_tokens(tokens, drugs.clone()).expect("reserved tokens placed first")
    }

    fn from_tokens(tokens: Vec<String>, drugs: DrugLexicon) -> Result<Self> {
        for (i, r) in RESERVED.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*r) {
                return Err(VidError::Schema(format!(
                    "vocabulary line {} must be {r}",
                    i + 1
                )));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(VidError::Schema(format!("duplicate vocabulary token {t:?}")));
            }
        }
        if let Some(missing) = drugs.iter().find(|d| !index.contains_key(*d)) {
            return Err(VidError::Schema(format!(
                "drug {missing:?} is missing from the vocabulary"
            )));
        }
        Ok(Self {
            tokens,
            index,
            drugs,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn drugs(&self) -> &DrugLexicon {
        &self.drugs
    }

    pub fn is_drug_id(&self, id: usize) -> bool {
        self.token(id).is_some_and(|t| self.drugs.contains(t))
    }

    /// One token per line; the line number is the id.
    pub fn to_text(&self) -> String {
        self.tokens.iter().map(|t| format!("{t}\n")).collect()
    }

    pub fn from_text(text: &str, drugs: DrugLexicon) -> Result<Self> {
        Self::from_tokens(text.lines().map(str::to_string).collect(), drugs)
    }

    pub fn save(&self, vocab_path: &Path, drugs_path: &Path) -> Result<()> {
        crate::io::write_atomic(vocab_path, self.to_text().as_bytes())?;
        crate::io::write_atomic(drugs_path, self.drugs.to_text().as_bytes())?;
        Ok(())
    }

    pub fn load(vocab_path: &Path, drugs_path: &Path) -> Result<Self> {
        let drugs = DrugLexicon::load(drugs_path)?;
        Self::from_text(&fs::read_to_string(vocab_path)?, drugs)
    }
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn split_words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}
