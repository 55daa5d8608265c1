use serde::{Deserialize, Serialize};

use super::vocab::{split_words, Vocabulary, CLS_ID, PAD_ID, SEP_ID};
use crate::error::{Result, VidError};

/// Token ids of one document: `[CLS] words… [SEP]` followed by optional padding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedDocument {
    pub ids: Vec<usize>,
    /// Index of the first drug token.
    pub drug_position: usize,
    /// `false` marks padding.
    pub mask: Vec<bool>,
}

impl EncodedDocument {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of non-padding positions.
    pub fn active_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Appends `[PAD]` up to `len` positions.
    pub fn padded(&self, len: usize) -> Self {
        let mut out = self.clone();
        while out.ids.len() < len {
            out.ids.push(PAD_ID);
            out.mask.push(false);
        }
        out
    }
}

/// Lowercases, splits, maps to ids and frames with `[CLS]`/`[SEP]`.
///
/// Words beyond `max_len - 2` are truncated. The drug position is the first
/// token found in the vocabulary's drug lexicon.
pub fn tokenize(text: &str, vocab: &Vocabulary, max_len: usize) -> Result<EncodedDocument> {
    if text.trim().is_empty() {
        return Err(VidError::Parameter("cannot tokenize empty text".into()));
    }
    if max_len < 3 {
        return Err(VidError::Parameter(format!("max_len {max_len} leaves no room for words")));
    }
    let mut ids = vec![CLS_ID];
    let mut drug_position = None;
    for word in split_words(text).take(max_len - 2) {
        if drug_position.is_none() && vocab.drugs().contains(&word) {
            drug_position = Some(ids.len());
        }
        ids.push(vocab.id(&word));
    }
    ids.push(SEP_ID);
    let drug_position = drug_position.ok_or_else(|| VidError::NoDrugMention {
        text: text.to_string(),
    })?;
    let mask = vec![true; ids.len()];
    Ok(EncodedDocument {
        ids,
        drug_position,
        mask,
    })
}
