use serde::{Deserialize, Serialize};

use super::document::{Document, Label};
use crate::encoder::{encode, extract_view, tokenize, EncodedDocument, EncoderParams, View, Vocabulary};
use crate::error::Result;

/// Both views of one document, taken from a single encoder pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedViews {
    pub id: String,
    pub label: Option<Label>,
    pub encoded: EncodedDocument,
    pub doc_repr: Vec<f64>,
    pub drug_repr: Vec<f64>,
}

impl PairedViews {
    pub fn repr(&self, view: View) -> &[f64] {
        match view {
            View::Document => &self.doc_repr,
            View::Drug => &self.drug_repr,
        }
    }
}

/// Tokenizes and encodes every document once and keeps both view rows.
pub fn pair_views(docs: &[Document], vocab: &Vocabulary, params: &EncoderParams) -> Result<Vec<PairedViews>> {
    docs.iter()
        .map(|d| {
            let encoded = tokenize(&d.text, vocab, params.config.max_len)?;
            let out = encode(&encoded, params)?;
            Ok(PairedViews {
                id: d.id.clone(),
                label: d.label,
                doc_repr: extract_view(&out, &encoded, View::Document)?,
                drug_repr: extract_view(&out, &encoded, View::Drug)?,
                encoded,
            })
        })
        .collect()
}
