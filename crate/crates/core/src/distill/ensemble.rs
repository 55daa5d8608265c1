use super::classifier::Classifier;
use super::stages::argmax;
use crate::corpus::Label;
use crate::encoder::{tokenize, EncodedDocument, View, Vocabulary};
use crate::error::{Result, VidError};

/// Mean of two class distributions.
pub fn average(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
}

fn check_views(doc_model: &Classifier, drug_model: &Classifier) -> Result<()> {
    if doc_model.view() != Some(View::Document) || drug_model.view() != Some(View::Drug) {
        return Err(VidError::Contract(format!(
            "ensemble needs a doc-view and a drug-view classifier, got {} and {}",
            doc_model.readout().tag(),
            drug_model.readout().tag()
        )));
    }
    Ok(())
}

/// Averages the T = 1 probabilities of the two view classifiers over
/// already tokenized documents.
pub fn ensemble_probabilities(
    doc_model: &Classifier,
    drug_model: &Classifier,
    docs: &[EncodedDocument],
) -> Result<Vec<[f64; 2]>> {
    check_views(doc_model, drug_model)?;
    let (a, b) = rayon::join(
        || doc_model.probabilities(docs, 1.0),
        || drug_model.probabilities(docs, 1.0),
    );
    Ok(a?.into_iter().zip(b?).map(|(a, b)| average(a, b)).collect())
}

/// Label and averaged distribution for one raw document.
pub fn predict_ensemble(
    doc_model: &Classifier,
    drug_model: &Classifier,
    text: &str,
    vocab: &Vocabulary,
) -> Result<(Label, [f64; 2])> {
    let doc = tokenize(text, vocab, doc_model.encoder.config.max_len)?;
    let p = ensemble_probabilities(doc_model, drug_model, std::slice::from_ref(&doc))?[0];
    Ok((argmax(p), p))
}

/// Hard labels of a single classifier at T = 1.
pub fn predict_labels(model: &Classifier, docs: &[EncodedDocument]) -> Result<Vec<Label>> {
    Ok(model.probabilities(docs, 1.0)?.into_iter().map(argmax).collect())
}
