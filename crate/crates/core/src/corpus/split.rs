use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::document::{Document, Label};
use crate::error::{Result, VidError};

/// Stratified train/validation split. Each class contributes
/// `round(fraction * class_size)` documents to the validation set; document
/// order within each output follows the input order.
pub fn split_validation(
    labeled: &[Document],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<Document>, Vec<Document>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(VidError::Parameter(format!(
            "validation fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_valid = vec![false; labeled.len()];
    for class in [Label::Negative, Label::Positive] {
        let mut members: Vec<usize> = labeled
            .iter()
            .enumerate()
            .filter(|(_, d)| d.label == Some(class))
            .map(|(i, _)| i)
            .collect();
        members.shuffle(&mut rng);
        let take = (fraction * members.len() as f64).round() as usize;
        for &i in &members[..take] {
            in_valid[i] = true;
        }
    }
    if let Some(d) = labeled.iter().find(|d| d.label.is_none()) {
        return Err(VidError::Schema(format!("document {:?} has no label", d.id)));
    }
    let (valid, train): (Vec<_>, Vec<_>) = labeled
        .iter()
        .cloned()
        .zip(in_valid)
        .partition(|(_, v)| *v);
    if train.is_empty() || valid.is_empty() {
        return Err(VidError::DegenerateData(format!(
            "{} documents are too few to stratify at fraction {fraction}",
            labeled.len()
        )));
    }
    Ok((
        train.into_iter().map(|(d, _)| d).collect(),
        valid.into_iter().map(|(d, _)| d).collect(),
    ))
}
