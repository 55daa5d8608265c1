//! Shared fixtures for the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vid_core::corpus::{generate_synthetic, SynthConfig};
use vid_core::distill::{Classifier, ExperimentConfig, Readout};
use vid_core::encoder::{tokenize, EncodedDocument, EncoderParams, View, Vocabulary};

/// A small corpus tokenized with the default encoder settings, plus a
/// freshly initialized doc-view classifier.
pub struct Fixture {
    pub cfg: ExperimentConfig,
    pub docs: Vec<EncodedDocument>,
    pub labels: Vec<vid_core::corpus::Label>,
    pub model: Classifier,
}

pub fn fixture(n_docs: usize) -> Fixture {
    let corpus = generate_synthetic(&SynthConfig {
        n_labeled: n_docs,
        n_unlabeled: 1,
        n_test: 1,
        ..Default::default()
    })
    .expect("valid synthetic settings");
    let cfg = ExperimentConfig::default();
    let vocab = Vocabulary::build(corpus.labeled.iter().map(|d| d.text.as_str()), &corpus.drugs);
    let docs = corpus
        .labeled
        .iter()
        .map(|d| tokenize(&d.text, &vocab, cfg.encoder.max_len))
        .collect::<Result<Vec<_>, _>>()
        .expect("every document mentions a drug");
    let labels = corpus.labeled.iter().map(|d| d.label.expect("labeled")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let encoder = EncoderParams::init(cfg.encoder, vocab.len(), &mut rng).expect("valid encoder settings");
    let model = Classifier::new(encoder, Readout::View(View::Document), &mut rng);
    Fixture { cfg, docs, labels, model }
}
