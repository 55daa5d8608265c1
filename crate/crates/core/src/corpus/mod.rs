//! Labeled and unlabeled document sets, synthetic corpus generation, the
//! stratified validation split and the per-document view pairing.

mod document;
mod split;
mod synth;
mod views;

pub use document::{corpus_text, load_corpus, validate_corpus, write_corpus, Document, Label, LoadedCorpus};
pub use split::split_validation;
pub use synth::{generate_synthetic, generate_with_pool_labels, SynthConfig, CorpusSplits};
pub use views::{pair_views, PairedViews};
