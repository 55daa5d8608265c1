//! Word-level tokenization and a small self-attention encoder whose output
//! rows provide the document view (`[CLS]` position) and the drug view
//! (first drug-token position).

mod model;
mod tokenize;
mod vocab;

pub use model::{
    encode, encode_call_count, extract_view, Dropout, EncoderConfig, EncoderParams, EncoderVars, HeadParams,
    HeadVars, LayerParams, LayerVars, View,
};
pub use tokenize::{tokenize, EncodedDocument};
pub use vocab::{
    split_words, DrugLexicon, Vocabulary, CLS_ID, CLS_TOKEN, PAD_ID, PAD_TOKEN, SEP_ID, SEP_TOKEN,
    UNK_ID, UNK_TOKEN,
};
