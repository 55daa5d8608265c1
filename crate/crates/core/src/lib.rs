//! Two-view text classification with view distillation.
//!
//! A shared self-attention encoder yields a document view (the `[CLS]` row)
//! and a drug view (the first drug-token row) of every posting. A teacher is
//! trained per view on labeled data; each teacher soft-labels an unlabeled
//! pool at temperature `T`, the labels are carried over to the opposite view
//! to train a fresh student there, and each student is fine-tuned on the
//! labeled data with a mix of ground truth and its own view's teacher
//! outputs. Predictions average the two students' probabilities.

pub mod autodiff;
pub mod corpus;
pub mod distill;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod io;
pub mod metrics;

pub use error::{Result, VidError};
