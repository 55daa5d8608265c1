use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum VidError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("no drug mention found in {text:?}")]
    NoDrugMention { text: String },

    #[error("token id {id} out of range for vocabulary of size {size}")]
    Vocabulary { id: usize, size: usize },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("association error: no entry for document id {0:?}")]
    Association(String),

    #[error("config hash mismatch: checkpoint has {found}, expected {expected}")]
    ConfigMismatch { expected: String, found: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = VidError> = std::result::Result<T, E>;

impl VidError {
    /// True for errors caused by the input data rather than by the program.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            VidError::NoDrugMention { .. }
                | VidError::Vocabulary { .. }
                | VidError::Parse { .. }
                | VidError::DuplicateId(_)
                | VidError::Schema(_)
                | VidError::DegenerateData(_)
                | VidError::Association(_)
                | VidError::ConfigMismatch { .. }
                | VidError::Empty(_)
                | VidError::Io(_)
                | VidError::Json(_)
        )
    }
}
