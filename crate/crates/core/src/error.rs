use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear system is singular even after diagonal jitter")]
    Singular,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("training data contains {found} distinct class(es); at least 2 required")]
    TooFewClasses { found: usize },

    #[error("{context} needs at least {needed} samples, got {found}")]
    TooFewSamples {
        context: &'static str,
        needed: usize,
        found: usize,
    },

    #[error("window of {found} samples is shorter than the wavelet filter; at least {required} samples required")]
    WindowTooShort { required: usize, found: usize },

    #[error("at least one source hypothesis is required")]
    NoSources,

    #[error("{0} split is empty")]
    EmptySplit(&'static str),

    #[error("empty input to {0}")]
    EmptyInput(&'static str),

    #[error("every grid point failed: {}", format_failures(.0))]
    GridExhausted(Vec<(f64, f64, String)>),

    #[error("need at least {needed} subjects, have {found}")]
    InsufficientSubjects { needed: usize, found: usize },

    #[error("data leakage: repetition {repetition} reached {stage}")]
    Leakage {
        stage: &'static str,
        repetition: u32,
    },

    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("pairing cannot be satisfied: {0}")]
    Pairing(String),
}

fn format_failures(failures: &[(f64, f64, String)]) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    for (i, (c, gamma, cause)) in failures.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        let _ = write!(out, "C={c} gamma={gamma}: {cause}");
    }
    out
}

impl Error {
    /// Short machine-readable class name, used by the CLI error line.
    pub fn class(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension",
            Error::InvalidParameter(_) => "parameter",
            Error::Singular => "singular",
            Error::NonFinite(_) => "nonfinite",
            Error::TooFewClasses { .. } => "classes",
            Error::TooFewSamples { .. } => "samples",
            Error::WindowTooShort { .. } => "window",
            Error::NoSources => "sources",
            Error::EmptySplit(_) => "split",
            Error::EmptyInput(_) => "empty",
            Error::GridExhausted(_) => "grid",
            Error::InsufficientSubjects { .. } => "subjects",
            Error::Leakage { .. } => "leakage",
            Error::InvalidRecording(_) => "recording",
            Error::Pairing(_) => "pairing",
        }
    }
}
