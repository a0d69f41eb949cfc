use alloc::boxed::Box;
use alloc::string::String;

/// Errors produced by the sampling core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    Shape {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("singular step: alpha_bar_t = 0 has no predicted x0")]
    Singularity,

    #[error(
        "refresh step collision at stage {stage}: step {step} already starts stage {previous}"
    )]
    Planning {
        stage: usize,
        previous: usize,
        step: usize,
    },

    #[error("denoiser: {0}")]
    Denoiser(String),

    #[error("codec: {0}")]
    Codec(String),

    #[error("statistic: {0}")]
    Statistic(String),

    #[error("trace comparison: {0}")]
    Comparison(String),

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("reconstruction identity violated at step {step}: relative error {rel_err:e}")]
    Reconstruction { step: usize, rel_err: f64 },

    #[error("step {step}: {source}")]
    AtStep { step: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
