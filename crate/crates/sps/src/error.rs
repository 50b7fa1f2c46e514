//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by data loading, configuration checks, and the sampler itself.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid run configuration (bad thresholds, dimensions out of range, ...).
    #[error("config: {0}")]
    Config(String),

    /// Dataset loading or validation failure.
    #[error("data: {0}")]
    Data(String),

    /// A linear predictor or likelihood term came out non-finite.
    ///
    /// Raised by the model primitives; the engine enriches it with the
    /// offending particle's coordinates via [`Error::Evaluation`].
    #[error("non-finite likelihood term at observation {obs}")]
    NonFiniteLikelihood { obs: usize },

    /// Likelihood evaluation failed for a specific particle.
    #[error("likelihood evaluation failed for particle (group {group}, index {particle}) at observation {obs}")]
    Evaluation {
        group: usize,
        particle: usize,
        obs: usize,
    },

    /// Every weight in a group underflowed to zero (or went non-finite)
    /// during selection; the particle representation has collapsed.
    #[error("weight collapse in group {group} at cycle {cycle} (observations absorbed: {t})")]
    WeightCollapse {
        group: usize,
        cycle: usize,
        t: usize,
    },

    /// The pooled particle variance could not be factorized even after a
    /// ridge retry; the particle population has degenerated.
    #[error("proposal covariance not positive definite at cycle {cycle}, mutation step {step} (particle depletion)")]
    SingularProposal { cycle: usize, step: usize },

    /// The mutation phase hit the step cap before the RNE criterion was met.
    #[error("mutation failed to mix at cycle {cycle}: min RNE {min_rne:.4} < {target} after {steps} steps (trace: {rne_trace:?})")]
    MixingFailure {
        cycle: usize,
        steps: usize,
        min_rne: f64,
        target: f64,
        rne_trace: Vec<f64>,
    },

    /// A replay schedule does not match the data or configuration.
    #[error("schedule: {0}")]
    Schedule(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("report: {0}")]
    Report(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code category for the CLI: 2 config, 3 data/IO,
    /// 4 numerical abort, 5 mixing failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io(_) | Error::Report(_) | Error::Schedule(_) => 3,
            Error::NonFiniteLikelihood { .. }
            | Error::Evaluation { .. }
            | Error::WeightCollapse { .. }
            | Error::SingularProposal { .. } => 4,
            Error::MixingFailure { .. } => 5,
        }
    }
}
