use std::path::PathBuf;

use crate::estimator::Tier;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong between loading a scenario and emitting its reports.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("profiling is degenerate: total measured time is zero")]
    ProfileDegenerate,

    #[error("invalid profile at `{field}`: {reason}")]
    InvalidProfile { field: String, reason: String },

    #[error("unknown fixture `{name}` (known: {known})")]
    UnknownFixture { name: String, known: String },

    #[error("link probe on hop {hop} failed: every repeat for a {size}-byte payload errored ({last})")]
    LinkProbeTransport { hop: String, size: u64, last: String },

    #[error("invalid split ({last_edge}, {last_fog}) for {n_features} feature layers")]
    InvalidSplit {
        last_edge: usize,
        last_fog: usize,
        n_features: usize,
    },

    #[error("cannot fit rates: no sample covers the {0} node")]
    RateFitCoverage(Tier),

    #[error("no valid candidate split for {n_features} feature layers with at least {min_edge_layers} edge layer(s)")]
    EmptyCandidateSpace {
        n_features: usize,
        min_edge_layers: usize,
    },

    #[error("cannot place three distinct probe splits in {n_features} feature layers (min edge layers {min_edge_layers})")]
    ProbeSpace {
        n_features: usize,
        min_edge_layers: usize,
    },

    #[error("unknown hop `{0}`")]
    UnknownHop(String),

    #[error("initialization failed during phase {phase}: {source}")]
    Initialization {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("steady-state window {window} aborted: {source}")]
    WindowAborted {
        window: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("environment failure: {0}")]
    Environment(String),

    #[error("invalid configuration at `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("inference budget {budget} is below the minimum of {minimum} (profile + 3 probe batches + one steady window)")]
    BudgetTooSmall { budget: usize, minimum: usize },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wire protocol: {0}")]
    Wire(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Validation-class errors: the input was rejected before anything ran.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidModel(_)
                | Error::InvalidProfile { .. }
                | Error::UnknownFixture { .. }
                | Error::InvalidSplit { .. }
                | Error::InvalidConfig { .. }
                | Error::BudgetTooSmall { .. }
                | Error::Parse { .. }
                | Error::EmptyCandidateSpace { .. }
                | Error::ProbeSpace { .. }
        )
    }
}
