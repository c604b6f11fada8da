//! Error type shared across the pipeline.

use std::fmt;

/// Identifies a (keyword, extension, page) search request that completed
/// before a partial-ingest failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletedPage {
    pub keyword: String,
    pub extension: String,
    pub page: u32,
}

impl fmt::Display for CompletedPage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} page {}", self.keyword, self.extension, self.page)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("http error: {0}")]
    Http(#[from] reqwest::Error),

    /// A code-host search run that failed mid-way. Carries every page that
    /// was fetched successfully so a caller can resume instead of restarting.
    #[error("partial ingest after {} completed page(s): {detail}", completed.len())]
    PartialIngest {
        completed: Vec<CompletedPage>,
        detail: String,
    },

    /// A prompt template slot was not supplied at render time.
    #[error("template '{template}' is missing required slot '{slot}'")]
    MissingSlot { template: String, slot: String },

    /// A model reply did not contain a usable `Score:` line (or the score was
    /// out of range). The raw text is kept for the caller's re-prompt logic.
    #[error("could not parse score from model reply: {detail}")]
    ScoreParse { detail: String, raw: String },

    /// A judge reply did not contain a usable `[Best option: X]` marker.
    #[error("could not parse option choice from model reply: {detail}")]
    OptionParse { detail: String, raw: String },

    /// No code could be extracted from a model reply.
    #[error("no code block found in model reply")]
    EmptyExtraction { raw: String },

    /// Model provider failure that retrying will not fix.
    #[error("provider '{provider}' failed: {detail}")]
    Provider { provider: String, detail: String },

    /// Model provider failure worth retrying (rate limit, 5xx, transport).
    #[error("provider '{provider}' transient failure: {detail}")]
    ProviderTransient { provider: String, detail: String },

    /// Source could not be normalized (lex or structural parse failure).
    #[error("java normalization failed: {detail}")]
    Normalize { detail: String },

    /// Invalid vectors handed to the similarity scorer.
    #[error("similarity scoring failed: {detail}")]
    Score { detail: String },

    /// Inconsistent parameters or configuration values.
    #[error("configuration error: {detail}")]
    Config { detail: String },

    /// Missing compiler/runtime or other host-environment problem. Maps to
    /// CLI exit code 2.
    #[error("environment error: {detail}")]
    Environment { detail: String },

    /// A benchmark file that failed validation.
    #[error("benchmark load error in task '{task_id}': field '{field}' {detail}")]
    BenchLoad {
        task_id: String,
        field: String,
        detail: String,
    },

    /// Candidate text that is missing a required section marker.
    #[error("malformed candidate: missing '{marker}' section")]
    MalformedCandidate { marker: String },

    /// Stage-level failure (bad input schema, unusable record, ...).
    #[error("stage '{stage}' failed: {detail}")]
    Stage { stage: String, detail: String },
}

impl Error {
    /// True for failures caused by the host environment (missing binaries,
    /// unset credentials) rather than by the data being processed.
    pub fn is_environment(&self) -> bool {
        matches!(self, Error::Environment { .. })
    }

    /// True when a retry has a chance of succeeding.
    pub fn is_transient(&self) -> bool {
        matches!(self, Error::ProviderTransient { .. } | Error::Http(_))
    }

    pub(crate) fn config(detail: impl Into<String>) -> Self {
        Error::Config {
            detail: detail.into(),
        }
    }

    pub(crate) fn environment(detail: impl Into<String>) -> Self {
        Error::Environment {
            detail: detail.into(),
        }
    }

    pub(crate) fn stage(stage: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
