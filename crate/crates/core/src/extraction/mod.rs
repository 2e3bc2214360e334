//! Intent and entity extraction.
//!
//! Three interchangeable backends implement [`ExtractorBackend`]: the
//! lexicon-driven [`RuleBackend`], and [`LlmBackend`] talking either to a
//! live chat-completions endpoint or to a [`ReplayTransport`] of recorded
//! exchanges.

pub mod chat;
pub mod entities;
pub mod lexicon;
pub mod llm;
pub mod prompt;
pub mod rule;

use thiserror::Error;

use crate::model::{ExtractionOutcome, ModelError};

pub use chat::{
    fixture_key, ChatMessage, ChatRequest, ChatResponse, ChatRole, ChatTransport, RecordingTransport,
    ReplayFixture, ReplayTransport, TransportError,
};
pub use entities::extract_entities;
pub use lexicon::Lexicon;
pub use llm::{extract_llm, parse_llm_response, LlmBackend, LlmOptions, RetryPolicy};
pub use prompt::{build_prompt, PromptSpec};
pub use rule::{extract_rule_based, RuleBackend};

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("request text is empty")]
    EmptyRequest,
    #[error("could not find any intent or sentinel in the model response")]
    UnparseableResponse,
    #[error("transport failed after {attempts} attempt(s): {source}")]
    Transport {
        attempts: u32,
        #[source]
        source: TransportError,
    },
    #[error("invalid lexicon: {0}")]
    Lexicon(String),
    #[error("invalid prompt spec: {0}")]
    Prompt(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A pluggable intent classifier.
pub trait ExtractorBackend: Send + Sync {
    fn name(&self) -> &str;

    /// True when identical inputs always produce identical outcomes.
    fn deterministic(&self) -> bool;

    fn classify(&self, request_text: &str) -> Result<ExtractionOutcome, ExtractionError>;
}

impl<B: ExtractorBackend + ?Sized> ExtractorBackend for Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn deterministic(&self) -> bool {
        (**self).deterministic()
    }

    fn classify(&self, request_text: &str) -> Result<ExtractionOutcome, ExtractionError> {
        (**self).classify(request_text)
    }
}

impl<B: ExtractorBackend + ?Sized> ExtractorBackend for std::sync::Arc<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn deterministic(&self) -> bool {
        (**self).deterministic()
    }

    fn classify(&self, request_text: &str) -> Result<ExtractionOutcome, ExtractionError> {
        (**self).classify(request_text)
    }
}

/// Converts a byte offset in `text` to a character offset.
pub(crate) fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}
