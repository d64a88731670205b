//! Embedding and chat-completion backends. The engine core only sees the two
//! traits; whether calls go over HTTP or to the deterministic in-process
//! stubs is the caller's choice.

mod http;
mod stub;

pub use http::{HttpBackendConfig, HttpChat, HttpEmbedding};
pub use stub::{StubChat, StubChatFallback, StubEmbedding};

use crate::error::BackendError;

/// Produces a dense embedding for a text. Output need not be unit-norm; the
/// engine normalizes at insertion time.
pub trait EmbeddingBackend {
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError>;
}

/// Single-shot chat completion.
pub trait ChatBackend {
    fn chat(&self, system_prompt: &str, user_prompt: &str) -> Result<String, BackendError>;
}

impl<T: EmbeddingBackend + ?Sized> EmbeddingBackend for &T {
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        (**self).embed(text)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for &T {
    fn chat(&self, system_prompt: &str, user_prompt: &str) -> Result<String, BackendError> {
        (**self).chat(system_prompt, user_prompt)
    }
}
