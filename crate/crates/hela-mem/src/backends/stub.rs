//! Deterministic in-process backends for tests and offline runs.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::BackendError;

use super::{ChatBackend, EmbeddingBackend};

/// Seeded pseudo-random embedder. Each token hashes to a fixed direction and
/// the text's vector is the sum of its token directions plus a small
/// whole-text component, so texts sharing words score higher cosine
/// similarity than disjoint texts. Output is intentionally unnormalized; the
/// engine normalizes on insert.
#[derive(Debug, Clone)]
pub struct StubEmbedding {
    dim: usize,
    seed: u64,
}

const TEXT_COMPONENT_SCALE: f64 = 0.25;
const TEXT_COMPONENT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

impl StubEmbedding {
    pub fn new(dim: usize, seed: u64) -> Self {
        StubEmbedding { dim, seed }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl EmbeddingBackend for StubEmbedding {
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::EmptyInput);
        }
        let mut acc = vec![0.0; self.dim];
        for raw in text.split_whitespace() {
            let token: String = raw
                .chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect();
            if token.is_empty() {
                continue;
            }
            add_direction(&mut acc, self.seed ^ fnv1a64(token.as_bytes()), 1.0);
        }
        add_direction(
            &mut acc,
            self.seed ^ fnv1a64(text.as_bytes()) ^ TEXT_COMPONENT_SALT,
            TEXT_COMPONENT_SCALE,
        );
        Ok(acc)
    }
}

fn add_direction(acc: &mut [f64], seed: u64, scale: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for slot in acc.iter_mut() {
        *slot += scale * unit_interval(rng.next_u64()).mul_add(2.0, -1.0);
    }
}

fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 / (1u64 << 53) as f64
}

/// FNV-1a, 64-bit. Stable across builds, unlike the std hasher.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// What a [`StubChat`] answers when no scripted rule matches.
#[derive(Debug, Clone)]
pub enum StubChatFallback {
    /// Always this string.
    Fixed(String),
    /// Recognize the prompt kind and answer deterministically from its
    /// content: extraction prompts get a parseable two-section response,
    /// question prompts echo the first episodic memory's text.
    Contextual,
}

/// Scripted chat backend. Rules are checked in order against the user prompt
/// (substring match); the fallback handles everything else.
#[derive(Debug, Clone)]
pub struct StubChat {
    rules: Vec<(String, String)>,
    fallback: StubChatFallback,
}

impl Default for StubChat {
    fn default() -> Self {
        StubChat::new()
    }
}

impl StubChat {
    pub fn new() -> Self {
        StubChat { rules: Vec::new(), fallback: StubChatFallback::Contextual }
    }

    pub fn fixed(response: &str) -> Self {
        StubChat {
            rules: Vec::new(),
            fallback: StubChatFallback::Fixed(response.to_string()),
        }
    }

    /// Add a rule: when the user prompt contains `pattern`, answer `response`.
    pub fn respond_when(mut self, pattern: &str, response: &str) -> Self {
        self.rules.push((pattern.to_string(), response.to_string()));
        self
    }
}

impl ChatBackend for StubChat {
    fn chat(&self, system_prompt: &str, user_prompt: &str) -> Result<String, BackendError> {
        if system_prompt.trim().is_empty() || user_prompt.trim().is_empty() {
            return Err(BackendError::EmptyInput);
        }
        for (pattern, response) in &self.rules {
            if user_prompt.contains(pattern) {
                return Ok(response.clone());
            }
        }
        match &self.fallback {
            StubChatFallback::Fixed(s) => Ok(s.clone()),
            StubChatFallback::Contextual => Ok(contextual_response(user_prompt)),
        }
    }
}

fn contextual_response(user_prompt: &str) -> String {
    if let Some(cluster) = user_prompt.split("Memory Cluster:").nth(1) {
        let turns = cluster.lines().filter(|l| !l.trim().is_empty()).count();
        return format!(
            "1. USER CHARACTERISTICS:\n\
             - returns to the same topics across sessions\n\
             \n\
             2. FACTUAL INFORMATION:\n\
             - a recurring theme spans {turns} related conversation turns\n"
        );
    }
    if let Some(text) = first_episodic_text(user_prompt) {
        return text;
    }
    "Not mentioned in the conversation.".to_string()
}

/// Pull the text portion of the first line in the episodic section, which is
/// rendered as `[date] speaker: text`.
fn first_episodic_text(user_prompt: &str) -> Option<String> {
    let section = user_prompt.split("<EPISODIC MEMORIES>").nth(1)?;
    let line = section.lines().find(|l| l.trim_start().starts_with('['))?;
    let after_bracket = line.split_once(']').map(|(_, rest)| rest)?;
    let text = after_bracket.split_once(": ").map(|(_, t)| t)?;
    let text = text.trim();
    if text.is_empty() {
        None
    } else {
        Some(text.to_string())
    }
}
