//! Online encoding: turns become graph nodes with normalized embeddings,
//! extracted keywords, and a small-weight adjacency edge to the previous
//! turn of the same session.

use std::collections::BTreeSet;

use crate::backends::EmbeddingBackend;
use crate::config::EngineConfig;
use crate::error::EngineError;
use crate::graph::EpisodicGraph;
use crate::types::{
    normalize_embedding, ConversationTurn, EdgeKey, HebbianEdge, MemoryNode, NodeId,
};

/// Keywords retained per node, keeping keyword matching cheap.
pub const MAX_KEYWORDS: usize = 16;

/// Built-in English stopword list used by keyword extraction.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and",
    "any", "are", "as", "at", "be", "because", "been", "before", "being", "below",
    "between", "both", "but", "by", "can", "cannot", "could", "did", "do", "does",
    "doing", "down", "during", "each", "few", "for", "from", "further", "had",
    "has", "have", "having", "he", "her", "here", "hers", "herself", "him",
    "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself",
    "just", "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of",
    "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out",
    "over", "own", "same", "she", "should", "so", "some", "such", "than", "that",
    "the", "their", "theirs", "them", "themselves", "then", "there", "these",
    "they", "this", "those", "through", "to", "too", "under", "until", "up",
    "very", "was", "we", "were", "what", "when", "where", "which", "while", "who",
    "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
    "yourselves",
];

fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Lowercase a whitespace token and drop every non-alphanumeric character.
fn normalize_token(raw: &str) -> String {
    raw.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Extract up to [`MAX_KEYWORDS`] normalized keywords: lowercase,
/// punctuation-stripped, stopwords removed, ranked by descending in-text
/// frequency with ties broken by first occurrence. Deterministic; empty or
/// all-stopword text yields the empty set.
pub fn extract_keywords(text: &str) -> BTreeSet<String> {
    // (token, count, first occurrence index), in first-occurrence order.
    let mut seen: Vec<(String, usize, usize)> = Vec::new();
    for raw in text.split_whitespace() {
        let token = normalize_token(raw);
        if token.is_empty() || is_stopword(&token) {
            continue;
        }
        match seen.iter_mut().find(|(t, _, _)| *t == token) {
            Some((_, count, _)) => *count += 1,
            None => {
                let idx = seen.len();
                seen.push((token, 1, idx));
            }
        }
    }
    seen.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    seen.into_iter()
        .take(MAX_KEYWORDS)
        .map(|(t, _, _)| t)
        .collect()
}

/// Encode one turn into the graph. The embedding is normalized to unit norm
/// regardless of backend output; a chain edge of weight `w_initial` links the
/// new node to the previous node of the same session. On any error the graph
/// is left unchanged.
pub fn ingest_turn(
    graph: &mut EpisodicGraph,
    turn: &ConversationTurn,
    embedder: &dyn EmbeddingBackend,
    config: &EngineConfig,
) -> Result<NodeId, EngineError> {
    if turn.text.trim().is_empty() {
        return Err(EngineError::EmptyText);
    }
    let raw = embedder.embed(&turn.text)?;
    let embedding = normalize_embedding(&raw)?;
    if let Some(dim) = graph.embedding_dim() {
        if embedding.len() != dim {
            return Err(EngineError::DimensionMismatch {
                expected: dim,
                actual: embedding.len(),
            });
        }
    }

    let id = graph.peek_next_id();
    let chain_prev = match graph.last_session_id() {
        Some(session) if session == turn.session_id => graph.last_node_id(),
        _ => None,
    };

    graph.insert_node(MemoryNode {
        id,
        text: turn.text.clone(),
        embedding,
        timestamp: turn.timestamp,
        keywords: extract_keywords(&turn.text),
        speaker: turn.speaker.clone(),
        last_access_time: None,
        access_count: 0,
        created_step: graph.step(),
    })?;

    if let Some(prev) = chain_prev {
        let key = EdgeKey::new(prev, id)?;
        graph.insert_edge(HebbianEdge {
            key,
            weight: config.w_initial,
            last_update_step: graph.step(),
            co_activation_count: 0,
        })?;
    }
    graph.set_last(id, &turn.session_id);
    Ok(id)
}
