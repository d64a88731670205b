//! # hela-mem
//!
//! An associative long-term memory engine for conversational agents.
//! Conversation turns are stored as nodes in a weighted graph whose edges
//! evolve under Hebbian dynamics: memories co-retrieved together strengthen
//! their connection, unused connections decay geometrically. On top of that
//! graph sit three coordinated mechanisms:
//!
//! - **Online encoding** — each turn becomes a node with a unit-norm
//!   embedding and extracted keywords, chained to the previous turn of its
//!   session by a small seed weight.
//! - **Reflective consolidation** — nodes whose summed edge weight crosses a
//!   threshold are treated as hubs; the hub and its strongest neighbors are
//!   distilled through an LLM prompt into declarative semantic records with
//!   evidence links, while a three-criterion forgetting pass removes nodes
//!   that are weak, dormant, and unaccessed.
//! - **Dual-path retrieval** — queries score every node by embedding
//!   similarity, keyword overlap, and exponential time decay, then propagate
//!   activation one hop along Hebbian edges so strongly associated (but
//!   semantically distant) memories can flip into the result set. Retrieval
//!   itself reinforces the retrieved set (write-on-read).
//!
//! The engine is deliberately synchronous and single-writer: one retrieval
//! event is in flight per engine. Backends (embeddings, chat) are traits
//! with both HTTP clients and deterministic in-process stubs, so the whole
//! pipeline runs offline in tests.

pub mod backends;
pub mod config;
pub mod consolidation;
pub mod encoding;
pub mod engine;
pub mod error;
pub mod eval;
pub mod export;
pub mod graph;
pub mod persistence;
pub mod prompts;
pub mod retrieval;
pub mod semantic;
pub mod types;

pub use backends::{ChatBackend, EmbeddingBackend, StubChat, StubEmbedding};
pub use config::{ConfigError, ConfigViolation, EngineConfig};
pub use consolidation::ConsolidationEvent;
pub use engine::MemoryEngine;
pub use error::{BackendError, DatasetError, EngineError, SnapshotError};
pub use graph::EpisodicGraph;
pub use persistence::{load_snapshot, save_snapshot, SNAPSHOT_FORMAT};
pub use retrieval::{PathTag, RetrievalResult, ScoredNode, SemanticHit};
pub use semantic::SemanticStore;
pub use types::{
    ConversationTurn, HebbianEdge, MemoryNode, NodeId, QaCategory, QaItem, RecordId,
    SemanticCategory, SemanticRecord, Speaker,
};
