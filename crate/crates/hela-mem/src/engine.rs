//! The memory engine: episodic graph, semantic store, and the retrieval /
//! consolidation / forgetting lifecycle wired together.
//!
//! All mutating entry points require exclusive access (`&mut self`); one
//! retrieval event is in flight per engine at a time.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};

use crate::backends::{ChatBackend, EmbeddingBackend};
use crate::config::{ConfigError, EngineConfig};
use crate::consolidation::{self, ConsolidationEvent};
use crate::encoding;
use crate::error::EngineError;
use crate::graph::EpisodicGraph;
use crate::retrieval::{
    self, render_context_sections, Query, RetrievalResult,
};
use crate::semantic::SemanticStore;
use crate::types::{normalize_embedding, ConversationTurn, MemoryNode, NodeId};

#[derive(Debug, Clone)]
pub struct MemoryEngine {
    config: EngineConfig,
    graph: EpisodicGraph,
    semantic: SemanticStore,
    events: Vec<ConsolidationEvent>,
    hub_cooldowns: BTreeMap<NodeId, u64>,
}

impl MemoryEngine {
    pub fn new(config: EngineConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(MemoryEngine {
            config,
            graph: EpisodicGraph::new(),
            semantic: SemanticStore::new(),
            events: Vec::new(),
            hub_cooldowns: BTreeMap::new(),
        })
    }

    /// Assemble an engine around an existing graph and store, e.g. state
    /// built by tooling or restored outside the snapshot path.
    pub fn from_state(
        config: EngineConfig,
        graph: EpisodicGraph,
        semantic: SemanticStore,
    ) -> Result<Self, ConfigError> {
        Self::from_parts(config, graph, semantic, Vec::new(), BTreeMap::new())
    }

    pub(crate) fn from_parts(
        config: EngineConfig,
        graph: EpisodicGraph,
        semantic: SemanticStore,
        events: Vec<ConsolidationEvent>,
        hub_cooldowns: BTreeMap<NodeId, u64>,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(MemoryEngine { config, graph, semantic, events, hub_cooldowns })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn graph(&self) -> &EpisodicGraph {
        &self.graph
    }

    pub fn graph_mut(&mut self) -> &mut EpisodicGraph {
        &mut self.graph
    }

    pub fn semantic(&self) -> &SemanticStore {
        &self.semantic
    }

    pub fn events(&self) -> &[ConsolidationEvent] {
        &self.events
    }

    pub fn hub_cooldowns(&self) -> &BTreeMap<NodeId, u64> {
        &self.hub_cooldowns
    }

    /// Encode one turn into the episodic graph.
    pub fn ingest(
        &mut self,
        turn: &ConversationTurn,
        embedder: &dyn EmbeddingBackend,
    ) -> Result<NodeId, EngineError> {
        encoding::ingest_turn(&mut self.graph, turn, embedder, &self.config)
    }

    /// Full retrieval pipeline: embed the query, advance the step, score all
    /// nodes, spread if enabled, rank both paths, fetch semantic records,
    /// then reinforce the retrieved set (write-on-read) and stamp accesses.
    ///
    /// All fallible work happens before any mutation, so a backend failure
    /// leaves the engine untouched.
    pub fn retrieve(
        &mut self,
        query_text: &str,
        now: DateTime<Utc>,
        embedder: &dyn EmbeddingBackend,
    ) -> Result<RetrievalResult, EngineError> {
        if query_text.trim().is_empty() {
            return Err(EngineError::EmptyText);
        }
        let raw = embedder.embed(query_text)?;
        let embedding = normalize_embedding(&raw)?;
        if let Some(dim) = self.graph.embedding_dim() {
            if embedding.len() != dim {
                return Err(EngineError::DimensionMismatch {
                    expected: dim,
                    actual: embedding.len(),
                });
            }
        }
        let query = Query {
            embedding,
            keywords: encoding::extract_keywords(query_text),
            time: now,
        };

        // Score against the step this retrieval event will run at; the step
        // counter itself is only advanced once nothing can fail anymore.
        let step = self.graph.step() + 1;
        let mut base_scores: BTreeMap<NodeId, f64> = BTreeMap::new();
        for node in self.graph.nodes() {
            base_scores.insert(node.id, retrieval::base_score(&query, node, &self.config)?);
        }
        let augmented_scores = if self.config.enable_spreading {
            retrieval::spread(&base_scores, &self.graph, step, &self.config)?
        } else {
            base_scores.clone()
        };
        let episodic = retrieval::dual_path_rank(&base_scores, &augmented_scores, &self.config);
        let semantic = retrieval::retrieve_semantic(&self.semantic, &query.embedding, &self.config)?;

        let retrieved: BTreeSet<NodeId> = episodic.iter().map(|s| s.node_id).collect();
        self.graph.advance_step();
        self.graph.reinforce(&retrieved, &self.config)?;
        self.graph.mark_accessed(&retrieved, now);

        let sections = render_context_sections(&self.graph, &self.semantic, &episodic, &semantic);
        Ok(RetrievalResult {
            episodic,
            semantic,
            context_token_count: sections.token_count(),
            query_text: query_text.to_string(),
            query_embedding: query.embedding,
        })
    }

    /// Distill every eligible hub into semantic records. Per-hub backend
    /// failures are logged and isolated; failed hubs stay eligible for the
    /// next cycle, successful ones enter their cooldown.
    pub fn run_reflection(
        &mut self,
        now: DateTime<Utc>,
        chat: &dyn ChatBackend,
        embedder: &dyn EmbeddingBackend,
    ) -> Vec<ConsolidationEvent> {
        if !self.config.enable_reflective {
            return Vec::new();
        }
        let step = self.graph.step();
        let hubs = self.graph.detect_hubs(step, &self.config, &self.hub_cooldowns);
        let mut new_events = Vec::new();
        for hub in hubs {
            let cluster = match consolidation::extract_cluster(&self.graph, hub, step, &self.config)
            {
                Ok(c) => c,
                Err(e) => {
                    log::warn!("cluster extraction for {hub} failed: {e}");
                    continue;
                }
            };
            let nodes: Vec<&MemoryNode> =
                cluster.iter().filter_map(|id| self.graph.node(*id)).collect();
            let statements = match consolidation::distill(&nodes, chat) {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("distillation for hub {hub} failed, hub stays eligible: {e}");
                    continue;
                }
            };
            let evidence: Vec<NodeId> = cluster.iter().copied().collect();
            let mut produced = Vec::new();
            for statement in statements {
                let embedding = match embedder
                    .embed(&statement.statement)
                    .map_err(EngineError::from)
                    .and_then(|raw| normalize_embedding(&raw))
                    .and_then(|e| match self.graph.embedding_dim() {
                        Some(dim) if e.len() != dim => Err(EngineError::DimensionMismatch {
                            expected: dim,
                            actual: e.len(),
                        }),
                        _ => Ok(e),
                    }) {
                    Ok(e) => e,
                    Err(e) => {
                        log::warn!("embedding distilled statement failed, dropped: {e}");
                        continue;
                    }
                };
                match self.semantic.insert(
                    statement.category,
                    statement.statement,
                    1.0,
                    evidence.clone(),
                    embedding,
                    now,
                    hub,
                ) {
                    Ok(id) => produced.push(id),
                    Err(e) => log::warn!("storing distilled record failed, dropped: {e}"),
                }
            }
            let event = ConsolidationEvent {
                hub,
                cluster: evidence,
                produced,
                step,
                at: now,
            };
            self.hub_cooldowns.insert(hub, step + self.config.cooldown_steps);
            self.events.push(event.clone());
            new_events.push(event);
        }
        new_events
    }

    /// Remove every node meeting all three forgetting criteria. Semantic
    /// records referencing removed nodes keep the ids, marked stale.
    pub fn run_forgetting(&mut self, now: DateTime<Utc>) -> Vec<NodeId> {
        if !self.config.enable_forgetting {
            return Vec::new();
        }
        let step = self.graph.step();
        let candidates = self.graph.prune_candidates(now, step, &self.config);
        if candidates.is_empty() {
            return Vec::new();
        }
        self.graph
            .remove_nodes(&candidates)
            .expect("candidates come from the graph");
        self.semantic.mark_stale(&candidates);
        for id in &candidates {
            self.hub_cooldowns.remove(id);
        }
        candidates.into_iter().collect()
    }

    /// The post-retrieval lifecycle pass: reflection, then forgetting.
    pub fn maintain(
        &mut self,
        now: DateTime<Utc>,
        chat: &dyn ChatBackend,
        embedder: &dyn EmbeddingBackend,
    ) -> (Vec<ConsolidationEvent>, Vec<NodeId>) {
        let events = self.run_reflection(now, chat, embedder);
        let removed = self.run_forgetting(now);
        (events, removed)
    }
}
