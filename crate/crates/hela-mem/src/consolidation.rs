//! Reflective consolidation: hub-centered cluster extraction, LLM-backed
//! distillation into semantic statements, and the forgetting sweep. The
//! engine drives these after retrieval events; they are also invocable
//! directly.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::backends::ChatBackend;
use crate::config::EngineConfig;
use crate::error::{BackendError, EngineError};
use crate::graph::EpisodicGraph;
use crate::prompts;
use crate::retrieval::format_human_date;
use crate::types::{MemoryNode, NodeId, RecordId, SemanticCategory};

/// Neighbors beyond the strongest ten are left out of a cluster.
pub const MAX_CLUSTER_NEIGHBORS: usize = 10;

/// One completed distillation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsolidationEvent {
    pub hub: NodeId,
    pub cluster: Vec<NodeId>,
    pub produced: Vec<RecordId>,
    pub step: u64,
    pub at: DateTime<Utc>,
}

/// A parsed statement from a distillation response, before it becomes a
/// stored record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistilledStatement {
    pub category: SemanticCategory,
    pub statement: String,
}

/// Hub plus its strongly connected neighbors: effective edge weight to the
/// hub at least `eta` (one reinforcement surviving decay), capped at the
/// [`MAX_CLUSTER_NEIGHBORS`] strongest.
pub fn extract_cluster(
    graph: &EpisodicGraph,
    hub: NodeId,
    current_step: u64,
    config: &EngineConfig,
) -> Result<BTreeSet<NodeId>, EngineError> {
    if !graph.contains(hub) {
        return Err(EngineError::UnknownNode(hub));
    }
    let mut weighted: Vec<(NodeId, f64)> = Vec::new();
    for neighbor in graph.neighbors(hub) {
        let edge = graph.edge(hub, neighbor).ok_or(EngineError::UnknownNode(neighbor))?;
        let weight = edge.effective_weight(current_step, config.lambda_retention)?;
        if weight >= config.eta {
            weighted.push((neighbor, weight));
        }
    }
    weighted.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).expect("weights are finite").then(a.0.cmp(&b.0))
    });
    let mut cluster: BTreeSet<NodeId> = weighted
        .into_iter()
        .take(MAX_CLUSTER_NEIGHBORS)
        .map(|(id, _)| id)
        .collect();
    cluster.insert(hub);
    Ok(cluster)
}

/// Render cluster turns for the `{conversation}` placeholder, chronologically.
pub fn render_cluster(nodes: &[&MemoryNode]) -> String {
    let mut ordered: Vec<&&MemoryNode> = nodes.iter().collect();
    ordered.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.id.cmp(&b.id)));
    ordered
        .iter()
        .map(|n| format!("[{}] {}: {}", format_human_date(n.timestamp), n.speaker, n.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Send a cluster through the extraction prompt and parse the response into
/// categorized statements. Backend failure propagates so the caller can
/// leave the hub eligible for the next cycle.
pub fn distill(
    cluster_nodes: &[&MemoryNode],
    chat: &dyn ChatBackend,
) -> Result<Vec<DistilledStatement>, BackendError> {
    let conversation = render_cluster(cluster_nodes);
    let user_prompt = prompts::render_extraction_prompt(&conversation);
    let response = chat.chat(prompts::EXTRACTION_SYSTEM, &user_prompt)?;
    Ok(parse_extraction_response(&response))
}

/// Line-oriented parser for distillation responses. Section headers switch
/// the active category; bullets starting with `-` or `*` become statements.
/// Bullets outside any recognized section are dropped.
pub fn parse_extraction_response(response: &str) -> Vec<DistilledStatement> {
    let mut current: Option<SemanticCategory> = None;
    let mut out = Vec::new();
    let mut dropped = 0usize;
    for line in response.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let upper = trimmed.to_uppercase();
        if upper.contains("USER CHARACTERISTICS") {
            current = Some(SemanticCategory::UserModel);
            continue;
        }
        if upper.contains("FACTUAL INFORMATION") {
            current = Some(SemanticCategory::Factual);
            continue;
        }
        if upper.contains("AGENT KNOWLEDGE") {
            current = Some(SemanticCategory::AgentKnowledge);
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('-').or_else(|| trimmed.strip_prefix('*')) {
            let statement = rest.trim();
            if statement.is_empty() {
                continue;
            }
            match current {
                Some(category) => out.push(DistilledStatement {
                    category,
                    statement: statement.to_string(),
                }),
                None => dropped += 1,
            }
        }
    }
    if dropped > 0 {
        log::warn!("distillation response had {dropped} bullet(s) outside any section; dropped");
    }
    out
}
