//! Domain types: nodes, edges, semantic records, turns, and QA items.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::EngineError;

/// Identifier of an episodic memory node.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Identifier of a semantic record.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct RecordId(pub u64);

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Who produced a conversation turn.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Agent,
    Named(String),
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speaker::User => write!(f, "user"),
            Speaker::Agent => write!(f, "agent"),
            Speaker::Named(name) => write!(f, "{name}"),
        }
    }
}

/// One conversation turn stored in the episodic graph.
///
/// The embedding is always unit-norm; insertion enforces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryNode {
    pub id: NodeId,
    pub text: String,
    pub embedding: Vec<f64>,
    pub timestamp: DateTime<Utc>,
    pub keywords: BTreeSet<String>,
    pub speaker: Speaker,
    /// Set the first time the node appears in a retrieval result.
    pub last_access_time: Option<DateTime<Utc>>,
    pub access_count: u64,
    /// Global step at creation time.
    pub created_step: u64,
}

/// Unordered node pair keying one edge. The constructor keeps the smaller id
/// first so each pair has a single canonical key.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct EdgeKey {
    lo: NodeId,
    hi: NodeId,
}

impl EdgeKey {
    pub fn new(a: NodeId, b: NodeId) -> Result<Self, EngineError> {
        if a == b {
            return Err(EngineError::SelfLoop(a));
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        Ok(EdgeKey { lo, hi })
    }

    pub fn nodes(&self) -> (NodeId, NodeId) {
        (self.lo, self.hi)
    }

    pub fn other(&self, id: NodeId) -> Option<NodeId> {
        if id == self.lo {
            Some(self.hi)
        } else if id == self.hi {
            Some(self.lo)
        } else {
            None
        }
    }
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}--{}", self.lo, self.hi)
    }
}

/// Weighted undirected association between two nodes.
///
/// `weight` is the value as of `last_update_step`; decay between updates is
/// materialized lazily by [`HebbianEdge::effective_weight`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HebbianEdge {
    pub key: EdgeKey,
    pub weight: f64,
    pub last_update_step: u64,
    pub co_activation_count: u64,
}

impl HebbianEdge {
    /// Weight at `current_step` under geometric retention decay:
    /// `weight * retention^(current_step - last_update_step)`.
    pub fn effective_weight(
        &self,
        current_step: u64,
        retention: f64,
    ) -> Result<f64, EngineError> {
        if current_step < self.last_update_step {
            return Err(EngineError::StepRegression {
                last_update_step: self.last_update_step,
                current_step,
            });
        }
        let elapsed = current_step - self.last_update_step;
        Ok(self.weight * retention.powi(elapsed as i32))
    }
}

/// Category of distilled semantic knowledge.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum SemanticCategory {
    UserModel,
    Factual,
    AgentKnowledge,
}

impl fmt::Display for SemanticCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemanticCategory::UserModel => write!(f, "user_model"),
            SemanticCategory::Factual => write!(f, "factual"),
            SemanticCategory::AgentKnowledge => write!(f, "agent_knowledge"),
        }
    }
}

/// A distilled declarative statement with evidence links back to the
/// episodic nodes it was extracted from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticRecord {
    pub id: RecordId,
    pub category: SemanticCategory,
    pub statement: String,
    pub confidence: f64,
    pub evidence: Vec<NodeId>,
    /// Evidence ids whose episodic nodes have since been forgotten. The ids
    /// are kept for traceability rather than deleted.
    pub stale_evidence: BTreeSet<NodeId>,
    pub embedding: Vec<f64>,
    pub created_at: DateTime<Utc>,
    pub source_hub: NodeId,
}

/// Input turn for ingestion and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationTurn {
    pub session_id: String,
    pub turn_id: String,
    pub speaker: Speaker,
    pub text: String,
    pub timestamp: DateTime<Utc>,
}

/// Question category in the evaluation set.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum QaCategory {
    SingleHop,
    MultiHop,
    Temporal,
    OpenDomain,
    Adversarial,
}

impl fmt::Display for QaCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QaCategory::SingleHop => write!(f, "single_hop"),
            QaCategory::MultiHop => write!(f, "multi_hop"),
            QaCategory::Temporal => write!(f, "temporal"),
            QaCategory::OpenDomain => write!(f, "open_domain"),
            QaCategory::Adversarial => write!(f, "adversarial"),
        }
    }
}

/// One question/answer pair from the evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaItem {
    pub question: String,
    pub answer: String,
    pub category: QaCategory,
    pub evidence: Vec<String>,
}

/// Normalize a vector to unit L2 norm. Rejects zero and non-finite input.
pub fn normalize_embedding(v: &[f64]) -> Result<Vec<f64>, EngineError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(EngineError::NonFiniteEmbedding);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(EngineError::ZeroNormEmbedding);
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// L2 norm of a vector.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
