//! The semantic memory store: distilled declarative records that persist
//! independently of the episodic graph.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};

use crate::error::EngineError;
use crate::types::{l2_norm, NodeId, RecordId, SemanticCategory, SemanticRecord};

#[derive(Debug, Clone, Default)]
pub struct SemanticStore {
    records: BTreeMap<RecordId, SemanticRecord>,
    next_record_id: u64,
    embedding_dim: Option<usize>,
}

impl SemanticStore {
    pub fn new() -> Self {
        SemanticStore::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, id: RecordId) -> Option<&SemanticRecord> {
        self.records.get(&id)
    }

    pub fn records(&self) -> impl Iterator<Item = &SemanticRecord> {
        self.records.values()
    }

    pub fn next_record_id(&self) -> u64 {
        self.next_record_id
    }

    pub(crate) fn set_next_record_id(&mut self, next: u64) {
        self.next_record_id = next;
    }

    /// Append a new record, allocating its id. Evidence must be non-empty and
    /// the embedding unit-norm; confidence is clamped to [0,1] validation,
    /// not silently adjusted.
    #[allow(clippy::too_many_arguments)]
    pub fn insert(
        &mut self,
        category: SemanticCategory,
        statement: String,
        confidence: f64,
        evidence: Vec<NodeId>,
        embedding: Vec<f64>,
        created_at: DateTime<Utc>,
        source_hub: NodeId,
    ) -> Result<RecordId, EngineError> {
        let id = RecordId(self.next_record_id);
        let record = SemanticRecord {
            id,
            category,
            statement,
            confidence,
            evidence,
            stale_evidence: BTreeSet::new(),
            embedding,
            created_at,
            source_hub,
        };
        self.insert_record(record)?;
        Ok(id)
    }

    /// Insert a fully-built record (also the snapshot-load path).
    pub fn insert_record(&mut self, record: SemanticRecord) -> Result<(), EngineError> {
        if record.evidence.is_empty() {
            return Err(EngineError::EmptyText);
        }
        if !(0.0..=1.0).contains(&record.confidence) {
            return Err(EngineError::NonFiniteEmbedding);
        }
        if let Some(dim) = self.embedding_dim {
            if record.embedding.len() != dim {
                return Err(EngineError::DimensionMismatch {
                    expected: dim,
                    actual: record.embedding.len(),
                });
            }
        }
        if (l2_norm(&record.embedding) - 1.0).abs() > 1e-6 {
            return Err(EngineError::ZeroNormEmbedding);
        }
        if self.records.contains_key(&record.id) {
            return Err(EngineError::DuplicateNode(NodeId(record.id.0)));
        }
        self.embedding_dim.get_or_insert(record.embedding.len());
        self.next_record_id = self.next_record_id.max(record.id.0 + 1);
        self.records.insert(record.id, record);
        Ok(())
    }

    /// Mark evidence ids as stale on every record referencing them. The ids
    /// stay in the evidence list for traceability. Returns how many records
    /// were touched.
    pub fn mark_stale(&mut self, removed: &BTreeSet<NodeId>) -> usize {
        let mut touched = 0;
        for record in self.records.values_mut() {
            let newly: Vec<NodeId> = record
                .evidence
                .iter()
                .filter(|id| removed.contains(id) && !record.stale_evidence.contains(id))
                .copied()
                .collect();
            if !newly.is_empty() {
                record.stale_evidence.extend(newly);
                touched += 1;
            }
        }
        touched
    }
}
