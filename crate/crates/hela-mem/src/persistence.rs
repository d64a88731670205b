//! Snapshot persistence: the full engine state as one self-describing JSON
//! document, written atomically (temp file + rename). Loading re-validates
//! every structural invariant rather than trusting the file.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::consolidation::ConsolidationEvent;
use crate::engine::MemoryEngine;
use crate::error::SnapshotError;
use crate::graph::EpisodicGraph;
use crate::semantic::SemanticStore;
use crate::types::{HebbianEdge, MemoryNode, NodeId, SemanticRecord};

/// Format tag written into every snapshot.
pub const SNAPSHOT_FORMAT: &str = "hela-mem/1";

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotDoc {
    format: String,
    config: EngineConfig,
    step: u64,
    next_node_id: u64,
    last_node_id: Option<NodeId>,
    last_session_id: Option<String>,
    nodes: Vec<MemoryNode>,
    edges: Vec<HebbianEdge>,
    next_record_id: u64,
    records: Vec<SemanticRecord>,
    events: Vec<ConsolidationEvent>,
    hub_cooldowns: Vec<(NodeId, u64)>,
}

/// Serialize the engine to `path`. The write goes to a temp file in the same
/// directory and is renamed into place, so a failure never leaves a partial
/// snapshot behind.
pub fn save_snapshot(engine: &MemoryEngine, path: &Path) -> Result<(), SnapshotError> {
    let graph = engine.graph();
    let doc = SnapshotDoc {
        format: SNAPSHOT_FORMAT.to_string(),
        config: engine.config().clone(),
        step: graph.step(),
        next_node_id: graph.peek_next_id().0,
        last_node_id: graph.last_node_id(),
        last_session_id: graph.last_session_id().map(String::from),
        nodes: graph.nodes().cloned().collect(),
        edges: graph.edges().cloned().collect(),
        next_record_id: engine.semantic().next_record_id(),
        records: engine.semantic().records().cloned().collect(),
        events: engine.events().to_vec(),
        hub_cooldowns: engine
            .hub_cooldowns()
            .iter()
            .map(|(&id, &until)| (id, until))
            .collect(),
    };

    let io_err = |source: std::io::Error| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    };
    let bytes = serde_json::to_vec_pretty(&doc).map_err(|source| SnapshotError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(&bytes).map_err(io_err)?;
    tmp.write_all(b"\n").map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Read and validate a snapshot, reconstructing the engine.
pub fn load_snapshot(path: &Path) -> Result<MemoryEngine, SnapshotError> {
    let bytes = std::fs::read(path).map_err(|source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let doc: SnapshotDoc =
        serde_json::from_slice(&bytes).map_err(|source| SnapshotError::Parse {
            path: path.to_path_buf(),
            source,
        })?;

    if doc.format != SNAPSHOT_FORMAT {
        return Err(SnapshotError::UnsupportedVersion {
            found: doc.format,
            expected: SNAPSHOT_FORMAT.to_string(),
        });
    }
    doc.config
        .validate()
        .map_err(|e| SnapshotError::Invariant(e.to_string()))?;

    let mut graph = EpisodicGraph::new();
    graph.set_step(doc.step);
    for node in doc.nodes {
        if node.id.0 >= doc.next_node_id {
            return Err(SnapshotError::Invariant(format!(
                "node {} is not below next_node_id {}",
                node.id, doc.next_node_id
            )));
        }
        if node.created_step > doc.step {
            return Err(SnapshotError::Invariant(format!(
                "node {} created at step {} after global step {}",
                node.id, node.created_step, doc.step
            )));
        }
        let id = node.id;
        graph
            .insert_node(node)
            .map_err(|e| SnapshotError::Invariant(format!("node {id}: {e}")))?;
    }
    for edge in doc.edges {
        let key = edge.key;
        if edge.last_update_step > doc.step {
            return Err(SnapshotError::Invariant(format!(
                "edge {key} updated at step {} after global step {}",
                edge.last_update_step, doc.step
            )));
        }
        if !edge.weight.is_finite() || edge.weight < 0.0 {
            return Err(SnapshotError::Invariant(format!(
                "edge {key} has invalid weight {}",
                edge.weight
            )));
        }
        graph
            .insert_edge(edge)
            .map_err(|e| SnapshotError::Invariant(format!("edge {key}: {e}")))?;
    }
    if let Some(last) = doc.last_node_id {
        if !graph.contains(last) {
            return Err(SnapshotError::Invariant(format!(
                "last_node_id {last} is not in the graph"
            )));
        }
    }
    graph.set_next_node_id(doc.next_node_id);
    graph.restore_chain(doc.last_node_id, doc.last_session_id);

    let mut semantic = SemanticStore::new();
    for record in doc.records {
        if record.id.0 >= doc.next_record_id {
            return Err(SnapshotError::Invariant(format!(
                "record {} is not below next_record_id {}",
                record.id, doc.next_record_id
            )));
        }
        if let Some(dim) = graph.embedding_dim() {
            if record.embedding.len() != dim {
                return Err(SnapshotError::Invariant(format!(
                    "record {} embedding dimension {} does not match graph dimension {dim}",
                    record.id,
                    record.embedding.len()
                )));
            }
        }
        let id = record.id;
        semantic
            .insert_record(record)
            .map_err(|e| SnapshotError::Invariant(format!("record {id}: {e}")))?;
    }
    semantic.set_next_record_id(doc.next_record_id);

    for event in &doc.events {
        if !event.cluster.contains(&event.hub) {
            return Err(SnapshotError::Invariant(format!(
                "consolidation event at step {} has a cluster missing its hub {}",
                event.step, event.hub
            )));
        }
    }
    let hub_cooldowns: BTreeMap<NodeId, u64> = doc.hub_cooldowns.into_iter().collect();

    MemoryEngine::from_parts(doc.config, graph, semantic, doc.events, hub_cooldowns)
        .map_err(|e| SnapshotError::Invariant(e.to_string()))
}

/// Convenience used by invariant tests: ids referenced by edges but absent
/// from the node set make adjacency inconsistent.
pub fn edge_endpoints(edges: &[HebbianEdge]) -> BTreeSet<NodeId> {
    edges
        .iter()
        .flat_map(|e| {
            let (a, b) = e.key.nodes();
            [a, b]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::StubEmbedding;
    use crate::types::{ConversationTurn, Speaker};
    use chrono::{TimeZone, Utc};

    fn t0() -> chrono::DateTime<Utc> {
        Utc.with_ymd_and_hms(2023, 5, 8, 13, 0, 0).unwrap()
    }

    fn build_engine() -> MemoryEngine {
        let mut engine = MemoryEngine::new(EngineConfig::default()).unwrap();
        let embedder = StubEmbedding::new(16, 5);
        for (i, text) in ["alpha beta", "beta gamma", "gamma delta"].iter().enumerate() {
            engine
                .ingest(
                    &ConversationTurn {
                        session_id: "s1".into(),
                        turn_id: format!("s1:{i}"),
                        speaker: Speaker::User,
                        text: text.to_string(),
                        timestamp: t0(),
                    },
                    &embedder,
                )
                .unwrap();
        }
        engine.retrieve("beta", t0(), &embedder).unwrap();
        engine
    }

    #[test]
    fn round_trip_preserves_state_and_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.json");
        let engine = build_engine();
        save_snapshot(&engine, &path).unwrap();
        let first = std::fs::read(&path).unwrap();

        let loaded = load_snapshot(&path).unwrap();
        assert_eq!(loaded.graph().node_count(), engine.graph().node_count());
        assert_eq!(loaded.graph().edge_count(), engine.graph().edge_count());
        assert_eq!(loaded.graph().step(), engine.graph().step());
        assert_eq!(loaded.config(), engine.config());
        let nodes_a: Vec<_> = engine.graph().nodes().cloned().collect();
        let nodes_b: Vec<_> = loaded.graph().nodes().cloned().collect();
        assert_eq!(nodes_a, nodes_b);

        let path2 = dir.path().join("snap2.json");
        save_snapshot(&loaded, &path2).unwrap();
        let second = std::fs::read(&path2).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn save_replaces_existing_file_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.json");
        std::fs::write(&path, b"old contents").unwrap();
        let engine = build_engine();
        save_snapshot(&engine, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains(SNAPSHOT_FORMAT));
    }

    #[test]
    fn unwritable_directory_errors_without_partial_file() {
        let engine = build_engine();
        let missing = Path::new("/nonexistent-dir-for-sure/snap.json");
        assert!(matches!(
            save_snapshot(&engine, missing),
            Err(SnapshotError::Io { .. })
        ));
        assert!(!missing.exists());
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.json");
        let engine = build_engine();
        save_snapshot(&engine, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_snapshot(&path), Err(SnapshotError::Parse { .. })));
    }

    #[test]
    fn wrong_format_tag_is_an_explicit_version_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.json");
        let engine = build_engine();
        save_snapshot(&engine, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace(SNAPSHOT_FORMAT, "hela-mem/999")).unwrap();
        assert!(matches!(
            load_snapshot(&path),
            Err(SnapshotError::UnsupportedVersion { .. })
        ));
    }

    #[test]
    fn edge_to_missing_node_is_an_invariant_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.json");
        let engine = build_engine();
        save_snapshot(&engine, &path).unwrap();
        let mut doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        // Point one edge at a node id that does not exist.
        doc["edges"][0]["key"]["hi"] = serde_json::json!(999);
        std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
        assert!(matches!(load_snapshot(&path), Err(SnapshotError::Invariant(_))));
    }

    #[test]
    fn non_unit_embedding_is_rejected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.json");
        let engine = build_engine();
        save_snapshot(&engine, &path).unwrap();
        let mut doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        doc["nodes"][0]["embedding"][0] = serde_json::json!(5.0);
        std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
        assert!(matches!(load_snapshot(&path), Err(SnapshotError::Invariant(_))));
    }
}
