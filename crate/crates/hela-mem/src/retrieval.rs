//! Dual-path retrieval scoring: base activation from embedding similarity,
//! keyword overlap, and temporal decay; one-hop spreading activation along
//! Hebbian edges; and the base/flip ranking that merges the two paths.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::error::EngineError;
use crate::graph::{days_between, EpisodicGraph};
use crate::semantic::SemanticStore;
use crate::types::{MemoryNode, NodeId, RecordId, SemanticCategory};

/// Which ranking path admitted an episodic result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathTag {
    Base,
    Flip,
}

/// One episodic result with its score breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredNode {
    pub node_id: NodeId,
    pub base_score: f64,
    pub augmented_score: f64,
    pub path: PathTag,
}

/// One semantic result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticHit {
    pub record_id: RecordId,
    pub similarity: f64,
}

/// Full output of a retrieval event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub episodic: Vec<ScoredNode>,
    pub semantic: Vec<SemanticHit>,
    pub context_token_count: usize,
    pub query_text: String,
    pub query_embedding: Vec<f64>,
}

/// Query-side inputs to base scoring.
#[derive(Debug, Clone)]
pub struct Query {
    pub embedding: Vec<f64>,
    pub keywords: BTreeSet<String>,
    pub time: DateTime<Utc>,
}

/// Dot product of two unit vectors.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, EngineError> {
    if a.len() != b.len() {
        return Err(EngineError::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// Fraction of query keywords present in the node's keywords; 0 when the
/// query has none.
pub fn keyword_match(query_keywords: &BTreeSet<String>, node_keywords: &BTreeSet<String>) -> f64 {
    if query_keywords.is_empty() {
        return 0.0;
    }
    let shared = query_keywords.intersection(node_keywords).count();
    shared as f64 / query_keywords.len() as f64
}

/// Exponential recency factor `exp(-delta_days / tau_days)`.
pub fn temporal_decay(delta_days: f64, tau_days: f64) -> f64 {
    (-delta_days / tau_days).exp()
}

/// Base activation: `(sim + alpha * keyword_match) * exp(-dt/tau)`.
/// Negative similarities pass through unclamped; future-dated nodes clamp
/// the elapsed time to zero.
pub fn base_score(
    query: &Query,
    node: &MemoryNode,
    config: &EngineConfig,
) -> Result<f64, EngineError> {
    let sim = cosine_similarity(&query.embedding, &node.embedding)?;
    let kw = keyword_match(&query.keywords, &node.keywords);
    let delta_days = days_between(node.timestamp, query.time);
    Ok((sim + config.alpha_keyword * kw) * temporal_decay(delta_days, config.tau_days))
}

/// One-hop spreading activation. Every node whose base score reaches the
/// spreading threshold propagates `beta * score * effective_weight` to each
/// neighbor. Returns the augmented map; the graph is not mutated.
pub fn spread(
    base_scores: &BTreeMap<NodeId, f64>,
    graph: &EpisodicGraph,
    current_step: u64,
    config: &EngineConfig,
) -> Result<BTreeMap<NodeId, f64>, EngineError> {
    let mut augmented = base_scores.clone();
    for edge in graph.edges() {
        let (a, b) = edge.key.nodes();
        let score_a = *base_scores.get(&a).ok_or(EngineError::UnknownNode(a))?;
        let score_b = *base_scores.get(&b).ok_or(EngineError::UnknownNode(b))?;
        let weight = edge.effective_weight(current_step, config.lambda_retention)?;
        if score_a >= config.theta_spread {
            *augmented.get_mut(&b).expect("cloned from base") += config.beta * score_a * weight;
        }
        if score_b >= config.theta_spread {
            *augmented.get_mut(&a).expect("cloned from base") += config.beta * score_b * weight;
        }
    }
    Ok(augmented)
}

/// Merge the two ranked lists. The base path is the top-k by base score; the
/// flip path promotes up to `m_flip` further nodes that spreading actually
/// boosted, ranked by augmented score. Ties break toward the lower node id.
pub fn dual_path_rank(
    base_scores: &BTreeMap<NodeId, f64>,
    augmented_scores: &BTreeMap<NodeId, f64>,
    config: &EngineConfig,
) -> Vec<ScoredNode> {
    let mut by_base: Vec<(NodeId, f64)> = base_scores.iter().map(|(&id, &s)| (id, s)).collect();
    by_base.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).expect("scores are finite").then(a.0.cmp(&b.0))
    });

    let mut result: Vec<ScoredNode> = Vec::new();
    let mut base_ids: BTreeSet<NodeId> = BTreeSet::new();
    for &(id, score) in by_base.iter().take(config.k_episodic) {
        base_ids.insert(id);
        result.push(ScoredNode {
            node_id: id,
            base_score: score,
            augmented_score: *augmented_scores.get(&id).unwrap_or(&score),
            path: PathTag::Base,
        });
    }

    // Only nodes that received a positive spreading boost are promotable;
    // with spreading off (or beta = 0) the flip path is therefore empty and
    // the output reduces to the pure base top-k.
    let mut flips: Vec<(NodeId, f64, f64)> = augmented_scores
        .iter()
        .filter(|(id, _)| !base_ids.contains(id))
        .filter_map(|(&id, &aug)| {
            let base = *base_scores.get(&id)?;
            (aug > base).then_some((id, base, aug))
        })
        .collect();
    flips.sort_by(|a, b| {
        b.2.partial_cmp(&a.2).expect("scores are finite").then(a.0.cmp(&b.0))
    });
    for &(id, base, aug) in flips.iter().take(config.m_flip) {
        result.push(ScoredNode {
            node_id: id,
            base_score: base,
            augmented_score: aug,
            path: PathTag::Flip,
        });
    }
    result
}

/// Top-k semantic records by cosine similarity to the query embedding.
pub fn retrieve_semantic(
    store: &SemanticStore,
    query_embedding: &[f64],
    config: &EngineConfig,
) -> Result<Vec<SemanticHit>, EngineError> {
    let mut scored: Vec<SemanticHit> = Vec::with_capacity(store.len());
    for record in store.records() {
        let similarity = cosine_similarity(query_embedding, &record.embedding)?;
        scored.push(SemanticHit { record_id: record.id, similarity });
    }
    scored.sort_by(|a, b| {
        b.similarity
            .partial_cmp(&a.similarity)
            .expect("scores are finite")
            .then(a.record_id.cmp(&b.record_id))
    });
    scored.truncate(config.k_semantic);
    Ok(scored)
}

/// Context blocks assembled from one retrieval result, ready for prompt
/// placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSections {
    pub episodic: String,
    pub semantic_knowledge: String,
    pub user_model: String,
}

impl ContextSections {
    /// Whitespace token count across all three blocks.
    pub fn token_count(&self) -> usize {
        crate::eval::count_tokens(&self.episodic)
            + crate::eval::count_tokens(&self.semantic_knowledge)
            + crate::eval::count_tokens(&self.user_model)
    }
}

/// Human date like "15 July 2023".
pub fn format_human_date(t: DateTime<Utc>) -> String {
    const MONTHS: [&str; 12] = [
        "January", "February", "March", "April", "May", "June", "July", "August",
        "September", "October", "November", "December",
    ];
    format!("{} {} {}", t.day(), MONTHS[t.month0() as usize], t.year())
}

/// Render retrieved memories into prompt sections. Episodic turns appear in
/// chronological order with their timestamps; semantic records split into
/// the user-model block and everything else.
pub fn render_context_sections(
    graph: &EpisodicGraph,
    store: &SemanticStore,
    episodic: &[ScoredNode],
    semantic: &[SemanticHit],
) -> ContextSections {
    let mut turns: Vec<&MemoryNode> = episodic
        .iter()
        .filter_map(|s| graph.node(s.node_id))
        .collect();
    turns.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.id.cmp(&b.id)));
    let episodic_text = turns
        .iter()
        .map(|n| format!("[{}] {}: {}", format_human_date(n.timestamp), n.speaker, n.text))
        .collect::<Vec<_>>()
        .join("\n");

    let mut knowledge = Vec::new();
    let mut user_model = Vec::new();
    for hit in semantic {
        if let Some(record) = store.record(hit.record_id) {
            let line = format!("- {}", record.statement);
            match record.category {
                SemanticCategory::UserModel => user_model.push(line),
                SemanticCategory::Factual | SemanticCategory::AgentKnowledge => {
                    knowledge.push(line)
                }
            }
        }
    }
    ContextSections {
        episodic: episodic_text,
        semantic_knowledge: knowledge.join("\n"),
        user_model: user_model.join("\n"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{EdgeKey, HebbianEdge, Speaker};
    use chrono::TimeZone;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2023, 7, 15, 10, 0, 0).unwrap()
    }

    fn node_with(id: u64, embedding: Vec<f64>, keywords: &[&str], ts: DateTime<Utc>) -> MemoryNode {
        MemoryNode {
            id: NodeId(id),
            text: format!("turn {id}"),
            embedding,
            timestamp: ts,
            keywords: keywords.iter().map(|s| s.to_string()).collect(),
            speaker: Speaker::User,
            last_access_time: None,
            access_count: 0,
            created_step: 0,
        }
    }

    fn keyword_set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cosine_of_identical_unit_vectors_is_one() {
        let v = vec![0.6, 0.8];
        assert!((cosine_similarity(&v, &v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_of_orthogonal_vectors_is_zero() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn cosine_of_antipodal_vectors_is_minus_one() {
        let v = vec![0.6, 0.8];
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!((cosine_similarity(&v, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_rejects_dimension_mismatch() {
        assert!(cosine_similarity(&[1.0, 0.0], &[1.0]).is_err());
    }

    #[test]
    fn keyword_match_examples() {
        assert_eq!(
            keyword_match(&keyword_set(&["a", "b"]), &keyword_set(&["b", "c"])),
            0.5
        );
        assert_eq!(
            keyword_match(&keyword_set(&["a", "b"]), &keyword_set(&["c", "d"])),
            0.0
        );
        assert_eq!(
            keyword_match(&keyword_set(&["a", "b"]), &keyword_set(&["a", "b", "c"])),
            1.0
        );
        assert_eq!(keyword_match(&keyword_set(&[]), &keyword_set(&["a"])), 0.0);
    }

    #[test]
    fn base_score_examples() {
        let cfg = EngineConfig::default();

        // Perfect similarity, no keywords, no elapsed time.
        let node = node_with(0, vec![1.0, 0.0], &[], t0());
        let query = Query { embedding: vec![1.0, 0.0], keywords: BTreeSet::new(), time: t0() };
        assert!((base_score(&query, &node, &cfg).unwrap() - 1.0).abs() < 1e-12);

        // sim 0.5 + alpha * full keyword match.
        let node = node_with(0, vec![0.5, (1.0f64 - 0.25).sqrt()], &["adoption"], t0());
        let query = Query {
            embedding: vec![1.0, 0.0],
            keywords: keyword_set(&["adoption"]),
            time: t0(),
        };
        assert!((base_score(&query, &node, &cfg).unwrap() - 1.2).abs() < 1e-12);

        // 60 days of decay at tau = 60 gives e^-1.
        let node = node_with(0, vec![1.0, 0.0], &[], t0());
        let query = Query {
            embedding: vec![1.0, 0.0],
            keywords: BTreeSet::new(),
            time: t0() + chrono::Duration::days(60),
        };
        let expected = (-1.0f64).exp();
        assert!((base_score(&query, &node, &cfg).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn base_score_clamps_future_nodes_and_keeps_negative_sims() {
        let cfg = EngineConfig::default();
        let node = node_with(0, vec![-1.0, 0.0], &[], t0() + chrono::Duration::days(5));
        let query = Query { embedding: vec![1.0, 0.0], keywords: BTreeSet::new(), time: t0() };
        // Future-dated node: dt clamps to 0, so the score is exactly sim.
        assert_eq!(base_score(&query, &node, &cfg).unwrap(), -1.0);
    }

    #[test]
    fn temporal_decay_at_tau_is_e_inverse() {
        assert!((temporal_decay(60.0, 60.0) - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(temporal_decay(0.0, 60.0), 1.0);
    }

    fn two_node_graph(edge_weight: f64) -> EpisodicGraph {
        let mut g = EpisodicGraph::new();
        g.insert_node(node_with(1, vec![1.0, 0.0], &[], t0())).unwrap();
        g.insert_node(node_with(2, vec![0.0, 1.0], &[], t0())).unwrap();
        g.insert_edge(HebbianEdge {
            key: EdgeKey::new(NodeId(1), NodeId(2)).unwrap(),
            weight: edge_weight,
            last_update_step: 0,
            co_activation_count: 0,
        })
        .unwrap();
        g
    }

    #[test]
    fn spread_with_zero_beta_is_identity() {
        let cfg = EngineConfig { beta: 0.0, ..EngineConfig::default() };
        let g = two_node_graph(0.52);
        let base: BTreeMap<NodeId, f64> =
            [(NodeId(1), 0.82), (NodeId(2), 0.35)].into_iter().collect();
        assert_eq!(spread(&base, &g, 0, &cfg).unwrap(), base);
    }

    #[test]
    fn spread_on_edgeless_graph_is_identity() {
        let cfg = EngineConfig::default();
        let mut g = EpisodicGraph::new();
        g.insert_node(node_with(1, vec![1.0, 0.0], &[], t0())).unwrap();
        g.insert_node(node_with(2, vec![0.0, 1.0], &[], t0())).unwrap();
        let base: BTreeMap<NodeId, f64> =
            [(NodeId(1), 0.9), (NodeId(2), 0.1)].into_iter().collect();
        assert_eq!(spread(&base, &g, 0, &cfg).unwrap(), base);
    }

    #[test]
    fn spread_two_node_case() {
        let cfg = EngineConfig::default();
        let g = two_node_graph(0.52);
        let base: BTreeMap<NodeId, f64> =
            [(NodeId(1), 0.82), (NodeId(2), 0.35)].into_iter().collect();
        let out = spread(&base, &g, 0, &cfg).unwrap();
        // Node 1 is above theta and propagates along the 0.52 edge.
        assert!((out[&NodeId(2)] - 0.39264).abs() < 1e-9);
        // Node 2 is below theta and propagates nothing.
        assert_eq!(out[&NodeId(1)], 0.82);
    }

    #[test]
    fn spread_applies_lazy_decay_to_edge_weights() {
        let cfg = EngineConfig::default();
        let g = two_node_graph(0.52);
        let base: BTreeMap<NodeId, f64> =
            [(NodeId(1), 0.82), (NodeId(2), 0.35)].into_iter().collect();
        let out = spread(&base, &g, 10, &cfg).unwrap();
        let expected = 0.35 + 0.1 * 0.82 * (0.52 * 0.995f64.powi(10));
        assert!((out[&NodeId(2)] - expected).abs() < 1e-12);
    }

    #[test]
    fn dual_path_zero_flips_is_pure_base_top_k() {
        let cfg = EngineConfig { k_episodic: 2, m_flip: 0, ..EngineConfig::default() };
        let base: BTreeMap<NodeId, f64> =
            [(NodeId(1), 0.9), (NodeId(2), 0.5), (NodeId(3), 0.1)].into_iter().collect();
        let mut aug = base.clone();
        *aug.get_mut(&NodeId(3)).unwrap() = 2.0;
        let out = dual_path_rank(&base, &aug, &cfg);
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|s| s.path == PathTag::Base));
        assert_eq!(out[0].node_id, NodeId(1));
        assert_eq!(out[1].node_id, NodeId(2));
    }

    #[test]
    fn dual_path_saturates_on_small_graphs() {
        let cfg = EngineConfig { k_episodic: 10, m_flip: 3, ..EngineConfig::default() };
        let base: BTreeMap<NodeId, f64> =
            [(NodeId(1), 0.9), (NodeId(2), 0.5)].into_iter().collect();
        let out = dual_path_rank(&base, &base.clone(), &cfg);
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|s| s.path == PathTag::Base));
    }

    #[test]
    fn dual_path_flip_requires_positive_boost() {
        let cfg = EngineConfig { k_episodic: 1, m_flip: 2, ..EngineConfig::default() };
        let base: BTreeMap<NodeId, f64> =
            [(NodeId(1), 0.9), (NodeId(2), 0.5), (NodeId(3), 0.3)].into_iter().collect();
        let mut aug = base.clone();
        *aug.get_mut(&NodeId(3)).unwrap() = 0.34; // boosted but still below node 2
        let out = dual_path_rank(&base, &aug, &cfg);
        // Node 2 got no boost so it cannot flip in; node 3 did.
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].node_id, NodeId(1));
        assert_eq!(out[1].node_id, NodeId(3));
        assert_eq!(out[1].path, PathTag::Flip);
    }

    #[test]
    fn dual_path_ties_break_on_lower_id() {
        let cfg = EngineConfig { k_episodic: 1, m_flip: 0, ..EngineConfig::default() };
        let base: BTreeMap<NodeId, f64> =
            [(NodeId(5), 0.5), (NodeId(2), 0.5)].into_iter().collect();
        let out = dual_path_rank(&base, &base.clone(), &cfg);
        assert_eq!(out[0].node_id, NodeId(2));
    }

    #[test]
    fn semantic_retrieval_is_sorted_and_truncated() {
        use crate::backends::{EmbeddingBackend, StubEmbedding};
        let cfg = EngineConfig::default();
        let mut store = SemanticStore::new();
        let stub = StubEmbedding::new(8, 3);
        let now = t0();
        for i in 0..10 {
            let emb =
                crate::types::normalize_embedding(&stub.embed(&format!("statement {i}")).unwrap())
                    .unwrap();
            store
                .insert(
                    SemanticCategory::Factual,
                    format!("statement {i}"),
                    1.0,
                    vec![NodeId(0)],
                    emb,
                    now,
                    NodeId(0),
                )
                .unwrap();
        }
        let query =
            crate::types::normalize_embedding(&stub.embed("statement 4").unwrap()).unwrap();
        let hits = retrieve_semantic(&store, &query, &cfg).unwrap();
        assert_eq!(hits.len(), 5);
        for pair in hits.windows(2) {
            assert!(pair[0].similarity >= pair[1].similarity);
        }
        assert_eq!(hits[0].record_id, RecordId(4));
    }

    #[test]
    fn semantic_retrieval_empty_store() {
        let cfg = EngineConfig::default();
        let store = SemanticStore::new();
        assert!(retrieve_semantic(&store, &[1.0, 0.0], &cfg).unwrap().is_empty());
    }

    #[test]
    fn human_date_format() {
        assert_eq!(format_human_date(t0()), "15 July 2023");
        let d = Utc.with_ymd_and_hms(2023, 5, 8, 0, 0, 0).unwrap();
        assert_eq!(format_human_date(d), "8 May 2023");
    }
}
