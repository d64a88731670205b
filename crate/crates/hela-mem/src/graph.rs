//! The episodic memory graph and its Hebbian dynamics: reinforcement with
//! lazy geometric decay, associative strength, hub detection, and the
//! three-criterion forgetting filter.
//!
//! Decay is never swept eagerly. Each edge stores its weight as of
//! `last_update_step`; reads materialize `weight * retention^elapsed`, and
//! reinforcement materializes before adding the learning increment. This is
//! exact, not approximate: the geometric factor commutes across steps.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};

use crate::config::EngineConfig;
use crate::error::EngineError;
use crate::types::{EdgeKey, HebbianEdge, MemoryNode, NodeId};

const SECONDS_PER_DAY: f64 = 86_400.0;

/// Fractional days from `earlier` to `later`, clamped at zero.
pub fn days_between(earlier: DateTime<Utc>, later: DateTime<Utc>) -> f64 {
    let ms = (later - earlier).num_milliseconds();
    (ms as f64 / (SECONDS_PER_DAY * 1000.0)).max(0.0)
}

/// Weighted undirected graph of conversation turns.
#[derive(Debug, Clone, Default)]
pub struct EpisodicGraph {
    nodes: BTreeMap<NodeId, MemoryNode>,
    edges: BTreeMap<EdgeKey, HebbianEdge>,
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
    step: u64,
    next_node_id: u64,
    last_node_id: Option<NodeId>,
    last_session_id: Option<String>,
    embedding_dim: Option<usize>,
}

impl EpisodicGraph {
    pub fn new() -> Self {
        EpisodicGraph::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Advance the global step; called once per retrieval event.
    pub fn advance_step(&mut self) -> u64 {
        self.step += 1;
        self.step
    }

    pub fn node(&self, id: NodeId) -> Option<&MemoryNode> {
        self.nodes.get(&id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &MemoryNode> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = &HebbianEdge> {
        self.edges.values()
    }

    pub fn edge(&self, a: NodeId, b: NodeId) -> Option<&HebbianEdge> {
        let key = EdgeKey::new(a, b).ok()?;
        self.edges.get(&key)
    }

    pub fn neighbors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency.get(&id).into_iter().flatten().copied()
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.adjacency.get(&id).map_or(0, BTreeSet::len)
    }

    pub fn embedding_dim(&self) -> Option<usize> {
        self.embedding_dim
    }

    /// Id the next inserted node will receive.
    pub fn peek_next_id(&self) -> NodeId {
        NodeId(self.next_node_id)
    }

    pub fn last_node_id(&self) -> Option<NodeId> {
        self.last_node_id
    }

    pub fn last_session_id(&self) -> Option<&str> {
        self.last_session_id.as_deref()
    }

    pub(crate) fn set_last(&mut self, node: NodeId, session: &str) {
        self.last_node_id = Some(node);
        self.last_session_id = Some(session.to_string());
    }

    pub(crate) fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub(crate) fn set_next_node_id(&mut self, next: u64) {
        self.next_node_id = next;
    }

    pub(crate) fn restore_chain(
        &mut self,
        last_node_id: Option<NodeId>,
        last_session_id: Option<String>,
    ) {
        self.last_node_id = last_node_id;
        self.last_session_id = last_session_id;
    }

    /// Insert a fully-built node. Enforces unique ids, consistent embedding
    /// dimension, and unit norm within 1e-6.
    pub fn insert_node(&mut self, node: MemoryNode) -> Result<(), EngineError> {
        if self.nodes.contains_key(&node.id) {
            return Err(EngineError::DuplicateNode(node.id));
        }
        if node.embedding.iter().any(|x| !x.is_finite()) {
            return Err(EngineError::NonFiniteEmbedding);
        }
        if let Some(dim) = self.embedding_dim {
            if node.embedding.len() != dim {
                return Err(EngineError::DimensionMismatch {
                    expected: dim,
                    actual: node.embedding.len(),
                });
            }
        }
        let norm = crate::types::l2_norm(&node.embedding);
        if (norm - 1.0).abs() > 1e-6 {
            return Err(EngineError::ZeroNormEmbedding);
        }
        self.embedding_dim.get_or_insert(node.embedding.len());
        self.next_node_id = self.next_node_id.max(node.id.0 + 1);
        self.adjacency.entry(node.id).or_default();
        self.nodes.insert(node.id, node);
        Ok(())
    }

    /// Insert an edge between two existing nodes. At most one edge may exist
    /// per unordered pair.
    pub fn insert_edge(&mut self, edge: HebbianEdge) -> Result<(), EngineError> {
        let (a, b) = edge.key.nodes();
        for id in [a, b] {
            if !self.nodes.contains_key(&id) {
                return Err(EngineError::UnknownNode(id));
            }
        }
        if self.edges.contains_key(&edge.key) {
            return Err(EngineError::DuplicateEdge(a, b));
        }
        self.adjacency.entry(a).or_default().insert(b);
        self.adjacency.entry(b).or_default().insert(a);
        self.edges.insert(edge.key, edge);
        Ok(())
    }

    /// Strengthen every pair within the co-activated set by `eta`, after
    /// materializing any pending decay. Missing edges are created at weight
    /// `eta`. Edges outside the pair set are untouched.
    ///
    /// The global step must already have been advanced for this retrieval
    /// event. Returns the number of edges updated or created.
    pub fn reinforce(
        &mut self,
        coactivated: &BTreeSet<NodeId>,
        config: &EngineConfig,
    ) -> Result<usize, EngineError> {
        for id in coactivated {
            if !self.nodes.contains_key(id) {
                return Err(EngineError::UnknownNode(*id));
            }
        }
        let ids: Vec<NodeId> = coactivated.iter().copied().collect();
        let mut updated = 0;
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                let key = EdgeKey::new(a, b)?;
                match self.edges.get_mut(&key) {
                    Some(edge) => {
                        let materialized =
                            edge.effective_weight(self.step, config.lambda_retention)?;
                        edge.weight = materialized + config.eta;
                        edge.last_update_step = self.step;
                        edge.co_activation_count += 1;
                    }
                    None => {
                        self.adjacency.entry(a).or_default().insert(b);
                        self.adjacency.entry(b).or_default().insert(a);
                        self.edges.insert(
                            key,
                            HebbianEdge {
                                key,
                                weight: config.eta,
                                last_update_step: self.step,
                                co_activation_count: 1,
                            },
                        );
                    }
                }
                updated += 1;
            }
        }
        Ok(updated)
    }

    /// Total effective edge weight incident to a node; 0 for isolated nodes.
    pub fn associative_strength(
        &self,
        id: NodeId,
        current_step: u64,
        config: &EngineConfig,
    ) -> Result<f64, EngineError> {
        if !self.nodes.contains_key(&id) {
            return Err(EngineError::UnknownNode(id));
        }
        let mut total = 0.0;
        if let Some(neighbors) = self.adjacency.get(&id) {
            for &other in neighbors {
                let key = EdgeKey::new(id, other)?;
                let edge = self
                    .edges
                    .get(&key)
                    .ok_or(EngineError::UnknownNode(other))?;
                total += edge.effective_weight(current_step, config.lambda_retention)?;
            }
        }
        Ok(total)
    }

    /// Nodes whose associative strength strictly exceeds the hub threshold,
    /// excluding nodes still inside their consolidation cooldown.
    /// `cooldowns` maps a node to the step at which it becomes eligible again.
    pub fn detect_hubs(
        &self,
        current_step: u64,
        config: &EngineConfig,
        cooldowns: &BTreeMap<NodeId, u64>,
    ) -> BTreeSet<NodeId> {
        self.nodes
            .keys()
            .filter(|id| {
                if let Some(&until) = cooldowns.get(id) {
                    if current_step < until {
                        return false;
                    }
                }
                self.associative_strength(**id, current_step, config)
                    .map(|s| s > config.delta_hub)
                    .unwrap_or(false)
            })
            .copied()
            .collect()
    }

    /// Criterion 1 of adaptive forgetting: structural irrelevance.
    pub fn criterion_low_strength(
        &self,
        id: NodeId,
        current_step: u64,
        config: &EngineConfig,
    ) -> Result<bool, EngineError> {
        Ok(self.associative_strength(id, current_step, config)? < config.delta_prune)
    }

    /// Criterion 2 of adaptive forgetting: temporal dormancy. Both the turn
    /// itself and its most recent access must be older than the age threshold.
    pub fn criterion_dormant(
        node: &MemoryNode,
        now: DateTime<Utc>,
        config: &EngineConfig,
    ) -> bool {
        let most_recent = match node.last_access_time {
            Some(t) => t.max(node.timestamp),
            None => node.timestamp,
        };
        days_between(most_recent, now) > config.delta_age_days
    }

    /// Criterion 3 of adaptive forgetting: zero recent access — never
    /// accessed, or last accessed longer ago than the age threshold.
    pub fn criterion_no_recent_access(
        node: &MemoryNode,
        now: DateTime<Utc>,
        config: &EngineConfig,
    ) -> bool {
        if node.access_count == 0 {
            return true;
        }
        match node.last_access_time {
            Some(t) => days_between(t, now) > config.delta_age_days,
            None => true,
        }
    }

    /// Nodes satisfying all three forgetting criteria simultaneously.
    pub fn prune_candidates(
        &self,
        now: DateTime<Utc>,
        current_step: u64,
        config: &EngineConfig,
    ) -> BTreeSet<NodeId> {
        self.nodes
            .values()
            .filter(|node| {
                Self::criterion_dormant(node, now, config)
                    && Self::criterion_no_recent_access(node, now, config)
                    && self
                        .criterion_low_strength(node.id, current_step, config)
                        .unwrap_or(false)
            })
            .map(|node| node.id)
            .collect()
    }

    /// Remove nodes and all incident edges. Fails on any unknown id before
    /// mutating anything. Returns the number of nodes removed.
    pub fn remove_nodes(&mut self, ids: &BTreeSet<NodeId>) -> Result<usize, EngineError> {
        for id in ids {
            if !self.nodes.contains_key(id) {
                return Err(EngineError::UnknownNode(*id));
            }
        }
        for &id in ids {
            let neighbors = self.adjacency.remove(&id).unwrap_or_default();
            for other in neighbors {
                if let Ok(key) = EdgeKey::new(id, other) {
                    self.edges.remove(&key);
                }
                if let Some(adj) = self.adjacency.get_mut(&other) {
                    adj.remove(&id);
                }
            }
            self.nodes.remove(&id);
            if self.last_node_id == Some(id) {
                self.last_node_id = None;
            }
        }
        Ok(ids.len())
    }

    /// Record a retrieval access on each node.
    pub(crate) fn mark_accessed(&mut self, ids: &BTreeSet<NodeId>, now: DateTime<Utc>) {
        for id in ids {
            if let Some(node) = self.nodes.get_mut(id) {
                node.access_count += 1;
                node.last_access_time = Some(now);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn test_node(id: u64, ts: DateTime<Utc>) -> MemoryNode {
        MemoryNode {
            id: NodeId(id),
            text: format!("turn {id}"),
            embedding: vec![1.0, 0.0, 0.0],
            timestamp: ts,
            keywords: BTreeSet::new(),
            speaker: crate::types::Speaker::User,
            last_access_time: None,
            access_count: 0,
            created_step: 0,
        }
    }

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2023, 5, 8, 12, 0, 0).unwrap()
    }

    fn graph_with_nodes(n: u64) -> EpisodicGraph {
        let mut g = EpisodicGraph::new();
        for i in 0..n {
            g.insert_node(test_node(i, t0())).unwrap();
        }
        g
    }

    fn edge(a: u64, b: u64, weight: f64, step: u64) -> HebbianEdge {
        HebbianEdge {
            key: EdgeKey::new(NodeId(a), NodeId(b)).unwrap(),
            weight,
            last_update_step: step,
            co_activation_count: 0,
        }
    }

    #[test]
    fn effective_weight_zero_elapsed_is_identity() {
        let e = edge(0, 1, 0.5, 10);
        assert_eq!(e.effective_weight(10, 0.995).unwrap(), 0.5);
    }

    #[test]
    fn effective_weight_single_step() {
        let e = edge(0, 1, 1.0, 0);
        assert!((e.effective_weight(1, 0.995).unwrap() - 0.995).abs() < 1e-15);
    }

    #[test]
    fn effective_weight_matches_iterated_multiplication() {
        let e = edge(0, 1, 1.0, 0);
        let closed = e.effective_weight(200, 0.995).unwrap();
        let mut iterated = 1.0;
        for _ in 0..200 {
            iterated *= 0.995;
        }
        assert!((closed - iterated).abs() < 1e-12);
        assert!((closed - 0.36696).abs() < 1e-5);
    }

    #[test]
    fn effective_weight_rejects_step_regression() {
        let e = edge(0, 1, 1.0, 5);
        assert!(matches!(
            e.effective_weight(4, 0.995),
            Err(EngineError::StepRegression { .. })
        ));
    }

    #[test]
    fn reinforce_empty_and_singleton_touch_nothing() {
        let mut g = graph_with_nodes(3);
        let cfg = EngineConfig::default();
        assert_eq!(g.reinforce(&BTreeSet::new(), &cfg).unwrap(), 0);
        let single: BTreeSet<NodeId> = [NodeId(1)].into_iter().collect();
        assert_eq!(g.reinforce(&single, &cfg).unwrap(), 0);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn reinforce_creates_missing_edge_at_eta() {
        let mut g = graph_with_nodes(2);
        let cfg = EngineConfig::default();
        g.advance_step();
        let pair: BTreeSet<NodeId> = [NodeId(0), NodeId(1)].into_iter().collect();
        assert_eq!(g.reinforce(&pair, &cfg).unwrap(), 1);
        let e = g.edge(NodeId(0), NodeId(1)).unwrap();
        assert_eq!(e.weight, cfg.eta);
        assert_eq!(e.last_update_step, 1);
        assert_eq!(e.co_activation_count, 1);
    }

    #[test]
    fn reinforce_materializes_decay_before_increment() {
        let mut g = graph_with_nodes(2);
        let cfg = EngineConfig::default();
        g.insert_edge(edge(0, 1, 1.0, 0)).unwrap();
        for _ in 0..10 {
            g.advance_step();
        }
        let pair: BTreeSet<NodeId> = [NodeId(0), NodeId(1)].into_iter().collect();
        g.reinforce(&pair, &cfg).unwrap();
        let e = g.edge(NodeId(0), NodeId(1)).unwrap();
        let expected = 0.995f64.powi(10) + 0.02;
        assert!((e.weight - expected).abs() < 1e-12);
        assert_eq!(e.last_update_step, 10);
    }

    #[test]
    fn reinforce_converges_to_fixed_point() {
        let mut g = graph_with_nodes(2);
        let cfg = EngineConfig::default();
        let pair: BTreeSet<NodeId> = [NodeId(0), NodeId(1)].into_iter().collect();
        for _ in 0..10_000 {
            g.advance_step();
            g.reinforce(&pair, &cfg).unwrap();
        }
        let w = g.edge(NodeId(0), NodeId(1)).unwrap().weight;
        assert!((w - 4.0).abs() < 1e-6, "weight {w} should be near eta/(1-rho)");
    }

    #[test]
    fn reinforce_unknown_id_mutates_nothing() {
        let mut g = graph_with_nodes(2);
        let cfg = EngineConfig::default();
        g.advance_step();
        let ids: BTreeSet<NodeId> = [NodeId(0), NodeId(1), NodeId(9)].into_iter().collect();
        assert!(matches!(
            g.reinforce(&ids, &cfg),
            Err(EngineError::UnknownNode(NodeId(9)))
        ));
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn reinforce_is_order_independent() {
        let cfg = EngineConfig::default();
        let trio: BTreeSet<NodeId> = [NodeId(0), NodeId(1), NodeId(2)].into_iter().collect();

        let mut g1 = graph_with_nodes(3);
        g1.advance_step();
        assert_eq!(g1.reinforce(&trio, &cfg).unwrap(), 3);

        // Same set presented after inserting nodes in a different order.
        let mut g2 = EpisodicGraph::new();
        for i in [2u64, 0, 1] {
            g2.insert_node(test_node(i, t0())).unwrap();
        }
        g2.advance_step();
        assert_eq!(g2.reinforce(&trio, &cfg).unwrap(), 3);

        for (a, b) in [(0u64, 1u64), (0, 2), (1, 2)] {
            let w1 = g1.edge(NodeId(a), NodeId(b)).unwrap().weight;
            let w2 = g2.edge(NodeId(a), NodeId(b)).unwrap().weight;
            assert_eq!(w1, w2);
            assert_eq!(w1, cfg.eta);
        }
    }

    #[test]
    fn strength_of_isolated_node_is_zero() {
        let g = graph_with_nodes(1);
        let cfg = EngineConfig::default();
        assert_eq!(g.associative_strength(NodeId(0), 0, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn strength_sums_fresh_edges() {
        let mut g = graph_with_nodes(3);
        let cfg = EngineConfig::default();
        g.insert_edge(edge(0, 1, 0.5, 0)).unwrap();
        g.insert_edge(edge(0, 2, 0.3, 0)).unwrap();
        let s = g.associative_strength(NodeId(0), 0, &cfg).unwrap();
        assert!((s - 0.8).abs() < 1e-12);
    }

    #[test]
    fn strength_applies_decay() {
        let mut g = graph_with_nodes(2);
        let cfg = EngineConfig::default();
        g.insert_edge(edge(0, 1, 1.0, 0)).unwrap();
        let s = g.associative_strength(NodeId(0), 200, &cfg).unwrap();
        assert!((s - 0.995f64.powi(200)).abs() < 1e-12);
        assert!((s - 0.36696).abs() < 1e-5);
    }

    #[test]
    fn strength_unknown_node_errors() {
        let g = graph_with_nodes(1);
        let cfg = EngineConfig::default();
        assert!(matches!(
            g.associative_strength(NodeId(5), 0, &cfg),
            Err(EngineError::UnknownNode(NodeId(5)))
        ));
    }

    #[test]
    fn detect_hubs_empty_graph() {
        let g = EpisodicGraph::new();
        let cfg = EngineConfig::default();
        assert!(g.detect_hubs(0, &cfg, &BTreeMap::new()).is_empty());
    }

    #[test]
    fn detect_hubs_strict_threshold() {
        let mut g = graph_with_nodes(3);
        let cfg = EngineConfig::default();
        // Node 0 at strength 6.0 (above), node 1 shares one edge; node 2 sits
        // exactly at the threshold via its edge to node 0.
        g.insert_edge(edge(0, 1, 1.0, 0)).unwrap();
        g.insert_edge(edge(0, 2, 5.0, 0)).unwrap();
        let hubs = g.detect_hubs(0, &cfg, &BTreeMap::new());
        assert!(hubs.contains(&NodeId(0))); // 6.0 > 5.0
        assert!(!hubs.contains(&NodeId(2))); // exactly 5.0 is excluded
        assert!(!hubs.contains(&NodeId(1)));
    }

    #[test]
    fn detect_hubs_respects_cooldown() {
        let mut g = graph_with_nodes(2);
        let cfg = EngineConfig::default();
        g.insert_edge(edge(0, 1, 6.0, 0)).unwrap();
        let mut cooldowns = BTreeMap::new();
        cooldowns.insert(NodeId(0), 10u64);
        let hubs = g.detect_hubs(5, &cfg, &cooldowns);
        assert!(!hubs.contains(&NodeId(0)));
        assert!(hubs.contains(&NodeId(1)));
        // Expired cooldown no longer excludes.
        let hubs = g.detect_hubs(10, &cfg, &cooldowns);
        assert!(hubs.contains(&NodeId(0)));
    }

    #[test]
    fn prune_requires_all_three_criteria() {
        let cfg = EngineConfig::default();
        let now = t0() + chrono::Duration::days(60);

        // Qualifying node: strength 0, dormant 60 days, never accessed.
        let g = graph_with_nodes(1);
        assert_eq!(
            g.prune_candidates(now, 0, &cfg),
            [NodeId(0)].into_iter().collect()
        );

        // Strength 0.2 fails criterion 1.
        let mut g = graph_with_nodes(2);
        g.insert_edge(edge(0, 1, 0.2, 0)).unwrap();
        assert!(!g.prune_candidates(now, 0, &cfg).contains(&NodeId(0)));

        // Accessed yesterday fails criteria 2 and 3.
        let mut g = graph_with_nodes(1);
        g.mark_accessed(
            &[NodeId(0)].into_iter().collect(),
            now - chrono::Duration::days(1),
        );
        assert!(g.prune_candidates(now, 0, &cfg).is_empty());

        // Recent node (created inside the window) fails criterion 2 alone.
        let mut g = EpisodicGraph::new();
        g.insert_node(test_node(0, now - chrono::Duration::days(3))).unwrap();
        assert!(g.prune_candidates(now, 0, &cfg).is_empty());
    }

    #[test]
    fn remove_isolated_node() {
        let mut g = graph_with_nodes(3);
        g.insert_edge(edge(0, 1, 0.5, 0)).unwrap();
        let removed = g.remove_nodes(&[NodeId(2)].into_iter().collect()).unwrap();
        assert_eq!(removed, 1);
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn remove_degree_three_node_drops_incident_edges() {
        let mut g = graph_with_nodes(4);
        g.insert_edge(edge(0, 1, 0.5, 0)).unwrap();
        g.insert_edge(edge(0, 2, 0.5, 0)).unwrap();
        g.insert_edge(edge(0, 3, 0.5, 0)).unwrap();
        g.insert_edge(edge(1, 2, 0.5, 0)).unwrap();
        g.remove_nodes(&[NodeId(0)].into_iter().collect()).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 1);
        // Adjacency stays symmetric: nobody still lists node 0.
        for id in g.node_ids().collect::<Vec<_>>() {
            assert!(g.neighbors(id).all(|n| g.contains(n)));
        }
    }

    #[test]
    fn remove_unknown_id_errors_before_mutation() {
        let mut g = graph_with_nodes(2);
        let ids: BTreeSet<NodeId> = [NodeId(0), NodeId(7)].into_iter().collect();
        assert!(g.remove_nodes(&ids).is_err());
        assert_eq!(g.node_count(), 2);
    }

    #[test]
    fn insert_node_rejects_dimension_mismatch() {
        let mut g = graph_with_nodes(1);
        let mut bad = test_node(1, t0());
        bad.embedding = vec![1.0, 0.0];
        assert!(matches!(
            g.insert_node(bad),
            Err(EngineError::DimensionMismatch { expected: 3, actual: 2 })
        ));
        assert_eq!(g.node_count(), 1);
    }

    #[test]
    fn insert_node_rejects_non_unit_embedding() {
        let mut g = EpisodicGraph::new();
        let mut bad = test_node(0, t0());
        bad.embedding = vec![2.0, 0.0, 0.0];
        assert!(g.insert_node(bad).is_err());
    }

    #[test]
    fn decay_is_monotone_without_reinforcement() {
        let e = edge(0, 1, 0.7, 0);
        let mut prev = f64::INFINITY;
        for step in 0..50 {
            let w = e.effective_weight(step, 0.995).unwrap();
            assert!(w < prev);
            prev = w;
        }
        // Retention 1.0 keeps weights flat.
        assert_eq!(e.effective_weight(100, 1.0).unwrap(), 0.7);
    }
}
