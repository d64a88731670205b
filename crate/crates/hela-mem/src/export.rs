//! Diagnostic exports: the memory graph as DOT (node styling by lifecycle
//! status, edge thickness by effective weight) and the pairwise weight
//! matrix as CSV.

use std::fmt::Write as _;

use chrono::{DateTime, Utc};

use crate::config::EngineConfig;
use crate::engine::MemoryEngine;
use crate::graph::EpisodicGraph;
use crate::types::NodeId;

fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn truncate_label(text: &str, max_chars: usize) -> String {
    if text.chars().count() <= max_chars {
        return text.to_string();
    }
    let cut: String = text.chars().take(max_chars).collect();
    format!("{cut}…")
}

/// Render the graph as an undirected DOT document. Hubs are red, prune
/// candidates gray and dashed, everything else blue; edge penwidth scales
/// with effective weight.
pub fn export_dot(engine: &MemoryEngine, now: DateTime<Utc>) -> String {
    let graph = engine.graph();
    let config = engine.config();
    let step = graph.step();

    let prune = graph.prune_candidates(now, step, config);
    let mut out = String::new();
    let _ = writeln!(out, "graph memory {{");
    let _ = writeln!(out, "    node [style=filled fontsize=10];");
    for node in graph.nodes() {
        let strength = graph
            .associative_strength(node.id, step, config)
            .unwrap_or(0.0);
        let style = if strength > config.delta_hub {
            "fillcolor=salmon color=red"
        } else if prune.contains(&node.id) {
            "fillcolor=gray90 color=gray50 style=\"filled,dashed\""
        } else {
            "fillcolor=lightblue color=blue"
        };
        let label = format!("{}\\n{}", node.id, escape_dot(&truncate_label(&node.text, 24)));
        let _ = writeln!(out, "    {} [label=\"{}\" {}];", node.id, label, style);
    }
    let max_weight = graph
        .edges()
        .filter_map(|e| e.effective_weight(step, config.lambda_retention).ok())
        .fold(0.0f64, f64::max);
    for edge in graph.edges() {
        let (a, b) = edge.key.nodes();
        let weight = edge
            .effective_weight(step, config.lambda_retention)
            .unwrap_or(0.0);
        let penwidth = if max_weight > 0.0 { 0.2 + 4.8 * weight / max_weight } else { 0.2 };
        let _ = writeln!(
            out,
            "    {a} -- {b} [penwidth={penwidth:.3} tooltip=\"w={weight:.4}\"];"
        );
    }
    let _ = writeln!(out, "}}");
    out
}

/// N x N CSV of pairwise effective weights over the first `first_n` nodes in
/// id order. Diagonal entries are zero; absent edges are zero.
pub fn export_heatmap_csv(
    graph: &EpisodicGraph,
    current_step: u64,
    config: &EngineConfig,
    first_n: usize,
) -> String {
    let ids: Vec<NodeId> = graph.node_ids().take(first_n).collect();
    let mut out = String::new();
    for &row in &ids {
        let mut cells = Vec::with_capacity(ids.len());
        for &col in &ids {
            let weight = if row == col {
                0.0
            } else {
                graph
                    .edge(row, col)
                    .and_then(|e| e.effective_weight(current_step, config.lambda_retention).ok())
                    .unwrap_or(0.0)
            };
            cells.push(format!("{weight:.6}"));
        }
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}
