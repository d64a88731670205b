//! Conversational-QA evaluation harness: ingest each conversation, answer
//! its questions through the full retrieval + generation pipeline, score
//! with F1 / BLEU-1, and aggregate per category.

mod locomo;
mod metrics;

pub use locomo::{category_counts, load_locomo, parse_session_date, LocomoConversation};
pub use metrics::{
    bleu1_score, count_tokens, f1_score, normalize_answer, TokenCounter,
    WhitespaceTokenCounter,
};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::backends::{ChatBackend, EmbeddingBackend};
use crate::config::EngineConfig;
use crate::engine::MemoryEngine;
use crate::error::EngineError;
use crate::prompts;
use crate::retrieval::{render_context_sections, PathTag, RetrievalResult};
use crate::types::{NodeId, QaCategory};

/// Answer plus the accounting the harness needs.
#[derive(Debug, Clone)]
pub struct GeneratedAnswer {
    pub answer: String,
    /// Token count of the fully rendered user prompt.
    pub prompt_token_count: usize,
    pub retrieval: RetrievalResult,
}

/// Retrieve, render the response prompt, and ask the chat backend.
pub fn generate_answer(
    engine: &mut MemoryEngine,
    question: &str,
    now: DateTime<Utc>,
    embedder: &dyn EmbeddingBackend,
    chat: &dyn ChatBackend,
    counter: &dyn TokenCounter,
) -> Result<GeneratedAnswer, EngineError> {
    let retrieval = engine.retrieve(question, now, embedder)?;
    let sections = render_context_sections(
        engine.graph(),
        engine.semantic(),
        &retrieval.episodic,
        &retrieval.semantic,
    );
    let user_prompt = prompts::render_response_prompt(
        &sections.episodic,
        &sections.semantic_knowledge,
        &sections.user_model,
        question,
    );
    let prompt_token_count = counter.count(&user_prompt);
    let answer = chat.chat(prompts::RESPONSE_SYSTEM, &user_prompt)?;
    Ok(GeneratedAnswer { answer, prompt_token_count, retrieval })
}

/// One scored QA item, machine-readable.
#[derive(Debug, Clone, Serialize)]
pub struct EvalRow {
    pub conversation_id: String,
    pub question: String,
    pub prediction: String,
    pub gold: String,
    pub category: QaCategory,
    pub f1: f64,
    pub bleu1: f64,
    pub context_tokens: usize,
    pub retrieved: Vec<NodeId>,
    pub path_tags: Vec<PathTag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Mean scores over a set of items.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CategoryAgg {
    pub items: usize,
    pub f1: f64,
    pub bleu1: f64,
    pub context_tokens: f64,
}

impl CategoryAgg {
    fn accumulate(rows: &[&EvalRow]) -> CategoryAgg {
        if rows.is_empty() {
            return CategoryAgg::default();
        }
        let n = rows.len() as f64;
        CategoryAgg {
            items: rows.len(),
            f1: rows.iter().map(|r| r.f1).sum::<f64>() / n,
            bleu1: rows.iter().map(|r| r.bleu1).sum::<f64>() / n,
            context_tokens: rows.iter().map(|r| r.context_tokens as f64).sum::<f64>() / n,
        }
    }
}

/// Aggregated evaluation output.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub label: String,
    pub categories: BTreeMap<QaCategory, CategoryAgg>,
    pub overall: CategoryAgg,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    /// Deterministic text table for stdout.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "report: {}", self.label);
        let _ = writeln!(
            out,
            "{:<13} {:>6} {:>8} {:>8} {:>12}",
            "category", "items", "f1", "bleu1", "ctx_tokens"
        );
        for (category, agg) in &self.categories {
            let _ = writeln!(
                out,
                "{:<13} {:>6} {:>8.4} {:>8.4} {:>12.1}",
                category.to_string(),
                agg.items,
                agg.f1,
                agg.bleu1,
                agg.context_tokens
            );
        }
        let _ = writeln!(
            out,
            "{:<13} {:>6} {:>8.4} {:>8.4} {:>12.1}",
            "overall", self.overall.items, self.overall.f1, self.overall.bleu1,
            self.overall.context_tokens
        );
        out
    }

    /// Rows as JSON lines.
    pub fn rows_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&serde_json::to_string(row).expect("rows serialize"));
            out.push('\n');
        }
        out
    }
}

/// Run the full protocol: per conversation, ingest all turns chronologically,
/// then answer each QA item with `now` set to the final session date,
/// running the reflection and forgetting passes after every retrieval event.
/// Per-item backend failures score 0 and carry an error note; the run
/// continues.
pub fn run_eval(
    conversations: &[LocomoConversation],
    config: &EngineConfig,
    embedder: &dyn EmbeddingBackend,
    chat: &dyn ChatBackend,
    counter: &dyn TokenCounter,
    label: &str,
) -> EvalReport {
    let mut rows = Vec::new();
    for conversation in conversations {
        let mut engine = match MemoryEngine::new(config.clone()) {
            Ok(e) => e,
            Err(e) => {
                log::error!("config rejected: {e}");
                break;
            }
        };
        for turn in &conversation.turns {
            if let Err(e) = engine.ingest(turn, embedder) {
                log::warn!(
                    "skipping turn {} of {}: {e}",
                    turn.turn_id,
                    conversation.id
                );
            }
        }
        let now = conversation.last_timestamp().unwrap_or(DateTime::<Utc>::MIN_UTC);

        for qa in &conversation.qa {
            match generate_answer(&mut engine, &qa.question, now, embedder, chat, counter) {
                Ok(generated) => {
                    engine.maintain(now, chat, embedder);
                    rows.push(EvalRow {
                        conversation_id: conversation.id.clone(),
                        question: qa.question.clone(),
                        prediction: generated.answer.clone(),
                        gold: qa.answer.clone(),
                        category: qa.category,
                        f1: f1_score(&generated.answer, &qa.answer),
                        bleu1: bleu1_score(&generated.answer, &qa.answer),
                        context_tokens: generated.prompt_token_count,
                        retrieved: generated
                            .retrieval
                            .episodic
                            .iter()
                            .map(|s| s.node_id)
                            .collect(),
                        path_tags: generated
                            .retrieval
                            .episodic
                            .iter()
                            .map(|s| s.path)
                            .collect(),
                        error: None,
                    });
                }
                Err(e) => rows.push(EvalRow {
                    conversation_id: conversation.id.clone(),
                    question: qa.question.clone(),
                    prediction: String::new(),
                    gold: qa.answer.clone(),
                    category: qa.category,
                    f1: 0.0,
                    bleu1: 0.0,
                    context_tokens: 0,
                    retrieved: Vec::new(),
                    path_tags: Vec::new(),
                    error: Some(e.to_string()),
                }),
            }
        }
    }

    let mut categories = BTreeMap::new();
    for category in [
        QaCategory::SingleHop,
        QaCategory::MultiHop,
        QaCategory::Temporal,
        QaCategory::OpenDomain,
        QaCategory::Adversarial,
    ] {
        let subset: Vec<&EvalRow> = rows.iter().filter(|r| r.category == category).collect();
        if !subset.is_empty() {
            categories.insert(category, CategoryAgg::accumulate(&subset));
        }
    }
    let overall = CategoryAgg::accumulate(&rows.iter().collect::<Vec<_>>());
    EvalReport { label: label.to_string(), categories, overall, rows }
}
