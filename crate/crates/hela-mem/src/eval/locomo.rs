//! Loader for the LoCoMo benchmark's published JSON layout: one array entry
//! per conversation, sessions keyed `session_N` with a sibling
//! `session_N_date_time` header, and a `qa` list.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde_json::Value;

use crate::error::DatasetError;
use crate::types::{ConversationTurn, QaCategory, QaItem, Speaker};

/// One conversation: all turns in session order plus its QA items.
#[derive(Debug, Clone)]
pub struct LocomoConversation {
    pub id: String,
    pub turns: Vec<ConversationTurn>,
    pub qa: Vec<QaItem>,
}

impl LocomoConversation {
    /// Timestamp of the final session; evaluation uses it as "now".
    pub fn last_timestamp(&self) -> Option<DateTime<Utc>> {
        self.turns.iter().map(|t| t.timestamp).max()
    }
}

/// Parse the session date headers, e.g. "1:56 pm on 8 May, 2023".
pub fn parse_session_date(raw: &str) -> Option<DateTime<Utc>> {
    let trimmed = raw.trim();
    for format in ["%I:%M %p on %d %B, %Y", "%I:%M %p on %d %b, %Y"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(trimmed, format) {
            return Some(Utc.from_utc_datetime(&dt));
        }
    }
    for format in ["%d %B, %Y", "%d %B %Y", "%Y-%m-%d"] {
        if let Ok(d) = NaiveDate::parse_from_str(trimmed, format) {
            return Some(Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0)?));
        }
    }
    DateTime::parse_from_rfc3339(trimmed)
        .ok()
        .map(|dt| dt.with_timezone(&Utc))
}

fn category_from_value(value: &Value) -> Option<QaCategory> {
    if let Some(n) = value.as_i64() {
        return match n {
            1 => Some(QaCategory::MultiHop),
            2 => Some(QaCategory::Temporal),
            3 => Some(QaCategory::OpenDomain),
            4 => Some(QaCategory::SingleHop),
            5 => Some(QaCategory::Adversarial),
            _ => None,
        };
    }
    let s = value.as_str()?.to_lowercase().replace(['-', ' '], "_");
    match s.as_str() {
        "single_hop" | "singlehop" => Some(QaCategory::SingleHop),
        "multi_hop" | "multihop" => Some(QaCategory::MultiHop),
        "temporal" => Some(QaCategory::Temporal),
        "open_domain" | "opendomain" | "open" => Some(QaCategory::OpenDomain),
        "adversarial" => Some(QaCategory::Adversarial),
        _ => None,
    }
}

fn value_to_text(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn item_err(item: impl Into<String>, message: impl Into<String>) -> DatasetError {
    DatasetError::Item { item: item.into(), message: message.into() }
}

/// Load a benchmark file. Turns carry the timestamp of their session's date
/// header; QA categories map onto the five-way enum.
pub fn load_locomo(path: &Path) -> Result<Vec<LocomoConversation>, DatasetError> {
    let bytes = std::fs::read(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let root: Value = serde_json::from_slice(&bytes).map_err(|source| DatasetError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    let items = root
        .as_array()
        .ok_or_else(|| item_err(path.display().to_string(), "top level must be an array"))?;

    let mut conversations = Vec::new();
    for (index, item) in items.iter().enumerate() {
        let id = item
            .get("sample_id")
            .and_then(Value::as_str)
            .map(String::from)
            .unwrap_or_else(|| format!("conversation-{index}"));
        let conv = item
            .get("conversation")
            .and_then(Value::as_object)
            .ok_or_else(|| item_err(&id, "missing conversation object"))?;

        // Collect session indices from keys shaped session_<n>.
        let mut session_numbers: Vec<u64> = conv
            .keys()
            .filter_map(|k| {
                k.strip_prefix("session_")
                    .filter(|rest| rest.chars().all(|c| c.is_ascii_digit()))
                    .and_then(|rest| rest.parse().ok())
            })
            .collect();
        session_numbers.sort_unstable();
        session_numbers.dedup();

        let mut turns = Vec::new();
        for n in session_numbers {
            let session_key = format!("session_{n}");
            let turns_value = match conv.get(&session_key) {
                Some(Value::Array(a)) => a,
                _ => continue, // key was something like a date header only
            };
            let date_key = format!("session_{n}_date_time");
            let date_raw = conv
                .get(&date_key)
                .and_then(Value::as_str)
                .ok_or_else(|| item_err(format!("{id}/{session_key}"), "missing session date"))?;
            let timestamp = parse_session_date(date_raw).ok_or_else(|| {
                item_err(
                    format!("{id}/{date_key}"),
                    format!("unparseable date {date_raw:?}"),
                )
            })?;

            for (turn_index, turn) in turns_value.iter().enumerate() {
                let speaker_name = turn
                    .get("speaker")
                    .and_then(Value::as_str)
                    .ok_or_else(|| {
                        item_err(format!("{id}/{session_key}[{turn_index}]"), "missing speaker")
                    })?;
                let text = turn
                    .get("text")
                    .and_then(Value::as_str)
                    .filter(|t| !t.trim().is_empty())
                    .or_else(|| turn.get("blip_caption").and_then(Value::as_str))
                    .ok_or_else(|| {
                        item_err(format!("{id}/{session_key}[{turn_index}]"), "missing text")
                    })?;
                let turn_id = turn
                    .get("dia_id")
                    .and_then(Value::as_str)
                    .map(String::from)
                    .unwrap_or_else(|| format!("D{n}:{turn_index}"));
                turns.push(ConversationTurn {
                    session_id: session_key.clone(),
                    turn_id,
                    speaker: Speaker::Named(speaker_name.to_string()),
                    text: text.to_string(),
                    timestamp,
                });
            }
        }

        let mut qa = Vec::new();
        let qa_values = item
            .get("qa")
            .and_then(Value::as_array)
            .ok_or_else(|| item_err(&id, "missing qa array"))?;
        for (qa_index, entry) in qa_values.iter().enumerate() {
            let question = entry
                .get("question")
                .and_then(Value::as_str)
                .ok_or_else(|| item_err(format!("{id}/qa[{qa_index}]"), "missing question"))?;
            let answer = entry
                .get("answer")
                .and_then(value_to_text)
                .or_else(|| entry.get("adversarial_answer").and_then(value_to_text))
                .ok_or_else(|| item_err(format!("{id}/qa[{qa_index}]"), "missing answer"))?;
            let category_value = entry
                .get("category")
                .ok_or_else(|| item_err(format!("{id}/qa[{qa_index}]"), "missing category"))?;
            let category = category_from_value(category_value).ok_or_else(|| {
                item_err(
                    format!("{id}/qa[{qa_index}]"),
                    format!("unknown category {category_value}"),
                )
            })?;
            let evidence = entry
                .get("evidence")
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(value_to_text).collect())
                .unwrap_or_default();
            qa.push(QaItem {
                question: question.to_string(),
                answer,
                category,
                evidence,
            });
        }

        conversations.push(LocomoConversation { id, turns, qa });
    }
    Ok(conversations)
}

/// Count QA items per category across conversations.
pub fn category_counts(conversations: &[LocomoConversation]) -> BTreeMap<QaCategory, usize> {
    let mut counts = BTreeMap::new();
    for conv in conversations {
        for qa in &conv.qa {
            *counts.entry(qa.category).or_insert(0) += 1;
        }
    }
    counts
}
