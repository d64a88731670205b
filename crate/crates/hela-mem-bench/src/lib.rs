//! Synthetic-state builders shared by the benchmarks.

use chrono::{DateTime, Duration, TimeZone, Utc};

use hela_mem::{ConversationTurn, EngineConfig, MemoryEngine, Speaker, StubEmbedding};

pub fn base_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 5, 8, 12, 0, 0).unwrap()
}

/// A conversation-scale engine: `turns` stub-embedded turns across sessions
/// of 30, with a handful of retrievals already applied so Hebbian edges
/// exist beyond the adjacency chain.
pub fn seeded_engine(turns: usize, dim: usize) -> (MemoryEngine, StubEmbedding) {
    let mut engine = MemoryEngine::new(EngineConfig::default()).expect("default config");
    let embedder = StubEmbedding::new(dim, 7);
    let topics = ["hiking", "adoption", "recital", "observatory", "pottery", "harbor"];
    for i in 0..turns {
        let topic = topics[i % topics.len()];
        engine
            .ingest(
                &ConversationTurn {
                    session_id: format!("session_{}", i / 30),
                    turn_id: format!("t{i}"),
                    speaker: if i % 2 == 0 { Speaker::User } else { Speaker::Agent },
                    text: format!("turn {i} about {topic} plans and details"),
                    timestamp: base_time() + Duration::minutes(i as i64),
                },
                &embedder,
            )
            .expect("ingest");
    }
    for (i, topic) in topics.iter().enumerate() {
        engine
            .retrieve(
                &format!("{topic} question"),
                base_time() + Duration::days(1) + Duration::minutes(i as i64),
                &embedder,
            )
            .expect("retrieve");
    }
    (engine, embedder)
}
