//! Operator CLI for the memory engine: ingestion, querying, lifecycle
//! control, inspection exports, and benchmark evaluation. Mutating commands
//! are snapshot-in/snapshot-out with atomic rewrites; read-only commands
//! never touch the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use clap::{Parser, Subcommand};

use hela_mem::backends::{
    ChatBackend, EmbeddingBackend, HttpBackendConfig, HttpChat, HttpEmbedding, StubChat,
    StubEmbedding,
};
use hela_mem::eval::{self, WhitespaceTokenCounter};
use hela_mem::retrieval::PathTag;
use hela_mem::{
    load_snapshot, save_snapshot, ConversationTurn, EngineConfig, MemoryEngine, Speaker,
};

#[derive(Parser)]
#[command(
    name = "hela-mem",
    about = "Associative long-term memory engine for conversational agents",
    version
)]
struct Cli {
    /// Use deterministic in-process backends instead of HTTP services.
    #[arg(long, global = true)]
    stub_backends: bool,

    /// Embedding dimension for the stub backend.
    #[arg(long, global = true, default_value_t = 64)]
    stub_dim: usize,

    /// Seed for the stub backend.
    #[arg(long, global = true, default_value_t = 0)]
    stub_seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Append turns from a transcript file into a snapshot.
    Ingest {
        #[arg(long)]
        snapshot: PathBuf,
        /// Transcript: one `RFC3339<TAB>speaker<TAB>text` line per turn,
        /// blank lines separate sessions, `#` starts a comment.
        #[arg(long)]
        input: PathBuf,
        /// Base session id; sessions in the file are numbered under it.
        #[arg(long, default_value = "session")]
        session_id: String,
        /// Engine config (JSON) applied when creating a new snapshot.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Retrieve and answer a question against a snapshot.
    Ask {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        question: String,
        /// Query time (RFC3339 or YYYY-MM-DD); defaults to the wall clock.
        #[arg(long)]
        now: Option<String>,
    },
    /// Graph statistics: counts, step, weight distribution, hubs.
    Stats {
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Nodes above the hub threshold with strength and degree.
    Hubs {
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Run the reflective consolidation pass.
    Consolidate {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        now: Option<String>,
    },
    /// Run the adaptive forgetting pass.
    Forget {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        now: Option<String>,
    },
    /// Write the memory graph as DOT.
    ExportDot {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        now: Option<String>,
    },
    /// Write the pairwise effective-weight matrix as CSV.
    ExportHeatmap {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Matrix covers the first N nodes in id order.
        #[arg(long, default_value_t = 20)]
        first: usize,
    },
    /// Run the QA evaluation harness over a benchmark file.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// Engine config (JSON, partial files allowed).
        #[arg(long)]
        config: Option<PathBuf>,
        /// One of: full, no-spreading, no-forgetting, no-reflective, all.
        #[arg(long, default_value = "full")]
        ablation: String,
        /// Write per-item rows as JSON lines.
        #[arg(long)]
        rows_out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Ingest { snapshot, input, session_id, config } => {
            cmd_ingest(&cli, snapshot, input, session_id, config.as_deref())
        }
        Command::Ask { snapshot, question, now } => {
            cmd_ask(&cli, snapshot, question, now.as_deref())
        }
        Command::Stats { snapshot } => cmd_stats(snapshot),
        Command::Hubs { snapshot } => cmd_hubs(snapshot),
        Command::Consolidate { snapshot, now } => cmd_consolidate(&cli, snapshot, now.as_deref()),
        Command::Forget { snapshot, now } => cmd_forget(snapshot, now.as_deref()),
        Command::ExportDot { snapshot, out, now } => cmd_export_dot(snapshot, out, now.as_deref()),
        Command::ExportHeatmap { snapshot, out, first } => {
            cmd_export_heatmap(snapshot, out, *first)
        }
        Command::Eval { dataset, config, ablation, rows_out } => {
            cmd_eval(&cli, dataset, config.as_deref(), ablation, rows_out.as_deref())
        }
    }
}

fn make_embedder(cli: &Cli) -> Result<Box<dyn EmbeddingBackend>> {
    if cli.stub_backends {
        Ok(Box::new(StubEmbedding::new(cli.stub_dim, cli.stub_seed)))
    } else {
        let config = HttpBackendConfig::from_env()?;
        Ok(Box::new(HttpEmbedding::new(config)?))
    }
}

fn make_chat(cli: &Cli) -> Result<Box<dyn ChatBackend>> {
    if cli.stub_backends {
        Ok(Box::new(StubChat::new()))
    } else {
        let config = HttpBackendConfig::from_env()?;
        Ok(Box::new(HttpChat::new(config)?))
    }
}

fn parse_now(raw: Option<&str>) -> Result<DateTime<Utc>> {
    let Some(raw) = raw else { return Ok(Utc::now()) };
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Ok(dt.with_timezone(&Utc));
    }
    for format in ["%Y-%m-%d", "%d %B %Y"] {
        if let Ok(d) = NaiveDate::parse_from_str(raw, format) {
            return Ok(Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).unwrap()));
        }
    }
    bail!("cannot parse time {raw:?}; use RFC3339 or YYYY-MM-DD")
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig> {
    let Some(path) = path else { return Ok(EngineConfig::default()) };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let config: EngineConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    config.validate().map_err(|e| anyhow!("{e}"))?;
    Ok(config)
}

fn load_engine(path: &Path) -> Result<MemoryEngine> {
    load_snapshot(path).with_context(|| format!("loading snapshot {}", path.display()))
}

fn store_engine(engine: &MemoryEngine, path: &Path) -> Result<()> {
    save_snapshot(engine, path).with_context(|| format!("writing snapshot {}", path.display()))
}

fn parse_speaker(raw: &str) -> Speaker {
    match raw.trim().to_lowercase().as_str() {
        "user" => Speaker::User,
        "agent" | "assistant" => Speaker::Agent,
        _ => Speaker::Named(raw.trim().to_string()),
    }
}

fn parse_transcript(text: &str, session_base: &str) -> Result<Vec<ConversationTurn>> {
    let mut turns = Vec::new();
    let mut session = 1usize;
    let mut saw_turn_in_session = false;
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if saw_turn_in_session {
                session += 1;
                saw_turn_in_session = false;
            }
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (ts, speaker, text) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => bail!(
                "line {}: expected `timestamp<TAB>speaker<TAB>text`, got {line:?}",
                line_no + 1
            ),
        };
        let timestamp = DateTime::parse_from_rfc3339(ts.trim())
            .map(|dt| dt.with_timezone(&Utc))
            .with_context(|| format!("line {}: bad timestamp {ts:?}", line_no + 1))?;
        let session_id = format!("{session_base}-{session}");
        turns.push(ConversationTurn {
            turn_id: format!("{session_id}:{}", turns.len() + 1),
            session_id,
            speaker: parse_speaker(speaker),
            text: text.trim().to_string(),
            timestamp,
        });
        saw_turn_in_session = true;
    }
    Ok(turns)
}

fn cmd_ingest(
    cli: &Cli,
    snapshot: &Path,
    input: &Path,
    session_base: &str,
    config: Option<&Path>,
) -> Result<()> {
    let mut engine = if snapshot.exists() {
        load_engine(snapshot)?
    } else {
        println!("snapshot {} not found, starting a new one", snapshot.display());
        MemoryEngine::new(load_config(config)?).map_err(|e| anyhow!("{e}"))?
    };
    let text = std::fs::read_to_string(input)
        .with_context(|| format!("reading transcript {}", input.display()))?;
    let turns = parse_transcript(&text, session_base)?;
    if turns.is_empty() {
        bail!("transcript {} contains no turns", input.display());
    }
    let embedder = make_embedder(cli)?;
    for turn in &turns {
        engine
            .ingest(turn, embedder.as_ref())
            .with_context(|| format!("ingesting turn {}", turn.turn_id))?;
    }
    store_engine(&engine, snapshot)?;
    let sessions: std::collections::BTreeSet<&str> =
        turns.iter().map(|t| t.session_id.as_str()).collect();
    println!(
        "ingested {} turns across {} session(s); graph now has {} nodes / {} edges",
        turns.len(),
        sessions.len(),
        engine.graph().node_count(),
        engine.graph().edge_count()
    );
    Ok(())
}

fn cmd_ask(cli: &Cli, snapshot: &Path, question: &str, now: Option<&str>) -> Result<()> {
    let mut engine = load_engine(snapshot)?;
    let now = parse_now(now)?;
    let embedder = make_embedder(cli)?;
    let chat = make_chat(cli)?;
    let generated = eval::generate_answer(
        &mut engine,
        question,
        now,
        embedder.as_ref(),
        chat.as_ref(),
        &WhitespaceTokenCounter,
    )
    .map_err(|e| anyhow!("{e}"))?;

    println!("answer: {}", generated.answer.trim());
    println!("context tokens: {}", generated.prompt_token_count);
    println!("episodic results:");
    for scored in &generated.retrieval.episodic {
        let tag = match scored.path {
            PathTag::Base => "base",
            PathTag::Flip => "flip",
        };
        let line = engine
            .graph()
            .node(scored.node_id)
            .map(|n| {
                format!(
                    "[{}] {}: {}",
                    hela_mem::retrieval::format_human_date(n.timestamp),
                    n.speaker,
                    n.text
                )
            })
            .unwrap_or_default();
        println!(
            "  [{tag}] {} base={:.4} aug={:.4} | {line}",
            scored.node_id, scored.base_score, scored.augmented_score
        );
    }
    println!("semantic results:");
    for hit in &generated.retrieval.semantic {
        if let Some(record) = engine.semantic().record(hit.record_id) {
            println!(
                "  {} sim={:.4} [{}] {}",
                hit.record_id, hit.similarity, record.category, record.statement
            );
        }
    }

    let (events, removed) = engine.maintain(now, chat.as_ref(), embedder.as_ref());
    if !events.is_empty() || !removed.is_empty() {
        println!(
            "lifecycle: {} consolidation event(s), {} node(s) forgotten",
            events.len(),
            removed.len()
        );
    }
    store_engine(&engine, snapshot)?;
    Ok(())
}

fn cmd_stats(snapshot: &Path) -> Result<()> {
    let engine = load_engine(snapshot)?;
    let graph = engine.graph();
    let config = engine.config();
    let step = graph.step();
    println!("nodes: {}", graph.node_count());
    println!("edges: {}", graph.edge_count());
    println!("step: {step}");
    println!("semantic records: {}", engine.semantic().len());
    println!("consolidation events: {}", engine.events().len());

    let weights: Vec<f64> = graph
        .edges()
        .filter_map(|e| e.effective_weight(step, config.lambda_retention).ok())
        .collect();
    if weights.is_empty() {
        println!("effective weights: none");
    } else {
        let min = weights.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = weights.iter().sum::<f64>() / weights.len() as f64;
        println!("effective weights: min={min:.4} mean={mean:.4} max={max:.4}");
    }

    let hubs = graph.detect_hubs(step, config, &BTreeMap::new());
    println!("hubs (strength > {}): {}", config.delta_hub, hubs.len());
    for id in hubs {
        let strength = graph.associative_strength(id, step, config).unwrap_or(0.0);
        println!("  {id} strength={strength:.4} degree={}", graph.degree(id));
    }
    Ok(())
}

fn cmd_hubs(snapshot: &Path) -> Result<()> {
    let engine = load_engine(snapshot)?;
    let graph = engine.graph();
    let config = engine.config();
    let step = graph.step();
    let hubs = graph.detect_hubs(step, config, &BTreeMap::new());
    if hubs.is_empty() {
        println!("no nodes above the hub threshold ({})", config.delta_hub);
        return Ok(());
    }
    for id in hubs {
        let strength = graph.associative_strength(id, step, config).unwrap_or(0.0);
        let cooling = engine
            .hub_cooldowns()
            .get(&id)
            .map(|&until| step < until)
            .unwrap_or(false);
        let suffix = if cooling { " (cooldown)" } else { "" };
        println!("{id} strength={strength:.4} degree={}{suffix}", graph.degree(id));
    }
    Ok(())
}

fn cmd_consolidate(cli: &Cli, snapshot: &Path, now: Option<&str>) -> Result<()> {
    let mut engine = load_engine(snapshot)?;
    let now = parse_now(now)?;
    let embedder = make_embedder(cli)?;
    let chat = make_chat(cli)?;
    let events = engine.run_reflection(now, chat.as_ref(), embedder.as_ref());
    for event in &events {
        println!(
            "hub {} -> {} record(s) from a cluster of {}",
            event.hub,
            event.produced.len(),
            event.cluster.len()
        );
    }
    println!("consolidation events: {}", events.len());
    store_engine(&engine, snapshot)?;
    Ok(())
}

fn cmd_forget(snapshot: &Path, now: Option<&str>) -> Result<()> {
    let mut engine = load_engine(snapshot)?;
    let now = parse_now(now)?;
    let removed = engine.run_forgetting(now);
    for id in &removed {
        println!("forgot {id}");
    }
    println!("removed: {}", removed.len());
    store_engine(&engine, snapshot)?;
    Ok(())
}

fn cmd_export_dot(snapshot: &Path, out: &Path, now: Option<&str>) -> Result<()> {
    let engine = load_engine(snapshot)?;
    let now = parse_now(now)?;
    let dot = hela_mem::export::export_dot(&engine, now);
    std::fs::write(out, dot).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_export_heatmap(snapshot: &Path, out: &Path, first: usize) -> Result<()> {
    let engine = load_engine(snapshot)?;
    let csv = hela_mem::export::export_heatmap_csv(
        engine.graph(),
        engine.graph().step(),
        engine.config(),
        first,
    );
    std::fs::write(out, csv).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn apply_ablation(base: &EngineConfig, name: &str) -> Result<EngineConfig> {
    let mut config = base.clone();
    match name {
        "full" => {}
        "no-spreading" => config.enable_spreading = false,
        "no-forgetting" => config.enable_forgetting = false,
        "no-reflective" => config.enable_reflective = false,
        other => bail!(
            "unknown ablation {other:?}; expected full, no-spreading, no-forgetting, \
             no-reflective, or all"
        ),
    }
    Ok(config)
}

fn rows_path_for(base: &Path, ablation: &str, all: bool) -> PathBuf {
    if !all {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("rows");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("jsonl");
    base.with_file_name(format!("{stem}.{ablation}.{ext}"))
}

fn cmd_eval(
    cli: &Cli,
    dataset: &Path,
    config: Option<&Path>,
    ablation: &str,
    rows_out: Option<&Path>,
) -> Result<()> {
    let base = load_config(config)?;
    let conversations = eval::load_locomo(dataset).map_err(|e| anyhow!("{e}"))?;
    let embedder = make_embedder(cli)?;
    let chat = make_chat(cli)?;
    let names: Vec<&str> = if ablation == "all" {
        vec!["full", "no-spreading", "no-forgetting", "no-reflective"]
    } else {
        vec![ablation]
    };
    for name in &names {
        let config = apply_ablation(&base, name)?;
        let report = eval::run_eval(
            &conversations,
            &config,
            embedder.as_ref(),
            chat.as_ref(),
            &WhitespaceTokenCounter,
            name,
        );
        print!("{}", report.table());
        if let Some(rows_out) = rows_out {
            let path = rows_path_for(rows_out, name, names.len() > 1);
            std::fs::write(&path, report.rows_jsonl())
                .with_context(|| format!("writing rows {}", path.display()))?;
            println!("rows: {}", path.display());
        }
        println!();
    }
    Ok(())
}
