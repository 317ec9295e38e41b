use std::path::{Path, PathBuf};

use asmplan::backend::chat::ChatSynthesizer;
use asmplan::backend::scripted::ScriptedSynthesizer;
use asmplan::kgraph::{KnowledgeGraph, ProcessDocument};
use asmplan::retrieval::{Answer, Candidate, KnowledgeAgent, Query, Synthesizer, DEFAULT_K};
use clap::Args;
use serde::Serialize;

use crate::error::CliError;
use crate::{emit, BackendArgs, Format};

#[derive(Args)]
pub struct IngestArgs {
    /// Process document files.
    #[arg(required = true)]
    docs: Vec<PathBuf>,
    /// Graph file; created when missing.
    #[arg(long)]
    graph: PathBuf,
}

#[derive(Args)]
pub struct QueryArgs {
    question: String,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Serialize)]
struct IngestSummary {
    documents: usize,
    entities_added: usize,
    relations_added: usize,
    entities: usize,
    relations: usize,
}

pub fn load_graph(path: &Path) -> Result<KnowledgeGraph, CliError> {
    Ok(KnowledgeGraph::load(path)?)
}

pub fn ingest(args: IngestArgs, format: Format) -> Result<(), CliError> {
    let mut g = if args.graph.exists() {
        load_graph(&args.graph)?
    } else {
        KnowledgeGraph::new()
    };
    let mut summary = IngestSummary {
        documents: 0,
        entities_added: 0,
        relations_added: 0,
        entities: 0,
        relations: 0,
    };
    for path in &args.docs {
        let doc = ProcessDocument::load(path)?;
        let stats = g
            .ingest(&doc)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for c in &stats.conflicts {
            tracing::warn!(?c, "attribute overwritten");
        }
        summary.documents += 1;
        summary.entities_added += stats.entities_added;
        summary.relations_added += stats.relations_added;
    }
    g.save(&args.graph)?;
    summary.entities = g.entity_count();
    summary.relations = g.relation_count();
    emit(format, &summary, || {
        format!(
            "ingested {} document(s) into {}: +{} entities, +{} relations ({} entities, {} relations total)\n",
            summary.documents,
            args.graph.display(),
            summary.entities_added,
            summary.relations_added,
            summary.entities,
            summary.relations
        )
    })
}

#[derive(Serialize)]
struct QueryReport<'a> {
    candidates: &'a [Candidate],
    context: Vec<&'a str>,
    answer: Option<&'a Answer>,
}

pub fn query(args: QueryArgs, format: Format) -> Result<(), CliError> {
    let client = args.backend.http_client()?;
    let g = load_graph(&args.graph)?;
    let agent = KnowledgeAgent::with_k(&g, args.k);
    let q = Query::new(args.question.clone())?;
    let retrieval = agent.two_layer(&q)?;
    if retrieval.candidates.is_empty() {
        let empty = QueryReport {
            candidates: &[],
            context: Vec::new(),
            answer: None,
        };
        return emit(format, &empty, || "no candidates\n".to_string());
    }
    let answer = match &client {
        Some(c) => ChatSynthesizer::new(c).synthesize(&q, &retrieval)?,
        None => ScriptedSynthesizer.synthesize(&q, &retrieval)?,
    };
    let report = QueryReport {
        candidates: &retrieval.candidates.0,
        context: retrieval.context.blocks.iter().map(|b| b.text.as_str()).collect(),
        answer: Some(&answer),
    };
    emit(format, &report, || {
        let mut out = String::from("Candidates:\n");
        for (i, c) in retrieval.candidates.0.iter().enumerate() {
            out.push_str(&format!("  {}. {} ({:.3})\n", i + 1, c.id, c.score));
        }
        out.push_str("Context:\n");
        for line in retrieval.context.render().lines() {
            out.push_str(&format!("  {line}\n"));
        }
        out.push_str(&format!("Answer: {}\n", answer.text));
        out
    })
}
