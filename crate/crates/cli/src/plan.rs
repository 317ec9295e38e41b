use std::path::PathBuf;

use asmplan::backend::chat::{ChatProposer, ChatReasoner};
use asmplan::backend::scripted::ScriptedReflector;
use asmplan::backend::FewShotConfig;
use asmplan::orchestrator::{plan, render_plan, Agents, PlanConfig, PlannerState, SubtaskList};
use asmplan::scenegraph::SceneGraph;
use clap::Args;
use serde::Serialize;

use crate::error::CliError;
use crate::kb::load_graph;
use crate::{emit, BackendArgs, Format};

#[derive(Args)]
pub struct PlanArgs {
    instruction: String,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    scene: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    /// Worked examples given to an external reasoner.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=2))]
    shots: u8,
    /// Write the reasoning trace here as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 250.0)]
    ct_limit: f64,
    /// Defaults to the scene's workstation count.
    #[arg(long)]
    stations: Option<usize>,
    #[arg(long, default_value_t = 50)]
    max_iterations: usize,
}

#[derive(Serialize)]
struct PlanOutput<'a> {
    instruction: &'a str,
    iterations: usize,
    plan: &'a SubtaskList,
}

fn write_trace(path: &Option<PathBuf>, state: &PlannerState) -> Result<(), CliError> {
    if let Some(path) = path {
        std::fs::write(path, state.trace_jsonl()).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn run(args: PlanArgs, format: Format) -> Result<(), CliError> {
    let client = args.backend.http_client()?;
    let kg = load_graph(&args.graph)?;
    let sg = SceneGraph::load(&args.scene)?;
    let config = PlanConfig {
        ct_limit: args.ct_limit,
        stations: args.stations,
        max_iterations: args.max_iterations,
        few_shot: FewShotConfig::builtin(args.shots as usize)?,
        ..PlanConfig::default()
    };
    let mut agents = match &client {
        None => Agents::scripted(),
        Some(c) => Agents {
            reasoner: Box::new(ChatReasoner::new(c)),
            proposer: Box::new(ChatProposer::new(c)),
            reflector: Box::new(ScriptedReflector),
        },
    };
    let (list, state) = match plan(&args.instruction, &kg, &sg, config, &mut agents) {
        Ok(done) => done,
        Err(failure) => {
            write_trace(&args.trace, &failure.state)?;
            return Err(failure.error.into());
        }
    };
    write_trace(&args.trace, &state)?;
    let output = PlanOutput {
        instruction: &args.instruction,
        iterations: state.t,
        plan: &list,
    };
    emit(format, &output, || render_plan(&list, &state.artifacts, &kg))
}
