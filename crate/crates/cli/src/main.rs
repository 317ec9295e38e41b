mod balance;
mod error;
mod eval;
mod kb;
mod plan;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use error::CliError;

#[derive(Parser)]
#[command(name = "asmplan", version, about = "Task planning for flexible assembly lines")]
struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Scripted,
    Http,
}

#[derive(Subcommand)]
enum Command {
    /// Build and query the knowledge graph.
    #[command(subcommand)]
    Kb(KbCommand),
    /// Balance an instance on a fixed number of stations.
    Balance(balance::BalanceArgs),
    /// Turn an instruction into a station-allocated subtask list.
    Plan(plan::PlanArgs),
    /// Compute accuracy and balancing metrics.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Subcommand)]
enum KbCommand {
    /// Add process documents to a graph file, creating it if needed.
    Ingest(kb::IngestArgs),
    /// Retrieve context for a question and answer it.
    Query(kb::QueryArgs),
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Score a question corpus.
    Qa(eval::QaArgs),
    /// Score produced plans against gold plans.
    Plan(eval::PlanEvalArgs),
    /// Compare solvers on one instance.
    Balance(eval::BalanceEvalArgs),
}

/// Options shared by commands that may call a chat endpoint.
#[derive(Args, Debug, Clone)]
pub struct BackendArgs {
    #[arg(long, value_enum, default_value_t = Backend::Scripted)]
    pub backend: Backend,
}

impl BackendArgs {
    /// The HTTP client when selected; fails on missing configuration before any work.
    pub fn http_client(&self) -> Result<Option<asmplan::backend::HttpChatClient>, CliError> {
        match self.backend {
            Backend::Scripted => Ok(None),
            Backend::Http => {
                let config = asmplan::backend::HttpConfig::from_env()?;
                Ok(Some(asmplan::backend::HttpChatClient::new(config)?))
            }
        }
    }
}

pub fn read_path(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Writes `value` as JSON or the text rendering to stdout.
pub fn emit<T: Serialize>(format: Format, value: &T, text: impl FnOnce() -> String) -> Result<(), CliError> {
    let out = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Text => text(),
    };
    std::io::stdout()
        .write_all(out.as_bytes())
        .map_err(|e| CliError::Failed(format!("stdout: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Kb(KbCommand::Ingest(args)) => kb::ingest(args, cli.format),
        Command::Kb(KbCommand::Query(args)) => kb::query(args, cli.format),
        Command::Balance(args) => balance::run(args, cli.format),
        Command::Plan(args) => plan::run(args, cli.format),
        Command::Eval(EvalCommand::Qa(args)) => eval::qa(args, cli.format),
        Command::Eval(EvalCommand::Plan(args)) => eval::plan(args, cli.format),
        Command::Eval(EvalCommand::Balance(args)) => eval::balance(args, cli.format),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("ASMPLAN_LOG"))
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
