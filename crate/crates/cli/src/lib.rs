//! Operator commands: serve the API, run batches, stress the engine, report
//! negotiation outcomes and move fixtures in and out of the store.

pub mod commands;

use std::io::Write;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde_json::Value;

#[derive(Debug, Parser)]
#[command(name = "socsim", version, about = "Multi-agent social interaction simulator")]
pub struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Store URL (`memory://` or `redis://host:port/db`); defaults to $STORE_URL.
    #[arg(long, global = true)]
    pub store_url: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Start the HTTP and WebSocket server.
    Serve(commands::serve::ServeArgs),
    /// Run a config N times and print the episode pks.
    Simulate(commands::simulate::SimulateArgs),
    /// Measure engine throughput with scripted chatter agents.
    Stress(commands::stress::StressArgs),
    /// Per-group negotiation outcome means as CSV.
    Report(commands::report::ReportArgs),
    /// Import or export entities as JSON lines.
    Data {
        #[command(subcommand)]
        action: DataAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum DataAction {
    /// Load `{"kind": ..., "document": ...}` lines into the store.
    Import { file: PathBuf },
    /// Write every stored entity as JSON lines.
    Export { file: PathBuf },
}

/// Where command output goes, in text or JSON form.
pub struct Output<'a> {
    pub json: bool,
    pub out: &'a mut dyn Write,
}

impl Output<'_> {
    /// Writes `text` in text mode, or `value` as one JSON line in JSON mode.
    pub fn emit(&mut self, text: &str, value: &Value) -> Result<()> {
        if self.json {
            writeln!(self.out, "{value}")?;
        } else {
            write!(self.out, "{text}")?;
            if !text.ends_with('\n') && !text.is_empty() {
                writeln!(self.out)?;
            }
        }
        self.out.flush()?;
        Ok(())
    }
}

pub async fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let mut output = Output { json: cli.json, out };
    let store_url = cli.store_url;
    match cli.command {
        Command::Serve(args) => commands::serve::run(args, store_url.as_deref(), &mut output).await,
        Command::Simulate(args) => commands::simulate::run(args, store_url.as_deref(), &mut output).await,
        Command::Stress(args) => commands::stress::run(args, &mut output).await,
        Command::Report(args) => commands::report::run(args, store_url.as_deref(), &mut output).await,
        Command::Data { action } => commands::data::run(action, store_url.as_deref(), &mut output).await,
    }
}
