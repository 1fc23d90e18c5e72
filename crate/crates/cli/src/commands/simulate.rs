use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;
use socsim_core::agents::llm::EndpointConfig;
use socsim_core::agents::PolicySpec;
use socsim_core::engine::{run_batch, SimulationConfig};

use super::data::{export_jsonl, import_jsonl};
use super::{engine, open_store};
use crate::Output;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// SimulationConfig JSON file.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub parallelism: u64,
    /// JSON-lines fixtures to load into the store first.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Write the whole store as JSON lines afterwards.
    #[arg(long)]
    pub export: Option<PathBuf>,
    #[arg(long)]
    pub judge_model: Option<String>,
    #[arg(long, default_value = "default")]
    pub judge_endpoint: String,
}

/// Every LLM endpoint the config names must have a credential before any
/// episode starts.
fn check_credentials(config: &SimulationConfig) -> Result<()> {
    for a in &config.assignments {
        if let PolicySpec::Llm(spec) = &a.policy {
            EndpointConfig::from_env(&spec.endpoint)
                .with_context(|| format!("character `{}` uses endpoint `{}`", a.character, spec.endpoint))?;
        }
    }
    Ok(())
}

pub async fn run(args: SimulateArgs, store_url: Option<&str>, out: &mut Output<'_>) -> Result<()> {
    let raw = std::fs::read_to_string(&args.config).with_context(|| format!("cannot read {}", args.config.display()))?;
    let config: SimulationConfig =
        serde_json::from_str(&raw).with_context(|| format!("{} is not a valid simulation config", args.config.display()))?;
    if args.n == 0 {
        return out.emit("", &json!({"episodes": []}));
    }
    check_credentials(&config)?;

    let store = open_store(store_url).await?;
    if let Some(path) = &args.fixtures {
        let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        import_jsonl(&store, std::io::BufReader::new(file)).await?;
    }
    let ctx = engine(store.clone(), args.judge_model.as_deref(), &args.judge_endpoint)?;
    let configs = (0..args.n)
        .map(|i| SimulationConfig { seed: config.seed.wrapping_add(i as u64), ..config.clone() })
        .collect();
    let report = run_batch(&ctx, configs, args.parallelism as usize).await;

    let mut text = String::new();
    let mut rows = Vec::new();
    for entry in &report.entries {
        match &entry.result {
            Ok(()) => text.push_str(&format!("{}\n", entry.episode_pk)),
            Err(e) => text.push_str(&format!("{} failed: {e}\n", entry.episode_pk)),
        }
        rows.push(json!({
            "episode_pk": entry.episode_pk,
            "status": if entry.result.is_ok() { "completed" } else { "failed" },
            "error": entry.result.as_ref().err(),
        }));
    }
    if let Some(path) = &args.export {
        let file = std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        export_jsonl(&store, std::io::BufWriter::new(file)).await?;
    }
    out.emit(&text, &json!({"episodes": rows, "peak_in_flight": report.peak_in_flight}))?;
    let failed = report.entries.iter().filter(|e| e.result.is_err()).count();
    if failed > 0 {
        bail!("{failed} of {} episodes failed", report.entries.len());
    }
    Ok(())
}
