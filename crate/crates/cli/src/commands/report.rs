use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;
use serde_json::json;
use socsim_core::engine::EpisodeRecord;
use socsim_core::evaluation::{extract_scripted, extract_with_model, score_negotiation, PayoffTable};
use socsim_core::persistence::{EntityKind, Filter, Store};
use socsim_core::retry::RetryPolicy;

use super::data::import_jsonl;
use super::open_store;
use crate::Output;

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub scenario: String,
    /// Tag key to group by; episodes are tagged `key=value;key=value`.
    #[arg(long)]
    pub group_by: String,
    /// Payoff table JSON; the hiring negotiation table when omitted.
    #[arg(long)]
    pub payoff: Option<PathBuf>,
    /// JSON-lines fixtures to load into the store first.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Read agreements with this model instead of `AGREEMENT:` lines.
    #[arg(long)]
    pub extractor_model: Option<String>,
    #[arg(long, default_value = "default")]
    pub extractor_endpoint: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub group: String,
    pub episodes: usize,
    pub deal_rate: f64,
    pub mean_candidate_points: f64,
    pub mean_manager_points: f64,
    /// Episodes whose agreement named options outside the table.
    pub unscored: usize,
}

/// Value of `key` in a tag such as `agreeableness=high;seed=3`.
pub fn tag_value<'a>(tag: &'a str, key: &str) -> Option<&'a str> {
    tag.split([';', ','])
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| k.trim() == key)
        .map(|(_, v)| v.trim())
}

pub fn csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("group,episodes,deal_rate,mean_candidate_points,mean_manager_points,unscored\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.group, r.episodes, r.deal_rate, r.mean_candidate_points, r.mean_manager_points, r.unscored
        ));
    }
    out
}

/// Per-group means over the scenario's tagged episodes, sorted by group.
/// Groups with no scoreable episode are left out.
pub async fn report_rows(
    store: &Store,
    scenario: &str,
    group_by: &str,
    table: &PayoffTable,
    extractor: Option<(&dyn socsim_core::agents::ChatModel, &str)>,
) -> Result<Vec<ReportRow>> {
    let mut filter = Filter::new();
    filter.insert("scenario".to_owned(), scenario.to_owned());
    let episodes: Vec<EpisodeRecord> = store.list_typed(EntityKind::Episode, &filter).await?;
    let retry = RetryPolicy::default();

    #[derive(Default)]
    struct Acc {
        n: usize,
        deals: u64,
        candidate: i64,
        manager: i64,
        unscored: usize,
    }
    let mut groups: BTreeMap<String, Acc> = BTreeMap::new();
    for record in &episodes {
        let Some(group) = record.tag.as_deref().and_then(|t| tag_value(t, group_by)) else { continue };
        let outcome = match extractor {
            Some((model, name)) => extract_with_model(record, table, model, name, &retry).await,
            None => extract_scripted(record, table),
        };
        let acc = groups.entry(group.to_owned()).or_default();
        match score_negotiation(&outcome, table) {
            Ok(score) => {
                acc.n += 1;
                acc.deals += u64::from(score.deal_made);
                acc.candidate += score.candidate;
                acc.manager += score.manager;
            }
            Err(e) => {
                tracing::warn!(episode = %record.pk, "cannot score agreement: {e}");
                acc.unscored += 1;
            }
        }
    }
    Ok(groups
        .into_iter()
        .filter(|(_, a)| a.n > 0)
        .map(|(group, a)| {
            let n = a.n as f64;
            ReportRow {
                group,
                episodes: a.n,
                deal_rate: a.deals as f64 / n,
                mean_candidate_points: a.candidate as f64 / n,
                mean_manager_points: a.manager as f64 / n,
                unscored: a.unscored,
            }
        })
        .collect())
}

pub async fn run(args: ReportArgs, store_url: Option<&str>, out: &mut Output<'_>) -> Result<()> {
    let table = match &args.payoff {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            PayoffTable::from_json(&text).with_context(|| format!("{} is not a valid payoff table", path.display()))?
        }
        None => PayoffTable::hiring_negotiation(),
    };
    let store = open_store(store_url).await?;
    if let Some(path) = &args.fixtures {
        let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        import_jsonl(&store, std::io::BufReader::new(file)).await?;
    }
    let model = match &args.extractor_model {
        Some(_) => Some(
            socsim_core::agents::ModelRegistry::default()
                .resolve(&args.extractor_endpoint)
                .context("extractor endpoint")?,
        ),
        None => None,
    };
    let extractor = model.as_deref().zip(args.extractor_model.as_deref());
    let rows = report_rows(&store, &args.scenario, &args.group_by, &table, extractor).await?;
    out.emit(&csv(&rows), &json!({"rows": rows}))
}
