//! LLM-judge scoring of finished episodes.
//!
//! One judge call per subject (each agent for per-agent metrics, the episode
//! for per-episode metrics). The judge answers with
//! `{"<metric>": {"score": n, "reasoning": "..."}}`; out-of-range scores are
//! clamped and flagged, missing ones are reported as errors and never
//! invented.

use std::collections::BTreeMap;

use serde_json::Value;

use super::metrics::{DimensionScore, EvaluationMetric, MetricTarget, Subject};
use crate::agents::{ChatMessage, ChatModel, ChatRequest};
use crate::domain::{visible_fields, CharacterProfile, RelationshipType, Scenario};
use crate::engine::EpisodeRecord;
use crate::retry::RetryPolicy;

pub struct JudgeContext<'a> {
    pub scenario: &'a Scenario,
    pub cast: &'a [CharacterProfile],
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct JudgeOutcome {
    pub scores: Vec<DimensionScore>,
    pub errors: Vec<String>,
}

/// First JSON object in `text`, allowing surrounding prose.
pub fn find_json_object(text: &str) -> Option<Value> {
    if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(text.trim()) {
        return Some(v);
    }
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    match serde_json::from_str::<Value>(text.get(start..=end)?) {
        Ok(v @ Value::Object(_)) => Some(v),
        _ => None,
    }
}

fn normalize(name: &str) -> String {
    name.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase()
}

fn as_score(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().map(|f| f.round() as i64)),
        Value::String(s) => s.trim().parse::<f64>().ok().map(|f| f.round() as i64),
        _ => None,
    }
}

/// Raw (unclamped) scores per metric name found in a judge reply.
pub fn parse_scores(reply: &str, metrics: &[EvaluationMetric]) -> BTreeMap<String, (i64, String)> {
    let mut out = BTreeMap::new();
    let Some(Value::Object(map)) = find_json_object(reply) else {
        return out;
    };
    let by_key: BTreeMap<String, &Value> = map.iter().map(|(k, v)| (normalize(k), v)).collect();
    for metric in metrics {
        let Some(entry) = by_key.get(&normalize(&metric.name)) else {
            continue;
        };
        let parsed = match entry {
            Value::Object(o) => {
                let score = o.iter().find(|(k, _)| k.eq_ignore_ascii_case("score")).and_then(|(_, v)| as_score(v));
                let reasoning = o
                    .iter()
                    .find(|(k, _)| k.eq_ignore_ascii_case("reasoning"))
                    .and_then(|(_, v)| v.as_str())
                    .unwrap_or_default();
                score.map(|s| (s, reasoning.to_owned()))
            }
            Value::Array(items) if items.len() == 2 => {
                as_score(&items[1]).map(|s| (s, items[0].as_str().unwrap_or_default().to_owned()))
            }
            other => as_score(other).map(|s| (s, String::new())),
        };
        if let Some(p) = parsed {
            out.insert(metric.name.clone(), p);
        }
    }
    out
}

/// Clamps into range, noting the original value in the reasoning.
pub fn finalize_score(metric: &EvaluationMetric, subject: Subject, raw: i64, reasoning: String) -> DimensionScore {
    let range = metric.range;
    let (score, reasoning) = if range.contains(raw) {
        (raw, reasoning)
    } else {
        let clamped = range.clamp(raw);
        let note = format!("[judge score {raw} outside [{}, {}], clamped to {clamped}]", range.lo, range.hi);
        (clamped, if reasoning.is_empty() { note } else { format!("{reasoning} {note}") })
    };
    DimensionScore { metric: metric.name.clone(), subject, score, reasoning }
}

fn render_transcript(record: &EpisodeRecord, cast: &[CharacterProfile]) -> String {
    let name = |pk: &crate::domain::Pk| {
        cast.iter().find(|c| &c.pk == pk).map(|c| c.name.clone()).unwrap_or_else(|| pk.to_string())
    };
    record
        .transcript
        .iter()
        .map(|e| {
            let to = match &e.action.addressee {
                crate::broker::Addressee::Broadcast => String::new(),
                crate::broker::Addressee::Direct(pk) => format!(" (to {})", name(pk)),
            };
            format!("Turn {} | {}{} [{}]: {}", e.turn, name(&e.actor), to, e.action.kind.label(), e.action.content)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn judge_prompt(record: &EpisodeRecord, ctx: &JudgeContext<'_>, subject: &Subject, metrics: &[EvaluationMetric]) -> String {
    let mut text = format!("You are evaluating a finished social interaction.\n\nScenario:\n{}\n\n", ctx.scenario.shared_text());
    text.push_str("Participants (public information only):\n");
    for (i, c) in ctx.cast.iter().enumerate() {
        let public = visible_fields(&c.pk, c, RelationshipType::Family);
        let facts: Vec<String> = public.fields().iter().map(|(k, v)| format!("{k}: {v}")).collect();
        let goal = ctx.scenario.agent_goals.get(i).map(String::as_str).unwrap_or("");
        text.push_str(&format!("- {} ({}); goal: {goal}\n", c.name, facts.join("; ")));
    }
    text.push_str(&format!("\nTranscript:\n{}\n\n", render_transcript(record, ctx.cast)));
    match subject {
        Subject::Agent(pk) => {
            let name = ctx.cast.iter().find(|c| &c.pk == pk).map(|c| c.name.as_str()).unwrap_or(pk.as_str());
            text.push_str(&format!("Evaluate {name} on each dimension below.\n"));
        }
        Subject::Episode => text.push_str("Evaluate the episode as a whole on each dimension below.\n"),
    }
    for m in metrics {
        text.push_str(&format!("- {} [{}, {}]: {}\n", m.name, m.range.lo, m.range.hi, m.description));
    }
    text.push_str(
        "\nReason step by step, then answer with one JSON object mapping each dimension name to \
         {\"score\": <integer>, \"reasoning\": <text>}.",
    );
    text
}

pub async fn judge_episode(
    record: &EpisodeRecord,
    ctx: JudgeContext<'_>,
    metrics: &[EvaluationMetric],
    judge: &dyn ChatModel,
    model_name: &str,
    retry: &RetryPolicy,
) -> JudgeOutcome {
    let mut outcome = JudgeOutcome::default();
    let per_agent: Vec<EvaluationMetric> =
        metrics.iter().filter(|m| m.target == MetricTarget::PerAgent).cloned().collect();
    let per_episode: Vec<EvaluationMetric> =
        metrics.iter().filter(|m| m.target == MetricTarget::PerEpisode).cloned().collect();

    let mut jobs: Vec<(Subject, Vec<EvaluationMetric>)> = Vec::new();
    if !per_agent.is_empty() {
        jobs.extend(record.cast.iter().map(|pk| (Subject::Agent(pk.clone()), per_agent.clone())));
    }
    if !per_episode.is_empty() {
        jobs.push((Subject::Episode, per_episode));
    }

    for (subject, metrics) in jobs {
        let request = ChatRequest {
            model: model_name.to_owned(),
            messages: vec![ChatMessage::user(judge_prompt(record, &ctx, &subject, &metrics))],
            temperature: Some(0.0),
            max_tokens: None,
        };
        let mut found = BTreeMap::new();
        let mut last_error = None;
        for attempt in 0..=retry.max_retries {
            if attempt > 0 {
                let delay = retry.delay(attempt);
                if !delay.is_zero() {
                    tokio::time::sleep(delay).await;
                }
            }
            match judge.complete(&request).await {
                Ok(reply) => {
                    let parsed = parse_scores(&reply.content, &metrics);
                    let complete = parsed.len() == metrics.len();
                    if parsed.len() >= found.len() {
                        found = parsed;
                    }
                    if complete {
                        break;
                    }
                    last_error = Some("judge reply missing scores".to_owned());
                }
                Err(e) => last_error = Some(e.to_string()),
            }
        }
        for metric in &metrics {
            match found.remove(&metric.name) {
                Some((raw, reasoning)) => outcome.scores.push(finalize_score(metric, subject.clone(), raw, reasoning)),
                None => outcome.errors.push(format!(
                    "{} for {:?}: no score ({})",
                    metric.name,
                    subject,
                    last_error.clone().unwrap_or_else(|| "not returned".into())
                )),
            }
        }
    }
    outcome
}
