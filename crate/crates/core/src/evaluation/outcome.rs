//! Pulls the agreed terms of a negotiation out of a finished episode.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use super::payoff::{NegotiationOutcome, PayoffTable};
use super::judge::find_json_object;
use crate::agents::{ChatMessage, ChatModel, ChatRequest};
use crate::agents::llm::complete_with_retry;
use crate::engine::EpisodeRecord;
use crate::retry::RetryPolicy;

fn agreement_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)AGREEMENT:\s*([^\n]*)").unwrap())
}

/// Reads the last `AGREEMENT: date=<opt>; salary=<opt>` line in the
/// transcript. Keys are the table's issue names.
pub fn extract_scripted(record: &EpisodeRecord, table: &PayoffTable) -> NegotiationOutcome {
    let last = record
        .transcript
        .iter()
        .rev()
        .find_map(|e| agreement_line().captures_iter(&e.action.content).last().map(|c| c[1].to_owned()));
    let Some(terms) = last else {
        return NegotiationOutcome::no_deal();
    };
    let pairs: BTreeMap<String, String> = terms
        .split(';')
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.trim().to_ascii_lowercase(), v.trim().to_owned()))
        .collect();
    let mut outcome = NegotiationOutcome { deal: true, ..NegotiationOutcome::default() };
    for issue in &table.issues {
        match pairs.get(&issue.name.to_ascii_lowercase()) {
            Some(v) => {
                outcome.choices.insert(issue.name.clone(), v.clone());
            }
            None => {
                return NegotiationOutcome {
                    flag: Some(format!("agreement line lacks `{}`", issue.name)),
                    ..NegotiationOutcome::no_deal()
                };
            }
        }
    }
    outcome
}

/// Asks a model for `{"deal": bool, "<issue>": "<option>", ...}`. Anything
/// unusable becomes "no deal" with a flag.
pub async fn extract_with_model(
    record: &EpisodeRecord,
    table: &PayoffTable,
    model: &dyn ChatModel,
    model_name: &str,
    retry: &RetryPolicy,
) -> NegotiationOutcome {
    let issues: Vec<String> = table
        .issues
        .iter()
        .map(|i| format!("\"{}\": one of {}", i.name, i.options.join(", ")))
        .collect();
    let transcript: Vec<String> =
        record.transcript.iter().map(|e| format!("[{}] {}: {}", e.turn, e.actor, e.action.content)).collect();
    let prompt = format!(
        "Read this negotiation transcript and report the final agreed terms.\n\n{}\n\n\
         Answer with one JSON object with exactly these fields: \"deal\" (true or false), {}.",
        transcript.join("\n"),
        issues.join(", ")
    );
    let request = ChatRequest {
        model: model_name.to_owned(),
        messages: vec![ChatMessage::user(prompt)],
        temperature: Some(0.0),
        max_tokens: Some(200),
    };
    let flagged = |why: String| NegotiationOutcome { flag: Some(why), ..NegotiationOutcome::no_deal() };
    let reply = match complete_with_retry(model, &request, retry).await {
        Ok((reply, _)) => reply,
        Err(e) => return flagged(format!("extraction call failed: {e}")),
    };
    let Some(Value::Object(map)) = find_json_object(&reply.content) else {
        return flagged("extraction reply is not a JSON object".into());
    };
    let deal = match map.get("deal") {
        Some(Value::Bool(b)) => *b,
        _ => return flagged("extraction reply lacks a boolean `deal`".into()),
    };
    if !deal {
        return NegotiationOutcome::no_deal();
    }
    let mut outcome = NegotiationOutcome { deal: true, ..NegotiationOutcome::default() };
    for issue in &table.issues {
        let value = match map.get(&issue.name) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return flagged(format!("extraction reply lacks `{}`", issue.name)),
        };
        outcome.choices.insert(issue.name.clone(), value);
    }
    outcome
}
