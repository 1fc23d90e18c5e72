//! Deterministic scoring for two-role, multi-issue negotiations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolePoints {
    pub candidate: Vec<i64>,
    pub manager: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub name: String,
    pub options: Vec<String>,
    pub points: RolePoints,
}

impl Issue {
    /// Index of the option matching `raw`, tolerating `$110k`-style spelling.
    pub fn option_index(&self, raw: &str) -> Option<usize> {
        let wanted = normalize_option(raw);
        self.options.iter().position(|o| normalize_option(o) == wanted)
    }

    /// The per-option role sum when it is the same for every option.
    pub fn constant_total(&self) -> Option<i64> {
        let mut sums = self.points.candidate.iter().zip(&self.points.manager).map(|(c, m)| c + m);
        let first = sums.next()?;
        sums.all(|s| s == first).then_some(first)
    }
}

fn normalize_option(raw: &str) -> String {
    raw.trim()
        .trim_start_matches('$')
        .trim_end_matches(['k', 'K'])
        .trim()
        .to_ascii_lowercase()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayoffTable {
    pub issues: Vec<Issue>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PayoffError {
    #[error("issue `{issue}`: {problem}")]
    Malformed { issue: String, problem: String },
    #[error("issue `{issue}` has no option `{option}`")]
    UnknownOption { issue: String, option: String },
    #[error("outcome does not choose an option for issue `{0}`")]
    MissingIssue(String),
    #[error("invalid payoff table JSON: {0}")]
    Json(String),
}

const HIRING_NEGOTIATION: &str = include_str!("../../data/hiring_negotiation.json");

impl PayoffTable {
    /// Start date and salary, five options each, zero-sum between candidate
    /// and manager.
    pub fn hiring_negotiation() -> Self {
        Self::from_json(HIRING_NEGOTIATION).expect("bundled table is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, PayoffError> {
        let table: PayoffTable = serde_json::from_str(text).map_err(|e| PayoffError::Json(e.to_string()))?;
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), PayoffError> {
        for issue in &self.issues {
            let malformed = |problem: &str| PayoffError::Malformed { issue: issue.name.clone(), problem: problem.into() };
            let n = issue.options.len();
            if n == 0 {
                return Err(malformed("no options"));
            }
            if issue.points.candidate.len() != n || issue.points.manager.len() != n {
                return Err(malformed("points do not match options"));
            }
            if issue.constant_total().is_none() {
                return Err(malformed("role points do not sum to a constant"));
            }
        }
        Ok(())
    }

    pub fn issue(&self, name: &str) -> Option<&Issue> {
        self.issues.iter().find(|i| i.name == name)
    }

    /// Best achievable total for the candidate.
    pub fn candidate_max(&self) -> i64 {
        self.issues.iter().map(|i| i.points.candidate.iter().copied().max().unwrap_or(0)).sum()
    }
}

/// What was agreed, one chosen option per issue.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationOutcome {
    pub deal: bool,
    #[serde(default)]
    pub choices: BTreeMap<String, String>,
    /// Why extraction fell back to "no deal", if it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

impl NegotiationOutcome {
    pub fn no_deal() -> Self {
        Self::default()
    }

    pub fn deal<'a>(choices: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Self {
            deal: true,
            choices: choices.into_iter().map(|(k, v)| (k.to_owned(), v.to_owned())).collect(),
            flag: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationScore {
    pub deal_made: u8,
    pub candidate: i64,
    pub manager: i64,
}

pub fn score_negotiation(outcome: &NegotiationOutcome, table: &PayoffTable) -> Result<NegotiationScore, PayoffError> {
    if !outcome.deal {
        return Ok(NegotiationScore::default());
    }
    let mut score = NegotiationScore { deal_made: 1, candidate: 0, manager: 0 };
    for issue in &table.issues {
        let chosen = outcome.choices.get(&issue.name).ok_or_else(|| PayoffError::MissingIssue(issue.name.clone()))?;
        let idx = issue
            .option_index(chosen)
            .ok_or_else(|| PayoffError::UnknownOption { issue: issue.name.clone(), option: chosen.clone() })?;
        score.candidate += issue.points.candidate[idx];
        score.manager += issue.points.manager[idx];
    }
    Ok(score)
}
