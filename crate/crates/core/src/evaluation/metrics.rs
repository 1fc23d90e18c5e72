use serde::{Deserialize, Serialize};

use crate::domain::Pk;

/// Closed integer interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRange {
    pub lo: i64,
    pub hi: i64,
}

impl ScoreRange {
    pub const fn new(lo: i64, hi: i64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, score: i64) -> bool {
        self.lo <= score && score <= self.hi
    }

    pub fn clamp(&self, score: i64) -> i64 {
        score.clamp(self.lo, self.hi)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricTarget {
    #[default]
    PerAgent,
    PerEpisode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationMetric {
    pub name: String,
    pub description: String,
    pub range: ScoreRange,
    #[serde(default)]
    pub target: MetricTarget,
}

impl EvaluationMetric {
    pub fn new(name: impl Into<String>, description: impl Into<String>, lo: i64, hi: i64) -> Self {
        Self { name: name.into(), description: description.into(), range: ScoreRange::new(lo, hi), target: MetricTarget::PerAgent }
    }

    pub fn per_episode(mut self) -> Self {
        self.target = MetricTarget::PerEpisode;
        self
    }
}

/// Problems with a metric list, as human-readable strings.
pub fn validate_metrics(metrics: &[EvaluationMetric]) -> Vec<String> {
    let mut problems = Vec::new();
    for (i, m) in metrics.iter().enumerate() {
        if m.range.lo > m.range.hi {
            problems.push(format!("metric `{}` has an empty range", m.name));
        }
        if metrics[..i].iter().any(|other| other.name == m.name) {
            problems.push(format!("metric `{}` is defined twice", m.name));
        }
    }
    problems
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Agent(Pk),
    Episode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionScore {
    pub metric: String,
    pub subject: Subject,
    pub score: i64,
    pub reasoning: String,
}

/// The seven per-agent dimensions scored by default.
pub fn default_suite() -> Vec<EvaluationMetric> {
    vec![
        EvaluationMetric::new(
            "Goal Completion",
            "How well the agent achieved its social goal in this episode.",
            0,
            10,
        ),
        EvaluationMetric::new(
            "Believability",
            "Whether the agent behaved naturally and consistently with its character profile and traits.",
            0,
            10,
        ),
        EvaluationMetric::new(
            "Knowledge",
            "How effectively the agent acquired new, relevant information during the interaction.",
            0,
            10,
        ),
        EvaluationMetric::new(
            "Secret",
            "Whether the agent kept its private information private; 0 means nothing leaked, lower means more leaked.",
            -10,
            0,
        ),
        EvaluationMetric::new(
            "Relationship",
            "How the interaction changed the agent's relationships, social status and reputation.",
            -5,
            5,
        ),
        EvaluationMetric::new(
            "Social Rules",
            "Whether the agent respected social norms and legal rules; 0 means no violations.",
            -10,
            0,
        ),
        EvaluationMetric::new(
            "Financial and Material Benefits",
            "Immediate and long-term economic utility the agent gained or lost.",
            -5,
            5,
        ),
    ]
}
