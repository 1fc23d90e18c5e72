//! Episode scoring: LLM-judge dimensions and the deterministic negotiation
//! payoff scorer.

mod judge;
mod metrics;
mod outcome;
mod payoff;

pub use judge::{finalize_score, find_json_object, judge_episode, parse_scores, JudgeContext, JudgeOutcome};
pub use metrics::{
    default_suite, validate_metrics, DimensionScore, EvaluationMetric, MetricTarget, ScoreRange, Subject,
};
pub use outcome::{extract_scripted, extract_with_model};
pub use payoff::{score_negotiation, Issue, NegotiationOutcome, NegotiationScore, PayoffError, PayoffTable, RolePoints};
