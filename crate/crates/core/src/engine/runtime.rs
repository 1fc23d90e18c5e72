use rand_chacha::ChaCha8Rng;

use crate::agents::{AgentView, Decision, DecisionContext, Policy};
use crate::broker::Observation;
use crate::domain::Pk;
use crate::retry::RetryPolicy;

/// Consecutive failed turns after which an agent is removed.
pub const MAX_CONSECUTIVE_FAILURES: u32 = 3;

pub enum TurnOutcome {
    Decided(Decision),
    /// Every attempt failed. `expel` is set once the failure streak is long enough.
    Failed { error: String, expel: bool },
}

/// One agent: its policy, what it has seen, and its random stream.
pub struct AgentRuntime {
    pub pk: Pk,
    policy: Box<dyn Policy>,
    view: AgentView,
    rng: ChaCha8Rng,
    retry: RetryPolicy,
    failures: u32,
}

impl AgentRuntime {
    pub fn new(pk: Pk, policy: Box<dyn Policy>, view: AgentView, rng: ChaCha8Rng, retry: RetryPolicy) -> Self {
        Self { pk, policy, view, rng, retry, failures: 0 }
    }

    pub async fn take_turn(&mut self, turn: u32, observations: Vec<Observation>) -> TurnOutcome {
        let fresh = self.view.absorb(observations);
        if let Some(limit) = self.policy.history_limit() {
            self.view.trim_history(limit);
        }
        let mut last_error = String::new();
        for attempt in 0..=self.retry.max_retries {
            if attempt > 0 {
                tracing::warn!(agent = %self.pk, attempt, error = %last_error, "retrying agent decision");
                let delay = self.retry.delay(attempt);
                if !delay.is_zero() {
                    tokio::time::sleep(delay).await;
                }
            }
            let ctx = DecisionContext { turn, view: &self.view, fresh: &fresh, rng: &mut self.rng };
            match self.policy.decide(ctx).await {
                Ok(decision) => {
                    self.failures = 0;
                    return TurnOutcome::Decided(decision);
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        self.failures += 1;
        TurnOutcome::Failed { error: last_error, expel: self.failures >= MAX_CONSECUTIVE_FAILURES }
    }
}
