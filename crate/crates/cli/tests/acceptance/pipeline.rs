use crate::common::recorded_pipeline;
use crate::{ensure, Verdict};

/// Tolerance: the CSV must match exactly.
const EXPECTED: [&str; 3] = [
    "group,episodes,deal_rate,mean_candidate_points,mean_manager_points,unscored",
    // 8400, no deal, 4200, 4200 for the candidate; 0, 0, 4200, 4200 for the manager.
    "high,4,0.75,4200,2100,0",
    "low,4,0,0,0,0",
];

pub async fn check() -> Verdict {
    let p = recorded_pipeline().await;
    let lines: Vec<&str> = p.csv.lines().collect();
    ensure!(lines == EXPECTED, "report was {lines:?}");
    ensure!(p.candidate_calls == 8, "{} recorded candidate calls, expected 8", p.candidate_calls);
    Ok(format!("recorded stub, 8 episodes: {} | {}", EXPECTED[1], EXPECTED[2]))
}
