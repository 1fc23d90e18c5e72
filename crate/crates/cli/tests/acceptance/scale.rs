use std::time::Duration;

use socsim_cli::commands::stress::{rungs, stress_once};

use crate::{ensure, Verdict};

/// Tolerances: at least this many actions per second at full size.
const MIN_ACTIONS_PER_SEC: f64 = 100.0;
const AGENTS: usize = 150;
const FULL_RUN: Duration = Duration::from_secs(30);
const SWEEP_STEP: usize = 10;
const SWEEP_RUNG: Duration = Duration::from_secs(1);
/// Slack over the requested duration before a run counts as hung.
const HANG_SLACK: Duration = Duration::from_secs(10);

pub async fn check() -> Verdict {
    let full = tokio::time::timeout(FULL_RUN + HANG_SLACK, stress_once(AGENTS, FULL_RUN, 1))
        .await
        .map_err(|_| "150-agent run did not finish: deadlock".to_owned())?
        .map_err(|e| e.to_string())?;
    ensure!(
        full.actions_per_sec >= MIN_ACTIONS_PER_SEC,
        "{:.1} actions/sec < {MIN_ACTIONS_PER_SEC}",
        full.actions_per_sec
    );
    ensure!(full.deliveries > 0, "no deliveries at full size");
    let sizes = rungs(AGENTS, SWEEP_STEP, true);
    ensure!(sizes.len() == 15 && sizes[0] == 10, "sweep rungs {sizes:?}");
    let mut table = Vec::new();
    for n in sizes {
        let row = tokio::time::timeout(SWEEP_RUNG + HANG_SLACK, stress_once(n, SWEEP_RUNG, n as u64))
            .await
            .map_err(|_| format!("rung {n} did not finish"))?
            .map_err(|e| e.to_string())?;
        ensure!(row.actions > 0, "rung {n} made no progress");
        table.push(format!("{n}:{:.0}", row.actions_per_sec));
    }
    Ok(format!(
        "150 agents x 30s: {:.1} actions/sec, {:.1} deliveries/sec; sweep actions/sec {}",
        full.actions_per_sec,
        full.deliveries_per_sec,
        table.join(" ")
    ))
}
