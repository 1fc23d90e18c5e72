use serde_json::{json, Value};
use socsim_core::domain::{CharacterProfile, Scenario};
use socsim_core::engine::{run_batch, Assignment, EngineContext, SimulationConfig, TurnMode};
use socsim_core::persistence::{EntityKind, Store};

use crate::{ensure, Verdict};

const PARALLELISM: [usize; 3] = [1, 3, 8];
const COPIES: usize = 6;

async fn store() -> Store {
    let store = Store::memory();
    store.put_scenario(&Scenario::new("s", "A party.", (0..4).map(|i| format!("goal {i}")).collect())).await.unwrap();
    for i in 0..4 {
        store.put_character(&CharacterProfile::new(format!("c{i}"), format!("P{i}"), 30)).await.unwrap();
    }
    store
}

fn config(mode: TurnMode, seed: u64) -> SimulationConfig {
    let chatter = serde_json::from_value(json!({"scripted": {"script": "chatter", "reply_probability": 0.4, "idle_ms": 300}})).unwrap();
    let assignments = (0..4).map(|i| Assignment { character: format!("c{i}").into(), policy: Clone::clone(&chatter) }).collect();
    SimulationConfig { mode, seed, max_turns: 25, wall_clock_budget_ms: Some(20_000), ..SimulationConfig::new("s", assignments) }
}

/// Persisted episode bodies without the fields that identify the run.
async fn bodies(configs: Vec<SimulationConfig>, parallelism: usize) -> Result<Vec<String>, String> {
    let store = store().await;
    let report = run_batch(&EngineContext::new(store.clone()), configs, parallelism).await;
    let mut out = Vec::new();
    for entry in &report.entries {
        entry.result.clone().map_err(|e| format!("{}: {e}", entry.episode_pk))?;
        let mut doc: Value = store.get(EntityKind::Episode, &entry.episode_pk).await.map_err(|e| e.to_string())?;
        let obj = doc.as_object_mut().ok_or("episode is not an object")?;
        obj.remove("pk");
        obj.remove("created_at");
        out.push(doc.to_string());
    }
    Ok(out)
}

pub async fn check() -> Verdict {
    let mut entries = 0;
    for mode in [TurnMode::RoundRobin, TurnMode::Simultaneous] {
        let reference = bodies(vec![config(mode, 42)], 1).await?.remove(0);
        ensure!(reference.contains("\"transcript\""), "no transcript persisted");
        for p in PARALLELISM {
            let all = bodies(vec![config(mode, 42); COPIES], p).await?;
            ensure!(all.iter().all(|b| *b == reference), "{mode:?} differs at parallelism {p}");
        }
        let other = bodies(vec![config(mode, 43)], 1).await?.remove(0);
        ensure!(other != reference, "{mode:?}: a different seed gave the same episode, the check is vacuous");
        let parsed: Value = serde_json::from_str(&reference).unwrap();
        entries += parsed["transcript"].as_array().map_or(0, Vec::len);
    }
    Ok(format!("both modes byte-identical across runs and parallelism {PARALLELISM:?} ({entries} reference entries)"))
}
