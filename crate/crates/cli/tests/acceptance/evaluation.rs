use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use socsim_core::domain::{CharacterProfile, Scenario};
use socsim_core::engine::{run_episode, Assignment, EngineContext, RunOptions, SimulationConfig};
use socsim_core::evaluation::{default_suite, Subject};
use socsim_core::persistence::Store;
use socsim_core::retry::RetryPolicy;

use crate::stub::Recording;
use crate::{ensure, Verdict};

/// Metric names and closed ranges, written out independently.
const SUITE: [(&str, i64, i64); 7] = [
    ("Goal Completion", 0, 10),
    ("Believability", 0, 10),
    ("Knowledge", 0, 10),
    ("Secret", -10, 0),
    ("Relationship", -5, 5),
    ("Social Rules", -10, 0),
    ("Financial and Material Benefits", -5, 5),
];

/// Tolerance: every stored score inside its range, every clamp flagged.
const EPISODES: u64 = 20;

pub async fn check() -> Verdict {
    let suite = default_suite();
    ensure!(suite.len() == 7, "default suite has {} metrics", suite.len());
    for (name, lo, hi) in SUITE {
        let m = suite.iter().find(|m| m.name == name).ok_or(format!("missing metric {name}"))?;
        ensure!((m.range.lo, m.range.hi) == (lo, hi), "{name} range [{}, {}]", m.range.lo, m.range.hi);
    }

    let store = Store::memory();
    store.put_scenario(&Scenario::new("s", "Two neighbours talk.", vec!["a".into(), "b".into()])).await.unwrap();
    for pk in ["x", "y"] {
        store.put_character(&CharacterProfile::new(pk, pk.to_uppercase(), 40)).await.unwrap();
    }
    let names: Vec<String> = suite.iter().map(|m| m.name.clone()).collect();
    // Every reply is out of range, as integers, numeric strings or floats.
    let judge = Recording::new(move |_, call| {
        let mut rng = ChaCha8Rng::seed_from_u64(call as u64);
        let scores: Map<String, Value> = names
            .iter()
            .map(|n| {
                let wild: i64 = if rng.random_bool(0.5) { rng.random_range(11..10_000) } else { -rng.random_range(11..10_000) };
                let v = match rng.random_range(0..3) {
                    0 => json!(wild),
                    1 => json!(wild.to_string()),
                    _ => json!(wild as f64 + 0.5),
                };
                (n.clone(), json!({"score": v, "reasoning": "adversarial"}))
            })
            .collect();
        Value::Object(scores).to_string()
    });
    let ctx = EngineContext::new(store).with_retry(RetryPolicy::immediate(1)).with_judge(judge.clone(), "adversary");
    let mut scores = 0;
    for seed in 0..EPISODES {
        let leave = serde_json::from_value(json!({"scripted": {"script": "leave_at_turn", "turn": 2}})).unwrap();
        let config = SimulationConfig {
            metrics: suite.clone(),
            seed,
            ..SimulationConfig::new(
                "s",
                vec![
                    Assignment { character: "x".into(), policy: leave },
                    Assignment {
                        character: "y".into(),
                        policy: serde_json::from_value(json!({"scripted": {"script": "always_speak"}})).unwrap(),
                    },
                ],
            )
        };
        let record = run_episode(&ctx, &config, &RunOptions::default()).await.map_err(|e| e.to_string())?;
        ensure!(record.evaluations.len() == 14, "episode {seed}: {} scores, expected 14", record.evaluations.len());
        for s in &record.evaluations {
            let (_, lo, hi) = SUITE.iter().find(|(n, _, _)| *n == s.metric).ok_or(format!("unknown metric {}", s.metric))?;
            ensure!((*lo..=*hi).contains(&s.score), "{} = {} outside [{lo}, {hi}]", s.metric, s.score);
            ensure!(s.reasoning.contains("clamped"), "{} clamp not flagged: {}", s.metric, s.reasoning);
            ensure!(matches!(s.subject, Subject::Agent(_)), "{} scored the episode, not an agent", s.metric);
            scores += 1;
        }
    }
    Ok(format!("7 metrics exact; {scores} adversarial scores all clamped and flagged over {} judge calls", judge.calls()))
}
