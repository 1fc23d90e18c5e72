use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use socsim_core::domain::{CharacterProfile, Pk, Scenario};
use socsim_core::engine::{run_episode, Assignment, EngineContext, RunOptions, SimulationConfig, Termination};
use socsim_core::persistence::Store;

use crate::{ensure, Verdict};

/// Tolerance: exact schedule match in every one of this many cases.
const CASES: u64 = 256;

/// `(round, slot)` sequence and termination expected when slot `i` leaves in
/// round `leave[i]`.
fn expected(n: usize, rounds: u32, leave: &[Option<u32>]) -> (Vec<(u32, usize)>, Termination) {
    let mut seq = Vec::new();
    let mut gone = vec![false; n];
    for round in 1..=rounds {
        for slot in 0..n {
            if gone[slot] {
                continue;
            }
            seq.push((round, slot));
            if leave[slot] == Some(round) {
                gone[slot] = true;
            }
        }
        if gone.iter().filter(|g| !**g).count() < 2 {
            return (seq, Termination::AllLeft);
        }
    }
    (seq, Termination::MaxTurns)
}

async fn one_case(case: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(case);
    let n = rng.random_range(2..=10usize);
    let rounds = rng.random_range(1..=20u32);
    let leave: Vec<Option<u32>> =
        (0..n).map(|_| rng.random_bool(0.3).then(|| rng.random_range(1..=rounds))).collect();

    let store = Store::memory();
    store
        .put_scenario(&Scenario::new("s", "A round table.", (0..n).map(|i| format!("goal {i}")).collect()))
        .await
        .map_err(|e| e.to_string())?;
    let mut assignments = Vec::new();
    for (slot, at) in leave.iter().enumerate() {
        let c = CharacterProfile::new(format!("c{slot}"), format!("Person{slot}"), 30);
        store.put_character(&c).await.map_err(|e| e.to_string())?;
        let script = match at {
            Some(turn) => json!({"scripted": {"script": "leave_at_turn", "turn": turn}}),
            None => json!({"scripted": {"script": "always_speak"}}),
        };
        assignments.push(Assignment { character: c.pk, policy: serde_json::from_value(script).unwrap() });
    }
    let config = SimulationConfig { max_turns: rounds, ..SimulationConfig::new("s", assignments) };
    let record = run_episode(&EngineContext::new(store), &config, &RunOptions::default())
        .await
        .map_err(|e| format!("case {case}: {e}"))?;
    let slot_of = |pk: &Pk| pk.as_str()[1..].parse::<usize>().unwrap();
    let got: Vec<(u32, usize)> = record.transcript.iter().map(|e| (e.turn, slot_of(&e.actor))).collect();
    let (want, termination) = expected(n, rounds, &leave);
    ensure!(got == want, "case {case} (n={n}, rounds={rounds}, leave={leave:?}): got {got:?}, expected {want:?}");
    ensure!(record.termination == termination, "case {case}: termination {:?}, expected {termination:?}", record.termination);
    Ok(())
}

pub async fn check() -> Verdict {
    for case in 0..CASES {
        one_case(case).await?;
    }
    Ok(format!("{CASES} seeded cases, rosters 2-10, up to 20 rounds, with departures"))
}
