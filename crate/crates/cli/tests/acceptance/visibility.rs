use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use socsim_core::agents::{LlmSpec, ModelRegistry, PolicySpec};
use socsim_core::domain::{visible_fields, CharacterProfile, Relationship, RelationshipType, Scenario};
use socsim_core::engine::{run_episode, Assignment, EngineContext, RunOptions, SimulationConfig, TurnMode};
use socsim_core::evaluation::default_suite;
use socsim_core::persistence::Store;
use socsim_core::retry::RetryPolicy;

use crate::stub::Recording;
use crate::{ensure, Verdict};

/// Tolerance: zero leaked tokens over this many episodes.
const EPISODES: usize = 100;

const KINDS: [RelationshipType; 5] = [
    RelationshipType::Stranger,
    RelationshipType::Acquaintance,
    RelationshipType::Friend,
    RelationshipType::Romantic,
    RelationshipType::Family,
];

/// Profile fields by name, each with a token unique to episode and slot.
const FIELDS: [&str; 10] =
    ["gender", "occupation", "pronouns", "personality", "moral_values", "decision_style", "public_info", "extra_public", "secret_info", "extra_private"];

/// Which fields a viewer may see, written out per relationship kind.
fn allowed(kind: RelationshipType) -> &'static [&'static str] {
    const BASIC: &[&str] = &["name", "gender", "pronouns", "age", "occupation"];
    const FRIEND: &[&str] = &["name", "gender", "pronouns", "age", "occupation", "public_info", "extra_public"];
    const CLOSE: &[&str] = &[
        "name", "gender", "pronouns", "age", "occupation", "public_info", "extra_public", "personality", "moral_values",
        "decision_style",
    ];
    match kind {
        RelationshipType::Stranger => &[],
        RelationshipType::Acquaintance => BASIC,
        RelationshipType::Friend => FRIEND,
        RelationshipType::Romantic | RelationshipType::Family => CLOSE,
    }
}

fn token(field: &str, ep: usize, slot: usize) -> String {
    format!("{}TOK{ep}x{slot}", field.to_ascii_uppercase().replace('_', ""))
}

fn profile(ep: usize, slot: usize) -> CharacterProfile {
    let t = |field: &str| token(field, ep, slot);
    let mut c = CharacterProfile::new(format!("e{ep}c{slot}"), format!("Name{slot}"), 20 + slot as i64);
    c.gender = Some(t("gender"));
    c.occupation = t("occupation");
    c.pronouns = t("pronouns");
    c.personality.openness = t("personality");
    c.moral_values = vec![t("moral_values")];
    c.decision_style = Some(t("decision_style"));
    c.public_info = t("public_info");
    c.secret_info = t("secret_info");
    c.extra_public.insert("hobby".into(), t("extra_public"));
    c.extra_private.insert("debt".into(), t("extra_private"));
    c
}

fn field_of_key(key: &str) -> &str {
    key.split('.').next().unwrap_or(key)
}

fn lattice_checks() -> Result<(), String> {
    let target = profile(0, 0);
    let keys = |kind| -> BTreeSet<String> {
        visible_fields(&"viewer".into(), &target, kind).keys().map(|k| field_of_key(k).to_owned()).collect()
    };
    ensure!(keys(RelationshipType::Stranger).is_empty(), "stranger view is not empty");
    let everything: BTreeSet<String> = target.full_view().keys().map(|k| field_of_key(k).to_owned()).collect();
    let non_secret: BTreeSet<String> =
        everything.iter().filter(|k| *k != "secret_info" && *k != "extra_private").cloned().collect();
    ensure!(keys(RelationshipType::Family) == non_secret, "family view {:?} != {non_secret:?}", keys(RelationshipType::Family));
    for pair in KINDS.windows(2) {
        let (lo, hi) = (keys(pair[0]), keys(pair[1]));
        ensure!(lo.is_subset(&hi), "{:?} sees more than {:?}", pair[0], pair[1]);
    }
    for kind in KINDS {
        let want: BTreeSet<String> = allowed(kind).iter().map(|s| s.to_string()).collect();
        ensure!(keys(kind) == want, "{kind:?} view {:?}, expected {want:?}", keys(kind));
    }
    Ok(())
}

struct Whisper {
    from: usize,
    to: usize,
    token: String,
}

struct Audit {
    leaks: Vec<String>,
    own_secret_seen: bool,
    whispers_heard: usize,
}

async fn audit_episode(ep: usize, rng: &mut ChaCha8Rng) -> Result<Audit, String> {
    let arity = if ep.is_multiple_of(2) { 2 } else { 5 };
    let store = Store::memory();
    let goals = (0..arity).map(|i| format!("goal {i}")).collect();
    store.put_scenario(&Scenario::new(format!("s{ep}"), "A meeting.", goals)).await.map_err(|e| e.to_string())?;
    let cast: Vec<CharacterProfile> = (0..arity).map(|i| profile(ep, i)).collect();
    for c in &cast {
        store.put_character(c).await.map_err(|e| e.to_string())?;
    }
    let mut kinds = BTreeMap::new();
    for a in 0..arity {
        for b in a + 1..arity {
            let kind = KINDS[rng.random_range(0..KINDS.len())];
            if kind != RelationshipType::Stranger || rng.random_bool(0.5) {
                let edge = Relationship::new(format!("r{a}-{b}"), cast[a].pk.clone(), cast[b].pk.clone(), kind);
                store.put_relationship(&edge).await.map_err(|e| e.to_string())?;
            }
            kinds.insert((a, b), kind);
            kinds.insert((b, a), kind);
        }
    }

    let whispers: Arc<Mutex<Vec<Whisper>>> = Arc::default();
    let registry = ModelRegistry::new(8);
    let mut models = Vec::new();
    for i in 0..arity {
        let names: Vec<String> = cast.iter().map(|c| c.name.clone()).collect();
        let whispers = Arc::clone(&whispers);
        let seed: u64 = rng.random();
        let model = Recording::new(move |_, call| {
            let mut r = ChaCha8Rng::seed_from_u64(seed ^ call as u64);
            match r.random_range(0..100) {
                0..40 => format!("action_type: speak\nargument: hello from {}", names[i]),
                40..75 => {
                    let to = (i + 1 + r.random_range(0..names.len() - 1)) % names.len();
                    let token = format!("WHISPER{ep}x{i}x{call}");
                    whispers.lock().unwrap().push(Whisper { from: i, to, token: token.clone() });
                    format!("action_type: speak\nargument: between us {token}\nto: {}", names[to])
                }
                75..85 => "action_type: non-verbal communication\nargument: smiles".to_owned(),
                85..97 => "action_type: none\nargument:".to_owned(),
                _ => "action_type: leave\nargument:".to_owned(),
            }
        });
        registry.register(format!("agent{i}"), model.clone());
        models.push(model);
    }
    let assignments = cast
        .iter()
        .enumerate()
        .map(|(i, c)| Assignment {
            character: c.pk.clone(),
            policy: PolicySpec::Llm(LlmSpec { endpoint: format!("agent{i}"), ..LlmSpec::new("stub") }),
        })
        .collect();
    let mut config = SimulationConfig::new(format!("s{ep}"), assignments);
    config.seed = ep as u64;
    config.max_turns = if arity == 2 { 8 } else { 4 };
    if rng.random_bool(0.5) {
        config.mode = TurnMode::Simultaneous;
        config.max_turns = 30;
    }
    if ep.is_multiple_of(5) {
        config.metrics = default_suite();
    }
    let judge = Recording::new(|_, _| "{}".to_owned());
    let ctx = EngineContext::new(store)
        .with_models(Arc::new(registry))
        .with_retry(RetryPolicy::immediate(0))
        .with_judge(judge.clone(), "judge");
    run_episode(&ctx, &config, &RunOptions::default()).await.map_err(|e| format!("episode {ep}: {e}"))?;

    let mut audit = Audit { leaks: Vec::new(), own_secret_seen: false, whispers_heard: 0 };
    for (i, model) in models.iter().enumerate() {
        for prompt in model.prompts() {
            for j in 0..arity {
                if i == j {
                    audit.own_secret_seen |= prompt.contains(&token("secret_info", ep, j));
                    continue;
                }
                let ok = allowed(kinds[&(i, j)]);
                for field in FIELDS {
                    if !ok.contains(&field) && prompt.contains(&token(field, ep, j)) {
                        audit.leaks.push(format!("ep {ep}: agent {i} saw {field} of {j} ({:?})", kinds[&(i, j)]));
                    }
                }
            }
            for w in whispers.lock().unwrap().iter().filter(|w| prompt.contains(&w.token)) {
                if i == w.to {
                    audit.whispers_heard += 1;
                } else if i != w.from {
                    audit.leaks.push(format!("ep {ep}: agent {i} overheard {} -> {}", w.from, w.to));
                }
            }
        }
    }
    for prompt in judge.prompts() {
        for j in 0..arity {
            for field in ["secret_info", "extra_private"] {
                if prompt.contains(&token(field, ep, j)) {
                    audit.leaks.push(format!("ep {ep}: judge saw {field} of {j}"));
                }
            }
        }
    }
    Ok(audit)
}

pub async fn check() -> Verdict {
    lattice_checks()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let (mut leaks, mut heard, mut blind) = (Vec::new(), 0, 0);
    for ep in 0..EPISODES {
        let audit = audit_episode(ep, &mut rng).await?;
        leaks.extend(audit.leaks);
        heard += audit.whispers_heard;
        if !audit.own_secret_seen {
            blind += 1;
        }
    }
    ensure!(leaks.is_empty(), "{} leaks, first: {}", leaks.len(), leaks[0]);
    // Non-vacuity: agents see their own secrets and private messages arrive.
    ensure!(blind == 0, "{blind} episodes never showed agents their own secret");
    ensure!(heard > 0, "no private message ever reached its addressee");
    Ok(format!("lattice exact for 5 kinds; {EPISODES} episodes, 0 leaks, {heard} whispers delivered"))
}
