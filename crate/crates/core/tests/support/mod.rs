#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use socsim_core::agents::{ChatModel, ChatReply, ChatRequest, LlmError};
use socsim_core::domain::{CharacterProfile, Pk, Relationship, RelationshipType, Scenario};
use socsim_core::engine::{Assignment, SimulationConfig};
use socsim_core::persistence::{read_value, RespValue, Store};
use tokio::io::{AsyncWriteExt, BufReader};
use tokio::net::TcpListener;

pub fn character(pk: &str, name: &str, occupation: &str) -> CharacterProfile {
    let mut c = CharacterProfile::new(pk, name, 30);
    c.occupation = occupation.to_owned();
    c.pronouns = "they/them".to_owned();
    c.public_info = format!("{name} is well known at work");
    c.secret_info = format!("SECRET-{pk}");
    c
}

pub fn scenario(pk: &str, arity: usize) -> Scenario {
    let goals = (0..arity).map(|i| format!("goal for slot {i}")).collect();
    Scenario::new(pk, "A conversation in an office.", goals)
}

/// Stores a scenario of `arity` slots and that many characters `c0..`.
pub async fn seed_cast(store: &Store, scenario_pk: &str, arity: usize) -> Vec<Pk> {
    store.put_scenario(&scenario(scenario_pk, arity)).await.unwrap();
    let mut pks = Vec::new();
    for i in 0..arity {
        let c = character(&format!("c{i}"), &format!("Person{i}"), "engineer");
        store.put_character(&c).await.unwrap();
        pks.push(c.pk);
    }
    pks
}

pub async fn seed_edge(store: &Store, a: &Pk, b: &Pk, kind: RelationshipType) {
    let edge = Relationship::new(format!("r-{a}-{b}"), a.clone(), b.clone(), kind);
    store.put_relationship(&edge).await.unwrap();
}

pub fn config(scenario_pk: &str, cast: &[Pk], policy: serde_json::Value) -> SimulationConfig {
    let policy = serde_json::from_value(policy).unwrap();
    let assignments = cast.iter().map(|pk| Assignment { character: pk.clone(), policy: Clone::clone(&policy) }).collect();
    SimulationConfig::new(scenario_pk, assignments)
}

type Responder = dyn Fn(&ChatRequest, usize) -> Result<String, LlmError> + Send + Sync;

/// Chat model that records every request and answers through a closure
/// given the request and its call index.
pub struct RecordingModel {
    pub requests: Mutex<Vec<ChatRequest>>,
    respond: Box<Responder>,
}

impl RecordingModel {
    pub fn new(respond: impl Fn(&ChatRequest, usize) -> Result<String, LlmError> + Send + Sync + 'static) -> Arc<Self> {
        Arc::new(Self { requests: Mutex::new(Vec::new()), respond: Box::new(respond) })
    }

    pub fn fixed(reply: &str) -> Arc<Self> {
        let reply = reply.to_owned();
        Self::new(move |_, _| Ok(reply.clone()))
    }

    pub fn prompts(&self) -> Vec<String> {
        self.requests
            .lock()
            .unwrap()
            .iter()
            .map(|r| r.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n"))
            .collect()
    }
}

#[async_trait]
impl ChatModel for RecordingModel {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatReply, LlmError> {
        let n = {
            let mut reqs = self.requests.lock().unwrap();
            reqs.push(request.clone());
            reqs.len() - 1
        };
        (self.respond)(request, n).map(|content| ChatReply { content, usage: None })
    }
}

/// A tiny in-process server speaking enough RESP2 for the store backend.
pub async fn spawn_resp_server() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let data: Arc<Mutex<BTreeMap<String, String>>> = Arc::default();
    tokio::spawn(async move {
        loop {
            let Ok((stream, _)) = listener.accept().await else { return };
            let data = Arc::clone(&data);
            tokio::spawn(async move {
                let mut reader = BufReader::new(stream);
                while let Ok(request) = read_value(&mut reader).await {
                    let reply = handle(&data, request);
                    if reader.get_mut().write_all(&encode(&reply)).await.is_err() {
                        return;
                    }
                }
            });
        }
    });
    format!("redis://{addr}/0")
}

fn bulk(s: &str) -> RespValue {
    RespValue::Bulk(Some(s.as_bytes().to_vec()))
}

fn handle(data: &Mutex<BTreeMap<String, String>>, request: RespValue) -> RespValue {
    let RespValue::Array(Some(items)) = request else {
        return RespValue::Error("ERR expected array".into());
    };
    let args: Vec<String> = items
        .into_iter()
        .filter_map(|v| match v {
            RespValue::Bulk(Some(b)) => String::from_utf8(b).ok(),
            _ => None,
        })
        .collect();
    let mut data = data.lock().unwrap();
    match args.first().map(|s| s.to_ascii_uppercase()).as_deref() {
        Some("PING") => RespValue::Simple("PONG".into()),
        Some("SELECT") | Some("AUTH") => RespValue::Simple("OK".into()),
        Some("SET") => {
            data.insert(args[1].clone(), args[2].clone());
            RespValue::Simple("OK".into())
        }
        Some("GET") => RespValue::Bulk(data.get(&args[1]).map(|v| v.as_bytes().to_vec())),
        Some("DEL") => RespValue::Integer(args[1..].iter().filter(|k| data.remove(*k).is_some()).count() as i64),
        Some("MGET") => RespValue::Array(Some(
            args[1..].iter().map(|k| RespValue::Bulk(data.get(k).map(|v| v.as_bytes().to_vec()))).collect(),
        )),
        Some("SCAN") => {
            // Pages of three keys to exercise the client's cursor loop.
            let cursor: usize = args[1].parse().unwrap_or(0);
            let pattern = args.iter().position(|a| a.eq_ignore_ascii_case("MATCH")).map(|i| args[i + 1].clone());
            let prefix = pattern.map(|p| p.trim_end_matches('*').replace('\\', "")).unwrap_or_default();
            let keys: Vec<&String> = data.keys().filter(|k| k.starts_with(&prefix)).collect();
            let page: Vec<RespValue> = keys.iter().skip(cursor).take(3).map(|k| bulk(k)).collect();
            let next = if cursor + 3 >= keys.len() { 0 } else { cursor + 3 };
            RespValue::Array(Some(vec![bulk(&next.to_string()), RespValue::Array(Some(page))]))
        }
        _ => RespValue::Error("ERR unknown command".into()),
    }
}

fn encode(v: &RespValue) -> Vec<u8> {
    match v {
        RespValue::Simple(s) => format!("+{s}\r\n").into_bytes(),
        RespValue::Error(s) => format!("-{s}\r\n").into_bytes(),
        RespValue::Integer(n) => format!(":{n}\r\n").into_bytes(),
        RespValue::Bulk(None) => b"$-1\r\n".to_vec(),
        RespValue::Bulk(Some(b)) => {
            let mut out = format!("${}\r\n", b.len()).into_bytes();
            out.extend_from_slice(b);
            out.extend_from_slice(b"\r\n");
            out
        }
        RespValue::Array(None) => b"*-1\r\n".to_vec(),
        RespValue::Array(Some(items)) => {
            let mut out = format!("*{}\r\n", items.len()).into_bytes();
            for i in items {
                out.extend(encode(i));
            }
            out
        }
    }
}
