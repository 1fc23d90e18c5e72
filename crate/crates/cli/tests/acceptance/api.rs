use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use futures::{SinkExt, StreamExt};
use serde_json::{json, Map, Value};
use socsim_api::{router, AppState, ROUTES};
use socsim_core::agents::{ChatModel, ChatReply, ChatRequest, LlmError, ModelRegistry};
use socsim_core::engine::EngineContext;
use socsim_core::evaluation::default_suite;
use socsim_core::persistence::Store;
use socsim_core::retry::RetryPolicy;
use tokio::sync::Semaphore;
use tokio_tungstenite::tungstenite::Message;

use crate::common::character;
use crate::{ensure, Verdict};

struct ZeroJudge;

#[async_trait]
impl ChatModel for ZeroJudge {
    async fn complete(&self, _: &ChatRequest) -> Result<ChatReply, LlmError> {
        let scores: Map<String, Value> =
            default_suite().into_iter().map(|m| (m.name, json!({"score": 0, "reasoning": "stub"}))).collect();
        Ok(ChatReply { content: Value::Object(scores).to_string(), usage: None })
    }
}

/// Leaves on every turn, once the gate lets it through.
struct GatedLeave(Arc<Semaphore>);

#[async_trait]
impl ChatModel for GatedLeave {
    async fn complete(&self, _: &ChatRequest) -> Result<ChatReply, LlmError> {
        self.0.acquire().await.map_err(|e| LlmError::Transport(e.to_string()))?.forget();
        Ok(ChatReply { content: "action_type: leave\nargument:".into(), usage: None })
    }
}

struct Server {
    base: String,
    ws: String,
    gate: Arc<Semaphore>,
    client: reqwest::Client,
}

impl Server {
    async fn spawn() -> Self {
        let gate = Arc::new(Semaphore::new(0));
        let models = ModelRegistry::new(8);
        models.register("gate", Arc::new(GatedLeave(Arc::clone(&gate))));
        let ctx = EngineContext::new(Store::memory())
            .with_models(Arc::new(models))
            .with_retry(RetryPolicy::immediate(1))
            .with_judge(Arc::new(ZeroJudge), "stub-judge");
        // One worker, so a held run keeps the next one queued.
        let app = router(AppState::new(ctx, 1), None);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { socsim_api::serve(listener, app).await });
        Self { base: format!("http://{addr}"), ws: format!("ws://{addr}/ws/simulation"), gate, client: reqwest::Client::new() }
    }

    async fn send(&self, method: reqwest::Method, path: &str, body: Option<&Value>) -> Result<(u16, Value), String> {
        let mut req = self.client.request(method, format!("{}{path}", self.base));
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await.map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let text = resp.text().await.map_err(|e| e.to_string())?;
        Ok((status, serde_json::from_str(&text).unwrap_or(Value::Null)))
    }

    async fn status(&self, pk: &str) -> Result<String, String> {
        let (_, v) = self.send(reqwest::Method::GET, &format!("/simulate/status/{pk}"), None).await?;
        Ok(v["status"].as_str().unwrap_or("").to_owned())
    }

    async fn wait_for(&self, pk: &str, want: &str) -> Result<(), String> {
        for _ in 0..1000 {
            if self.status(pk).await? == want {
                return Ok(());
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        Err(format!("{pk} never reached {want}"))
    }
}

fn dyad(policy: Value) -> Value {
    json!({"scenario": "s", "assignments": [
        {"character": "a", "policy": policy.clone()},
        {"character": "b", "policy": policy}
    ]})
}

async fn crud(s: &Server) -> Result<(), String> {
    use reqwest::Method;
    let scenario = json!({"pk": "s", "context": "Two coworkers talk.", "agent_goals": ["one", "two"],
                          "constraints": {"arity": 2}});
    let docs = [
        ("/scenarios", scenario),
        ("/characters", character("a", "Riley", "manager")),
        ("/characters", character("b", "Jamie", "engineer")),
        ("/characters", character("c", "Casey", "manager")),
    ];
    for (path, doc) in &docs {
        let (code, _) = s.send(Method::POST, path, Some(doc)).await?;
        ensure!(code == 201, "POST {path} gave {code}");
        let pk = doc["pk"].as_str().unwrap();
        let (code, got) = s.send(Method::GET, &format!("{path}/{pk}"), None).await?;
        ensure!(code == 200, "GET {path}/{pk} gave {code}");
        for (k, v) in doc.as_object().unwrap() {
            ensure!(&got[k] == v, "{path}/{pk} field {k}: {} != {v}", got[k]);
        }
    }
    let (code, managers) = s.send(Method::GET, "/characters?occupation=manager", None).await?;
    let pks: Vec<&str> = managers.as_array().ok_or("list is not an array")?.iter().filter_map(|c| c["pk"].as_str()).collect();
    ensure!(code == 200 && pks == ["a", "c"], "occupation filter gave {code} {pks:?}");
    let (code, _) = s.send(Method::DELETE, "/characters/c", None).await?;
    ensure!(code == 200 || code == 204, "DELETE gave {code}");
    let (code, _) = s.send(Method::GET, "/characters/c", None).await?;
    ensure!(code == 404, "deleted character still answers {code}");
    for (_, path, _) in ROUTES {
        let concrete = path.replace("{pk}", "a").replace("{episode_pk}", "a");
        let (code, _) = s.send(Method::PUT, &concrete, Some(&json!({}))).await?;
        ensure!(code == 405, "PUT {concrete} gave {code}");
    }
    Ok(())
}

async fn simulate(s: &Server) -> Result<(), String> {
    use reqwest::Method;
    let scripted = dyad(json!({"scripted": {"script": "leave_at_turn", "turn": 1}}));
    let (code, body) = s.send(Method::POST, "/simulate", Some(&scripted)).await?;
    let pk = body["episode_pk"].as_str().ok_or("no episode_pk")?.to_owned();
    ensure!(code == 202, "POST /simulate gave {code}");
    s.wait_for(&pk, "completed").await?;
    let (_, status) = s.send(Method::GET, &format!("/simulate/status/{pk}"), None).await?;
    ensure!(status["history"] == json!(["queued", "running", "completed"]), "history {}", status["history"]);

    // Hold one run so the next is seen queued, then running, then completed.
    let gated = dyad(json!({"llm": {"model": "stub", "endpoint": "gate"}}));
    let (_, first) = s.send(Method::POST, "/simulate", Some(&gated)).await?;
    let first = first["episode_pk"].as_str().ok_or("no episode_pk")?.to_owned();
    s.wait_for(&first, "running").await?;
    let (_, second) = s.send(Method::POST, "/simulate", Some(&gated)).await?;
    let second = second["episode_pk"].as_str().ok_or("no episode_pk")?.to_owned();
    let mut seen = vec![s.status(&second).await?];
    s.gate.add_permits(2);
    s.wait_for(&first, "completed").await?;
    s.wait_for(&second, "running").await?;
    seen.push("running".into());
    s.gate.add_permits(2);
    s.wait_for(&second, "completed").await?;
    seen.push("completed".into());
    ensure!(seen == ["queued", "running", "completed"], "observed {seen:?}");
    Ok(())
}

async fn websocket(s: &Server) -> Result<(usize, usize), String> {
    let (mut ws, _) = tokio_tungstenite::connect_async(&s.ws).await.map_err(|e| e.to_string())?;
    let mut config = dyad(json!({"scripted": {"script": "leave_at_turn", "turn": 2}}));
    config["metrics"] = serde_json::to_value(default_suite()).unwrap();
    let start = json!({"type": "START_SIM", "payload": config});
    ws.send(Message::Text(start.to_string().into())).await.map_err(|e| e.to_string())?;
    let mut kinds = Vec::new();
    while let Some(msg) = tokio::time::timeout(Duration::from_secs(30), ws.next()).await.map_err(|_| "ws timed out")? {
        match msg {
            Ok(Message::Text(t)) => {
                let frame: Value = serde_json::from_str(t.as_str()).map_err(|e| e.to_string())?;
                kinds.push(frame["type"].as_str().unwrap_or("?").to_owned());
            }
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => {}
        }
    }
    // Fixture: both agents speak in round 1 and leave in round 2, and the
    // round finishes before termination is checked: 4 actions. Seven metrics
    // for two agents: 14 scores.
    let (k, m) = (4, 14);
    let mut expected = vec!["SERVER_ACTION".to_owned(); k];
    expected.extend(vec!["SERVER_EVAL".to_owned(); m]);
    expected.push("FINISH_SIM".to_owned());
    ensure!(kinds == expected, "frames {kinds:?}");
    Ok((k, m))
}

pub async fn check() -> Verdict {
    let s = Server::spawn().await;
    crud(&s).await?;
    simulate(&s).await?;
    let (k, m) = websocket(&s).await?;
    Ok(format!("CRUD, filter, PUT 405 on {} routes, 202 + queued/running/completed, WS {k} actions + {m} evals + finish", ROUTES.len()))
}
