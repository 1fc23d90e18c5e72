//! WebSocket streaming of a single episode.
//!
//! The client's first frame must be `{"type": "START_SIM", "payload": <config>}`.
//! The server then sends one `SERVER_ACTION` per transcript entry, one
//! `SERVER_EVAL` per score, and a final `FINISH_SIM`. Problems are reported
//! with an `ERROR` frame before closing. Closing the socket mid-run cancels
//! the episode.

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use socsim_core::engine::{run_episode, EpisodeObserver, RunOptions, SimulationConfig, TranscriptEntry};
use socsim_core::evaluation::DimensionScore;
use tokio::sync::mpsc;

use crate::AppState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub payload: Value,
}

impl Frame {
    pub fn new(kind: &str, payload: impl Serialize) -> Self {
        Self { kind: kind.to_owned(), payload: serde_json::to_value(payload).expect("frame payload serializes") }
    }

    fn error(reason: impl Into<String>) -> Self {
        Self::new("ERROR", json!({"reason": reason.into()}))
    }

    fn message(&self) -> Message {
        Message::Text(serde_json::to_string(self).expect("frame serializes").into())
    }
}

struct Streamer(mpsc::UnboundedSender<Frame>);

impl EpisodeObserver for Streamer {
    fn on_action(&self, entry: &TranscriptEntry) {
        let _ = self.0.send(Frame::new("SERVER_ACTION", entry));
    }

    fn on_evaluation(&self, score: &DimensionScore) {
        let _ = self.0.send(Frame::new("SERVER_EVAL", score));
    }
}

pub async fn upgrade(State(state): State<AppState>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| session(state, socket))
}

async fn start_config(socket: &mut WebSocket) -> Result<SimulationConfig, String> {
    loop {
        let text = match socket.recv().await {
            Some(Ok(Message::Text(t))) => t.to_string(),
            Some(Ok(Message::Binary(b))) => String::from_utf8(b.to_vec()).map_err(|_| "frame is not UTF-8".to_owned())?,
            Some(Ok(Message::Ping(_) | Message::Pong(_))) => continue,
            Some(Ok(Message::Close(_))) | None => return Err("closed before START_SIM".into()),
            Some(Err(e)) => return Err(e.to_string()),
        };
        let frame: Frame = serde_json::from_str(&text).map_err(|e| format!("malformed frame: {e}"))?;
        if frame.kind != "START_SIM" {
            return Err(format!("expected START_SIM, got {}", frame.kind));
        }
        return serde_json::from_value(frame.payload).map_err(|e| format!("invalid simulation config: {e}"));
    }
}

async fn session(state: AppState, mut socket: WebSocket) {
    let config = match start_config(&mut socket).await {
        Ok(c) => c,
        Err(reason) => {
            let _ = socket.send(Frame::error(reason).message()).await;
            let _ = socket.send(Message::Close(None)).await;
            return;
        }
    };

    let (tx, mut frames) = mpsc::unbounded_channel();
    let opts = RunOptions { observer: Some(Arc::new(Streamer(tx))), ..RunOptions::default() };
    let run = run_episode(&state.ctx, &config, &opts);
    tokio::pin!(run);

    let result = loop {
        tokio::select! {
            biased;
            Some(frame) = frames.recv() => {
                if socket.send(frame.message()).await.is_err() {
                    tracing::info!("client went away; episode cancelled");
                    return;
                }
            }
            result = &mut run => break result,
            incoming = socket.recv() => {
                if matches!(incoming, None | Some(Err(_)) | Some(Ok(Message::Close(_)))) {
                    tracing::info!("client closed; episode cancelled");
                    return;
                }
            }
        }
    };
    while let Ok(frame) = frames.try_recv() {
        if socket.send(frame.message()).await.is_err() {
            return;
        }
    }
    let last = match result {
        Ok(record) => Frame::new("FINISH_SIM", json!({"episode_pk": record.pk, "termination": record.termination})),
        Err(e) => Frame::error(e.to_string()),
    };
    let _ = socket.send(last.message()).await;
    let _ = socket.send(Message::Close(None)).await;
}
