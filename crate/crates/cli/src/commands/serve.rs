use anyhow::{Context, Result};
use clap::Args;
use serde_json::json;
use socsim_api::{router, AppState, DEFAULT_PORT, DEFAULT_WORKERS};
use tokio::net::TcpListener;

use super::{engine, open_store};
use crate::Output;

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Origin allowed to call the API from a browser, or `*`.
    #[arg(long)]
    pub cors_origin: Option<String>,
    /// Simulations from POST /simulate that may run at once.
    #[arg(long, default_value_t = DEFAULT_WORKERS)]
    pub workers: usize,
    /// Model name for scoring episodes; scoring is off when omitted.
    #[arg(long)]
    pub judge_model: Option<String>,
    #[arg(long, default_value = "default")]
    pub judge_endpoint: String,
}

pub async fn run(args: ServeArgs, store_url: Option<&str>, out: &mut Output<'_>) -> Result<()> {
    let store = open_store(store_url).await?;
    let ctx = engine(store, args.judge_model.as_deref(), &args.judge_endpoint)?;
    let listener = TcpListener::bind((args.host.as_str(), args.port))
        .await
        .with_context(|| format!("cannot bind {}:{}", args.host, args.port))?;
    let addr = listener.local_addr()?;
    out.emit(&format!("listening on {addr}"), &json!({"addr": addr.to_string(), "port": addr.port()}))?;
    let app = router(AppState::new(ctx, args.workers), args.cors_origin.as_deref());
    socsim_api::serve(listener, app).await.context("server stopped")
}
