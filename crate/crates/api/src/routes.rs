use serde_json::{json, Map, Value};

/// Every route the server exposes: method, path, summary.
pub const ROUTES: &[(&str, &str, &str)] = &[
    ("GET", "/openapi", "Machine-readable route listing"),
    ("GET", "/scenarios", "List scenarios; query parameters filter by exact field value"),
    ("POST", "/scenarios", "Create a scenario"),
    ("GET", "/scenarios/{pk}", "Fetch one scenario"),
    ("DELETE", "/scenarios/{pk}", "Delete a scenario"),
    ("GET", "/characters", "List characters; e.g. ?occupation=manager"),
    ("POST", "/characters", "Create a character"),
    ("GET", "/characters/{pk}", "Fetch one character"),
    ("DELETE", "/characters/{pk}", "Delete a character"),
    ("GET", "/relationships", "List relationships"),
    ("POST", "/relationships", "Create a relationship"),
    ("GET", "/relationships/{pk}", "Fetch one relationship"),
    ("DELETE", "/relationships/{pk}", "Delete a relationship"),
    ("GET", "/episodes", "List episodes; e.g. ?tag=agreeableness=high"),
    ("POST", "/episodes", "Store an episode record"),
    ("GET", "/episodes/{pk}", "Fetch one episode"),
    ("DELETE", "/episodes/{pk}", "Delete an episode"),
    ("POST", "/simulate", "Queue a simulation; returns 202 with the episode pk"),
    ("GET", "/simulate/status/{episode_pk}", "Status of a queued simulation"),
    ("GET", "/ws/simulation", "WebSocket: send START_SIM, receive SERVER_ACTION, SERVER_EVAL, FINISH_SIM"),
];

/// OpenAPI-style description of [`ROUTES`]. Updates are create-and-delete
/// only; there is no PUT.
pub fn openapi() -> Value {
    let mut paths: Map<String, Value> = Map::new();
    for (method, path, summary) in ROUTES {
        let entry = paths.entry(path.to_string()).or_insert_with(|| json!({}));
        let mut op = json!({"summary": summary});
        let params: Vec<Value> = path
            .split('/')
            .filter_map(|seg| seg.strip_prefix('{').and_then(|s| s.strip_suffix('}')))
            .map(|name| json!({"name": name, "in": "path", "required": true, "schema": {"type": "string"}}))
            .collect();
        if !params.is_empty() {
            op["parameters"] = Value::Array(params);
        }
        entry[method.to_ascii_lowercase()] = op;
    }
    json!({
        "openapi": "3.0.3",
        "info": {"title": "socsim", "version": env!("CARGO_PKG_VERSION")},
        "paths": paths,
    })
}
