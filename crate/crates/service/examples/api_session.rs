//! Drives a full corridor session through the HTTP router in-process.
//! Run with `--listen` to serve on port 8080 instead.

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use expalign_service::{router, AppState, ServiceConfig};

async fn call(
    state: &Arc<AppState>,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> Result<(u16, Value), Box<dyn std::error::Error>> {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))?;
    let resp = router(Arc::clone(state)).oneshot(req).await?;
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await?.to_bytes();
    Ok((status, serde_json::from_slice(&bytes)?))
}

pub async fn run() -> Result<(), Box<dyn std::error::Error>> {
    let state = AppState::new(ServiceConfig::default());
    state.load_builtin();

    let (code, list) = call(&state, "GET", "/api/instances", None).await?;
    println!("GET /api/instances -> {code} {list}");

    let (code, session) = call(&state, "POST", "/api/sessions", Some(json!({"instance": "corridor"}))).await?;
    println!("POST /api/sessions -> {code} status {}", session["status"]);
    let id = session["id"].as_str().ok_or("no id")?.to_string();
    let answers: Vec<Value> = session["pending"]
        .as_array()
        .ok_or("no pending")?
        .iter()
        .map(|q| {
            println!("  {}", q["prompt"]);
            json!({"state": q["state"], "kind": q["kind"], "verdict": "neither"})
        })
        .collect();

    let uri = format!("/api/sessions/{id}/answers");
    let (code, session) = call(&state, "POST", &uri, Some(json!({ "answers": answers }))).await?;
    println!("POST answers -> {code} status {}", session["status"]);
    let (code, policy) = call(&state, "GET", &format!("/api/sessions/{id}/policy"), None).await?;
    println!("GET policy -> {code}");
    for entry in policy["states"].as_array().ok_or("no policy")? {
        println!(
            "  {:<3} {:<8} {:.4}",
            entry["state"].as_str().unwrap_or("?"),
            entry["action"].as_str().unwrap_or("?"),
            entry["occupancy"].as_f64().unwrap_or(0.0)
        );
    }
    let (code, _) = call(&state, "POST", &uri, Some(json!({ "answers": [] }))).await?;
    println!("replayed answers -> {code}");
    Ok(())
}

#[allow(dead_code)]
#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    if std::env::args().any(|a| a == "--listen") {
        let state = AppState::new(ServiceConfig::default());
        state.load_builtin();
        expalign_service::serve(state, "127.0.0.1:8080".parse()?).await?;
        return Ok(());
    }
    run().await
}
