//! Start the service on an ephemeral port over a scratch data directory,
//! load the catalog and rules, and query both recommenders.

use maas_core::service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data_dir = std::env::temp_dir().join(format!("maas-example-{}", std::process::id()));
    let config = ServiceConfig { listen: "127.0.0.1:0".into(), data_dir: data_dir.clone(), ..Default::default() };
    let state = AppState::open(config)?;
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}/v1", listener.local_addr()?);
    tokio::spawn(async move { axum::serve(listener, router(state)).await });

    let http = reqwest::Client::new();
    http.put(format!("{base}/catalog")).body(include_str!("../fixtures/catalog.json")).send().await?.error_for_status()?;
    let rules: Value = http
        .put(format!("{base}/rules"))
        .body(include_str!("../fixtures/constraints.kbr"))
        .send()
        .await?
        .json()
        .await?;
    println!("rules loaded: {}", rules["rules"]);

    let profile: Value = serde_json::from_str(include_str!("../fixtures/profile_ana.json"))?;
    http.put(format!("{base}/users/ana/profile")).json(&profile).send().await?.error_for_status()?;

    let plans: Value = http
        .post(format!("{base}/recommend/plans"))
        .json(&json!({ "profile": profile }))
        .send()
        .await?
        .json()
        .await?;
    println!("plans: {}", plans["entries"]);

    let routes: Value = serde_json::from_str(include_str!("../fixtures/routes.json"))?;
    let rec: Value = http
        .post(format!("{base}/recommend/routes"))
        .json(&json!({ "user_id": "ana", "routes": routes["routes"], "now": "2024-04-25T08:00:00Z" }))
        .send()
        .await?
        .json()
        .await?;
    for e in rec["entries"].as_array().into_iter().flatten() {
        println!("{} {:>3} {}", if e["is_default"] == true { "*" } else { " " }, e["score"], e["route_id"]);
    }

    let bad = http.put(format!("{base}/rules")).body("If user.can_cycle='No' then\n").send().await?;
    println!("bad rules -> {} {}", bad.status(), bad.text().await?.trim());

    std::fs::remove_dir_all(&data_dir)?;
    Ok(())
}
