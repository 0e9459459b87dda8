#![allow(dead_code)]

use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use maas_core::route_model::adapters::{StaticWeather, WeatherReading};
use maas_core::service::{AppState, ServiceConfig};
use tower::ServiceExt;

pub const NOW: &str = "2024-04-25T08:00:00Z";

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn nice_weather() -> WeatherReading {
    WeatherReading { temperature_celsius: 18.5, precipitation_mm_per_hour: 0.0 }
}

/// A service over `data_dir` with static nice weather and no routing engine.
pub fn app(data_dir: &Path) -> Router {
    let config = ServiceConfig { data_dir: data_dir.to_path_buf(), ..Default::default() };
    let state = AppState::with_adapters(config, None, Box::new(StaticWeather(nice_weather()))).unwrap();
    maas_core::service::router(state)
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<String>) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

/// Loads the fixture catalog, rules, profile, subscription, and trips for
/// user `ana` through the API.
pub async fn seed(app: &Router) {
    let put = |uri: &'static str, body: String| async move {
        let (status, text) = call(app, Method::PUT, uri, Some(body)).await;
        assert_eq!(status, StatusCode::OK, "{uri}: {text}");
    };
    put("/v1/catalog", fixture("catalog.json")).await;
    put("/v1/rules", fixture("constraints.kbr")).await;
    put("/v1/users/ana/profile", fixture("profile_ana.json")).await;
    put("/v1/users/ana/subscription", fixture("subscription_ana.json")).await;
    for line in fixture("usage_ana.ndjson").lines() {
        let (status, text) = call(app, Method::POST, "/v1/usage/trips", Some(line.to_string())).await;
        assert_eq!(status, StatusCode::CREATED, "{text}");
    }
}

pub fn routes_request(user: &str, routes_fixture: &str) -> String {
    let routes: serde_json::Value = serde_json::from_str(&fixture(routes_fixture)).unwrap();
    serde_json::json!({ "user_id": user, "routes": routes["routes"], "now": NOW }).to_string()
}
