mod common;

use std::process::{Command, Output};

use axum::http::{Method, StatusCode};
use serde_json::json;

use common::*;

fn maas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maas")).args(args).env("RUST_LOG", "off").output().unwrap()
}

fn fx(name: &str) -> String {
    fixture_path(name).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn rules_check() {
    let o = maas(&["rules", "check", &fx("constraints.kbr"), "--catalog", &fx("catalog.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "3 rules OK\n");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.kbr");
    std::fs::write(&bad, "If user.can_cycle='No' then product.bike_sharing=0\nIf user.x = then\n").unwrap();
    let o = maas(&["rules", "check", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn exit_codes() {
    let o = maas(&["catalog", "validate", "/nonexistent/catalog.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = maas(&["catalog", "validate", &fx("profile_ana.json")]);
    assert_eq!(o.status.code(), Some(1));
    let o = maas(&["recommend", "plans", "--catalog"]);
    assert_eq!(o.status.code(), Some(1));
    let o = maas(&["catalog", "validate", &fx("catalog.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "catalog OK: 2 plans, currency HUF\n");
}

#[test]
fn plans_fallback_is_announced() {
    let o = maas(&[
        "recommend", "plans",
        "--catalog", &fx("catalog.json"),
        "--rules", &fx("constraints.kbr"),
        "--profile", &fx("profile_no_license.json"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("note: no plan satisfies every constraint; fallback ranking of all plans"));
}

#[test]
fn infeasible_routes_exit_zero() {
    let o = maas(&[
        "recommend", "routes",
        "--routes", &fx("routes_infeasible.json"),
        "--profile", &fx("profile_ana.json"),
        "--now", NOW,
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no feasible routes"));
}

#[test]
fn catalog_upsert_and_remove() {
    let dir = tempfile::tempdir().unwrap();
    let cat = dir.path().join("catalog.json");
    std::fs::copy(fixture_path("catalog.json"), &cat).unwrap();
    let cat = cat.to_str().unwrap();

    let o = maas(&["catalog", "upsert", cat, &fx("plan_discount.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "added plan 50; catalog has 3 plans\n");
    let o = maas(&["catalog", "upsert", cat, &fx("plan_discount.json")]);
    assert_eq!(stdout(&o), "replaced plan 50; catalog has 3 plans\n");
    let o = maas(&["catalog", "remove", cat, "50"]);
    assert_eq!(stdout(&o), "removed plan 50; catalog has 2 plans\n");
    let o = maas(&["catalog", "remove", cat, "50"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(maas(&["catalog", "validate", cat]).status.code(), Some(0));
}

#[tokio::test]
async fn json_output_matches_the_service() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    seed(&app).await;

    let body = json!({ "profile": serde_json::from_str::<serde_json::Value>(&fixture("profile_ana.json")).unwrap() });
    let (status, served) = call(&app, Method::POST, "/v1/recommend/plans", Some(body.to_string())).await;
    assert_eq!(status, StatusCode::OK);
    let o = maas(&[
        "recommend", "plans", "--json",
        "--catalog", &fx("catalog.json"),
        "--rules", &fx("constraints.kbr"),
        "--profile", &fx("profile_ana.json"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), served);

    let (status, served) = call(&app, Method::POST, "/v1/recommend/routes", Some(routes_request("ana", "routes.json"))).await;
    assert_eq!(status, StatusCode::OK);
    let o = maas(&[
        "recommend", "routes", "--json",
        "--routes", &fx("routes.json"),
        "--profile", &fx("profile_ana.json"),
        "--subscription", &fx("subscription_ana.json"),
        "--usage", &fx("usage_ana.ndjson"),
        "--weather", &fx("weather_nice.json"),
        "--user-id", "ana",
        "--now", NOW,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), served);
}
