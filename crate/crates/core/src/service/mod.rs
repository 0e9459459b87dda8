//! HTTP/JSON facade under `/v1`.
//!
//! | method | path | body |
//! |---|---|---|
//! | GET | `/v1/health` | |
//! | POST | `/v1/recommend/plans` | `{"profile": .., "budget"?: ..}` |
//! | POST | `/v1/recommend/routes` | `{"user_id": .., "routes"?: [..], "origin"?, "destination"?, "depart_time"?, "verbose"?, "now"?}` |
//! | GET, PUT | `/v1/users/{id}/profile` | profile |
//! | GET, PUT | `/v1/users/{id}/subscription` | subscription |
//! | GET | `/v1/users/{id}/trips` | |
//! | POST | `/v1/usage/trips` | trip record; `quota_consumed` derived from the subscription when omitted |
//! | GET, PUT | `/v1/catalog` | catalog |
//! | PUT, DELETE | `/v1/catalog/plans/{id}` | plan |
//! | GET, PUT | `/v1/rules` | rule text |
//! | GET, PUT | `/v1/promotions` | promotions |
//!
//! Errors share one shape: `{"error": kind, "message": .., "violations"?: [{path, reason}], "line"?, "column"?}`.

pub mod config;
pub mod store;

use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::Router;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::{parse_catalog, parse_plan, Catalog, CatalogError, Mode};
use crate::constraint_kb::{ProfileError, RuleError, RuleSet, UserProfile};
use crate::context_engine::{Promotions, Situation};
use crate::error::{from_json_slice, Violation};
use crate::plan_recommender::{recommend_plans, PlanError, RankedPlans};
use crate::route_model::adapters::{
    routing_engine_from_config, weather_provider_from_config, Coordinates, RoutingEngine, RoutingError, WeatherProvider,
};
use crate::route_model::{estimate_consumption, valid_user_id, QuotaUse, Route, Subscription, TripRecord, UsageError};
use crate::route_recommender::{recommend_routes, RouteRecommendation};

pub use config::{ConfigError, ServiceConfig};
pub use store::{to_document, write_atomic, DataStore, StoreError};

/// Response body encoding shared by the service and `maas --json`.
pub fn render<T: Serialize + ?Sized>(value: &T) -> String {
    to_document(value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlansRequest {
    pub profile: UserProfile,
    /// Overrides `profile.budget` when present.
    #[serde(default)]
    pub budget: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutesRequest {
    pub user_id: String,
    #[serde(default)]
    pub routes: Option<Vec<Route>>,
    #[serde(default)]
    pub origin: Option<Coordinates>,
    #[serde(default)]
    pub destination: Option<Coordinates>,
    #[serde(default)]
    pub depart_time: Option<DateTime<Utc>>,
    #[serde(default)]
    pub verbose: bool,
    /// Evaluation time; defaults to the request's arrival.
    #[serde(default)]
    pub now: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripRequest {
    pub user_id: String,
    pub timestamp: DateTime<Utc>,
    pub route: Route,
    #[serde(default)]
    pub quota_consumed: Option<Vec<QuotaUse>>,
}

/// Ranks plans for a request exactly as `POST /v1/recommend/plans` does.
pub fn plans_for_request(
    catalog: &Catalog,
    rules: &RuleSet,
    request: &PlansRequest,
    config: &ServiceConfig,
) -> Result<RankedPlans, PlanError> {
    let mut profile = request.profile.clone();
    if request.budget.is_some() {
        profile.budget = request.budget;
    }
    recommend_plans(catalog, &profile, rules, &config.vectorization)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    violations: Vec<Violation>,
    location: Option<(usize, usize)>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: &'a str,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    violations: &'a [Violation],
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    column: Option<usize>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            kind,
            message: message.into(),
            violations: Vec::new(),
            location: None,
        }
    }

    pub fn status(&self) -> StatusCode {
        self.status
    }

    fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "validation", message)
    }

    fn violations(message: impl Into<String>, violations: Vec<Violation>) -> ApiError {
        ApiError {
            violations,
            ..ApiError::bad_request(message)
        }
    }

    fn not_found(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn internal(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    fn malformed(path: String, reason: String) -> ApiError {
        let message = format!("{path}: {reason}");
        ApiError::violations(message, vec![Violation::new(path, reason)])
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.kind,
            message: &self.message,
            violations: &self.violations,
            line: self.location.map(|l| l.0),
            column: self.location.map(|l| l.1),
        };
        json_response(self.status, render(&body))
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::InvalidUserId(_) => ApiError::bad_request(e.to_string()),
            _ => {
                tracing::error!(error = %e, "data directory failure");
                ApiError::internal(e.to_string())
            }
        }
    }
}

impl From<RuleError> for ApiError {
    fn from(e: RuleError) -> Self {
        ApiError {
            location: Some((e.line, e.column)),
            ..ApiError::bad_request(e.to_string())
        }
    }
}

impl From<CatalogError> for ApiError {
    fn from(e: CatalogError) -> Self {
        ApiError::violations(e.to_string(), e.violations())
    }
}

impl From<ProfileError> for ApiError {
    fn from(e: ProfileError) -> Self {
        match e {
            ProfileError::Malformed { path, reason } => ApiError::malformed(path, reason),
            ProfileError::Invalid(v) => ApiError::violations(v.to_string(), v.0),
        }
    }
}

impl From<PlanError> for ApiError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::EmptyCatalog | PlanError::Rules(_) => ApiError::new(StatusCode::CONFLICT, "conflict", e.to_string()),
            _ => ApiError::internal(e.to_string()),
        }
    }
}

impl From<RoutingError> for ApiError {
    fn from(e: RoutingError) -> Self {
        ApiError::new(StatusCode::BAD_GATEWAY, "routing_unavailable", e.to_string())
    }
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn ok_json<T: Serialize + ?Sized>(value: &T) -> Response {
    json_response(StatusCode::OK, render(value))
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    from_json_slice(body).map_err(|(path, reason)| ApiError::malformed(path, reason))
}

fn check_user_id(id: &str) -> Result<(), ApiError> {
    if valid_user_id(id) {
        Ok(())
    } else {
        Err(ApiError::bad_request(format!("invalid user id {id:?}")))
    }
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker task failed: {e}")))?
}

/// The catalog, rules, and promotions in force. Replaced as a whole on update.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub catalog: Arc<Catalog>,
    pub rules: Arc<RuleSet>,
    pub rules_text: Arc<String>,
    pub promotions: Arc<Promotions>,
}

struct Inner {
    config: ServiceConfig,
    store: DataStore,
    snapshot: RwLock<Arc<Snapshot>>,
    // serializes catalog/rules/promotions writers
    admin: tokio::sync::Mutex<()>,
    routing: Option<Box<dyn RoutingEngine>>,
    weather: Box<dyn WeatherProvider>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Opens the data directory and builds adapters from `config`.
    pub fn open(config: ServiceConfig) -> Result<AppState, ServiceError> {
        let routing = config.routing.as_ref().map(routing_engine_from_config).transpose()?;
        let weather = weather_provider_from_config(&config.weather);
        AppState::with_adapters(config, routing, weather)
    }

    pub fn with_adapters(
        config: ServiceConfig,
        routing: Option<Box<dyn RoutingEngine>>,
        weather: Box<dyn WeatherProvider>,
    ) -> Result<AppState, ServiceError> {
        config.validate()?;
        let store = DataStore::open(&config.data_dir)?;
        let catalog = store
            .load_catalog()?
            .unwrap_or_else(|| Catalog::empty("EUR", Mode::ALL.to_vec()));
        let rules_text = store.load_rules_text()?.unwrap_or_default();
        let rules = RuleSet::parse(&rules_text).map_err(|e| ServiceError::Rules {
            path: store.rules_path(),
            source: e,
        })?;
        let promotions = store
            .load_promotions()?
            .unwrap_or_else(|| config.context.promotions.clone());
        let snapshot = Snapshot {
            catalog: Arc::new(catalog),
            rules: Arc::new(rules),
            rules_text: Arc::new(rules_text),
            promotions: Arc::new(promotions),
        };
        Ok(AppState(Arc::new(Inner {
            config,
            store,
            snapshot: RwLock::new(Arc::new(snapshot)),
            admin: tokio::sync::Mutex::new(()),
            routing,
            weather,
        })))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.0.snapshot.read().expect("snapshot lock poisoned").clone()
    }

    fn swap(&self, f: impl FnOnce(&Snapshot) -> Snapshot) {
        let mut guard = self.0.snapshot.write().expect("snapshot lock poisoned");
        *guard = Arc::new(f(&guard));
    }

    fn store(&self) -> &DataStore {
        &self.0.store
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{path}: {source}")]
    Rules { path: std::path::PathBuf, source: RuleError },
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/recommend/plans", post(recommend_plans_handler))
        .route("/v1/recommend/routes", post(recommend_routes_handler))
        .route("/v1/users/{id}/profile", get(get_profile).put(put_profile))
        .route("/v1/users/{id}/subscription", get(get_subscription).put(put_subscription))
        .route("/v1/users/{id}/trips", get(get_trips))
        .route("/v1/usage/trips", post(post_trip))
        .route("/v1/catalog", get(get_catalog).put(put_catalog))
        .route("/v1/catalog/plans/{id}", put(put_plan).delete(delete_plan))
        .route("/v1/rules", get(get_rules).put(put_rules))
        .route("/v1/promotions", get(get_promotions).put(put_promotions))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let addr = config.listen_addr()?;
    let state = AppState::open(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, data_dir = %state.store().root().display(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn health() -> Response {
    ok_json(&serde_json::json!({ "status": "ok" }))
}

async fn recommend_plans_handler(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: PlansRequest = parse_body(&body)?;
    request.profile.validate().map_err(|v| ApiError::violations(v.to_string(), v.0))?;
    let snap = state.snapshot();
    let ranked = plans_for_request(&snap.catalog, &snap.rules, &request, state.config())?;
    Ok(ok_json(&ranked))
}

fn load_profile_or_404(store: &DataStore, user_id: &str) -> Result<UserProfile, ApiError> {
    store
        .load_profile(user_id)?
        .ok_or_else(|| ApiError::not_found(format!("unknown user {user_id:?}")))
}

async fn recommend_routes_handler(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: RoutesRequest = parse_body(&body)?;
    check_user_id(&request.user_id)?;
    let now = request.now.unwrap_or_else(Utc::now);

    let user_id = request.user_id.clone();
    let st = state.clone();
    let (profile, subscription, log) = blocking(move || {
        let store = st.store();
        let profile = load_profile_or_404(store, &user_id)?;
        let subscription = store.load_subscription(&user_id)?;
        let log = store.usage().load(&user_id).map_err(usage_error)?;
        Ok((profile, subscription, log))
    })
    .await?;

    let routes = match (request.routes, request.origin, request.destination) {
        (Some(routes), _, _) => {
            let mut seen = std::collections::BTreeSet::new();
            if let Some((i, r)) = routes.iter().enumerate().find(|(_, r)| !seen.insert(r.id.clone())) {
                let path = format!("routes[{i}].id");
                return Err(ApiError::malformed(path, format!("duplicate route id {:?}", r.id)));
            }
            routes
        }
        (None, Some(origin), Some(destination)) => {
            let engine = state
                .0
                .routing
                .as_ref()
                .ok_or_else(|| ApiError::bad_request("no routing engine configured; send inline routes"))?;
            engine
                .plan_trip(origin, destination, request.depart_time.unwrap_or(now))
                .await?
        }
        _ => return Err(ApiError::bad_request("send either routes or both origin and destination")),
    };

    let weather = match state.0.weather.current_weather(request.origin) {
        Ok(w) => Some(w),
        Err(e) => {
            tracing::warn!(error = %e, "weather unavailable; treating as not nice");
            None
        }
    };

    let snap = state.snapshot();
    let mut config = state.config().recommendation();
    config.context.promotions = (*snap.promotions).clone();
    let situation = Situation {
        user_id: &request.user_id,
        profile: &profile,
        log: &log,
        subscription: subscription.as_ref(),
        weather,
        now,
    };
    let rec: RouteRecommendation = recommend_routes(&routes, &situation, &config, request.verbose);
    Ok(ok_json(&rec))
}

fn usage_error(e: UsageError) -> ApiError {
    match e {
        UsageError::OutOfOrder { .. } => ApiError::new(StatusCode::CONFLICT, "conflict", e.to_string()),
        UsageError::InvalidUserId(_) => ApiError::bad_request(e.to_string()),
        _ => ApiError::internal(e.to_string()),
    }
}

async fn get_profile(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    check_user_id(&id)?;
    blocking(move || load_profile_or_404(state.store(), &id).map(|p| ok_json(&p))).await
}

async fn put_profile(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    check_user_id(&id)?;
    let profile: UserProfile = parse_body(&body)?;
    profile.validate().map_err(|v| ApiError::violations(v.to_string(), v.0))?;
    blocking(move || {
        state.store().save_profile(&id, &profile)?;
        Ok(ok_json(&profile))
    })
    .await
}

async fn get_subscription(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    check_user_id(&id)?;
    blocking(move || {
        let sub = state.store().load_subscription(&id)?;
        sub.map(|s| ok_json(&s))
            .ok_or_else(|| ApiError::not_found(format!("no subscription for {id:?}")))
    })
    .await
}

async fn put_subscription(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    check_user_id(&id)?;
    let sub: Subscription = parse_body(&body)?;
    if sub.user_id != id {
        return Err(ApiError::malformed("$.user_id".into(), format!("must match the path user {id:?}")));
    }
    let bad = sub.plan.violations("plan");
    if !bad.is_empty() {
        return Err(ApiError::violations("invalid plan", bad));
    }
    blocking(move || {
        load_profile_or_404(state.store(), &id)?;
        state.store().save_subscription(&sub)?;
        Ok(ok_json(&sub))
    })
    .await
}

async fn get_trips(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    check_user_id(&id)?;
    blocking(move || {
        load_profile_or_404(state.store(), &id)?;
        let log = state.store().usage().load(&id).map_err(usage_error)?;
        Ok(ok_json(&serde_json::json!({ "trips": log.records() })))
    })
    .await
}

async fn post_trip(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: TripRequest = parse_body(&body)?;
    check_user_id(&request.user_id)?;
    blocking(move || {
        let store = state.store();
        load_profile_or_404(store, &request.user_id)?;
        let quota_consumed = match request.quota_consumed {
            Some(q) => q,
            None => store
                .load_subscription(&request.user_id)?
                .map(|s| estimate_consumption(&request.route, &s.plan))
                .unwrap_or_default(),
        };
        let record = TripRecord {
            user_id: request.user_id,
            timestamp: request.timestamp,
            route: request.route,
            quota_consumed,
        };
        let count = store.usage().append(&record).map_err(usage_error)?;
        let body = render(&serde_json::json!({ "user_id": record.user_id, "trips": count, "record": record }));
        Ok(json_response(StatusCode::CREATED, body))
    })
    .await
}

async fn get_catalog(State(state): State<AppState>) -> Response {
    ok_json(&*state.snapshot().catalog)
}

/// Persists and installs a new catalog, checking the rules still fit it.
async fn install_catalog(state: &AppState, catalog: Catalog) -> Result<Response, ApiError> {
    let _admin = state.0.admin.lock().await;
    state.snapshot().rules.check_against(&catalog).map_err(|e| {
        ApiError::new(StatusCode::CONFLICT, "conflict", format!("current rules do not fit the catalog: {e}"))
    })?;
    let st = state.clone();
    let c = catalog.clone();
    blocking(move || st.store().save_catalog(&c).map_err(ApiError::from)).await?;
    let body = ok_json(&catalog);
    let catalog = Arc::new(catalog);
    state.swap(|s| Snapshot {
        catalog,
        ..s.clone()
    });
    Ok(body)
}

async fn put_catalog(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let text = std::str::from_utf8(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    install_catalog(&state, parse_catalog(text)?).await
}

async fn put_plan(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let text = std::str::from_utf8(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let plan = parse_plan(text)?;
    if plan.id != id {
        return Err(ApiError::malformed("$.id".into(), format!("must match the path plan id {id:?}")));
    }
    let next = state
        .snapshot()
        .catalog
        .upsert_plan(plan)
        .map_err(|v| ApiError::violations(v.to_string(), v.0))?;
    install_catalog(&state, next).await
}

async fn delete_plan(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let removal = state.snapshot().catalog.remove_plan(&id);
    if removal.missing {
        return Err(ApiError::not_found(format!("no plan {id:?}")));
    }
    install_catalog(&state, removal.catalog).await
}

async fn get_rules(State(state): State<AppState>) -> Response {
    let text = state.snapshot().rules_text.to_string();
    (StatusCode::OK, [(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response()
}

async fn put_rules(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let text = String::from_utf8(body.to_vec()).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let rules = RuleSet::parse(&text)?;
    let _admin = state.0.admin.lock().await;
    rules.check_against(&state.snapshot().catalog)?;
    let st = state.clone();
    let t = text.clone();
    blocking(move || st.store().save_rules_text(&t).map_err(ApiError::from)).await?;
    let body = ok_json(&serde_json::json!({
        "rules": rules.len(),
        "canonical": rules.iter().map(|r| format!("{}: {r}", r.id)).collect::<Vec<_>>(),
    }));
    let (rules, text) = (Arc::new(rules), Arc::new(text));
    state.swap(|s| Snapshot {
        rules,
        rules_text: text,
        ..s.clone()
    });
    Ok(body)
}

async fn get_promotions(State(state): State<AppState>) -> Response {
    ok_json(&*state.snapshot().promotions)
}

async fn put_promotions(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let promotions: Promotions = parse_body(&body)?;
    if let Some(p) = promotions.promoted_modes.iter().find(|p| p.min_distance_m.is_nan() || p.min_distance_m < 0.0) {
        return Err(ApiError::bad_request(format!("min_distance_m for {} must be >= 0", p.mode)));
    }
    let _admin = state.0.admin.lock().await;
    let st = state.clone();
    let p = promotions.clone();
    blocking(move || st.store().save_promotions(&p).map_err(ApiError::from)).await?;
    let body = ok_json(&promotions);
    let promotions = Arc::new(promotions);
    state.swap(|s| Snapshot {
        promotions,
        ..s.clone()
    });
    Ok(body)
}
