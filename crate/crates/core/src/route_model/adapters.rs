//! Routing-engine and weather adapters.
//!
//! # HTTP routing adapter
//!
//! [`HttpRoutingEngine`] issues
//! `GET {base_url}/plan?fromPlace={lat},{lon}&toPlace={lat},{lon}&date=YYYY-MM-DD&time=HH:MM:SS`
//! and expects a multimodal-planner response of the form
//!
//! ```json
//! { "plan": { "itineraries": [
//!     { "id": "optional", "legs": [
//!         { "mode": "WALK", "distance": 412.0, "duration": 320,
//!           "agencyId": "optional", "rentedBike": false, "rentedCar": false,
//!           "cost": 0 } ] } ] } }
//! ```
//!
//! Field mapping onto [`Leg`]:
//!
//! | response            | leg           |
//! |---------------------|---------------|
//! | `distance` (m)      | `distance_m`  |
//! | `duration` (s)      | `duration_s`  |
//! | `cost` (optional)   | `cost` (0 when absent) |
//! | `agencyId`          | `provider_id` |
//!
//! Modes (case-insensitive): `WALK` → walk; `BICYCLE` → bike, or bike_sharing
//! when `rentedBike`; `BICYCLE_RENT`/`BIKESHARE`/`BIKE_SHARING` → bike_sharing;
//! `CAR` → car, or car_sharing when `rentedCar`; `CAR_RENT`/`CARSHARE`/`CAR_SHARING`
//! → car_sharing; `TAXI`/`CAR_HAIL` → taxi; `CARPOOL`/`RIDESHARE`/`RIDE_SHARING`
//! → ride_sharing; `BUS`, `TRAM`, `RAIL`, `SUBWAY`, `FERRY`, `CABLE_CAR`,
//! `GONDOLA`, `FUNICULAR`, `TROLLEYBUS`, `MONORAIL`, `COACH`, `TRANSIT` →
//! public_transport. Any other mode fails the whole response. Itineraries
//! without an `id` are named `itinerary-{index}`.

use std::path::{Path, PathBuf};
use std::time::Duration;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{build_routes, ingest_routes, Leg, LegMode, Route, RoutesError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum RoutingError {
    #[error("routing engine request failed: {0}")]
    Http(String),
    #[error("routing engine response at {path}: {reason}")]
    Decode { path: String, reason: String },
    #[error("routing engine returned unsupported mode {0:?}")]
    UnknownMode(String),
    #[error(transparent)]
    Routes(#[from] RoutesError),
    #[error("reading routes file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[async_trait]
pub trait RoutingEngine: Send + Sync {
    async fn plan_trip(
        &self,
        origin: Coordinates,
        destination: Coordinates,
        depart: DateTime<Utc>,
    ) -> Result<Vec<Route>, RoutingError>;
}

/// Serves canned alternatives from a routes document, whatever the query.
#[derive(Debug, Clone)]
pub struct StubRoutingEngine {
    routes: Vec<Route>,
}

impl StubRoutingEngine {
    pub fn new(routes: Vec<Route>) -> Self {
        Self { routes }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, RoutingError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RoutingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::new(ingest_routes(&text)?))
    }
}

#[async_trait]
impl RoutingEngine for StubRoutingEngine {
    async fn plan_trip(&self, _: Coordinates, _: Coordinates, _: DateTime<Utc>) -> Result<Vec<Route>, RoutingError> {
        Ok(self.routes.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpRoutingConfig {
    pub base_url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    5000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoutingConfig {
    Http(HttpRoutingConfig),
    File { path: PathBuf },
}

pub fn routing_engine_from_config(config: &RoutingConfig) -> Result<Box<dyn RoutingEngine>, RoutingError> {
    Ok(match config {
        RoutingConfig::Http(c) => Box::new(HttpRoutingEngine::new(c.clone())?),
        RoutingConfig::File { path } => Box::new(StubRoutingEngine::from_file(path)?),
    })
}

pub struct HttpRoutingEngine {
    client: reqwest::Client,
    base_url: String,
}

impl HttpRoutingEngine {
    pub fn new(config: HttpRoutingConfig) -> Result<Self, RoutingError> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| RoutingError::Http(e.to_string()))?;
        Ok(Self {
            client,
            base_url: config.base_url.trim_end_matches('/').to_string(),
        })
    }
}

#[async_trait]
impl RoutingEngine for HttpRoutingEngine {
    async fn plan_trip(
        &self,
        origin: Coordinates,
        destination: Coordinates,
        depart: DateTime<Utc>,
    ) -> Result<Vec<Route>, RoutingError> {
        let query = [
            ("fromPlace", format!("{},{}", origin.lat, origin.lon)),
            ("toPlace", format!("{},{}", destination.lat, destination.lon)),
            ("date", depart.format("%Y-%m-%d").to_string()),
            ("time", depart.format("%H:%M:%S").to_string()),
        ];
        let resp = self
            .client
            .get(format!("{}/plan", self.base_url))
            .query(&query)
            .send()
            .await
            .map_err(|e| RoutingError::Http(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(RoutingError::Http(format!("status {status}")));
        }
        let body = resp.text().await.map_err(|e| RoutingError::Http(e.to_string()))?;
        map_planner_response(&body)
    }
}

#[derive(Deserialize)]
struct PlannerResponse {
    plan: PlannerPlan,
}

#[derive(Deserialize)]
struct PlannerPlan {
    #[serde(default)]
    itineraries: Vec<PlannerItinerary>,
}

#[derive(Deserialize)]
struct PlannerItinerary {
    #[serde(default)]
    id: Option<String>,
    legs: Vec<PlannerLeg>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct PlannerLeg {
    mode: String,
    distance: f64,
    duration: f64,
    #[serde(default)]
    agency_id: Option<String>,
    #[serde(default)]
    rented_bike: bool,
    #[serde(default)]
    rented_car: bool,
    #[serde(default)]
    cost: f64,
}

fn map_mode(leg: &PlannerLeg) -> Option<LegMode> {
    let m = leg.mode.to_ascii_uppercase();
    Some(match m.as_str() {
        "WALK" => LegMode::Walk,
        "BICYCLE" if leg.rented_bike => LegMode::BikeSharing,
        "BICYCLE" => LegMode::Bike,
        "BICYCLE_RENT" | "BIKESHARE" | "BIKE_SHARING" => LegMode::BikeSharing,
        "CAR" if leg.rented_car => LegMode::CarSharing,
        "CAR" => LegMode::Car,
        "CAR_RENT" | "CARSHARE" | "CAR_SHARING" => LegMode::CarSharing,
        "TAXI" | "CAR_HAIL" => LegMode::Taxi,
        "CARPOOL" | "RIDESHARE" | "RIDE_SHARING" => LegMode::RideSharing,
        "BUS" | "TRAM" | "RAIL" | "SUBWAY" | "FERRY" | "CABLE_CAR" | "GONDOLA" | "FUNICULAR" | "TROLLEYBUS"
        | "MONORAIL" | "COACH" | "TRANSIT" => LegMode::PublicTransport,
        _ => return None,
    })
}

/// Maps a multimodal-planner JSON response to routes (see the module docs).
pub fn map_planner_response(body: &str) -> Result<Vec<Route>, RoutingError> {
    let resp: PlannerResponse =
        crate::error::from_json_str(body).map_err(|(path, reason)| RoutingError::Decode { path, reason })?;
    let mut raw = Vec::with_capacity(resp.plan.itineraries.len());
    for (i, it) in resp.plan.itineraries.into_iter().enumerate() {
        let legs = it
            .legs
            .iter()
            .map(|l| {
                let mode = map_mode(l).ok_or_else(|| RoutingError::UnknownMode(l.mode.clone()))?;
                Ok(Leg {
                    mode,
                    provider_id: l.agency_id.clone(),
                    distance_m: l.distance,
                    duration_s: l.duration,
                    cost: l.cost,
                })
            })
            .collect::<Result<Vec<_>, RoutingError>>()?;
        raw.push((it.id.unwrap_or_else(|| format!("itinerary-{i}")), legs));
    }
    Ok(build_routes(raw, "plan.itineraries")?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherReading {
    pub temperature_celsius: f64,
    pub precipitation_mm_per_hour: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum WeatherError {
    #[error("weather provider unavailable: {0}")]
    Unavailable(String),
}

pub trait WeatherProvider: Send + Sync {
    fn current_weather(&self, location: Option<Coordinates>) -> Result<WeatherReading, WeatherError>;
}

/// Always reports the same reading.
#[derive(Debug, Clone, Copy)]
pub struct StaticWeather(pub WeatherReading);

impl WeatherProvider for StaticWeather {
    fn current_weather(&self, _: Option<Coordinates>) -> Result<WeatherReading, WeatherError> {
        Ok(self.0)
    }
}

/// Reads a `{"temperature_celsius": .., "precipitation_mm_per_hour": ..}`
/// document on every call.
#[derive(Debug, Clone)]
pub struct FileWeather {
    pub path: PathBuf,
}

impl WeatherProvider for FileWeather {
    fn current_weather(&self, _: Option<Coordinates>) -> Result<WeatherReading, WeatherError> {
        let text = std::fs::read_to_string(&self.path)
            .map_err(|e| WeatherError::Unavailable(format!("{}: {e}", self.path.display())))?;
        serde_json::from_str(&text).map_err(|e| WeatherError::Unavailable(format!("{}: {e}", self.path.display())))
    }
}

/// A provider that is never reachable.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoWeather;

impl WeatherProvider for NoWeather {
    fn current_weather(&self, _: Option<Coordinates>) -> Result<WeatherReading, WeatherError> {
        Err(WeatherError::Unavailable("no weather provider configured".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeatherConfig {
    Static(WeatherReading),
    File {
        path: PathBuf,
    },
    #[default]
    None,
}

pub fn weather_provider_from_config(config: &WeatherConfig) -> Box<dyn WeatherProvider> {
    match config {
        WeatherConfig::Static(r) => Box::new(StaticWeather(*r)),
        WeatherConfig::File { path } => Box::new(FileWeather { path: path.clone() }),
        WeatherConfig::None => Box::new(NoWeather),
    }
}
