//! Multimodal route alternatives, the trip usage log, and adapters to the
//! external routing engine and weather provider.

pub mod adapters;
mod usage;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::Mode;
use crate::error::{Violation, Violations};

pub use usage::{consumed_quota, estimate_consumption, valid_user_id, QuotaUse, Subscription, TripRecord, UsageError, UsageLog, UsageStore};

/// Familiarity signature distance bucket.
pub const SIGNATURE_BUCKET_M: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegMode {
    Walk,
    Bike,
    BikeSharing,
    Car,
    CarSharing,
    Taxi,
    RideSharing,
    PublicTransport,
}

impl LegMode {
    pub const ALL: [LegMode; 8] = [
        LegMode::Walk,
        LegMode::Bike,
        LegMode::BikeSharing,
        LegMode::Car,
        LegMode::CarSharing,
        LegMode::Taxi,
        LegMode::RideSharing,
        LegMode::PublicTransport,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LegMode::Walk => "walk",
            LegMode::Bike => "bike",
            LegMode::BikeSharing => "bike_sharing",
            LegMode::Car => "car",
            LegMode::CarSharing => "car_sharing",
            LegMode::Taxi => "taxi",
            LegMode::RideSharing => "ride_sharing",
            LegMode::PublicTransport => "public_transport",
        }
    }

    /// The plan mode whose quota this leg draws on, if any.
    pub fn plan_mode(self) -> Option<Mode> {
        match self {
            LegMode::PublicTransport => Some(Mode::PublicTransport),
            LegMode::Taxi => Some(Mode::Taxi),
            LegMode::BikeSharing => Some(Mode::BikeSharing),
            LegMode::CarSharing => Some(Mode::CarSharing),
            _ => None,
        }
    }

    pub fn is_bike(self) -> bool {
        matches!(self, LegMode::Bike | LegMode::BikeSharing)
    }
}

impl fmt::Display for LegMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub mode: LegMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_id: Option<String>,
    pub distance_m: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub cost: f64,
}

impl Leg {
    pub fn new(mode: LegMode, distance_m: f64, duration_s: f64, cost: f64) -> Leg {
        Leg {
            mode,
            provider_id: None,
            distance_m,
            duration_s,
            cost,
        }
    }

    pub fn with_provider(mut self, provider: impl Into<String>) -> Leg {
        self.provider_id = Some(provider.into());
        self
    }
}

/// Totals derived from a route's legs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteTotals {
    pub total_distance_m: f64,
    pub total_duration_s: f64,
    pub total_cost: f64,
    pub walk_distance_m: f64,
    pub bike_distance_m: f64,
    pub main_mode: LegMode,
}

impl RouteTotals {
    fn compute(legs: &[Leg]) -> RouteTotals {
        let sum = |f: fn(&Leg) -> f64| legs.iter().map(f).sum::<f64>();
        let walk_distance_m = legs.iter().filter(|l| l.mode == LegMode::Walk).map(|l| l.distance_m).sum();
        let bike_distance_m = legs.iter().filter(|l| l.mode.is_bike()).map(|l| l.distance_m).sum();

        // per-mode distance in order of first occurrence
        let mut per_mode: Vec<(LegMode, f64)> = Vec::new();
        for leg in legs.iter().filter(|l| l.mode != LegMode::Walk) {
            match per_mode.iter_mut().find(|(m, _)| *m == leg.mode) {
                Some((_, d)) => *d += leg.distance_m,
                None => per_mode.push((leg.mode, leg.distance_m)),
            }
        }
        let mut main_mode = LegMode::Walk;
        let mut best = f64::NEG_INFINITY;
        for (m, d) in per_mode {
            if d > best {
                best = d;
                main_mode = m;
            }
        }

        RouteTotals {
            total_distance_m: sum(|l| l.distance_m),
            total_duration_s: sum(|l| l.duration_s),
            total_cost: sum(|l| l.cost),
            walk_distance_m,
            bike_distance_m,
            main_mode,
        }
    }
}

#[derive(Deserialize)]
struct RouteDoc {
    id: String,
    legs: Vec<Leg>,
}

/// A route alternative. Totals are always recomputed from the legs; any
/// totals present in an input document are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RouteDoc")]
pub struct Route {
    pub id: String,
    legs: Vec<Leg>,
    totals: RouteTotals,
}

impl TryFrom<RouteDoc> for Route {
    type Error = Violations;

    fn try_from(doc: RouteDoc) -> Result<Self, Self::Error> {
        Route::new(doc.id, doc.legs)
    }
}

impl Route {
    pub fn new(id: impl Into<String>, legs: Vec<Leg>) -> Result<Route, Violations> {
        let id = id.into();
        let mut out = Vec::new();
        if id.is_empty() {
            out.push(Violation::new("id", "route id must not be empty"));
        }
        if legs.is_empty() {
            out.push(Violation::new("legs", "a route needs at least one leg"));
        }
        for (i, leg) in legs.iter().enumerate() {
            for (field, v) in [("distance_m", leg.distance_m), ("duration_s", leg.duration_s), ("cost", leg.cost)] {
                if !(v.is_finite() && v >= 0.0) {
                    out.push(Violation::new(format!("legs[{i}].{field}"), format!("must be non-negative, got {v}")));
                }
            }
        }
        if !out.is_empty() {
            return Err(Violations(out));
        }
        let totals = RouteTotals::compute(&legs);
        Ok(Route { id, legs, totals })
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    pub fn totals(&self) -> &RouteTotals {
        &self.totals
    }

    pub fn main_mode(&self) -> LegMode {
        self.totals.main_mode
    }

    pub fn walk_distance_m(&self) -> f64 {
        self.totals.walk_distance_m
    }

    pub fn bike_distance_m(&self) -> f64 {
        self.totals.bike_distance_m
    }

    pub fn uses_mode(&self, mode: LegMode) -> bool {
        self.legs.iter().any(|l| l.mode == mode)
    }

    /// Summed distance over legs of `mode`.
    pub fn distance_on(&self, mode: LegMode) -> f64 {
        self.legs.iter().filter(|l| l.mode == mode).map(|l| l.distance_m).sum()
    }

    /// Leg-mode sequence plus the total distance bucketed to 500 m.
    pub fn signature(&self) -> (Vec<LegMode>, u64) {
        let modes = self.legs.iter().map(|l| l.mode).collect();
        (modes, (self.totals.total_distance_m / SIGNATURE_BUCKET_M).floor() as u64)
    }
}

#[derive(Deserialize)]
struct RoutesDoc {
    routes: Vec<RouteDoc>,
}

#[derive(Debug, thiserror::Error)]
pub enum RoutesError {
    #[error("malformed routes document at {path}: {reason}")]
    Malformed { path: String, reason: String },
    #[error("invalid routes: {0}")]
    Invalid(#[from] Violations),
}

/// Parses a `{"routes": [...]}` document, recomputing derived totals.
pub fn ingest_routes(document: &str) -> Result<Vec<Route>, RoutesError> {
    let doc: RoutesDoc = crate::error::from_json_str(document)
        .map_err(|(path, reason)| RoutesError::Malformed { path, reason })?;
    build_routes(doc.routes.into_iter().map(|r| (r.id, r.legs)).collect(), "routes")
}

pub(crate) fn build_routes(raw: Vec<(String, Vec<Leg>)>, prefix: &str) -> Result<Vec<Route>, RoutesError> {
    let mut violations = Vec::new();
    let mut routes = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, (id, legs)) in raw.into_iter().enumerate() {
        if !seen.insert(id.clone()) {
            violations.push(Violation::new(format!("{prefix}[{i}].id"), format!("duplicate route id {id:?}")));
        }
        match Route::new(id, legs) {
            Ok(r) => routes.push(r),
            Err(v) => violations.extend(
                v.0.into_iter()
                    .map(|v| Violation::new(format!("{prefix}[{i}].{}", v.path), v.reason)),
            ),
        }
    }
    if violations.is_empty() {
        Ok(routes)
    } else {
        Err(RoutesError::Invalid(Violations(violations)))
    }
}

pub fn routes_to_json(routes: &[Route]) -> String {
    serde_json::to_string_pretty(&serde_json::json!({ "routes": routes })).expect("routes serialize")
}
