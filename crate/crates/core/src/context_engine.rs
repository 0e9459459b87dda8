//! Binary context variables that steer route ranking.
//!
//! Five groups are inferred: usage-trend flags from the subscription's usage
//! log, acceptable walk/bike distance per route, route or mode unfamiliarity,
//! nice weather, and operator promotion of a route's main mode or provider.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::catalog::Mode;
use crate::constraint_kb::UserProfile;
use crate::route_model::adapters::WeatherReading;
use crate::route_model::{consumed_quota, LegMode, Route, Subscription, UsageLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromotedMode {
    pub mode: LegMode,
    #[serde(default)]
    pub min_distance_m: f64,
}

/// Operator promotion settings; editable at runtime through the service.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Promotions {
    #[serde(default)]
    pub promoted_modes: Vec<PromotedMode>,
    #[serde(default)]
    pub promoted_providers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContextConfig {
    pub theta_usage: f64,
    pub theta_time: f64,
    pub theta_temp_c: f64,
    pub theta_precip_mm_h: f64,
    #[serde(flatten)]
    pub promotions: Promotions,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            theta_usage: 0.05,
            theta_time: 0.25,
            theta_temp_c: 15.0,
            theta_precip_mm_h: 0.5,
            promotions: Promotions::default(),
        }
    }
}

impl ContextConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("theta_usage", self.theta_usage), ("theta_time", self.theta_time)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must be a fraction in [0, 1], got {v}"));
            }
        }
        if !(self.theta_precip_mm_h.is_finite() && self.theta_precip_mm_h >= 0.0) {
            return Err(format!("theta_precip_mm_h must be >= 0, got {}", self.theta_precip_mm_h));
        }
        if !self.theta_temp_c.is_finite() {
            return Err("theta_temp_c must be finite".into());
        }
        if let Some(p) = self.promotions.promoted_modes.iter().find(|p| p.min_distance_m.is_nan() || p.min_distance_m < 0.0) {
            return Err(format!("min_distance_m for {} must be >= 0", p.mode));
        }
        Ok(())
    }
}

/// Modes with a usage-trend flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendMode {
    CarSharing,
    BikeSharing,
    Taxi,
    RideSharing,
}

impl TrendMode {
    pub const ALL: [TrendMode; 4] = [
        TrendMode::CarSharing,
        TrendMode::BikeSharing,
        TrendMode::Taxi,
        TrendMode::RideSharing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TrendMode::CarSharing => "car_sharing",
            TrendMode::BikeSharing => "bike_sharing",
            TrendMode::Taxi => "taxi",
            TrendMode::RideSharing => "ride_sharing",
        }
    }

    /// Plan quota backing the mode. Ride sharing is never part of a plan.
    pub fn plan_mode(self) -> Option<Mode> {
        match self {
            TrendMode::CarSharing => Some(Mode::CarSharing),
            TrendMode::BikeSharing => Some(Mode::BikeSharing),
            TrendMode::Taxi => Some(Mode::Taxi),
            TrendMode::RideSharing => None,
        }
    }

    pub fn of_leg_mode(mode: LegMode) -> Option<TrendMode> {
        match mode {
            LegMode::CarSharing => Some(TrendMode::CarSharing),
            LegMode::BikeSharing => Some(TrendMode::BikeSharing),
            LegMode::Taxi => Some(TrendMode::Taxi),
            LegMode::RideSharing => Some(TrendMode::RideSharing),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RouteFlags {
    pub acceptable_walk: bool,
    pub acceptable_bike: bool,
    pub unfamiliar: bool,
    pub promoted_mode: bool,
    pub promoted_msp: bool,
}

impl RouteFlags {
    /// Names of the active flags, in declaration order.
    pub fn badges(&self) -> Vec<String> {
        [
            ("acceptable_walk", self.acceptable_walk),
            ("acceptable_bike", self.acceptable_bike),
            ("unfamiliar", self.unfamiliar),
            ("promoted_mode", self.promoted_mode),
            ("promoted_msp", self.promoted_msp),
        ]
        .into_iter()
        .filter(|(_, on)| *on)
        .map(|(n, _)| n.to_string())
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextState {
    pub increased_usage_trend: BTreeMap<TrendMode, bool>,
    pub nice_weather: bool,
    /// Set when no weather reading was available.
    pub weather_stale: bool,
    pub routes: BTreeMap<String, RouteFlags>,
}

impl ContextState {
    pub fn route(&self, id: &str) -> RouteFlags {
        self.routes.get(id).copied().unwrap_or_default()
    }

    pub fn trend(&self, mode: TrendMode) -> bool {
        self.increased_usage_trend.get(&mode).copied().unwrap_or(false)
    }
}

/// Everything about the traveler and the moment that context depends on.
#[derive(Debug, Clone, Copy)]
pub struct Situation<'a> {
    pub user_id: &'a str,
    pub profile: &'a UserProfile,
    pub log: &'a UsageLog,
    pub subscription: Option<&'a Subscription>,
    /// `None` when the weather provider could not be reached.
    pub weather: Option<WeatherReading>,
    pub now: DateTime<Utc>,
}

/// Over-consumption flag: with quota `Q`, elapsed fraction `e` and consumed
/// amount `u`, true iff `(u - e*Q)/Q > theta_usage` and `1 - e < theta_time`.
pub fn usage_trend(
    log: &UsageLog,
    subscription: &Subscription,
    mode: TrendMode,
    now: DateTime<Utc>,
    config: &ContextConfig,
) -> bool {
    let Some(mode) = mode.plan_mode() else {
        return false;
    };
    let quota = subscription.plan.quota(mode);
    if quota <= 0.0 || !subscription.contains(now) {
        return false;
    }
    let elapsed = subscription.elapsed_fraction(now);
    let used = consumed_quota(log, subscription, mode, now);
    let overuse = (used - elapsed * quota) / quota;
    overuse > config.theta_usage && (1.0 - elapsed) < config.theta_time
}

/// `(walk below the user's limit, bike below the user's limit)`, strictly.
pub fn acceptable_distance(route: &Route, profile: &UserProfile) -> (bool, bool) {
    (
        route.walk_distance_m() < profile.max_walk_m,
        route.bike_distance_m() < profile.max_bike_m,
    )
}

/// True when the user has no logged trip using the route's main mode, or no
/// logged trip with the same signature.
pub fn unfamiliar(route: &Route, log: &UsageLog, user_id: &str) -> bool {
    let main = route.main_mode();
    let signature = route.signature();
    let mut mode_seen = false;
    let mut route_seen = false;
    for r in log.for_user(user_id) {
        mode_seen |= r.route.uses_mode(main);
        route_seen |= r.route.signature() == signature;
    }
    !mode_seen || !route_seen
}

pub fn nice_weather(reading: &WeatherReading, config: &ContextConfig) -> bool {
    reading.temperature_celsius > config.theta_temp_c && reading.precipitation_mm_per_hour < config.theta_precip_mm_h
}

/// `(promoted main mode over its distance threshold, main mode served by a
/// promoted provider)`.
pub fn promoted_flags(route: &Route, promotions: &Promotions) -> (bool, bool) {
    let main = route.main_mode();
    let promoted_mode = promotions
        .promoted_modes
        .iter()
        .any(|p| p.mode == main && route.distance_on(main) > p.min_distance_m);
    let promoted_msp = route
        .legs()
        .iter()
        .filter(|l| l.mode == main)
        .filter_map(|l| l.provider_id.as_deref())
        .any(|id| promotions.promoted_providers.iter().any(|p| p == id));
    (promoted_mode, promoted_msp)
}

pub fn infer_context(routes: &[Route], situation: &Situation<'_>, config: &ContextConfig) -> ContextState {
    let increased_usage_trend = TrendMode::ALL
        .into_iter()
        .map(|m| {
            let on = situation
                .subscription
                .is_some_and(|s| usage_trend(situation.log, s, m, situation.now, config));
            (m, on)
        })
        .collect();
    let (nice, stale) = match &situation.weather {
        Some(r) => (nice_weather(r, config), false),
        None => (false, true),
    };
    let routes: BTreeMap<String, RouteFlags> = routes
        .iter()
        .map(|r| {
            let (acceptable_walk, acceptable_bike) = acceptable_distance(r, situation.profile);
            let (promoted_mode, promoted_msp) = promoted_flags(r, &config.promotions);
            let flags = RouteFlags {
                acceptable_walk,
                acceptable_bike,
                unfamiliar: unfamiliar(r, situation.log, situation.user_id),
                promoted_mode,
                promoted_msp,
            };
            (r.id.clone(), flags)
        })
        .collect();
    ContextState {
        increased_usage_trend,
        nice_weather: nice,
        weather_stale: stale,
        routes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{MaasPlan, ModeQuota, Price, QuotaUnit};
    use crate::route_model::{Leg, QuotaUse, TripRecord};
    use chrono::{Duration, TimeZone};
    use proptest::prelude::*;

    fn start() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 4, 1, 0, 0, 0).unwrap()
    }

    fn plan(hours: f64) -> MaasPlan {
        MaasPlan {
            id: "p".into(),
            quotas: vec![ModeQuota::new(Mode::CarSharing, hours, QuotaUnit::DrivingHours)],
            price: Price { amount: 10_000.0, currency: "HUF".into() },
            period_days: 30,
            tags: vec![],
        }
    }

    fn route(id: &str, legs: Vec<Leg>) -> Route {
        Route::new(id, legs).unwrap()
    }

    fn car_trip(at: DateTime<Utc>, hours: f64) -> TripRecord {
        TripRecord {
            user_id: "u".into(),
            timestamp: at,
            route: route("c", vec![Leg::new(LegMode::CarSharing, 7000.0, 900.0, 0.0)]),
            quota_consumed: vec![QuotaUse { mode: Mode::CarSharing, amount: hours, unit: QuotaUnit::DrivingHours }],
        }
    }

    fn log_with(hours: f64) -> UsageLog {
        let mut log = UsageLog::new();
        log.record(car_trip(start() + Duration::days(2), hours)).unwrap();
        log
    }

    #[test]
    fn trend_overuse_near_period_end() {
        let sub = Subscription::new("u", plan(10.0), start());
        let cfg = ContextConfig::default();
        let day24 = start() + Duration::days(24);
        assert!(usage_trend(&log_with(9.0), &sub, TrendMode::CarSharing, day24, &cfg));
        assert!(!usage_trend(&log_with(8.0), &sub, TrendMode::CarSharing, day24, &cfg));
        let day10 = start() + Duration::days(10);
        assert!(!usage_trend(&log_with(9.0), &sub, TrendMode::CarSharing, day10, &cfg));
    }

    #[test]
    fn trend_false_for_modes_outside_plan() {
        let sub = Subscription::new("u", plan(10.0), start());
        let day24 = start() + Duration::days(24);
        let cfg = ContextConfig::default();
        for m in [TrendMode::Taxi, TrendMode::BikeSharing, TrendMode::RideSharing] {
            assert!(!usage_trend(&log_with(9.0), &sub, m, day24, &cfg));
        }
    }

    proptest! {
        #[test]
        fn exact_uniform_consumption_never_triggers(
            day in 0i64..=30,
            quota in 1u32..100,
            theta_usage in 0.0001f64..1.0,
            theta_time in 0.0001f64..1.0,
        ) {
            let sub = Subscription::new("u", plan(quota as f64), start());
            let now = start() + Duration::days(day);
            let used = sub.elapsed_fraction(now) * quota as f64;
            let mut log = UsageLog::new();
            log.record(car_trip(start(), used)).unwrap();
            let cfg = ContextConfig { theta_usage, theta_time, ..Default::default() };
            prop_assert!(!usage_trend(&log, &sub, TrendMode::CarSharing, now, &cfg));
        }
    }

    #[test]
    fn distance_acceptability() {
        let p = UserProfile::default();
        let r = route("r", vec![Leg::new(LegMode::Walk, 600.0, 1.0, 0.0), Leg::new(LegMode::PublicTransport, 3000.0, 1.0, 0.0)]);
        assert_eq!(acceptable_distance(&r, &p), (true, true));
        let edge = route("e", vec![Leg::new(LegMode::Walk, 1500.0, 1.0, 0.0)]);
        assert!(!acceptable_distance(&edge, &p).0);
    }

    #[test]
    fn familiarity() {
        let empty = UsageLog::new();
        let bikes = route("b", vec![Leg::new(LegMode::BikeSharing, 2000.0, 1.0, 0.0)]);
        assert!(unfamiliar(&bikes, &empty, "u"));

        let log = log_with(1.0);
        let same = route("same", vec![Leg::new(LegMode::CarSharing, 7200.0, 950.0, 0.0)]);
        assert!(!unfamiliar(&same, &log, "u"));
        // another user's history does not count
        assert!(unfamiliar(&same, &log, "someone-else"));
        assert!(unfamiliar(&bikes, &log, "u"));
        // known mode, new signature
        let longer = route("l", vec![Leg::new(LegMode::CarSharing, 9000.0, 1.0, 0.0)]);
        assert!(unfamiliar(&longer, &log, "u"));
    }

    #[test]
    fn weather() {
        let cfg = ContextConfig::default();
        let r = |t, p| WeatherReading { temperature_celsius: t, precipitation_mm_per_hour: p };
        assert!(nice_weather(&r(22.0, 0.0), &cfg));
        assert!(!nice_weather(&r(10.0, 0.0), &cfg));
        assert!(!nice_weather(&r(20.0, 5.0), &cfg));
    }

    #[test]
    fn promotion() {
        let promos = Promotions {
            promoted_modes: vec![PromotedMode { mode: LegMode::BikeSharing, min_distance_m: 1000.0 }],
            promoted_providers: vec!["msp-42".into()],
        };
        let long = route("l", vec![Leg::new(LegMode::BikeSharing, 2000.0, 1.0, 0.0).with_provider("msp-7")]);
        assert_eq!(promoted_flags(&long, &promos), (true, false));
        let short = route("s", vec![Leg::new(LegMode::BikeSharing, 800.0, 1.0, 0.0).with_provider("msp-42")]);
        assert_eq!(promoted_flags(&short, &promos), (false, true));
    }

    fn situation<'a>(profile: &'a UserProfile, log: &'a UsageLog, weather: Option<WeatherReading>) -> Situation<'a> {
        Situation { user_id: "u", profile, log, subscription: None, weather, now: start() }
    }

    #[test]
    fn infer_empty_and_single() {
        let p = UserProfile::default();
        let log = UsageLog::new();
        let nice = Some(WeatherReading { temperature_celsius: 22.0, precipitation_mm_per_hour: 0.0 });
        let ctx = infer_context(&[], &situation(&p, &log, nice), &ContextConfig::default());
        assert!(ctx.routes.is_empty());
        assert_eq!(ctx.increased_usage_trend.len(), 4);

        let r = route("r", vec![Leg::new(LegMode::Walk, 500.0, 400.0, 0.0)]);
        let ctx = infer_context(std::slice::from_ref(&r), &situation(&p, &log, nice), &ContextConfig::default());
        assert!(ctx.route("r").unfamiliar);
        assert!(ctx.nice_weather && !ctx.weather_stale);

        let two = [r.clone(), route("q", vec![Leg::new(LegMode::Bike, 500.0, 100.0, 0.0)])];
        let ctx = infer_context(&two, &situation(&p, &log, None), &ContextConfig::default());
        assert_eq!(ctx.routes.len(), 2);
        assert!(!ctx.nice_weather && ctx.weather_stale);
        assert_eq!(ctx, infer_context(&two, &situation(&p, &log, None), &ContextConfig::default()));
    }

    #[test]
    fn config_parses_with_flattened_promotions() {
        let c: ContextConfig = toml::from_str(
            "theta_usage = 0.1\npromoted_providers = [\"msp-42\"]\n[[promoted_modes]]\nmode = \"bike_sharing\"\nmin_distance_m = 1000.0\n",
        )
        .unwrap();
        assert_eq!(c.theta_usage, 0.1);
        assert_eq!(c.theta_time, 0.25);
        assert_eq!(c.promotions.promoted_modes[0].mode, LegMode::BikeSharing);
        assert!(c.validate().is_ok());
        assert!(ContextConfig { theta_time: 1.5, ..Default::default() }.validate().is_err());
    }
}
