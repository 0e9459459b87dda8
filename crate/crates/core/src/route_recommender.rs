//! Route recommendation: feasibility filtering, several utility views over
//! the surviving routes, and Borda-count fusion of those views into a single
//! ordering with a highlighted default.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::catalog::Mode;
use crate::constraint_kb::{Answer, UserProfile};
use crate::context_engine::{infer_context, ContextConfig, ContextState, Situation, TrendMode};
use crate::route_model::{consumed_quota, LegMode, Route, Subscription, UsageLog};

use chrono::{DateTime, Utc};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PersonalWeights {
    pub duration: f64,
    pub cost: f64,
    pub mode_preference: f64,
}

impl Default for PersonalWeights {
    fn default() -> Self {
        PersonalWeights {
            duration: 0.4,
            cost: 0.3,
            mode_preference: 0.3,
        }
    }
}

/// Optional system-view sub-functions. Personal and plan-usage views always run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EnabledViews {
    pub environmental: bool,
    pub promotion: bool,
    pub stress_happiness: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RouteRecommenderConfig {
    pub enabled: EnabledViews,
    pub personal_weights: PersonalWeights,
    /// Multiplier on the plan-usage score of modes with an increased usage trend.
    pub trend_penalty: f64,
    /// Grams of CO2 per person-km.
    pub emission_factors: BTreeMap<LegMode, f64>,
    pub default_emission_factor: f64,
    pub display_limit: usize,
}

impl Default for RouteRecommenderConfig {
    fn default() -> Self {
        RouteRecommenderConfig {
            enabled: EnabledViews::default(),
            personal_weights: PersonalWeights::default(),
            trend_penalty: 0.5,
            emission_factors: default_emission_factors(),
            default_emission_factor: 120.0,
            display_limit: 5,
        }
    }
}

pub fn default_emission_factors() -> BTreeMap<LegMode, f64> {
    BTreeMap::from([
        (LegMode::Walk, 0.0),
        (LegMode::Bike, 0.0),
        (LegMode::BikeSharing, 5.0),
        (LegMode::Car, 170.0),
        (LegMode::CarSharing, 150.0),
        (LegMode::Taxi, 180.0),
        (LegMode::RideSharing, 90.0),
        (LegMode::PublicTransport, 60.0),
    ])
}

/// One view's ordering of the candidate routes, best first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedList {
    pub source: String,
    pub route_ids: Vec<String>,
}

impl RankedList {
    /// Orders `scored` by score descending (or ascending when `ascending`),
    /// ties by route id.
    fn from_scores(source: &str, mut scored: Vec<(String, f64)>, ascending: bool) -> RankedList {
        scored.sort_by(|a, b| {
            let by_score = if ascending { a.1.total_cmp(&b.1) } else { b.1.total_cmp(&a.1) };
            by_score.then_with(|| a.0.cmp(&b.0))
        });
        RankedList {
            source: source.to_string(),
            route_ids: scored.into_iter().map(|(id, _)| id).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FusionError {
    #[error("a rank matrix needs at least one list")]
    NoLists,
    #[error("list {list} ranks route {route:?} twice")]
    DuplicateRoute { list: usize, route: String },
    #[error("list {list} ranks a different route set than list 0")]
    MismatchedRoutes { list: usize },
}

/// k ranked lists over the same n routes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankMatrix {
    lists: Vec<RankedList>,
}

impl RankMatrix {
    pub fn new(lists: Vec<RankedList>) -> Result<RankMatrix, FusionError> {
        let first = lists.first().ok_or(FusionError::NoLists)?;
        let reference: BTreeSet<&str> = first.route_ids.iter().map(String::as_str).collect();
        for (i, l) in lists.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for id in &l.route_ids {
                if !seen.insert(id.as_str()) {
                    return Err(FusionError::DuplicateRoute {
                        list: i,
                        route: id.clone(),
                    });
                }
            }
            if seen != reference {
                return Err(FusionError::MismatchedRoutes { list: i });
            }
        }
        Ok(RankMatrix { lists })
    }

    pub fn lists(&self) -> &[RankedList] {
        &self.lists
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FusedRoute {
    pub route_id: String,
    pub score: u64,
}

/// Borda count: a route at 0-based position `p` of `n` earns `n - 1 - p`
/// points per list; routes are ordered by total points, ties by id.
pub fn borda_fuse(matrix: &RankMatrix) -> Vec<FusedRoute> {
    let mut points: BTreeMap<&str, u64> = BTreeMap::new();
    for list in &matrix.lists {
        let n = list.route_ids.len() as u64;
        for (p, id) in list.route_ids.iter().enumerate() {
            *points.entry(id.as_str()).or_default() += n - 1 - p as u64;
        }
    }
    let mut fused: Vec<FusedRoute> = points
        .into_iter()
        .map(|(id, score)| FusedRoute {
            route_id: id.to_string(),
            score,
        })
        .collect();
    // BTreeMap iteration already yields ids ascending, so a stable sort keeps the tie-break
    fused.sort_by_key(|f| std::cmp::Reverse(f.score));
    fused
}

fn uses_any(route: &Route, modes: &[LegMode]) -> bool {
    route.legs().iter().any(|l| modes.contains(&l.mode))
}

/// Drops routes that make no sense for the profile: driving without a
/// license, cycling for non-cyclists, and bike or walk distances above the
/// user's limits.
pub fn filter_routes(routes: &[Route], profile: &UserProfile) -> Vec<Route> {
    routes
        .iter()
        .filter(|r| {
            let driving = profile.driving_license == Answer::No && uses_any(r, &[LegMode::Car, LegMode::CarSharing]);
            let cycling = profile.can_cycle == Answer::No && uses_any(r, &[LegMode::Bike, LegMode::BikeSharing]);
            let far_bike = r.bike_distance_m() > profile.max_bike_m;
            let far_walk = r.walk_distance_m() > profile.max_walk_m;
            !(driving || cycling || far_bike || far_walk)
        })
        .cloned()
        .collect()
}

fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect()
}

/// Which willingness answer stands for a leg mode.
fn willingness_mode(mode: LegMode) -> Option<Mode> {
    match mode {
        LegMode::Walk => None,
        LegMode::Bike | LegMode::BikeSharing => Some(Mode::BikeSharing),
        LegMode::Car | LegMode::CarSharing => Some(Mode::CarSharing),
        LegMode::Taxi | LegMode::RideSharing => Some(Mode::Taxi),
        LegMode::PublicTransport => Some(Mode::PublicTransport),
    }
}

/// Mode preference in [0, 1]: willingness per leg, weighted by leg distance.
fn mode_preference(route: &Route, profile: &UserProfile, acceptable_walk: bool) -> f64 {
    let pref = |mode: LegMode| match willingness_mode(mode) {
        None => {
            if acceptable_walk {
                1.0
            } else {
                0.0
            }
        }
        Some(m) => (5.0 - profile.willingness.get(m).value() as f64) / 4.0,
    };
    let legs = route.legs();
    let total: f64 = legs.iter().map(|l| l.distance_m).sum();
    if total > 0.0 {
        legs.iter().map(|l| l.distance_m * pref(l.mode)).sum::<f64>() / total
    } else {
        legs.iter().map(|l| pref(l.mode)).sum::<f64>() / legs.len() as f64
    }
}

pub fn personal_rank(routes: &[Route], profile: &UserProfile, context: &ContextState, weights: &PersonalWeights) -> RankedList {
    let durations: Vec<f64> = routes.iter().map(|r| r.totals().total_duration_s).collect();
    let costs: Vec<f64> = routes.iter().map(|r| r.totals().total_cost).collect();
    let nd = min_max(&durations);
    let nc = min_max(&costs);
    let scored = routes
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mp = mode_preference(r, profile, context.route(&r.id).acceptable_walk);
            let u = weights.duration * (1.0 - nd[i]) + weights.cost * (1.0 - nc[i]) + weights.mode_preference * mp;
            (r.id.clone(), u)
        })
        .collect();
    RankedList::from_scores("personal", scored, false)
}

/// Remaining-quota fraction of the route's main mode in the subscribed plan.
pub fn plan_usage_score(
    route: &Route,
    subscription: Option<&Subscription>,
    log: &UsageLog,
    context: &ContextState,
    now: DateTime<Utc>,
    trend_penalty: f64,
) -> f64 {
    let main = route.main_mode();
    if main == LegMode::Walk {
        return 1.0;
    }
    let remaining = match (subscription, main.plan_mode()) {
        (Some(sub), Some(mode)) if sub.plan.quota(mode) > 0.0 => {
            let quota = sub.plan.quota(mode);
            ((quota - consumed_quota(log, sub, mode, now)) / quota).clamp(0.0, 1.0)
        }
        _ => 0.0,
    };
    match TrendMode::of_leg_mode(main) {
        Some(t) if context.trend(t) => remaining * trend_penalty,
        _ => remaining,
    }
}

pub fn plan_usage_rank(
    routes: &[Route],
    subscription: Option<&Subscription>,
    log: &UsageLog,
    context: &ContextState,
    now: DateTime<Utc>,
    trend_penalty: f64,
) -> RankedList {
    let scored = routes
        .iter()
        .map(|r| (r.id.clone(), plan_usage_score(r, subscription, log, context, now, trend_penalty)))
        .collect();
    RankedList::from_scores("plan_usage", scored, false)
}

/// Grams of CO2 for the whole route.
pub fn emissions_g(route: &Route, config: &RouteRecommenderConfig) -> f64 {
    route
        .legs()
        .iter()
        .map(|l| {
            let factor = config
                .emission_factors
                .get(&l.mode)
                .copied()
                .unwrap_or(config.default_emission_factor);
            l.distance_m / 1000.0 * factor
        })
        .sum()
}

pub fn environmental_rank(routes: &[Route], config: &RouteRecommenderConfig) -> RankedList {
    let scored = routes.iter().map(|r| (r.id.clone(), emissions_g(r, config))).collect();
    RankedList::from_scores("environmental", scored, true)
}

pub fn promotion_rank(routes: &[Route], context: &ContextState) -> RankedList {
    let scored = routes
        .iter()
        .map(|r| {
            let f = context.route(&r.id);
            let score = 2.0 * f.promoted_mode as u8 as f64 + f.promoted_msp as u8 as f64;
            (r.id.clone(), score)
        })
        .collect();
    RankedList::from_scores("promotion", scored, false)
}

/// Extension slot for a stress and happiness view. Returning `None`
/// contributes no list to the fusion.
pub trait StressHappinessView: Send + Sync {
    fn rank(&self, routes: &[Route], profile: &UserProfile, context: &ContextState) -> Option<RankedList>;
}

/// The default stress and happiness view: contributes nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoStressModel;

impl StressHappinessView for NoStressModel {
    fn rank(&self, _: &[Route], _: &UserProfile, _: &ContextState) -> Option<RankedList> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendationStatus {
    Ok,
    NoFeasibleRoutes,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteEntry {
    pub route_id: String,
    pub score: u64,
    pub badges: Vec<String>,
    pub is_default: bool,
    pub route: Route,
}

/// User-level context flags reported alongside the ranking.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserContext {
    pub increased_usage_trend: BTreeMap<TrendMode, bool>,
    pub nice_weather: bool,
    pub weather_stale: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteRecommendation {
    pub status: RecommendationStatus,
    pub entries: Vec<RouteEntry>,
    /// Display limit applied; `None` when the full fused list is returned.
    pub truncated_to: Option<usize>,
    pub feasible_routes: usize,
    pub filtered_out: Vec<String>,
    pub views: Vec<String>,
    pub context: UserContext,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RecommendationConfig {
    pub context: ContextConfig,
    pub route_recommender: RouteRecommenderConfig,
}

pub fn recommend_routes(
    routes: &[Route],
    situation: &Situation<'_>,
    config: &RecommendationConfig,
    verbose: bool,
) -> RouteRecommendation {
    recommend_routes_with(routes, situation, config, verbose, &NoStressModel)
}

pub fn recommend_routes_with(
    routes: &[Route],
    situation: &Situation<'_>,
    config: &RecommendationConfig,
    verbose: bool,
    stress: &dyn StressHappinessView,
) -> RouteRecommendation {
    let rc = &config.route_recommender;
    let feasible = filter_routes(routes, situation.profile);
    let kept: BTreeSet<&str> = feasible.iter().map(|r| r.id.as_str()).collect();
    let filtered_out: Vec<String> = routes
        .iter()
        .filter(|r| !kept.contains(r.id.as_str()))
        .map(|r| r.id.clone())
        .collect();
    let context = infer_context(&feasible, situation, &config.context);
    let user_context = UserContext {
        increased_usage_trend: context.increased_usage_trend.clone(),
        nice_weather: context.nice_weather,
        weather_stale: context.weather_stale,
    };
    let truncated_to = (!verbose).then_some(rc.display_limit);

    if feasible.is_empty() {
        return RouteRecommendation {
            status: RecommendationStatus::NoFeasibleRoutes,
            entries: Vec::new(),
            truncated_to,
            feasible_routes: 0,
            filtered_out,
            views: Vec::new(),
            context: user_context,
        };
    }

    let mut lists = vec![
        personal_rank(&feasible, situation.profile, &context, &rc.personal_weights),
        plan_usage_rank(&feasible, situation.subscription, situation.log, &context, situation.now, rc.trend_penalty),
    ];
    if rc.enabled.environmental {
        lists.push(environmental_rank(&feasible, rc));
    }
    if rc.enabled.promotion {
        lists.push(promotion_rank(&feasible, &context));
    }
    if rc.enabled.stress_happiness {
        lists.extend(stress.rank(&feasible, situation.profile, &context));
    }
    let views = lists.iter().map(|l| l.source.clone()).collect();
    let matrix = RankMatrix::new(lists).expect("every view ranks the same feasible routes");
    let fused = borda_fuse(&matrix);

    let by_id: BTreeMap<&str, &Route> = feasible.iter().map(|r| (r.id.as_str(), r)).collect();
    let limit = truncated_to.unwrap_or(usize::MAX);
    let entries = fused
        .into_iter()
        .take(limit)
        .enumerate()
        .map(|(i, f)| RouteEntry {
            badges: context.route(&f.route_id).badges(),
            is_default: i == 0,
            route: by_id[f.route_id.as_str()].clone(),
            route_id: f.route_id,
            score: f.score,
        })
        .collect();

    RouteRecommendation {
        status: RecommendationStatus::Ok,
        entries,
        truncated_to,
        feasible_routes: feasible.len(),
        filtered_out,
        views,
        context: user_context,
    }
}
