//! Full route pipeline: filter, context, views, fusion, and display output.

use chrono::{TimeZone, Utc};
use maas_core::cli::routes_table;
use maas_core::constraint_kb::parse_profile;
use maas_core::context_engine::{Promotions, Situation};
use maas_core::route_model::adapters::WeatherReading;
use maas_core::route_model::{ingest_routes, Subscription, UsageLog};
use maas_core::route_recommender::{recommend_routes, EnabledViews, RecommendationConfig};

fn main() {
    let profile = parse_profile(include_str!("../fixtures/profile_ana.json")).unwrap();
    let subscription: Subscription = serde_json::from_str(include_str!("../fixtures/subscription_ana.json")).unwrap();
    let log = UsageLog::from_ndjson(include_str!("../fixtures/usage_ana.ndjson")).unwrap();
    let routes = ingest_routes(include_str!("../fixtures/routes.json")).unwrap();

    let mut config = RecommendationConfig::default();
    config.context.promotions = serde_json::from_str::<Promotions>(include_str!("../fixtures/promotions.json")).unwrap();
    config.route_recommender.enabled = EnabledViews { environmental: true, promotion: true, stress_happiness: false };

    let situation = Situation {
        user_id: "ana",
        profile: &profile,
        log: &log,
        subscription: Some(&subscription),
        weather: Some(WeatherReading { temperature_celsius: 18.5, precipitation_mm_per_hour: 0.0 }),
        now: Utc.with_ymd_and_hms(2024, 4, 25, 8, 0, 0).unwrap(),
    };
    let rec = recommend_routes(&routes, &situation, &config, false);
    println!("views: {}", rec.views.join(", "));
    println!("filtered out: {:?}", rec.filtered_out);
    print!("{}", routes_table(&rec));
}
