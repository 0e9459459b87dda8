//! Infer trend, distance, familiarity, weather, and promotion flags for a
//! subscriber near the end of the billing period.

use chrono::{TimeZone, Utc};
use maas_core::constraint_kb::parse_profile;
use maas_core::context_engine::{infer_context, ContextConfig, Promotions, Situation};
use maas_core::route_model::adapters::WeatherReading;
use maas_core::route_model::{ingest_routes, Subscription, UsageLog};

fn main() {
    let profile = parse_profile(include_str!("../fixtures/profile_ana.json")).unwrap();
    let subscription: Subscription = serde_json::from_str(include_str!("../fixtures/subscription_ana.json")).unwrap();
    let log = UsageLog::from_ndjson(include_str!("../fixtures/usage_ana.ndjson")).unwrap();
    let routes = ingest_routes(include_str!("../fixtures/routes.json")).unwrap();
    let promotions: Promotions = serde_json::from_str(include_str!("../fixtures/promotions.json")).unwrap();
    let config = ContextConfig { promotions, ..Default::default() };

    for day in [10, 25] {
        let situation = Situation {
            user_id: "ana",
            profile: &profile,
            log: &log,
            subscription: Some(&subscription),
            weather: Some(WeatherReading { temperature_celsius: 18.5, precipitation_mm_per_hour: 0.0 }),
            now: Utc.with_ymd_and_hms(2024, 4, day, 8, 0, 0).unwrap(),
        };
        let ctx = infer_context(&routes, &situation, &config);
        println!("April {day}: nice_weather={} trends={:?}", ctx.nice_weather, ctx.increased_usage_trend);
        if day == 25 {
            for (id, flags) in &ctx.routes {
                println!("  {id:<13} {}", flags.badges().join(", "));
            }
        }
    }
}
