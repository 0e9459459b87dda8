//! Rank plans for two questionnaire profiles, including the fallback path.

use maas_core::catalog::parse_catalog;
use maas_core::constraint_kb::{parse_profile, RuleSet};
use maas_core::plan_recommender::{csp_filter, recommend_plans, VectorizationConfig};

fn main() {
    let catalog = parse_catalog(include_str!("../fixtures/catalog.json")).unwrap();
    let rules = RuleSet::parse(include_str!("../fixtures/constraints.kbr")).unwrap();
    let config = VectorizationConfig::default();

    for (name, doc) in [
        ("no license", include_str!("../fixtures/profile_no_license.json")),
        ("daily car sharer", include_str!("../fixtures/profile_car_sharer.json")),
    ] {
        let mut profile = parse_profile(doc).unwrap();
        let feasible: Vec<&str> = csp_filter(&catalog, &profile, &rules).iter().map(|p| p.id.as_str()).collect();
        println!("{name}: constraint-satisfying plans {feasible:?}");

        let ranked = recommend_plans(&catalog, &profile, &rules, &config).unwrap();
        println!("  fallback_used={} budget_applied={}", ranked.fallback_used, ranked.budget_applied);
        for e in &ranked.entries {
            println!("  plan {} score {:.4}", e.plan_id, e.score);
        }

        profile.budget = Some(18_000.0);
        let within = recommend_plans(&catalog, &profile, &rules, &config).unwrap();
        let ids: Vec<&str> = within.entries.iter().map(|e| e.plan_id.as_str()).collect();
        println!("  with budget 18000: {ids:?}");
    }
}
