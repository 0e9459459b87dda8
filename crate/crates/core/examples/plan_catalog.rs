//! Load, validate, and edit a plan catalog.

use maas_core::catalog::{parse_catalog, parse_plan, Mode};

const CATALOG: &str = include_str!("../fixtures/catalog.json");
const DISCOUNT_PLAN: &str = include_str!("../fixtures/plan_discount.json");

fn main() {
    let catalog = parse_catalog(CATALOG).expect("fixture catalog is valid");
    for plan in &catalog.plans {
        let quotas: Vec<String> = Mode::ALL.iter().map(|m| format!("{m}={}", plan.quota(*m))).collect();
        println!("plan {:>3}  {:>8} {}  {}", plan.id, plan.price.amount, plan.price.currency, quotas.join(" "));
    }

    let discounted = catalog.upsert_plan(parse_plan(DISCOUNT_PLAN).unwrap()).unwrap();
    println!("after upsert: {} plans", discounted.len());

    let removal = discounted.remove_plan("2");
    println!("after removing plan 2: {} plans (missing: {})", removal.catalog.len(), removal.missing);

    // a broken document reports the offending field
    let broken = CATALOG.replace("\"amount\": 3000", "\"amount\": -3000");
    match parse_catalog(&broken) {
        Ok(_) => unreachable!(),
        Err(e) => println!("rejected: {e}"),
    }
}
