//! Parse constraint rules, print their canonical form, and show error locations.

use maas_core::constraint_kb::RuleSet;

const RULES: &str = include_str!("../fixtures/constraints.kbr");

fn main() {
    let rules = RuleSet::parse(RULES).expect("fixture rules parse");
    for rule in rules.iter() {
        println!("{}: {rule}", rule.id);
    }

    for bad in [
        "If user.driving_license='No' product.car_sharing=0",
        "If user.shoe_size='No' then product.car_sharing=0",
        "If user.can_cycle='No' then product.bike_sharing=",
    ] {
        let err = RuleSet::parse(bad).unwrap_err();
        println!("{bad}\n  -> {err}");
    }
}
