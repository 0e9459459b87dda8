//! MaaS plan catalog: the operator-defined set of purchasable mobility bundles.
//!
//! A [`Catalog`] is an immutable value. The configurator operations
//! ([`Catalog::upsert_plan`], [`Catalog::remove_plan`]) return new catalogs and
//! leave the receiver untouched, so a catalog can be shared across threads
//! while an operator edits a copy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Violation, Violations};

/// Transport modes that can be bundled into a plan. These form the feature
/// dimensions of plan and user vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    PublicTransport,
    Taxi,
    BikeSharing,
    CarSharing,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::PublicTransport,
        Mode::Taxi,
        Mode::BikeSharing,
        Mode::CarSharing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::PublicTransport => "public_transport",
            Mode::Taxi => "taxi",
            Mode::BikeSharing => "bike_sharing",
            Mode::CarSharing => "car_sharing",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unit a quota amount is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotaUnit {
    MonthlyPassCount,
    CurrencyAmount,
    DrivingHours,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeQuota {
    pub mode: Mode,
    pub amount: f64,
    pub unit: QuotaUnit,
}

impl ModeQuota {
    pub fn new(mode: Mode, amount: f64, unit: QuotaUnit) -> Self {
        Self { mode, amount, unit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Price {
    pub amount: f64,
    pub currency: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaasPlan {
    pub id: String,
    #[serde(default)]
    pub quotas: Vec<ModeQuota>,
    pub price: Price,
    pub period_days: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

impl MaasPlan {
    /// Quota amount for `mode`; a mode the plan does not carry reads as zero.
    pub fn quota(&self, mode: Mode) -> f64 {
        self.quota_entry(mode).map_or(0.0, |q| q.amount)
    }

    pub fn quota_entry(&self, mode: Mode) -> Option<&ModeQuota> {
        self.quotas.iter().find(|q| q.mode == mode)
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }

    /// Invariant violations of this plan alone, located under `path`.
    pub fn violations(&self, path: &str) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.id.trim().is_empty() {
            out.push(Violation::new(format!("{path}.id"), "plan id must not be empty"));
        }
        if !(self.price.amount.is_finite() && self.price.amount > 0.0) {
            out.push(Violation::new(
                format!("{path}.price.amount"),
                "price must be a positive amount",
            ));
        }
        if self.period_days < 1 {
            out.push(Violation::new(
                format!("{path}.period_days"),
                "period_days must be at least 1",
            ));
        }
        let mut seen = BTreeSet::new();
        for (i, q) in self.quotas.iter().enumerate() {
            if !(q.amount.is_finite() && q.amount >= 0.0) {
                out.push(Violation::new(
                    format!("{path}.quotas[{i}].amount"),
                    format!("negative quota {} for {}", q.amount, q.mode),
                ));
            }
            if !seen.insert(q.mode) {
                out.push(Violation::new(
                    format!("{path}.quotas[{i}].mode"),
                    format!("more than one quota for {}", q.mode),
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub plans: Vec<MaasPlan>,
    pub currency: String,
    pub modes: Vec<Mode>,
}

/// Outcome of [`Catalog::remove_plan`].
#[derive(Debug, Clone, PartialEq)]
pub struct Removal {
    pub catalog: Catalog,
    pub missing: bool,
}

impl Catalog {
    /// An empty catalog declaring `modes` as its feature dimensions.
    pub fn empty(currency: impl Into<String>, modes: Vec<Mode>) -> Catalog {
        Catalog {
            plans: Vec::new(),
            currency: currency.into(),
            modes,
        }
    }

    pub fn get(&self, id: &str) -> Option<&MaasPlan> {
        self.plans.iter().find(|p| p.id == id)
    }

    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    /// Checks every catalog invariant, returning all violations at once.
    pub fn validate(&self) -> Result<(), Violations> {
        let mut out = Vec::new();
        if self.modes.is_empty() {
            out.push(Violation::new("modes", "at least one mode must be declared"));
        }
        let mut declared = BTreeSet::new();
        for (i, m) in self.modes.iter().enumerate() {
            if !declared.insert(*m) {
                out.push(Violation::new(format!("modes[{i}]"), format!("mode {m} declared twice")));
            }
        }
        let mut ids = BTreeSet::new();
        let mut units: BTreeMap<Mode, QuotaUnit> = BTreeMap::new();
        for (i, plan) in self.plans.iter().enumerate() {
            let path = format!("plans[{i}]");
            out.extend(plan.violations(&path));
            if !ids.insert(plan.id.as_str()) {
                out.push(Violation::new(
                    format!("{path}.id"),
                    format!("duplicate plan id {:?}", plan.id),
                ));
            }
            if plan.price.currency != self.currency {
                out.push(Violation::new(
                    format!("{path}.price.currency"),
                    format!(
                        "currency {} differs from catalog currency {}",
                        plan.price.currency, self.currency
                    ),
                ));
            }
            for (j, q) in plan.quotas.iter().enumerate() {
                if !declared.contains(&q.mode) {
                    out.push(Violation::new(
                        format!("{path}.quotas[{j}].mode"),
                        format!("mode {} is not declared by the catalog", q.mode),
                    ));
                }
                match units.get(&q.mode) {
                    Some(u) if *u != q.unit => out.push(Violation::new(
                        format!("{path}.quotas[{j}].unit"),
                        format!("{} quotas use {:?} elsewhere in the catalog", q.mode, u),
                    )),
                    Some(_) => {}
                    None => {
                        units.insert(q.mode, q.unit);
                    }
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(Violations(out))
        }
    }

    /// Inserts `plan`, or replaces the plan with the same id in place.
    pub fn upsert_plan(&self, plan: MaasPlan) -> Result<Catalog, Violations> {
        let mut next = self.clone();
        match next.plans.iter_mut().find(|p| p.id == plan.id) {
            Some(slot) => *slot = plan,
            None => next.plans.push(plan),
        }
        next.validate()?;
        Ok(next)
    }

    pub fn remove_plan(&self, id: &str) -> Removal {
        let mut next = self.clone();
        let before = next.plans.len();
        next.plans.retain(|p| p.id != id);
        let missing = next.plans.len() == before;
        Removal { catalog: next, missing }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("malformed catalog document at {path}: {reason}")]
    Malformed { path: String, reason: String },
    #[error("invalid catalog: {0}")]
    Invalid(#[from] Violations),
}

impl CatalogError {
    pub fn violations(&self) -> Vec<Violation> {
        match self {
            CatalogError::Malformed { path, reason } => vec![Violation::new(path.clone(), reason.clone())],
            CatalogError::Invalid(v) => v.0.clone(),
        }
    }
}

/// Parses and validates a catalog JSON document.
pub fn parse_catalog(document: &str) -> Result<Catalog, CatalogError> {
    let catalog: Catalog = crate::error::from_json_str(document)
        .map_err(|(path, reason)| CatalogError::Malformed { path, reason })?;
    catalog.validate()?;
    Ok(catalog)
}

/// Parses a single plan document (as used by the configurator CLI and API).
pub fn parse_plan(document: &str) -> Result<MaasPlan, CatalogError> {
    let plan: MaasPlan = crate::error::from_json_str(document)
        .map_err(|(path, reason)| CatalogError::Malformed { path, reason })?;
    let v = plan.violations("plan");
    if v.is_empty() {
        Ok(plan)
    } else {
        Err(CatalogError::Invalid(Violations(v)))
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    const TABLE1_JSON: &str = r#"{
        "currency": "HUF",
        "modes": ["public_transport", "taxi", "bike_sharing", "car_sharing"],
        "plans": [
            {"id": "1", "price": {"amount": 20950, "currency": "HUF"}, "period_days": 30,
             "quotas": [
                {"mode": "public_transport", "amount": 1, "unit": "monthly_pass_count"},
                {"mode": "taxi", "amount": 3000, "unit": "currency_amount"},
                {"mode": "bike_sharing", "amount": 1, "unit": "monthly_pass_count"},
                {"mode": "car_sharing", "amount": 3, "unit": "driving_hours"}
             ]},
            {"id": "2", "price": {"amount": 17450, "currency": "HUF"}, "period_days": 30,
             "quotas": [
                {"mode": "public_transport", "amount": 1, "unit": "monthly_pass_count"},
                {"mode": "bike_sharing", "amount": 1, "unit": "monthly_pass_count"},
                {"mode": "car_sharing", "amount": 3, "unit": "driving_hours"}
             ]}
        ]
    }"#;

    #[test]
    fn parses_table1() {
        let cat = parse_catalog(TABLE1_JSON).unwrap();
        assert_eq!(cat, table1_catalog());
        assert_eq!(cat.plans[0].quotas.len(), 4);
        assert_eq!(cat.plans[1].quota(Mode::Taxi), 0.0);
    }

    #[test]
    fn empty_quota_plan_reads_zero() {
        let doc = r#"{"currency":"HUF","modes":["taxi","car_sharing"],
            "plans":[{"id":"x","price":{"amount":1000,"currency":"HUF"},"period_days":30,"quotas":[]}]}"#;
        let cat = parse_catalog(doc).unwrap();
        for m in Mode::ALL {
            assert_eq!(cat.plans[0].quota(m), 0.0);
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let mut cat = table1_catalog();
        cat.plans[1].id = "1".into();
        let err = parse_catalog(&cat.to_json()).unwrap_err();
        let v = err.violations();
        assert!(v.iter().any(|v| v.path == "plans[1].id" && v.reason.contains("duplicate")));
    }

    #[test]
    fn negative_quota_rejected() {
        let mut cat = table1_catalog();
        cat.plans[0].quotas[1].amount = -5.0;
        let v = parse_catalog(&cat.to_json()).unwrap_err().violations();
        assert_eq!(v[0].path, "plans[0].quotas[1].amount");
    }

    #[test]
    fn unknown_mode_rejected_with_path() {
        let doc = TABLE1_JSON.replacen("\"taxi\", \"amount\"", "\"hovercraft\", \"amount\"", 1);
        match parse_catalog(&doc).unwrap_err() {
            CatalogError::Malformed { path, reason } => {
                assert_eq!(path, "plans[0].quotas[1].mode");
                assert!(reason.contains("hovercraft"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_document_rejected() {
        assert!(matches!(
            parse_catalog("{\"plans\": ["),
            Err(CatalogError::Malformed { .. })
        ));
    }

    #[test]
    fn undeclared_mode_and_unit_mismatch_rejected() {
        let mut cat = table1_catalog();
        cat.modes = vec![Mode::PublicTransport, Mode::BikeSharing, Mode::CarSharing];
        cat.plans[1].quotas[2].unit = QuotaUnit::CurrencyAmount;
        let v = cat.validate().unwrap_err().0;
        assert!(v.iter().any(|v| v.path == "plans[0].quotas[1].mode"));
        assert!(v.iter().any(|v| v.path == "plans[1].quotas[2].unit"));
    }

    #[test]
    fn upsert_into_empty() {
        let cat = Catalog::empty("HUF", Mode::ALL.to_vec());
        let cat = cat.upsert_plan(table1_plan2()).unwrap();
        assert_eq!(cat.len(), 1);
        let again = cat.upsert_plan(table1_plan2()).unwrap();
        assert_eq!(again, cat);
    }

    #[test]
    fn upsert_replaces_price() {
        let cat = table1_catalog();
        let mut p = table1_plan1();
        p.price.amount = 21000.0;
        let next = cat.upsert_plan(p).unwrap();
        assert_eq!(next.len(), 2);
        assert_eq!(next.get("1").unwrap().price.amount, 21000.0);
        assert_eq!(next.get("2"), cat.get("2"));
        // receiver untouched
        assert_eq!(cat.get("1").unwrap().price.amount, 20950.0);
    }

    #[test]
    fn upsert_rejects_invalid_plan() {
        let mut p = table1_plan1();
        p.period_days = 0;
        assert!(table1_catalog().upsert_plan(p).is_err());
    }

    #[test]
    fn remove_existing_and_missing() {
        let cat = table1_catalog();
        let r = cat.remove_plan("1");
        assert!(!r.missing);
        assert_eq!(r.catalog.plans.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(), ["2"]);
        let r = cat.remove_plan("999");
        assert!(r.missing);
        assert_eq!(r.catalog, cat);
    }

    #[test]
    fn remove_then_upsert_round_trips() {
        let single = Catalog::empty("HUF", Mode::ALL.to_vec())
            .upsert_plan(table1_plan1())
            .unwrap();
        let back = single.remove_plan("1").catalog.upsert_plan(table1_plan1()).unwrap();
        assert_eq!(back, single);
    }

    fn arb_plan() -> impl Strategy<Value = MaasPlan> {
        (
            "[a-z0-9]{1,3}",
            proptest::sample::subsequence(Mode::ALL.to_vec(), 0..=4),
            1u32..50_000,
            1u32..90,
        )
            .prop_map(|(id, modes, price, period_days)| MaasPlan {
                id,
                quotas: modes
                    .into_iter()
                    .map(|m| {
                        let unit = match m {
                            Mode::Taxi => QuotaUnit::CurrencyAmount,
                            Mode::CarSharing => QuotaUnit::DrivingHours,
                            _ => QuotaUnit::MonthlyPassCount,
                        };
                        ModeQuota::new(m, 1.5, unit)
                    })
                    .collect(),
                price: Price { amount: price as f64, currency: "HUF".into() },
                period_days,
                tags: vec![],
            })
    }

    #[derive(Debug, Clone)]
    enum Edit {
        Upsert(MaasPlan),
        Remove(String),
    }

    proptest! {
        #[test]
        fn edits_keep_ids_unique_and_match_map_oracle(
            edits in proptest::collection::vec(
                prop_oneof![
                    arb_plan().prop_map(Edit::Upsert),
                    "[a-z0-9]{1,3}".prop_map(Edit::Remove),
                ],
                0..40,
            )
        ) {
            let mut cat = Catalog::empty("HUF", Mode::ALL.to_vec());
            let mut oracle: BTreeMap<String, MaasPlan> = BTreeMap::new();
            for e in edits {
                match e {
                    Edit::Upsert(p) => {
                        oracle.insert(p.id.clone(), p.clone());
                        cat = cat.upsert_plan(p).unwrap();
                    }
                    Edit::Remove(id) => {
                        let r = cat.remove_plan(&id);
                        prop_assert_eq!(r.missing, oracle.remove(&id).is_none());
                        cat = r.catalog;
                    }
                }
                let ids: BTreeSet<_> = cat.plans.iter().map(|p| p.id.clone()).collect();
                prop_assert_eq!(ids.len(), cat.len());
            }
            let got: BTreeMap<_, _> = cat.plans.iter().map(|p| (p.id.clone(), p.clone())).collect();
            prop_assert_eq!(got, oracle);
        }

        #[test]
        fn serialization_is_a_fixed_point(plans in proptest::collection::vec(arb_plan(), 0..8)) {
            let mut cat = Catalog::empty("HUF", Mode::ALL.to_vec());
            for p in plans {
                cat = cat.upsert_plan(p).unwrap();
            }
            let once = parse_catalog(&cat.to_json()).unwrap();
            let twice = parse_catalog(&once.to_json()).unwrap();
            prop_assert_eq!(&once, &cat);
            prop_assert_eq!(once, twice);
        }
    }
}
