//! Customer variables, the elicitation questionnaire, and the constraint rules
//! that relate a traveler's answers to admissible plan attributes.

mod dsl;
mod profile;

use std::fmt;

pub use dsl::{RuleError, RuleErrorKind};
pub use profile::{
    parse_profile, Answer, FrequencyAnswer, FrequencyKind, Likert, ModeTable, ProfileError,
    UserProfile, DEFAULT_MAX_BIKE_M, DEFAULT_MAX_WALK_M,
};

use crate::catalog::{Catalog, MaasPlan, Mode};

/// A question of the elicitation questionnaire and the variable it fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Question {
    pub variable: UserVariable,
    pub text: &'static str,
}

pub const QUESTIONNAIRE: [Question; 6] = [
    Question {
        variable: UserVariable::DrivingLicense,
        text: "Do you hold a full driving license?",
    },
    Question {
        variable: UserVariable::Usage(Mode::PublicTransport),
        text: "How often do you use public transport?",
    },
    Question {
        variable: UserVariable::FareReductions,
        text: "Are you eligible for any public transport travel fare reductions?",
    },
    Question {
        variable: UserVariable::Usage(Mode::CarSharing),
        text: "How often do you use car sharing?",
    },
    Question {
        variable: UserVariable::Usage(Mode::Taxi),
        text: "How often do you use taxi services?",
    },
    Question {
        variable: UserVariable::Usage(Mode::BikeSharing),
        text: "How often do you cycle?",
    },
];

pub const WILLINGNESS_QUESTION: &str =
    "Please define your willingness to include the following modes of transport in your new MaaS plan";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UserVariable {
    DrivingLicense,
    CanCycle,
    FareReductions,
    Usage(Mode),
}

impl UserVariable {
    pub const ALL: [UserVariable; 7] = [
        UserVariable::DrivingLicense,
        UserVariable::CanCycle,
        UserVariable::FareReductions,
        UserVariable::Usage(Mode::PublicTransport),
        UserVariable::Usage(Mode::Taxi),
        UserVariable::Usage(Mode::BikeSharing),
        UserVariable::Usage(Mode::CarSharing),
    ];

    pub fn name(self) -> String {
        match self {
            UserVariable::DrivingLicense => "driving_license".into(),
            UserVariable::CanCycle => "can_cycle".into(),
            UserVariable::FareReductions => "fare_reductions".into(),
            UserVariable::Usage(m) => format!("{}_usage", dsl::mode_ident(m)),
        }
    }

    /// Resolves a DSL identifier, ignoring case and underscores.
    pub fn parse(ident: &str) -> Option<UserVariable> {
        let key: String = ident.chars().filter(|c| *c != '_').flat_map(char::to_lowercase).collect();
        UserVariable::ALL
            .into_iter()
            .find(|v| v.name().replace('_', "") == key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProductAttribute {
    Quota(Mode),
    Price,
    PeriodDays,
}

impl ProductAttribute {
    pub fn name(self) -> &'static str {
        match self {
            ProductAttribute::Quota(m) => dsl::mode_ident(m),
            ProductAttribute::Price => "price",
            ProductAttribute::PeriodDays => "period_days",
        }
    }

    pub fn parse(ident: &str) -> Option<ProductAttribute> {
        let key: String = ident.chars().filter(|c| *c != '_').flat_map(char::to_lowercase).collect();
        Mode::ALL
            .into_iter()
            .map(ProductAttribute::Quota)
            .chain([ProductAttribute::Price, ProductAttribute::PeriodDays])
            .find(|a| a.name().replace('_', "") == key)
    }

    fn read(self, plan: &MaasPlan) -> f64 {
        match self {
            ProductAttribute::Quota(m) => plan.quota(m),
            ProductAttribute::Price => plan.price.amount,
            ProductAttribute::PeriodDays => plan.period_days as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
}

impl CmpOp {
    fn apply(self, equal: bool) -> bool {
        match self {
            CmpOp::Eq => equal,
            CmpOp::Ne => !equal,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConditionValue {
    Answer(Answer),
    Frequency(FrequencyKind),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Condition {
    pub variable: UserVariable,
    pub op: CmpOp,
    pub value: ConditionValue,
}

impl Condition {
    pub fn holds(&self, profile: &UserProfile) -> bool {
        let equal = match (self.variable, self.value) {
            (UserVariable::DrivingLicense, ConditionValue::Answer(a)) => profile.driving_license == a,
            (UserVariable::CanCycle, ConditionValue::Answer(a)) => profile.can_cycle == a,
            (UserVariable::FareReductions, ConditionValue::Answer(a)) => profile.fare_reductions == a,
            (UserVariable::Usage(m), ConditionValue::Frequency(k)) => profile.usage.get(m).kind() == k,
            // the parser never pairs a variable with the other value type
            _ => false,
        };
        self.op.apply(equal)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Consequence {
    Attribute {
        attribute: ProductAttribute,
        op: CmpOp,
        value: f64,
    },
    Id {
        op: CmpOp,
        id: String,
    },
    IdIn(Vec<String>),
}

const ATTRIBUTE_EPS: f64 = 1e-9;

impl Consequence {
    pub fn satisfied_by(&self, plan: &MaasPlan) -> bool {
        match self {
            Consequence::Attribute { attribute, op, value } => {
                op.apply((attribute.read(plan) - value).abs() <= ATTRIBUTE_EPS)
            }
            Consequence::Id { op, id } => op.apply(plan.id == *id),
            Consequence::IdIn(ids) => ids.contains(&plan.id),
        }
    }
}

/// A condition → consequence rule over customer and product variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRule {
    pub id: String,
    pub condition: Vec<Condition>,
    pub consequence: Consequence,
}

impl ConstraintRule {
    pub fn condition_holds(&self, profile: &UserProfile) -> bool {
        self.condition.iter().all(|c| c.holds(profile))
    }

    pub fn consequence_satisfied(&self, plan: &MaasPlan) -> bool {
        self.consequence.satisfied_by(plan)
    }

    /// The plan quota mode this rule reads, if any.
    pub fn referenced_mode(&self) -> Option<Mode> {
        match self.consequence {
            Consequence::Attribute {
                attribute: ProductAttribute::Quota(m),
                ..
            } => Some(m),
            _ => None,
        }
    }
}

fn fmt_id(id: &str) -> String {
    let numeric = !id.is_empty() && id.chars().all(|c| c.is_ascii_digit());
    let ident = id.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if numeric || ident {
        id.to_string()
    } else {
        format!("'{id}'")
    }
}

impl fmt::Display for ConstraintRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("If ")?;
        for (i, c) in self.condition.iter().enumerate() {
            if i > 0 {
                f.write_str(" and ")?;
            }
            let lit = match c.value {
                ConditionValue::Answer(a) => a.as_str(),
                ConditionValue::Frequency(k) => k.as_str(),
            };
            write!(f, "user.{}{}'{}'", c.variable.name(), c.op.symbol(), lit)?;
        }
        f.write_str(" then ")?;
        match &self.consequence {
            Consequence::Attribute { attribute, op, value } => {
                write!(f, "product.{}{}{}", attribute.name(), op.symbol(), value)
            }
            Consequence::Id { op, id } => write!(f, "product.id{}{}", op.symbol(), fmt_id(id)),
            Consequence::IdIn(ids) => {
                let list: Vec<String> = ids.iter().map(|i| fmt_id(i)).collect();
                write!(f, "product.id in {{{}}}", list.join(","))
            }
        }
    }
}

/// Parses one rule. The rule gets the id `CF1`; use [`parse_rule_with_id`]
/// to name it.
pub fn parse_rule(text: &str) -> Result<ConstraintRule, RuleError> {
    parse_rule_with_id("CF1", text)
}

pub fn parse_rule_with_id(id: impl Into<String>, text: &str) -> Result<ConstraintRule, RuleError> {
    dsl::parse_line(id.into(), text, 1)
}

/// An ordered, immutable set of rules, typically loaded from a `.kbr` file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleSet {
    pub rules: Vec<ConstraintRule>,
}

impl RuleSet {
    /// Parses a rule file: one rule per line, blank lines and `#` comments
    /// ignored. Rules are named `CF1`, `CF2`, … in order of appearance. Stops
    /// at the first error, which carries the file line number.
    pub fn parse(text: &str) -> Result<RuleSet, RuleError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let body = dsl::strip_comment(raw);
            if body.trim().is_empty() {
                continue;
            }
            let id = format!("CF{}", rules.len() + 1);
            rules.push(dsl::parse_line(id, body, i + 1)?);
        }
        Ok(RuleSet { rules })
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Rejects rules that read a quota for a mode the catalog does not declare.
    pub fn check_against(&self, catalog: &Catalog) -> Result<(), RuleError> {
        for (i, rule) in self.rules.iter().enumerate() {
            if let Some(m) = rule.referenced_mode() {
                if !catalog.modes.contains(&m) {
                    return Err(RuleError {
                        line: i + 1,
                        column: 1,
                        kind: RuleErrorKind::UnknownAttribute(m.as_str().into()),
                    });
                }
            }
        }
        Ok(())
    }

    /// Canonical rule file text, one rule per line.
    pub fn to_text(&self) -> String {
        self.rules.iter().map(|r| format!("{r}\n")).collect()
    }
}

impl std::ops::Deref for RuleSet {
    type Target = [ConstraintRule];

    fn deref(&self) -> &[ConstraintRule] {
        &self.rules
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    pub const CF1: &str = "If user.driving_license='No' then product.car_sharing=0";
    pub const CF2: &str = "If user.fare_reductions='Yes' then product.id in {50,51,52}";
    pub const CF3: &str = "If user.carsharing_usage='every_day' then product.car_sharing!=0";

    pub fn table2() -> super::RuleSet {
        super::RuleSet::parse(&format!("{CF1}\n{CF2}\n{CF3}\n")).unwrap()
    }
}
