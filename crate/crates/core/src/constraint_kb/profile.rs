//! Customer variables: the traveler's questionnaire answers and route thresholds.

use std::num::NonZeroU32;

use serde::{Deserialize, Serialize};

use crate::catalog::Mode;
use crate::error::{Violation, Violations};

pub const DEFAULT_MAX_WALK_M: f64 = 1500.0;
pub const DEFAULT_MAX_BIKE_M: f64 = 5000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    #[serde(alias = "Yes")]
    Yes,
    #[serde(alias = "No")]
    No,
}

impl Answer {
    pub fn is_yes(self) -> bool {
        self == Answer::Yes
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Answer::Yes => "yes",
            Answer::No => "no",
        }
    }
}

impl From<bool> for Answer {
    fn from(b: bool) -> Self {
        if b {
            Answer::Yes
        } else {
            Answer::No
        }
    }
}

/// How often the traveler uses a mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrequencyAnswer {
    Never,
    FewTimesPerYear,
    TimesPerMonth { n: NonZeroU32 },
    TimesPerWeek { n: NonZeroU32 },
    OncePerDay,
}

/// The frequency answer with its count stripped, as matched by rule conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrequencyKind {
    Never,
    FewTimesPerYear,
    TimesPerMonth,
    TimesPerWeek,
    OncePerDay,
}

impl FrequencyKind {
    pub const ALL: [FrequencyKind; 5] = [
        FrequencyKind::Never,
        FrequencyKind::FewTimesPerYear,
        FrequencyKind::TimesPerMonth,
        FrequencyKind::TimesPerWeek,
        FrequencyKind::OncePerDay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FrequencyKind::Never => "never",
            FrequencyKind::FewTimesPerYear => "few_times_per_year",
            FrequencyKind::TimesPerMonth => "times_per_month",
            FrequencyKind::TimesPerWeek => "times_per_week",
            FrequencyKind::OncePerDay => "once_per_day",
        }
    }

    /// Accepts the canonical names plus the "every day" phrasing for daily use.
    pub fn parse(s: &str) -> Option<FrequencyKind> {
        let s = s.to_ascii_lowercase().replace([' ', '-'], "_");
        match s.as_str() {
            "every_day" | "everyday" | "daily" => Some(FrequencyKind::OncePerDay),
            _ => FrequencyKind::ALL.into_iter().find(|k| k.as_str() == s),
        }
    }
}

impl FrequencyAnswer {
    pub fn kind(self) -> FrequencyKind {
        match self {
            FrequencyAnswer::Never => FrequencyKind::Never,
            FrequencyAnswer::FewTimesPerYear => FrequencyKind::FewTimesPerYear,
            FrequencyAnswer::TimesPerMonth { .. } => FrequencyKind::TimesPerMonth,
            FrequencyAnswer::TimesPerWeek { .. } => FrequencyKind::TimesPerWeek,
            FrequencyAnswer::OncePerDay => FrequencyKind::OncePerDay,
        }
    }

    pub fn times_per_month(n: u32) -> Self {
        FrequencyAnswer::TimesPerMonth {
            n: NonZeroU32::new(n).expect("n >= 1"),
        }
    }

    pub fn times_per_week(n: u32) -> Self {
        FrequencyAnswer::TimesPerWeek {
            n: NonZeroU32::new(n).expect("n >= 1"),
        }
    }
}

/// Likert willingness score: 1 = "very much", 5 = "totally not".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Likert(u8);

impl Likert {
    pub const VERY_MUCH: Likert = Likert(1);
    pub const NEUTRAL: Likert = Likert(3);
    pub const TOTALLY_NOT: Likert = Likert(5);

    pub fn new(v: u8) -> Option<Likert> {
        (1..=5).contains(&v).then_some(Likert(v))
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Likert {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Likert::new(v).ok_or_else(|| format!("willingness must be in 1..=5, got {v}"))
    }
}

impl From<Likert> for u8 {
    fn from(l: Likert) -> u8 {
        l.0
    }
}

/// One value per plan mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeTable<T> {
    pub public_transport: T,
    pub taxi: T,
    pub bike_sharing: T,
    pub car_sharing: T,
}

impl<T> ModeTable<T> {
    pub fn uniform(v: T) -> Self
    where
        T: Clone,
    {
        ModeTable {
            public_transport: v.clone(),
            taxi: v.clone(),
            bike_sharing: v.clone(),
            car_sharing: v,
        }
    }

    pub fn get(&self, mode: Mode) -> &T {
        match mode {
            Mode::PublicTransport => &self.public_transport,
            Mode::Taxi => &self.taxi,
            Mode::BikeSharing => &self.bike_sharing,
            Mode::CarSharing => &self.car_sharing,
        }
    }

    pub fn get_mut(&mut self, mode: Mode) -> &mut T {
        match mode {
            Mode::PublicTransport => &mut self.public_transport,
            Mode::Taxi => &mut self.taxi,
            Mode::BikeSharing => &mut self.bike_sharing,
            Mode::CarSharing => &mut self.car_sharing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub driving_license: Answer,
    pub can_cycle: Answer,
    pub fare_reductions: Answer,
    pub usage: ModeTable<FrequencyAnswer>,
    pub willingness: ModeTable<Likert>,
    #[serde(default = "default_max_walk")]
    pub max_walk_m: f64,
    #[serde(default = "default_max_bike")]
    pub max_bike_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

fn default_max_walk() -> f64 {
    DEFAULT_MAX_WALK_M
}

fn default_max_bike() -> f64 {
    DEFAULT_MAX_BIKE_M
}

impl Default for UserProfile {
    fn default() -> Self {
        UserProfile {
            driving_license: Answer::Yes,
            can_cycle: Answer::Yes,
            fare_reductions: Answer::No,
            usage: ModeTable::uniform(FrequencyAnswer::Never),
            willingness: ModeTable::uniform(Likert::NEUTRAL),
            max_walk_m: DEFAULT_MAX_WALK_M,
            max_bike_m: DEFAULT_MAX_BIKE_M,
            budget: None,
        }
    }
}

impl UserProfile {
    pub fn validate(&self) -> Result<(), Violations> {
        let mut out = Vec::new();
        for (name, v) in [("max_walk_m", self.max_walk_m), ("max_bike_m", self.max_bike_m)] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(Violation::new(name, "threshold must be a non-negative distance"));
            }
        }
        if let Some(b) = self.budget {
            if !(b.is_finite() && b > 0.0) {
                out.push(Violation::new("budget", "budget must be a positive amount"));
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(Violations(out))
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("malformed profile at {path}: {reason}")]
    Malformed { path: String, reason: String },
    #[error("invalid profile: {0}")]
    Invalid(#[from] Violations),
}

pub fn parse_profile(document: &str) -> Result<UserProfile, ProfileError> {
    let profile: UserProfile = crate::error::from_json_str(document)
        .map_err(|(path, reason)| ProfileError::Malformed { path, reason })?;
    profile.validate()?;
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_json_shape() {
        let doc = r#"{
            "driving_license": "no", "can_cycle": "yes", "fare_reductions": "No",
            "usage": {
                "public_transport": {"kind": "once_per_day"},
                "taxi": {"kind": "never"},
                "bike_sharing": {"kind": "times_per_week", "n": 2},
                "car_sharing": {"kind": "times_per_month", "n": 4}
            },
            "willingness": {"public_transport": 1, "taxi": 5, "bike_sharing": 3, "car_sharing": 3},
            "budget": 18000
        }"#;
        let p = parse_profile(doc).unwrap();
        assert_eq!(p.driving_license, Answer::No);
        assert_eq!(p.usage.bike_sharing, FrequencyAnswer::times_per_week(2));
        assert_eq!(p.max_walk_m, DEFAULT_MAX_WALK_M);
        assert_eq!(p.budget, Some(18000.0));
        let back = parse_profile(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn rejects_out_of_range_likert() {
        let mut v = serde_json::to_value(UserProfile::default()).unwrap();
        v["willingness"]["taxi"] = 6.into();
        match parse_profile(&v.to_string()).unwrap_err() {
            ProfileError::Malformed { path, .. } => assert_eq!(path, "willingness.taxi"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn rejects_zero_frequency_count() {
        let mut v = serde_json::to_value(UserProfile::default()).unwrap();
        v["usage"]["taxi"] = serde_json::json!({"kind": "times_per_week", "n": 0});
        assert!(parse_profile(&v.to_string()).is_err());
    }

    #[test]
    fn rejects_negative_threshold_and_budget() {
        let p = UserProfile {
            max_walk_m: -1.0,
            budget: Some(0.0),
            ..Default::default()
        };
        assert_eq!(p.validate().unwrap_err().0.len(), 2);
    }

    #[test]
    fn every_day_aliases_once_per_day() {
        assert_eq!(FrequencyKind::parse("every_day"), Some(FrequencyKind::OncePerDay));
        assert_eq!(FrequencyKind::parse("Every day"), Some(FrequencyKind::OncePerDay));
        assert_eq!(FrequencyKind::parse("sometimes"), None);
    }
}
