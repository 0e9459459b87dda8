//! Plan recommendation: constraint filtering of the catalog followed by
//! weighted-similarity ranking of the surviving plans.
//!
//! Users and plans are mapped into the same feature space (one dimension per
//! declared catalog mode, in monetary-equivalent units), the vectors are
//! min-max normalized jointly, and each plan is scored with
//! `1 - sqrt(sum_i w_i (t_i - s_i)^2)` using weights derived from the user's
//! Likert willingness answers. When no plan satisfies the constraints every
//! plan within the user's budget is ranked instead.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, MaasPlan, Mode, QuotaUnit};
use crate::constraint_kb::{ConstraintRule, FrequencyAnswer, Likert, RuleError, RuleSet, UserProfile};

/// Mean number of weeks in a month.
pub const WEEKS_PER_MONTH: f64 = 4.33;
/// Daily use, in single uses per month.
pub const DAILY_USES_PER_MONTH: f64 = 30.0;
/// "A few times per year", in single uses per month.
pub const FEW_TIMES_PER_YEAR_USES: f64 = 0.25;

const WEIGHT_SUM_EPS: f64 = 1e-9;

/// Monetary equivalents for one mode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeRates {
    /// Value of a single ride/use; scales the user's frequency answers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_use: Option<f64>,
    /// Value of one monthly pass quota.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass_price: Option<f64>,
    /// Value of one driving hour quota.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hour_price: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorizationConfig {
    pub rates: BTreeMap<Mode, ModeRates>,
    /// Multiplier applied to quotas already expressed as currency.
    #[serde(default = "one")]
    pub currency_rate: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for VectorizationConfig {
    /// Indicative HUF rates.
    fn default() -> Self {
        let rates = BTreeMap::from([
            (
                Mode::PublicTransport,
                ModeRates {
                    per_use: Some(350.0),
                    pass_price: Some(9500.0),
                    hour_price: None,
                },
            ),
            (
                Mode::Taxi,
                ModeRates {
                    per_use: Some(1000.0),
                    ..Default::default()
                },
            ),
            (
                Mode::BikeSharing,
                ModeRates {
                    per_use: Some(300.0),
                    pass_price: Some(1500.0),
                    hour_price: None,
                },
            ),
            (
                Mode::CarSharing,
                ModeRates {
                    per_use: Some(2500.0),
                    pass_price: None,
                    hour_price: Some(2500.0),
                },
            ),
        ]);
        VectorizationConfig {
            rates,
            currency_rate: 1.0,
        }
    }
}

impl VectorizationConfig {
    /// The same configuration with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> VectorizationConfig {
        let s = |v: Option<f64>| v.map(|x| x * factor);
        VectorizationConfig {
            rates: self
                .rates
                .iter()
                .map(|(m, r)| {
                    (
                        *m,
                        ModeRates {
                            per_use: s(r.per_use),
                            pass_price: s(r.pass_price),
                            hour_price: s(r.hour_price),
                        },
                    )
                })
                .collect(),
            currency_rate: self.currency_rate * factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("the catalog holds no plans")]
    EmptyCatalog,
    #[error("no {what} configured for {mode}")]
    MissingRate { mode: Mode, what: &'static str },
    #[error("cannot normalize an empty vector set")]
    EmptyInput,
    #[error("vector length {found} does not match {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid weight vector: {0}")]
    InvalidWeights(String),
    #[error("rule does not fit the catalog: {0}")]
    Rules(#[from] RuleError),
}

/// Feature values indexed by the catalog's declared mode order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Non-negative feature weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<WeightVector, PlanError> {
        if weights.is_empty() {
            return Err(PlanError::InvalidWeights("no weights".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(PlanError::InvalidWeights(format!("negative or non-finite weight {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_EPS {
            return Err(PlanError::InvalidWeights(format!("weights sum to {sum}")));
        }
        Ok(WeightVector(weights))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPlan {
    pub plan_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPlans {
    pub entries: Vec<RankedPlan>,
    pub fallback_used: bool,
    pub budget_applied: bool,
}

/// Plans satisfying every rule whose condition holds for `profile`, in
/// catalog order.
pub fn csp_filter<'a>(catalog: &'a Catalog, profile: &UserProfile, rules: &[ConstraintRule]) -> Vec<&'a MaasPlan> {
    let active: Vec<&ConstraintRule> = rules.iter().filter(|r| r.condition_holds(profile)).collect();
    catalog
        .plans
        .iter()
        .filter(|plan| active.iter().all(|r| r.consequence_satisfied(plan)))
        .collect()
}

fn monthly_uses(answer: FrequencyAnswer) -> f64 {
    match answer {
        FrequencyAnswer::Never => 0.0,
        FrequencyAnswer::FewTimesPerYear => FEW_TIMES_PER_YEAR_USES,
        FrequencyAnswer::TimesPerMonth { n } => n.get() as f64,
        FrequencyAnswer::TimesPerWeek { n } => WEEKS_PER_MONTH * n.get() as f64,
        FrequencyAnswer::OncePerDay => DAILY_USES_PER_MONTH,
    }
}

pub fn user_vector(profile: &UserProfile, modes: &[Mode], config: &VectorizationConfig) -> Result<FeatureVector, PlanError> {
    modes
        .iter()
        .map(|&mode| {
            let per_use = config
                .rates
                .get(&mode)
                .and_then(|r| r.per_use)
                .ok_or(PlanError::MissingRate { mode, what: "per-use price" })?;
            Ok(monthly_uses(*profile.usage.get(mode)) * per_use)
        })
        .collect::<Result<Vec<_>, _>>()
        .map(FeatureVector)
}

pub fn plan_vector(plan: &MaasPlan, modes: &[Mode], config: &VectorizationConfig) -> Result<FeatureVector, PlanError> {
    modes
        .iter()
        .map(|&mode| {
            let Some(q) = plan.quota_entry(mode) else {
                return Ok(0.0);
            };
            let rates = config.rates.get(&mode).copied().unwrap_or_default();
            let rate = match q.unit {
                QuotaUnit::CurrencyAmount => Some(config.currency_rate),
                QuotaUnit::MonthlyPassCount => rates.pass_price,
                QuotaUnit::DrivingHours => rates.hour_price,
            };
            let what = match q.unit {
                QuotaUnit::CurrencyAmount => "currency rate",
                QuotaUnit::MonthlyPassCount => "pass price",
                QuotaUnit::DrivingHours => "hour price",
            };
            rate.map(|r| q.amount * r).ok_or(PlanError::MissingRate { mode, what })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(FeatureVector)
}

/// Per-feature min-max normalization over the whole set. A constant feature
/// column normalizes to zero.
pub fn normalize(vectors: &[FeatureVector]) -> Result<Vec<FeatureVector>, PlanError> {
    let first = vectors.first().ok_or(PlanError::EmptyInput)?;
    let dims = first.len();
    if let Some(v) = vectors.iter().find(|v| v.len() != dims) {
        return Err(PlanError::LengthMismatch {
            expected: dims,
            found: v.len(),
        });
    }
    let mut lo = vec![f64::INFINITY; dims];
    let mut hi = vec![f64::NEG_INFINITY; dims];
    for v in vectors {
        for (i, x) in v.0.iter().enumerate() {
            lo[i] = lo[i].min(*x);
            hi[i] = hi[i].max(*x);
        }
    }
    Ok(vectors
        .iter()
        .map(|v| {
            FeatureVector(
                v.0.iter()
                    .enumerate()
                    .map(|(i, x)| {
                        let span = hi[i] - lo[i];
                        if span > 0.0 {
                            ((x - lo[i]) / span).clamp(0.0, 1.0)
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            )
        })
        .collect())
}

/// Maps willingness answers to weights: `6 - likert`, normalized to sum 1.
pub fn weights_from_likert(willingness: &[Likert]) -> WeightVector {
    let raw: Vec<f64> = willingness.iter().map(|l| 6.0 - l.value() as f64).collect();
    let total: f64 = raw.iter().sum();
    WeightVector(raw.into_iter().map(|r| r / total).collect())
}

pub fn weighted_similarity(t: &FeatureVector, s: &FeatureVector, w: &WeightVector) -> Result<f64, PlanError> {
    if t.len() != s.len() || t.len() != w.0.len() {
        return Err(PlanError::LengthMismatch {
            expected: w.0.len(),
            found: if t.len() != w.0.len() { t.len() } else { s.len() },
        });
    }
    let dist: f64 = t
        .0
        .iter()
        .zip(&s.0)
        .zip(&w.0)
        .map(|((a, b), wi)| wi * (a - b) * (a - b))
        .sum();
    Ok((1.0 - dist.sqrt()).clamp(0.0, 1.0))
}

fn rank(
    candidates: &[&MaasPlan],
    profile: &UserProfile,
    modes: &[Mode],
    config: &VectorizationConfig,
) -> Result<Vec<RankedPlan>, PlanError> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let mut vectors = Vec::with_capacity(candidates.len() + 1);
    vectors.push(user_vector(profile, modes, config)?);
    for plan in candidates {
        vectors.push(plan_vector(plan, modes, config)?);
    }
    let normalized = normalize(&vectors)?;
    let willingness: Vec<Likert> = modes.iter().map(|m| *profile.willingness.get(*m)).collect();
    let weights = weights_from_likert(&willingness);
    let user = &normalized[0];
    let mut entries = candidates
        .iter()
        .zip(&normalized[1..])
        .map(|(plan, v)| {
            Ok(RankedPlan {
                plan_id: plan.id.clone(),
                score: weighted_similarity(user, v, &weights)?,
            })
        })
        .collect::<Result<Vec<_>, PlanError>>()?;
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.plan_id.cmp(&b.plan_id)));
    Ok(entries)
}

/// Filters the catalog with the rules and ranks the result by similarity to
/// the user. Falls back to ranking every plan within `profile.budget` when the
/// constraints leave nothing.
pub fn recommend_plans(
    catalog: &Catalog,
    profile: &UserProfile,
    rules: &RuleSet,
    config: &VectorizationConfig,
) -> Result<RankedPlans, PlanError> {
    if catalog.is_empty() {
        return Err(PlanError::EmptyCatalog);
    }
    rules.check_against(catalog)?;
    let candidates = csp_filter(catalog, profile, rules);
    if !candidates.is_empty() {
        return Ok(RankedPlans {
            entries: rank(&candidates, profile, &catalog.modes, config)?,
            fallback_used: false,
            budget_applied: false,
        });
    }
    let affordable: Vec<&MaasPlan> = catalog
        .plans
        .iter()
        .filter(|p| profile.budget.is_none_or(|b| p.price.amount <= b))
        .collect();
    Ok(RankedPlans {
        entries: rank(&affordable, profile, &catalog.modes, config)?,
        fallback_used: true,
        budget_applied: profile.budget.is_some(),
    })
}
