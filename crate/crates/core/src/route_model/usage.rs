//! Trip usage log and plan subscriptions.
//!
//! The persistent log keeps one append-only `usage/<user_id>.ndjson` file per
//! user, one [`TripRecord`] per line. Appends for one user are serialized and
//! synced to disk before they are acknowledged; readers may observe a prefix.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::Route;
use crate::catalog::{MaasPlan, Mode, QuotaUnit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotaUse {
    pub mode: Mode,
    pub amount: f64,
    pub unit: QuotaUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub user_id: String,
    pub timestamp: DateTime<Utc>,
    pub route: Route,
    #[serde(default)]
    pub quota_consumed: Vec<QuotaUse>,
}

#[derive(Deserialize)]
struct SubscriptionDoc {
    user_id: String,
    plan: MaasPlan,
    start: DateTime<Utc>,
    #[serde(default)]
    end: Option<DateTime<Utc>>,
}

/// A user's subscription to a plan. `end` defaults to `start + period_days`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubscriptionDoc")]
pub struct Subscription {
    pub user_id: String,
    pub plan: MaasPlan,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl TryFrom<SubscriptionDoc> for Subscription {
    type Error = String;

    fn try_from(doc: SubscriptionDoc) -> Result<Self, Self::Error> {
        let end = doc
            .end
            .unwrap_or_else(|| doc.start + Duration::days(doc.plan.period_days as i64));
        if doc.start >= end {
            return Err(format!("subscription start {} is not before end {end}", doc.start));
        }
        Ok(Subscription {
            user_id: doc.user_id,
            plan: doc.plan,
            start: doc.start,
            end,
        })
    }
}

impl Subscription {
    pub fn new(user_id: impl Into<String>, plan: MaasPlan, start: DateTime<Utc>) -> Subscription {
        let end = start + Duration::days(plan.period_days.max(1) as i64);
        Subscription {
            user_id: user_id.into(),
            plan,
            start,
            end,
        }
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t <= self.end
    }

    /// Fraction of the period elapsed at `now`, clamped to [0, 1].
    pub fn elapsed_fraction(&self, now: DateTime<Utc>) -> f64 {
        let total = (self.end - self.start).num_milliseconds() as f64;
        let done = (now - self.start).num_milliseconds() as f64;
        (done / total).clamp(0.0, 1.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum UsageError {
    #[error("trip for {user_id} at {got} precedes the last logged trip at {last}")]
    OutOfOrder {
        user_id: String,
        last: DateTime<Utc>,
        got: DateTime<Utc>,
    },
    #[error("invalid user id {0:?}")]
    InvalidUserId(String),
    #[error("usage log {path} line {line}: {reason}")]
    Corrupt { path: PathBuf, line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// User ids double as file names: 1 to 64 characters of `[A-Za-z0-9_-]`.
pub fn valid_user_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// An in-memory, append-only trip log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UsageLog {
    records: Vec<TripRecord>,
}

impl UsageLog {
    pub fn new() -> UsageLog {
        UsageLog::default()
    }

    pub fn records(&self) -> &[TripRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn for_user<'a>(&'a self, user_id: &'a str) -> impl Iterator<Item = &'a TripRecord> + 'a {
        self.records.iter().filter(move |r| r.user_id == user_id)
    }

    fn last_timestamp(&self, user_id: &str) -> Option<DateTime<Utc>> {
        self.records.iter().rev().find(|r| r.user_id == user_id).map(|r| r.timestamp)
    }

    pub fn record(&mut self, record: TripRecord) -> Result<(), UsageError> {
        if let Some(last) = self.last_timestamp(&record.user_id) {
            if record.timestamp < last {
                return Err(UsageError::OutOfOrder {
                    user_id: record.user_id,
                    last,
                    got: record.timestamp,
                });
            }
        }
        self.records.push(record);
        Ok(())
    }

    /// Parses line-delimited JSON. A trailing line without a newline may be an
    /// append in progress and is skipped if it does not parse.
    pub fn from_ndjson(text: &str) -> Result<UsageLog, (usize, String)> {
        let mut log = UsageLog::new();
        let complete = text.ends_with('\n');
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<TripRecord>(line) {
                Ok(r) => log.record(r).map_err(|e| (i + 1, e.to_string()))?,
                Err(_) if !complete && i + 1 == lines.len() => break,
                Err(e) => return Err((i + 1, e.to_string())),
            }
        }
        Ok(log)
    }

    pub fn to_ndjson(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("trip serializes") + "\n")
            .collect()
    }
}

impl FromIterator<TripRecord> for UsageLog {
    /// Collects records as given, without the ordering check.
    fn from_iter<I: IntoIterator<Item = TripRecord>>(iter: I) -> Self {
        UsageLog {
            records: iter.into_iter().collect(),
        }
    }
}

/// Quota of `mode` the subscriber consumed in `[start, now]`, in the plan's
/// unit for that mode. Zero when the plan does not carry the mode.
pub fn consumed_quota(log: &UsageLog, subscription: &Subscription, mode: Mode, now: DateTime<Utc>) -> f64 {
    let Some(quota) = subscription.plan.quota_entry(mode) else {
        return 0.0;
    };
    log.for_user(&subscription.user_id)
        .filter(|r| subscription.start <= r.timestamp && r.timestamp <= now)
        .flat_map(|r| &r.quota_consumed)
        .filter(|q| q.mode == mode && q.unit == quota.unit)
        .map(|q| q.amount)
        .sum()
}

/// Quota a route would draw from `plan`: driving hours from leg durations,
/// currency allowances from leg costs. Pass-based modes draw nothing per trip.
pub fn estimate_consumption(route: &Route, plan: &MaasPlan) -> Vec<QuotaUse> {
    let mut out: Vec<QuotaUse> = Vec::new();
    for leg in route.legs() {
        let Some(mode) = leg.mode.plan_mode() else { continue };
        let Some(quota) = plan.quota_entry(mode) else { continue };
        let amount = match quota.unit {
            QuotaUnit::DrivingHours => leg.duration_s / 3600.0,
            QuotaUnit::CurrencyAmount => leg.cost,
            QuotaUnit::MonthlyPassCount => continue,
        };
        match out.iter_mut().find(|q| q.mode == mode) {
            Some(q) => q.amount += amount,
            None => out.push(QuotaUse { mode, amount, unit: quota.unit }),
        }
    }
    out
}

// per-user append lock plus the last timestamp written
type UserSlot = Arc<Mutex<Option<DateTime<Utc>>>>;

/// File-backed usage log rooted at a directory.
#[derive(Debug)]
pub struct UsageStore {
    dir: PathBuf,
    users: Mutex<HashMap<String, UserSlot>>,
}

impl UsageStore {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<UsageStore> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(UsageStore {
            dir,
            users: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, user_id: &str) -> PathBuf {
        self.dir.join(format!("{user_id}.ndjson"))
    }

    fn user_lock(&self, user_id: &str) -> Arc<Mutex<Option<DateTime<Utc>>>> {
        let mut users = self.users.lock().expect("usage lock poisoned");
        users.entry(user_id.to_string()).or_default().clone()
    }

    /// Loads one user's log. A missing file is an empty log.
    pub fn load(&self, user_id: &str) -> Result<UsageLog, UsageError> {
        if !valid_user_id(user_id) {
            return Err(UsageError::InvalidUserId(user_id.to_string()));
        }
        let path = self.path(user_id);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(UsageLog::new()),
            Err(e) => return Err(e.into()),
        };
        UsageLog::from_ndjson(&text).map_err(|(line, reason)| UsageError::Corrupt { path, line, reason })
    }

    /// Appends a record and syncs it to disk. Returns the user's log length.
    pub fn append(&self, record: &TripRecord) -> Result<usize, UsageError> {
        if !valid_user_id(&record.user_id) {
            return Err(UsageError::InvalidUserId(record.user_id.clone()));
        }
        let lock = self.user_lock(&record.user_id);
        let mut last = lock.lock().expect("user lock poisoned");
        let existing = self.load(&record.user_id)?;
        let known_last = (*last).or_else(|| existing.records().last().map(|r| r.timestamp));
        if let Some(prev) = known_last {
            if record.timestamp < prev {
                return Err(UsageError::OutOfOrder {
                    user_id: record.user_id.clone(),
                    last: prev,
                    got: record.timestamp,
                });
            }
        }
        let mut line = serde_json::to_string(record).expect("trip serializes");
        line.push('\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.path(&record.user_id))?;
        file.write_all(line.as_bytes())?;
        file.sync_data()?;
        *last = Some(record.timestamp);
        Ok(existing.len() + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ModeQuota, Price};
    use crate::route_model::{Leg, LegMode};
    use approx::assert_abs_diff_eq;
    use chrono::TimeZone;

    fn t(day: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 3, day, 8, 0, 0).unwrap()
    }

    fn car_route() -> Route {
        Route::new("c", vec![Leg::new(LegMode::CarSharing, 8000.0, 900.0, 0.0)]).unwrap()
    }

    fn trip(user: &str, at: DateTime<Utc>, hours: f64) -> TripRecord {
        TripRecord {
            user_id: user.into(),
            timestamp: at,
            route: car_route(),
            quota_consumed: vec![QuotaUse {
                mode: Mode::CarSharing,
                amount: hours,
                unit: QuotaUnit::DrivingHours,
            }],
        }
    }

    pub(crate) fn car_plan(hours: f64) -> MaasPlan {
        MaasPlan {
            id: "p".into(),
            quotas: vec![ModeQuota::new(Mode::CarSharing, hours, QuotaUnit::DrivingHours)],
            price: Price { amount: 1000.0, currency: "HUF".into() },
            period_days: 30,
            tags: vec![],
        }
    }

    #[test]
    fn append_only_in_order() {
        let mut log = UsageLog::new();
        log.record(trip("u", t(2), 1.0)).unwrap();
        assert_eq!(log.len(), 1);
        log.record(trip("u", t(3), 2.0)).unwrap();
        assert_eq!(log.records()[1].quota_consumed[0].amount, 2.0);
        assert!(matches!(log.record(trip("u", t(1), 1.0)), Err(UsageError::OutOfOrder { .. })));
        // other users are independent
        log.record(trip("v", t(1), 1.0)).unwrap();
    }

    #[test]
    fn consumption_estimate_follows_plan_units() {
        let mut plan = car_plan(10.0);
        plan.quotas.push(ModeQuota::new(Mode::Taxi, 3000.0, QuotaUnit::CurrencyAmount));
        plan.quotas.push(ModeQuota::new(Mode::PublicTransport, 1.0, QuotaUnit::MonthlyPassCount));
        let r = Route::new(
            "m",
            vec![
                Leg::new(LegMode::CarSharing, 5000.0, 1800.0, 0.0),
                Leg::new(LegMode::PublicTransport, 3000.0, 600.0, 350.0),
                Leg::new(LegMode::Taxi, 2000.0, 300.0, 1200.0),
                Leg::new(LegMode::CarSharing, 1000.0, 900.0, 0.0),
                Leg::new(LegMode::BikeSharing, 1000.0, 300.0, 0.0),
            ],
        )
        .unwrap();
        let used = estimate_consumption(&r, &plan);
        assert_eq!(used.len(), 2);
        assert_eq!(used[0], QuotaUse { mode: Mode::CarSharing, amount: 0.75, unit: QuotaUnit::DrivingHours });
        assert_eq!(used[1], QuotaUse { mode: Mode::Taxi, amount: 1200.0, unit: QuotaUnit::CurrencyAmount });
    }

    #[test]
    fn consumed_quota_sums_window() {
        let sub = Subscription::new("u", car_plan(10.0), t(1));
        let mut log = UsageLog::new();
        assert_eq!(consumed_quota(&log, &sub, Mode::CarSharing, t(10)), 0.0);
        log.record(trip("u", t(2), 2.0)).unwrap();
        log.record(trip("u", t(5), 1.5)).unwrap();
        assert_abs_diff_eq!(consumed_quota(&log, &sub, Mode::CarSharing, t(10)), 3.5);
        assert_abs_diff_eq!(consumed_quota(&log, &sub, Mode::CarSharing, t(3)), 2.0);
        assert_eq!(consumed_quota(&log, &sub, Mode::Taxi, t(10)), 0.0);
    }

    #[test]
    fn trips_before_subscription_excluded() {
        let mut log = UsageLog::new();
        log.record(trip("u", t(1), 2.0)).unwrap();
        let sub = Subscription::new("u", car_plan(10.0), t(4));
        assert_eq!(consumed_quota(&log, &sub, Mode::CarSharing, t(9)), 0.0);
    }

    #[test]
    fn consumed_quota_monotone_in_now() {
        let sub = Subscription::new("u", car_plan(10.0), t(1));
        let log: UsageLog = (2..20).map(|d| trip("u", t(d), 0.25)).collect();
        let mut prev = 0.0;
        for d in 1..=30 {
            let c = consumed_quota(&log, &sub, Mode::CarSharing, t(d));
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn subscription_end_defaults_to_period() {
        let doc = serde_json::json!({"user_id": "u", "plan": car_plan(3.0), "start": t(1)});
        let sub: Subscription = serde_json::from_value(doc).unwrap();
        assert_eq!(sub.end, t(31));
        let bad = serde_json::json!({"user_id": "u", "plan": car_plan(3.0), "start": t(5), "end": t(5)});
        assert!(serde_json::from_value::<Subscription>(bad).is_err());
    }

    #[test]
    fn ndjson_round_trip_and_partial_tail() {
        let log: UsageLog = [trip("u", t(1), 1.0), trip("u", t(2), 1.0)].into_iter().collect();
        let text = log.to_ndjson();
        assert_eq!(UsageLog::from_ndjson(&text).unwrap(), log);
        let partial = format!("{text}{{\"user_id\":\"u\",\"time");
        assert_eq!(UsageLog::from_ndjson(&partial).unwrap().len(), 2);
        assert!(UsageLog::from_ndjson(&format!("garbage\n{text}")).is_err());
    }

    #[test]
    fn store_appends_durably() {
        let dir = tempfile::tempdir().unwrap();
        let store = UsageStore::open(dir.path()).unwrap();
        assert!(store.load("u").unwrap().is_empty());
        assert_eq!(store.append(&trip("u", t(2), 1.0)).unwrap(), 1);
        assert_eq!(store.append(&trip("u", t(3), 1.0)).unwrap(), 2);
        assert!(matches!(store.append(&trip("u", t(1), 1.0)), Err(UsageError::OutOfOrder { .. })));
        drop(store);
        let reopened = UsageStore::open(dir.path()).unwrap();
        assert_eq!(reopened.load("u").unwrap().len(), 2);
        assert!(matches!(reopened.append(&trip("u", t(1), 1.0)), Err(UsageError::OutOfOrder { .. })));
        assert!(matches!(reopened.load("../etc"), Err(UsageError::InvalidUserId(_))));
    }

    #[test]
    fn concurrent_appends_for_distinct_users_do_not_interleave() {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(UsageStore::open(dir.path()).unwrap());
        let handles: Vec<_> = (0..4)
            .map(|u| {
                let store = store.clone();
                std::thread::spawn(move || {
                    let user = format!("user{u}");
                    for d in 1..=25 {
                        store.append(&trip(&user, t(d), 0.1)).unwrap();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        for u in 0..4 {
            let log = store.load(&format!("user{u}")).unwrap();
            assert_eq!(log.len(), 25);
            assert!(log.records().iter().all(|r| r.user_id == format!("user{u}")));
        }
    }
}
