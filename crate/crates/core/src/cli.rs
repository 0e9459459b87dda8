//! `maas` command line: offline runs over the same file formats the service
//! keeps in its data directory.
//!
//! Exit codes: 0 success, 1 validation error (schema, rule syntax, empty
//! catalog), 2 runtime error (I/O, server failure).

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

use crate::catalog::{parse_catalog, parse_plan, Catalog};
use crate::constraint_kb::{parse_profile, RuleSet, UserProfile};
use crate::context_engine::{Promotions, Situation};
use crate::plan_recommender::{PlanError, RankedPlans};
use crate::route_model::adapters::{FileWeather, WeatherProvider};
use crate::route_model::{ingest_routes, Subscription, UsageLog};
use crate::route_recommender::{recommend_routes, RecommendationStatus, RouteRecommendation};
use crate::service::{self, plans_for_request, render, write_atomic, PlansRequest, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "maas", version, about = "MaaS plan and route recommendation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate or edit a plan catalog.
    #[command(subcommand)]
    Catalog(CatalogCommand),
    /// Check constraint rule files.
    #[command(subcommand)]
    Rules(RulesCommand),
    /// Run a recommender offline.
    #[command(subcommand)]
    Recommend(RecommendCommand),
    /// Run the HTTP service.
    Serve {
        /// Service config (TOML). MAAS_LISTEN and MAAS_DATA_DIR override it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum CatalogCommand {
    Validate {
        catalog: PathBuf,
    },
    /// Insert or replace a plan, rewriting the catalog file.
    Upsert {
        catalog: PathBuf,
        plan: PathBuf,
    },
    /// Remove a plan by id, rewriting the catalog file.
    Remove {
        catalog: PathBuf,
        plan_id: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum RulesCommand {
    Check {
        rules: PathBuf,
        /// Also check that every referenced attribute exists in this catalog.
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Service config; only its recommender sections are read.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the service's JSON response instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum RecommendCommand {
    Plans {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        budget: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    Routes {
        #[arg(long)]
        routes: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        subscription: Option<PathBuf>,
        /// NDJSON trip log.
        #[arg(long)]
        usage: Option<PathBuf>,
        /// Weather reading JSON; absent or unreadable means stale weather.
        #[arg(long)]
        weather: Option<PathBuf>,
        #[arg(long)]
        promotions: Option<PathBuf>,
        /// Defaults to the subscription's user, then the first logged user.
        #[arg(long)]
        user_id: Option<String>,
        /// Evaluation time (RFC 3339); defaults to now.
        #[arg(long)]
        now: Option<DateTime<Utc>>,
        /// Return the full fused list.
        #[arg(long)]
        verbose: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn invalid(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{}: {e}", path.display()))
}

fn load_catalog(path: &Path) -> Result<Catalog, CliError> {
    parse_catalog(&read(path)?).map_err(|e| invalid(path, e))
}

fn load_rules(path: &Path) -> Result<RuleSet, CliError> {
    RuleSet::parse(&read(path)?).map_err(|e| invalid(path, e))
}

fn load_profile(path: &Path) -> Result<UserProfile, CliError> {
    parse_profile(&read(path)?).map_err(|e| invalid(path, e))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| invalid(path, e))
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig, CliError> {
    match path {
        None => Ok(ServiceConfig::default()),
        Some(p) => ServiceConfig::load(p).map_err(|e| match e {
            service::ConfigError::Io { .. } => CliError::Runtime(e.to_string()),
            _ => invalid(p, e),
        }),
    }
}

fn save_catalog(path: &Path, catalog: &Catalog) -> Result<(), CliError> {
    write_atomic(path, render(catalog).as_bytes()).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let text = match cli.command {
        Command::Catalog(c) => catalog_command(c)?,
        Command::Rules(RulesCommand::Check { rules, catalog }) => {
            let set = load_rules(&rules)?;
            if let Some(c) = catalog {
                set.check_against(&load_catalog(&c)?).map_err(|e| invalid(&rules, e))?;
            }
            format!("{} rules OK\n", set.len())
        }
        Command::Recommend(r) => recommend_command(r)?,
        Command::Serve { config } => {
            serve_command(config.as_deref())?;
            String::new()
        }
    };
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Runtime(format!("writing output: {e}")))
}

/// Parses arguments, runs, prints errors to stderr, and maps them to exit codes.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn catalog_command(c: CatalogCommand) -> Result<String, CliError> {
    match c {
        CatalogCommand::Validate { catalog } => {
            let cat = load_catalog(&catalog)?;
            Ok(format!("catalog OK: {} plans, currency {}\n", cat.len(), cat.currency))
        }
        CatalogCommand::Upsert { catalog, plan } => {
            let cat = load_catalog(&catalog)?;
            let plan = parse_plan(&read(&plan)?).map_err(|e| invalid(&plan, e))?;
            let id = plan.id.clone();
            let replaced = cat.get(&id).is_some();
            let next = cat.upsert_plan(plan).map_err(|e| invalid(&catalog, e))?;
            save_catalog(&catalog, &next)?;
            let verb = if replaced { "replaced" } else { "added" };
            Ok(format!("{verb} plan {id}; catalog has {} plans\n", next.len()))
        }
        CatalogCommand::Remove { catalog, plan_id } => {
            let cat = load_catalog(&catalog)?;
            let removal = cat.remove_plan(&plan_id);
            if removal.missing {
                return Err(invalid(&catalog, format!("no plan {plan_id:?}")));
            }
            save_catalog(&catalog, &removal.catalog)?;
            Ok(format!("removed plan {plan_id}; catalog has {} plans\n", removal.catalog.len()))
        }
    }
}

fn recommend_command(r: RecommendCommand) -> Result<String, CliError> {
    match r {
        RecommendCommand::Plans { catalog, rules, profile, budget, common } => {
            let config = load_config(common.config.as_deref())?;
            let catalog = load_catalog(&catalog)?;
            let rules = load_rules(&rules)?;
            let request = PlansRequest { profile: load_profile(&profile)?, budget };
            let ranked = plans_for_request(&catalog, &rules, &request, &config).map_err(|e| match e {
                PlanError::EmptyCatalog | PlanError::Rules(_) => CliError::Validation(e.to_string()),
                _ => CliError::Runtime(e.to_string()),
            })?;
            Ok(if common.json { render(&ranked) } else { plans_table(&ranked, &catalog) })
        }
        RecommendCommand::Routes {
            routes,
            profile,
            subscription,
            usage,
            weather,
            promotions,
            user_id,
            now,
            verbose,
            common,
        } => {
            let config = load_config(common.config.as_deref())?;
            let routes_list = ingest_routes(&read(&routes)?).map_err(|e| invalid(&routes, e))?;
            let profile = load_profile(&profile)?;
            let subscription: Option<Subscription> = subscription.as_deref().map(load_json).transpose()?;
            let log = match &usage {
                Some(p) => UsageLog::from_ndjson(&read(p)?)
                    .map_err(|(line, reason)| invalid(p, format!("line {line}: {reason}")))?,
                None => UsageLog::new(),
            };
            let user_id = user_id
                .or_else(|| subscription.as_ref().map(|s| s.user_id.clone()))
                .or_else(|| log.records().first().map(|r| r.user_id.clone()))
                .unwrap_or_else(|| "user".into());
            let weather = weather.and_then(|path| match (FileWeather { path }).current_weather(None) {
                Ok(w) => Some(w),
                Err(e) => {
                    tracing::warn!(error = %e, "weather unavailable; treating as not nice");
                    None
                }
            });
            let mut rc = config.recommendation();
            if let Some(p) = promotions {
                rc.context.promotions = load_json::<Promotions>(&p)?;
            }
            let situation = Situation {
                user_id: &user_id,
                profile: &profile,
                log: &log,
                subscription: subscription.as_ref(),
                weather,
                now: now.unwrap_or_else(Utc::now),
            };
            let rec = recommend_routes(&routes_list, &situation, &rc, verbose);
            Ok(if common.json { render(&rec) } else { routes_table(&rec) })
        }
    }
}

fn serve_command(config: Option<&Path>) -> Result<(), CliError> {
    let mut cfg = load_config(config)?;
    cfg.apply_env(std::env::vars());
    cfg.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    runtime
        .block_on(service::serve(cfg))
        .map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn plans_table(ranked: &RankedPlans, catalog: &Catalog) -> String {
    let mut s = String::new();
    if ranked.fallback_used {
        let scope = if ranked.budget_applied { "plans within budget" } else { "all plans" };
        let _ = writeln!(s, "note: no plan satisfies every constraint; fallback ranking of {scope}");
    }
    if ranked.entries.is_empty() {
        s.push_str("no plans to recommend\n");
        return s;
    }
    let _ = writeln!(s, "{:>4}  {:<12} {:>8}  {:>12}", "rank", "plan", "score", "price");
    for (i, e) in ranked.entries.iter().enumerate() {
        let price = catalog
            .get(&e.plan_id)
            .map(|p| format!("{} {}", p.price.amount, p.price.currency))
            .unwrap_or_default();
        let _ = writeln!(s, "{:>4}  {:<12} {:>8.4}  {:>12}", i + 1, e.plan_id, e.score, price);
    }
    s
}

pub fn routes_table(rec: &RouteRecommendation) -> String {
    let mut s = String::new();
    if rec.status == RecommendationStatus::NoFeasibleRoutes {
        s.push_str("no feasible routes\n");
        return s;
    }
    let _ = writeln!(
        s,
        "{:>4}  {:<12} {:>6}  {:<16} {:>8} {:>8}  badges",
        "rank", "route", "points", "main mode", "min", "cost"
    );
    for (i, e) in rec.entries.iter().enumerate() {
        let mark = if e.is_default { "*" } else { " " };
        let t = e.route.totals();
        let _ = writeln!(
            s,
            "{mark}{:>3}  {:<12} {:>6}  {:<16} {:>8.1} {:>8.0}  {}",
            i + 1,
            e.route_id,
            e.score,
            t.main_mode.as_str(),
            t.total_duration_s / 60.0,
            t.total_cost,
            e.badges.join(",")
        );
    }
    if rec.entries.len() < rec.feasible_routes {
        let _ = writeln!(s, "({} more; use --verbose)", rec.feasible_routes - rec.entries.len());
    }
    let trending: Vec<&str> = rec
        .context
        .increased_usage_trend
        .iter()
        .filter(|(_, on)| **on)
        .map(|(m, _)| m.as_str())
        .collect();
    let weather = match (rec.context.weather_stale, rec.context.nice_weather) {
        (true, _) => "unknown",
        (false, true) => "nice",
        (false, false) => "not nice",
    };
    let trend = if trending.is_empty() { "none".to_string() } else { trending.join(",") };
    let _ = writeln!(s, "weather: {weather}; increased usage: {trend}");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_recommend_routes_flags() {
        let cli = Cli::try_parse_from([
            "maas", "recommend", "routes", "--routes", "r.json", "--profile", "p.json", "--now",
            "2024-04-10T08:00:00Z", "--verbose", "--json",
        ])
        .unwrap();
        match cli.command {
            Command::Recommend(RecommendCommand::Routes { verbose, common, now, .. }) => {
                assert!(verbose && common.json);
                assert!(now.is_some());
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
