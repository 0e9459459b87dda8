use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::context_engine::ContextConfig;
use crate::plan_recommender::VectorizationConfig;
use crate::route_model::adapters::{RoutingConfig, WeatherConfig};
use crate::route_recommender::{RecommendationConfig, RouteRecommenderConfig};

pub const LISTEN_ENV: &str = "MAAS_LISTEN";
pub const DATA_DIR_ENV: &str = "MAAS_DATA_DIR";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Parse(String),
    #[error("config: {0}")]
    Invalid(String),
}

/// Everything the service and the offline CLI read from the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// `host:port`.
    pub listen: String,
    pub data_dir: PathBuf,
    pub context: ContextConfig,
    pub route_recommender: RouteRecommenderConfig,
    pub vectorization: VectorizationConfig,
    /// Needed only for origin/destination route requests.
    pub routing: Option<RoutingConfig>,
    pub weather: WeatherConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("data"),
            context: ContextConfig::default(),
            route_recommender: RouteRecommenderConfig::default(),
            vectorization: VectorizationConfig::default(),
            routing: None,
            weather: WeatherConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str) -> Result<ServiceConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<ServiceConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml_str(&text)?;
        config.resolve_relative_to(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    pub fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        if let Some(RoutingConfig::File { path }) = &mut self.routing {
            fix(path);
        }
        if let WeatherConfig::File { path } = &mut self.weather {
            fix(path);
        }
    }

    /// Applies `MAAS_LISTEN` / `MAAS_DATA_DIR` from `vars`.
    pub fn apply_env<I, K, V>(&mut self, vars: I)
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        for (k, v) in vars {
            match k.as_ref() {
                LISTEN_ENV => self.listen = v.into(),
                DATA_DIR_ENV => self.data_dir = PathBuf::from(v.into()),
                _ => {}
            }
        }
    }

    pub fn listen_addr(&self) -> Result<SocketAddr, ConfigError> {
        self.listen
            .parse()
            .map_err(|e| ConfigError::Invalid(format!("listen address {:?}: {e}", self.listen)))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.listen_addr()?;
        self.context.validate().map_err(ConfigError::Invalid)?;
        if self.route_recommender.display_limit == 0 {
            return Err(ConfigError::Invalid("route_recommender.display_limit must be >= 1".into()));
        }
        Ok(())
    }

    pub fn recommendation(&self) -> RecommendationConfig {
        RecommendationConfig {
            context: self.context.clone(),
            route_recommender: self.route_recommender.clone(),
        }
    }
}
