//! Layered configuration. Each source yields a [`ConfigLayer`] of optional
//! values; later layers win. The order is defaults, config file,
//! environment, command line.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use pytypefill::eval::CheckerConfig;
use pytypefill::predictor::DecodeParams;
use pytypefill::{Budgets, ContextConfig, DecodeConfig, HeuristicPredictor, Predictor, WireConfig, WirePredictor};

pub const ENV_BACKEND_URL: &str = "PYTYPEFILL_BACKEND_URL";
pub const ENV_CHECKER: &str = "PYTYPEFILL_CHECKER";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    Heuristic,
    /// Model server endpoint.
    Wire(String),
}

impl Backend {
    /// `heuristic`, or an `http://` / `https://` URL.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let text = text.trim();
        if text.eq_ignore_ascii_case("heuristic") {
            Ok(Backend::Heuristic)
        } else if text.starts_with("http://") || text.starts_with("https://") {
            Ok(Backend::Wire(text.to_string()))
        } else {
            Err(ConfigError::Invalid(format!("backend `{text}` is neither `heuristic` nor an http(s) URL")))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetLayer {
    pub preamble: Option<usize>,
    pub usees: Option<usize>,
    pub main: Option<usize>,
    pub users: Option<usize>,
    pub total: Option<usize>,
}

/// One configuration source. `None` leaves the value to lower layers.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigLayer {
    pub budgets: BudgetLayer,
    pub marker_base: Option<usize>,
    pub backend: Option<String>,
    pub timeout_secs: Option<u64>,
    pub retries: Option<usize>,
    pub max_in_flight: Option<usize>,
    pub beam_width: Option<usize>,
    pub diversity_penalty: Option<f64>,
    pub checker: Option<String>,
    pub workers: Option<usize>,
    pub host: Option<String>,
    pub port: Option<u16>,
    pub cors_origin: Option<String>,
    pub state_dir: Option<PathBuf>,
}

impl ConfigLayer {
    pub fn from_toml_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.into(), message: e.to_string() })
    }

    /// Values from the environment, looked up through `var`.
    pub fn from_env(var: &dyn Fn(&str) -> Option<String>) -> Self {
        let set = |name| var(name).filter(|v: &String| !v.trim().is_empty());
        ConfigLayer { backend: set(ENV_BACKEND_URL), checker: set(ENV_CHECKER), ..ConfigLayer::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub budgets: Budgets,
    pub marker_base: usize,
    pub backend: Backend,
    pub timeout: Duration,
    pub retries: usize,
    pub max_in_flight: usize,
    pub decode_params: DecodeParams,
    /// Checker command line; a bare program name keeps the default flags.
    pub checker: String,
    pub workers: usize,
    pub host: String,
    pub port: u16,
    /// Origin allowed by CORS; any origin when unset.
    pub cors_origin: Option<String>,
    pub state_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        let wire = WireConfig::new("");
        Config {
            budgets: Budgets::default(),
            marker_base: 0,
            backend: Backend::Heuristic,
            timeout: wire.timeout,
            retries: wire.retries,
            max_in_flight: wire.max_in_flight,
            decode_params: DecodeParams::default(),
            checker: CheckerConfig::default().program,
            workers: std::thread::available_parallelism().map_or(4, |n| n.get()),
            host: "127.0.0.1".into(),
            port: 8765,
            cors_origin: None,
            state_dir: PathBuf::from(".pytypefill/sessions"),
        }
    }
}

impl Config {
    /// Applies `layers` in order over the defaults and validates the result.
    pub fn resolve<'a>(layers: impl IntoIterator<Item = &'a ConfigLayer>) -> Result<Self, ConfigError> {
        let mut c = Config::default();
        for layer in layers {
            c.apply(layer)?;
        }
        c.validate()?;
        Ok(c)
    }

    fn apply(&mut self, l: &ConfigLayer) -> Result<(), ConfigError> {
        let b = &l.budgets;
        set(&mut self.budgets.preamble, b.preamble);
        set(&mut self.budgets.usees, b.usees);
        set(&mut self.budgets.main, b.main);
        set(&mut self.budgets.users, b.users);
        set(&mut self.budgets.total, b.total);
        set(&mut self.marker_base, l.marker_base);
        if let Some(backend) = &l.backend {
            self.backend = Backend::parse(backend)?;
        }
        set(&mut self.timeout, l.timeout_secs.map(Duration::from_secs));
        set(&mut self.retries, l.retries);
        set(&mut self.max_in_flight, l.max_in_flight);
        set(&mut self.decode_params.beam_width, l.beam_width);
        set(&mut self.decode_params.diversity_penalty, l.diversity_penalty);
        set(&mut self.checker, l.checker.clone());
        set(&mut self.workers, l.workers);
        set(&mut self.host, l.host.clone());
        set(&mut self.port, l.port);
        if l.cors_origin.is_some() {
            self.cors_origin = l.cors_origin.clone();
        }
        set(&mut self.state_dir, l.state_dir.clone());
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.budgets.validate().map_err(ConfigError::Invalid)?;
        if self.decode_params.beam_width == 0 {
            return Err(ConfigError::Invalid("beam width must be positive".into()));
        }
        if !(self.decode_params.diversity_penalty.is_finite() && self.decode_params.diversity_penalty >= 0.0) {
            return Err(ConfigError::Invalid("diversity penalty must be a non-negative number".into()));
        }
        if self.workers == 0 || self.max_in_flight == 0 {
            return Err(ConfigError::Invalid("worker and in-flight limits must be positive".into()));
        }
        if self.timeout.is_zero() {
            return Err(ConfigError::Invalid("timeout must be positive".into()));
        }
        if self.checker.trim().is_empty() {
            return Err(ConfigError::Invalid("checker command is empty".into()));
        }
        Ok(())
    }

    pub fn decode_config(&self) -> DecodeConfig {
        DecodeConfig {
            context: ContextConfig { budgets: self.budgets, marker_base: self.marker_base, typed_context: true },
            decode_params: self.decode_params,
            record_inputs: false,
        }
    }

    pub fn checker_config(&self) -> CheckerConfig {
        CheckerConfig::from_command_line(&self.checker).expect("validated non-empty")
    }

    pub fn predictor(&self) -> Result<Arc<dyn Predictor>, ConfigError> {
        self.predictor_for(&self.backend)
    }

    /// A predictor for `backend` with this configuration's wire settings.
    pub fn predictor_for(&self, backend: &Backend) -> Result<Arc<dyn Predictor>, ConfigError> {
        match backend {
            Backend::Heuristic => Ok(Arc::new(HeuristicPredictor)),
            Backend::Wire(url) => {
                let wire = WireConfig {
                    timeout: self.timeout,
                    retries: self.retries,
                    max_in_flight: self.max_in_flight,
                    ..WireConfig::new(url.clone())
                };
                let p = WirePredictor::new(wire).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                Ok(Arc::new(p))
            }
        }
    }
}

fn set<T>(target: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *target = v;
    }
}
