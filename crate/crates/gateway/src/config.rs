//! Gateway configuration: a JSON file overlaid with `INTENT_GATE_*`
//! environment variables.
//!
//! The language-model key is never read from the file. It comes only from
//! `INTENT_GATE_LLM_KEY`.

use std::fmt;
use std::path::{Path, PathBuf};

use figment::providers::{Env, Format, Json, Serialized};
use figment::Figment;
use intent_gate_core::context::DEFAULT_SESSION_TTL;
use intent_gate_core::time::IsoDuration;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_PREFIX: &str = "INTENT_GATE_";
pub const LLM_KEY_VAR: &str = "INTENT_GATE_LLM_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot load configuration: {0}")]
    Load(#[from] Box<figment::Error>),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Rule,
    Llm,
    Replay,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rule" => Ok(BackendKind::Rule),
            "llm" => Ok(BackendKind::Llm),
            "replay" => Ok(BackendKind::Replay),
            other => Err(format!("unknown backend `{other}` (expected rule, llm or replay)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockKind {
    /// Seconds since the Unix epoch, forced strictly increasing.
    Wall,
    /// A counter that moves only when requests arrive or ticks are driven.
    Logical,
}

/// A string kept out of `Debug` output.
#[derive(Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Secret(pub String);

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<redacted>")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub listen: String,
    pub backend: BackendKind,
    /// Bundled lexicon when unset.
    pub lexicon_path: Option<PathBuf>,
    /// Bundled prompt spec when unset.
    pub prompt_spec_path: Option<PathBuf>,
    pub llm_endpoint: Option<String>,
    pub llm_model: String,
    pub llm_temperature: f64,
    pub llm_retries: u32,
    pub llm_timeout_secs: u64,
    #[serde(skip)]
    pub llm_key: Option<Secret>,
    /// Replay fixtures; required for the replay backend.
    pub fixtures_dir: Option<PathBuf>,
    /// Answer with the rule backend when the language model cannot be reached.
    pub fallback_to_rules: bool,
    /// Bundled inventory when unset.
    pub inventory_path: Option<PathBuf>,
    /// State is kept in memory only when unset.
    pub event_log_path: Option<PathBuf>,
    pub session_ttl: IsoDuration,
    pub seed: u64,
    pub clock: ClockKind,
    /// First reading of the logical clock.
    pub logical_start: u64,
    /// Seconds between scheduler ticks while serving; 0 disables the ticker.
    pub tick_interval_secs: u64,
    /// When set, every endpoint except the health check wants
    /// `Authorization: Bearer <token>`.
    pub api_token: Option<Secret>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            listen: "127.0.0.1:8080".into(),
            backend: BackendKind::Rule,
            lexicon_path: None,
            prompt_spec_path: None,
            llm_endpoint: None,
            llm_model: "gpt-3.5-turbo".into(),
            llm_temperature: 0.0,
            llm_retries: 3,
            llm_timeout_secs: 30,
            llm_key: None,
            fixtures_dir: None,
            fallback_to_rules: false,
            inventory_path: None,
            event_log_path: None,
            session_ttl: DEFAULT_SESSION_TTL,
            seed: 0,
            clock: ClockKind::Wall,
            logical_start: 0,
            tick_interval_secs: 1,
            api_token: None,
        }
    }
}

impl GatewayConfig {
    /// Defaults, then `file` if given, then the environment.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        let mut figment = Figment::from(Serialized::defaults(GatewayConfig::default()));
        if let Some(path) = file {
            if !path.exists() {
                return Err(ConfigError::Invalid(format!("config file {} does not exist", path.display())));
            }
            figment = figment.merge(Json::file(path));
        }
        figment = figment.merge(Env::prefixed(ENV_PREFIX).ignore(&["llm_key"]));
        let mut config: GatewayConfig = figment.extract().map_err(Box::new)?;
        config.llm_key = std::env::var(LLM_KEY_VAR).ok().filter(|k| !k.is_empty()).map(Secret);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        match self.backend {
            BackendKind::Llm if self.llm_endpoint.is_none() => return invalid("the llm backend needs llm_endpoint"),
            BackendKind::Llm if self.llm_key.is_none() => {
                return invalid(&format!("the llm backend needs the {LLM_KEY_VAR} environment variable"))
            }
            BackendKind::Replay if self.fixtures_dir.is_none() => return invalid("the replay backend needs fixtures_dir"),
            _ => {}
        }
        if !(0.0..=2.0).contains(&self.llm_temperature) {
            return invalid("llm_temperature must lie in [0, 2]");
        }
        if self.session_ttl.is_zero() {
            return invalid("session_ttl must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn llm_needs_endpoint_and_key() {
        let mut c = GatewayConfig { backend: BackendKind::Llm, ..GatewayConfig::default() };
        assert!(c.validate().is_err());
        c.llm_endpoint = Some("http://localhost:1/v1/chat/completions".into());
        assert!(c.validate().is_err());
        c.llm_key = Some(Secret("k".into()));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn replay_needs_fixtures() {
        let c = GatewayConfig { backend: BackendKind::Replay, ..GatewayConfig::default() };
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn secrets_stay_out_of_debug_and_files() {
        let c = GatewayConfig { llm_key: Some(Secret("sk-123".into())), ..GatewayConfig::default() };
        assert!(!format!("{c:?}").contains("sk-123"));
        assert!(!serde_json::to_string(&c).unwrap().contains("sk-123"));
    }

    #[test]
    #[allow(clippy::result_large_err)]
    fn file_then_environment() {
        figment::Jail::expect_with(|jail| {
            jail.create_file("gw.json", r#"{"backend": "replay", "fixtures_dir": "fx", "seed": 3, "session_ttl": "PT1H"}"#)?;
            jail.set_env("INTENT_GATE_SEED", "9");
            jail.set_env("INTENT_GATE_CLOCK", "logical");
            jail.set_env("INTENT_GATE_LLM_KEY", "secret");
            let c = GatewayConfig::load(Some(Path::new("gw.json"))).map_err(|e| e.to_string())?;
            assert_eq!(c.backend, BackendKind::Replay);
            assert_eq!(c.seed, 9);
            assert_eq!(c.clock, ClockKind::Logical);
            assert_eq!(c.session_ttl, IsoDuration::from_hours(1));
            assert_eq!(c.llm_key, Some(Secret("secret".into())));
            Ok(())
        });
    }

    #[test]
    #[allow(clippy::result_large_err)]
    fn key_in_file_is_rejected() {
        figment::Jail::expect_with(|jail| {
            jail.create_file("gw.json", r#"{"llm_key": "oops"}"#)?;
            assert!(GatewayConfig::load(Some(Path::new("gw.json"))).is_err());
            Ok(())
        });
    }
}
