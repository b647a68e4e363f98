//! Settings: command-line flags, then environment, then the config file,
//! then defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use searchsvc_core::engine::FetchConfig;
use serde::Deserialize;

use crate::error::AppError;

pub const DEFAULT_PORT: u16 = 8730;

/// Optional TOML file; every key may be omitted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub store_dir: Option<PathBuf>,
    pub port: Option<u16>,
    pub fixture_port: Option<u16>,
    pub politeness_ms: Option<u64>,
    pub max_parallel: Option<usize>,
    pub timeout_secs: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::BadRequest(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| AppError::BadRequest(format!("{}: {e}", path.display())))
    }
}

/// Values already merged from flags and environment by the argument parser.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub store_dir: Option<PathBuf>,
    pub port: Option<u16>,
    pub fixture_port: Option<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    pub store_dir: PathBuf,
    pub port: u16,
    pub fixture_port: u16,
    pub fetch: FetchConfig,
}

fn default_store_dir() -> PathBuf {
    match std::env::var_os("HOME") {
        Some(home) => PathBuf::from(home).join(".searchsvc").join("services"),
        None => PathBuf::from(".searchsvc").join("services"),
    }
}

impl Settings {
    pub fn resolve(overrides: Overrides, file: &FileConfig) -> Self {
        let mut fetch = FetchConfig::default();
        if let Some(ms) = file.politeness_ms {
            fetch.politeness = (ms > 0).then(|| Duration::from_millis(ms));
        }
        if let Some(n) = file.max_parallel {
            fetch.max_parallel = n.max(1);
        }
        if let Some(s) = file.timeout_secs {
            fetch.timeout = Duration::from_secs(s);
        }
        // the local fixture harness is never throttled
        fetch.politeness_exempt = vec!["127.0.0.1".into(), "localhost".into()];
        Self {
            store_dir: overrides
                .store_dir
                .or_else(|| file.store_dir.clone())
                .unwrap_or_else(default_store_dir),
            port: overrides.port.or(file.port).unwrap_or(DEFAULT_PORT),
            fixture_port: overrides
                .fixture_port
                .or(file.fixture_port)
                .unwrap_or(searchsvc_fixtures::DEFAULT_PORT),
            fetch,
        }
    }

    pub fn fixture_base(&self) -> url::Url {
        url::Url::parse(&format!("http://127.0.0.1:{}/", self.fixture_port)).expect("valid url")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let file: FileConfig = toml::from_str("port = 9000\nfixture_port = 9001\npoliteness_ms = 0").unwrap();
        let s = Settings::resolve(
            Overrides {
                port: Some(7000),
                ..Overrides::default()
            },
            &file,
        );
        assert_eq!(s.port, 7000);
        assert_eq!(s.fixture_port, 9001);
        assert_eq!(s.fetch.politeness, None);
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }
}
