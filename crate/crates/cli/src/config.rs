//! Settings merged from flags, environment and an optional TOML file.

use std::path::{Path, PathBuf};

use codevault::remote::{RemoteConfig, RemoteEndpoint, DEFAULT_API, DEFAULT_BUCKET};
use serde::Deserialize;

use crate::error::CliError;
use crate::output::Format;
use crate::Cli;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub store: Option<PathBuf>,
    pub format: Option<Format>,
    pub api: Option<String>,
    pub bucket: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub rate: Option<u32>,
    pub token: Option<String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::new(crate::error::ExitCode::Parse, format!("config {}: {e}", path.display())))
    }
}

#[derive(Debug)]
pub struct Settings {
    pub store: Option<PathBuf>,
    pub format: Format,
    pub api: String,
    pub bucket: String,
    pub cache_dir: Option<PathBuf>,
    pub rate: Option<u32>,
    pub token: Option<String>,
}

impl Settings {
    pub fn resolve(cli: &Cli) -> Result<Settings, CliError> {
        let file = match &cli.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let r = &cli.remote;
        Ok(Settings {
            store: cli.store.clone().or(file.store),
            format: cli.format.or(file.format).unwrap_or_default(),
            api: r.api.clone().or(file.api).unwrap_or_else(|| DEFAULT_API.into()),
            bucket: r
                .bucket
                .clone()
                .or(file.bucket)
                .unwrap_or_else(|| DEFAULT_BUCKET.into()),
            cache_dir: r.cache_dir.clone().or(file.cache_dir),
            rate: r.rate.or(file.rate),
            token: r.token.clone().or(file.token),
        })
    }

    pub fn store_path(&self) -> Result<&Path, CliError> {
        self.store
            .as_deref()
            .ok_or_else(|| CliError::usage("no store given: pass --store or set CODEVAULT_STORE"))
    }

    pub fn remote_config(&self) -> Result<RemoteConfig, CliError> {
        let mut config = RemoteConfig {
            endpoint: RemoteEndpoint::new(&self.api, &self.bucket)?,
            cache_dir: self.cache_dir.clone(),
            token: self.token.clone(),
            ..RemoteConfig::default()
        };
        if let Some(rate) = self.rate {
            config.requests_per_minute = rate;
        }
        Ok(config)
    }
}
