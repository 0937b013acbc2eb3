//! Startup configuration (TOML).
//!
//! ```toml
//! bind = "127.0.0.1:8080"
//! static_dir = "ui/dist"      # optional
//! cors = false
//!
//! [defaults]
//! n = 5
//! mode = "score_sum"
//! variant = "T"
//! top_k = 3
//!
//! [[taxonomy]]
//! id = "icd10cm"
//! format = "icd10cm"          # icd10cm | icd10pcs | tsv
//! path = "data/icd10cm-order-2021.txt"
//! groups = "data/icd10cm-groups-2021.tsv"   # optional, icd10cm only
//!
//! [[log]]
//! path = "logs/I21.json"
//! ```
//!
//! Relative paths resolve against the directory holding the config file.
//! `PORT` in the environment replaces the port of `bind`.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use taxnext_core::predictor::Mode;
use taxnext_core::similarity::Variant;

use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: SocketAddr,
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
    #[serde(default)]
    pub cors: bool,
    #[serde(default)]
    pub defaults: Defaults,
    #[serde(default, rename = "taxonomy")]
    pub taxonomies: Vec<TaxonomySource>,
    #[serde(default, rename = "log")]
    pub logs: Vec<LogSource>,
}

fn default_bind() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: default_bind(),
            static_dir: None,
            cors: false,
            defaults: Defaults::default(),
            taxonomies: Vec::new(),
            logs: Vec::new(),
        }
    }
}

/// Request defaults for fields a `/v1/predict` body leaves out.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Defaults {
    pub n: usize,
    pub mode: Mode,
    pub variant: Variant,
    pub top_k: usize,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            n: 5,
            mode: Mode::ScoreSum,
            variant: Variant::Taxonomic,
            top_k: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaxonomyFormat {
    Icd10cm,
    Icd10pcs,
    Tsv,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomySource {
    pub id: String,
    pub format: TaxonomyFormat,
    pub path: PathBuf,
    #[serde(default)]
    pub groups: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogSource {
    pub path: PathBuf,
}

impl ServiceConfig {
    pub fn parse(text: &str) -> Result<Self, ServiceError> {
        toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))
    }

    /// Reads a config file and makes its paths absolute.
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for t in &mut cfg.taxonomies {
            fix(&mut t.path);
            if let Some(g) = &mut t.groups {
                fix(g);
            }
        }
        for l in &mut cfg.logs {
            fix(&mut l.path);
        }
        if let Some(d) = &mut cfg.static_dir {
            fix(d);
        }
        Ok(cfg)
    }

    /// Applies `PORT` when set.
    pub fn apply_env(&mut self) -> Result<(), ServiceError> {
        if let Ok(port) = std::env::var("PORT") {
            let port: u16 = port
                .parse()
                .map_err(|_| ServiceError::Config(format!("PORT={port:?} is not a port number")))?;
            self.bind.set_port(port);
        }
        Ok(())
    }
}
