//! Loaded taxonomies and logs. Built once at startup and read-only after.

use std::collections::BTreeMap;

use taxnext_core::eventlog::{stats, EventLog, LogStats};
use taxnext_core::predictor::Predictor;
use taxnext_core::similarity::{Taxonomies, Variant};
use taxnext_core::taxonomy::{CmGroups, Taxonomy};

use crate::config::{Defaults, ServiceConfig, TaxonomyFormat};
use crate::ServiceError;

pub struct LoadedLog {
    pub log: &'static EventLog,
    pub stats: LogStats,
    taxonomic: Predictor<'static>,
    boolean: Predictor<'static>,
}

impl LoadedLog {
    pub fn predictor(&self, variant: Variant) -> &Predictor<'static> {
        match variant {
            Variant::Taxonomic => &self.taxonomic,
            Variant::Boolean => &self.boolean,
        }
    }
}

/// Everything the handlers read. The loaded data lives for the rest of the
/// process, which lets predictors borrow it without reference counting.
pub struct AppState {
    pub defaults: Defaults,
    taxonomies: BTreeMap<String, &'static Taxonomy>,
    logs: BTreeMap<String, LoadedLog>,
}

impl AppState {
    pub fn new(taxonomies: Vec<Taxonomy>, logs: Vec<EventLog>, defaults: Defaults) -> Result<Self, ServiceError> {
        let mut by_id: BTreeMap<String, &'static Taxonomy> = BTreeMap::new();
        for t in taxonomies {
            let id = t.id().to_string();
            if by_id.contains_key(&id) {
                return Err(ServiceError::Config(format!("taxonomy {id:?} loaded twice")));
            }
            by_id.insert(id, Box::leak(Box::new(t)));
        }
        let mut loaded = BTreeMap::new();
        for log in logs {
            let id = log.id.clone();
            if loaded.contains_key(&id) {
                return Err(ServiceError::Config(format!("log {id:?} loaded twice")));
            }
            let find = |tax_id: &str| {
                by_id.get(tax_id).copied().ok_or_else(|| {
                    ServiceError::Config(format!("log {id:?} references taxonomy {tax_id:?}, which is not loaded"))
                })
            };
            let tax = Taxonomies::new(find(&log.diagnosis_taxonomy)?, find(&log.procedure_taxonomy)?);
            let log: &'static EventLog = Box::leak(Box::new(log));
            let stats = stats(log).map_err(|e| ServiceError::Data(format!("log {id:?}: {e}")))?;
            let taxonomic = Predictor::new(log, tax, Variant::Taxonomic.config())
                .map_err(|e| ServiceError::Data(format!("log {id:?}: {e}")))?;
            let boolean = taxonomic
                .with_config(Variant::Boolean.config())
                .map_err(|e| ServiceError::Data(format!("log {id:?}: {e}")))?;
            log::info!("loaded log {id} ({} cases)", log.cases.len());
            loaded.insert(
                id,
                LoadedLog {
                    log,
                    stats,
                    taxonomic,
                    boolean,
                },
            );
        }
        Ok(Self {
            defaults,
            taxonomies: by_id,
            logs: loaded,
        })
    }

    /// Reads every file named in the config.
    pub fn load(cfg: &ServiceConfig) -> Result<Self, ServiceError> {
        let (taxonomies, logs) = read_sources(cfg)?;
        Self::new(taxonomies, logs, cfg.defaults)
    }

    pub fn taxonomy(&self, id: &str) -> Option<&'static Taxonomy> {
        self.taxonomies.get(id).copied()
    }

    pub fn taxonomies(&self) -> impl Iterator<Item = &'static Taxonomy> + '_ {
        self.taxonomies.values().copied()
    }

    pub fn log(&self, id: &str) -> Option<&LoadedLog> {
        self.logs.get(id)
    }

    pub fn logs(&self) -> impl Iterator<Item = &LoadedLog> {
        self.logs.values()
    }
}

/// Taxonomies and logs named in the config, read but not yet indexed.
pub fn read_sources(cfg: &ServiceConfig) -> Result<(Vec<Taxonomy>, Vec<EventLog>), ServiceError> {
    let mut taxonomies = Vec::with_capacity(cfg.taxonomies.len());
    for src in &cfg.taxonomies {
        let bytes = std::fs::read(&src.path).map_err(|e| ServiceError::io(&src.path, e))?;
        let data = |e: taxnext_core::taxonomy::TaxonomyError| {
            ServiceError::Data(format!("taxonomy {:?} ({}): {e}", src.id, src.path.display()))
        };
        let t = match src.format {
            TaxonomyFormat::Icd10cm => {
                let groups = match &src.groups {
                    Some(p) => {
                        let text = std::fs::read_to_string(p).map_err(|e| ServiceError::io(p, e))?;
                        Some(CmGroups::parse_tsv(&text).map_err(data)?)
                    }
                    None => None,
                };
                Taxonomy::parse_icd10cm(&src.id, &bytes, groups.as_ref()).map_err(data)?
            }
            TaxonomyFormat::Icd10pcs => Taxonomy::parse_icd10pcs(&src.id, &bytes).map_err(data)?,
            TaxonomyFormat::Tsv => {
                let text = String::from_utf8(bytes)
                    .map_err(|_| ServiceError::Data(format!("{} is not UTF-8", src.path.display())))?;
                Taxonomy::parse_tsv(&src.id, &text).map_err(data)?
            }
        };
        log::info!("loaded taxonomy {} ({} concepts)", src.id, t.len());
        taxonomies.push(t);
    }
    let mut logs = Vec::with_capacity(cfg.logs.len());
    for src in &cfg.logs {
        let file = std::fs::File::open(&src.path).map_err(|e| ServiceError::io(&src.path, e))?;
        let log = EventLog::read_json(std::io::BufReader::new(file))
            .map_err(|e| ServiceError::Data(format!("{}: {e}", src.path.display())))?;
        logs.push(log);
    }
    Ok((taxonomies, logs))
}
