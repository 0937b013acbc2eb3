//! Retrieval-based next-activity prediction over one event log.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eventlog::{Diagnosis, EventLog};
use crate::similarity::{
    explain, sim_trace, Activity, ResolvedTrace, SimilarityBreakdown, SimilarityConfig, SimilarityError, Taxonomies,
    TraceScore,
};
use crate::taxonomy::TaxonomyError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("n must be at least 1")]
    InvalidN,
    #[error("the query needs at least one event")]
    EmptyQuery,
    #[error("the query needs at least one diagnosis")]
    EmptyDiagnoses,
    #[error("unknown case {0:?}")]
    UnknownCase(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

pub type Result<T, E = PredictError> = std::result::Result<T, E>;

/// How ranked cases are turned into candidate activities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Group cases by proposed next event and rank events by summed similarity.
    #[default]
    ScoreSum,
    /// Keep the best-ranked case per proposed event.
    DedupFirst,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ScoreSum => "score_sum",
            Mode::DedupFirst => "dedup_first",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "score_sum" => Ok(Mode::ScoreSum),
            "dedup_first" => Ok(Mode::DedupFirst),
            other => Err(format!("unknown mode {other:?}, expected score_sum or dedup_first")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictOptions {
    pub n: usize,
    pub mode: Mode,
    /// Aggregate only over the best `k` ranked cases. `None` uses the whole pool.
    pub neighbors: Option<usize>,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self {
            n: 5,
            mode: Mode::ScoreSum,
            neighbors: None,
        }
    }
}

/// A query in code form: diagnosis list plus observed procedure prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub diagnoses: Vec<Diagnosis>,
    pub events: Vec<String>,
}

impl Query {
    /// Stable hex digest of the query content.
    pub fn fingerprint(&self, log_id: &str) -> String {
        let mut h = Sha256::new();
        h.update(log_id.as_bytes());
        for d in &self.diagnoses {
            h.update(format!("\x1fdx:{}:{}", d.code, d.seq).as_bytes());
        }
        for e in &self.events {
            h.update(format!("\x1fev:{e}").as_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// A pool case scored against the query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Supporter {
    pub case_id: String,
    pub sim_trace: f64,
    pub sim_list: f64,
    pub sim_cf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionCandidate {
    pub activity: String,
    pub score: f64,
    /// Sorted by rank, best first.
    pub supporting_cases: Vec<Supporter>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub query_fingerprint: String,
    pub mode: Mode,
    pub pool_size: usize,
    pub candidates: Vec<PredictionCandidate>,
}

/// One pool case and its score, in rank order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ranked {
    pub case: usize,
    pub score: TraceScore,
}

#[inline]
fn quantize(x: f64) -> i64 {
    (x * 1e12).round() as i64
}

pub struct Predictor<'a> {
    log: &'a EventLog,
    tax: Taxonomies<'a>,
    cfg: SimilarityConfig,
    cases: Vec<ResolvedTrace>,
}

impl<'a> Predictor<'a> {
    pub fn new(log: &'a EventLog, tax: Taxonomies<'a>, cfg: SimilarityConfig) -> Result<Self> {
        cfg.validate()?;
        let cases = log
            .cases
            .iter()
            .map(|c| tax.resolve_case(c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { log, tax, cfg, cases })
    }

    /// Same log and resolved cases under another similarity configuration.
    pub fn with_config(&self, cfg: SimilarityConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            log: self.log,
            tax: self.tax,
            cfg,
            cases: self.cases.clone(),
        })
    }

    pub fn log(&self) -> &'a EventLog {
        self.log
    }

    pub fn taxonomies(&self) -> Taxonomies<'a> {
        self.tax
    }

    pub fn config(&self) -> &SimilarityConfig {
        &self.cfg
    }

    pub fn resolved(&self, case: usize) -> &ResolvedTrace {
        &self.cases[case]
    }

    pub fn case_index(&self, case_id: &str) -> Option<usize> {
        self.log.cases.iter().position(|c| c.case_id == case_id)
    }

    pub fn resolve(&self, query: &Query) -> Result<ResolvedTrace> {
        let events: Vec<&str> = query.events.iter().map(String::as_str).collect();
        Ok(self.tax.resolve_query(&query.diagnoses, &events)?)
    }

    /// Indices of cases with at least `query_len + 1` events (END included).
    pub fn candidate_pool(&self, query_len: usize, exclude: Option<usize>) -> Vec<usize> {
        (0..self.cases.len())
            .filter(|&i| Some(i) != exclude && self.cases[i].events.len() > query_len)
            .collect()
    }

    /// Total order used for ranking: similarity, then list similarity,
    /// control-flow similarity, newer admission and smaller case id.
    pub fn tie_break(&self, a: &Ranked, b: &Ranked) -> Ordering {
        quantize(b.score.sim_trace)
            .cmp(&quantize(a.score.sim_trace))
            .then_with(|| quantize(b.score.sim_list).cmp(&quantize(a.score.sim_list)))
            .then_with(|| quantize(b.score.sim_cf).cmp(&quantize(a.score.sim_cf)))
            .then_with(|| self.log.cases[b.case].admit_time.cmp(&self.log.cases[a.case].admit_time))
            .then_with(|| self.log.cases[a.case].case_id.cmp(&self.log.cases[b.case].case_id))
    }

    /// Scores every pool case and sorts by [`Self::tie_break`]. Cases with
    /// zero similarity carry no evidence and are left out.
    pub fn rank(&self, query: &ResolvedTrace, exclude: Option<usize>) -> Result<Vec<Ranked>> {
        if query.events.is_empty() {
            return Err(PredictError::EmptyQuery);
        }
        if query.diagnoses.is_empty() {
            return Err(PredictError::EmptyDiagnoses);
        }
        let pool = self.candidate_pool(query.events.len(), exclude);
        let scored = pool
            .par_iter()
            .map(|&i| {
                sim_trace(query, &self.cases[i], &self.cfg, &self.tax).map(|score| Ranked { case: i, score })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut ranked: Vec<Ranked> = scored.into_iter().filter(|r| r.score.sim_trace > 0.0).collect();
        ranked.sort_by(|a, b| self.tie_break(a, b));
        Ok(ranked)
    }

    fn supporter(&self, r: &Ranked) -> Supporter {
        Supporter {
            case_id: self.log.cases[r.case].case_id.clone(),
            sim_trace: r.score.sim_trace,
            sim_list: r.score.sim_list,
            sim_cf: r.score.sim_cf,
        }
    }

    /// Candidates for a resolved query; returns them with the pool size.
    pub fn predict_resolved(
        &self,
        query: &ResolvedTrace,
        opts: &PredictOptions,
        exclude: Option<usize>,
    ) -> Result<(Vec<PredictionCandidate>, usize)> {
        if opts.n == 0 {
            return Err(PredictError::InvalidN);
        }
        let pool_size = self.candidate_pool(query.events.len(), exclude).len();
        let mut ranked = self.rank(query, exclude)?;
        if let Some(k) = opts.neighbors {
            ranked.truncate(k);
        }
        let k = query.events.len();
        let next = |r: &Ranked| -> Activity { self.cases[r.case].events[k].0 };
        let mut candidates: Vec<PredictionCandidate> = Vec::new();
        match opts.mode {
            Mode::DedupFirst => {
                let mut seen: HashMap<Activity, ()> = HashMap::new();
                for r in &ranked {
                    if candidates.len() == opts.n {
                        break;
                    }
                    if seen.insert(next(r), ()).is_none() {
                        candidates.push(PredictionCandidate {
                            activity: self.tax.activity_code(next(r)).to_string(),
                            score: r.score.sim_trace,
                            supporting_cases: vec![self.supporter(r)],
                        });
                    }
                }
            }
            Mode::ScoreSum => {
                let mut slot: HashMap<Activity, usize> = HashMap::new();
                for r in &ranked {
                    let i = *slot.entry(next(r)).or_insert_with(|| {
                        candidates.push(PredictionCandidate {
                            activity: self.tax.activity_code(next(r)).to_string(),
                            score: 0.0,
                            supporting_cases: Vec::new(),
                        });
                        candidates.len() - 1
                    });
                    candidates[i].score += r.score.sim_trace;
                    candidates[i].supporting_cases.push(self.supporter(r));
                }
                // stable: equal scores keep the order of their best supporters
                candidates.sort_by_key(|c| std::cmp::Reverse(quantize(c.score)));
                candidates.truncate(opts.n);
            }
        }
        Ok((candidates, pool_size))
    }

    /// Predicts from code-level input. `exclude_case` removes one case from
    /// the pool.
    pub fn predict(
        &self,
        query: &Query,
        opts: &PredictOptions,
        exclude_case: Option<&str>,
    ) -> Result<PredictionResult> {
        let exclude = match exclude_case {
            Some(id) => Some(self.case_index(id).ok_or_else(|| PredictError::UnknownCase(id.to_string()))?),
            None => None,
        };
        let resolved = self.resolve(query)?;
        let (candidates, pool_size) = self.predict_resolved(&resolved, opts, exclude)?;
        Ok(PredictionResult {
            query_fingerprint: query.fingerprint(&self.log.id),
            mode: opts.mode,
            pool_size,
            candidates,
        })
    }

    /// Full breakdown of the query against one case.
    pub fn explain(&self, query: &ResolvedTrace, case: usize) -> Result<SimilarityBreakdown> {
        Ok(explain(query, &self.cases[case], &self.cfg, &self.tax)?)
    }
}
