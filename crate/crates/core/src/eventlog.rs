//! Event-log data model, record ingestion and per-category log construction.
//!
//! A [`Case`] carries an ordered procedure trace that always terminates in
//! the artificial [`END`] event, plus a priority-ordered diagnosis list
//! (seq 1 is the primary diagnosis). Logs group cases by the 3-character
//! category of their primary diagnosis.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::Taxonomy;

/// Activity code of the artificial end-of-trace event.
pub const END: &str = "END";

/// Default diagnosis-list length (primary + nine secondaries).
pub const MAX_DIAGNOSES: u32 = 10;

/// Default minimum number of cases for a category to produce a log.
pub const DEFAULT_MIN_CASES: usize = 500;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("csv input, line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("case {0:?} has no primary diagnosis (seq_num 1)")]
    MissingPrimaryDiagnosis(String),
    #[error("unknown code {code:?} in case {case_id:?}")]
    UnknownCode { case_id: String, code: String },
    #[error("trace of case {case_id:?} has {len} events, need at least 2")]
    TraceTooShort { case_id: String, len: usize },
    #[error("event log is empty")]
    EmptyLog,
    #[error("invalid case {case_id:?}: {reason}")]
    InvalidCase { case_id: String, reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = LogError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub code: String,
    pub seq: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub code: String,
    pub ts: NaiveDateTime,
    pub seq: u32,
}

impl Event {
    pub fn is_end(&self) -> bool {
        self.code == END
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Case {
    pub case_id: String,
    pub admit_time: NaiveDateTime,
    pub diagnoses: Vec<Diagnosis>,
    pub events: Vec<Event>,
}

impl Case {
    /// Identifier of the `k`-th event (0-based), unique across a log.
    pub fn event_id(&self, k: usize) -> String {
        format!("{}#{}", self.case_id, k + 1)
    }

    /// Number of procedure events, END excluded.
    pub fn trace_len(&self) -> usize {
        self.events.iter().filter(|e| !e.is_end()).count()
    }

    pub fn primary_diagnosis(&self) -> Option<&Diagnosis> {
        self.diagnoses.iter().find(|d| d.seq == 1)
    }

    /// Checks the structural invariants of a complete case.
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| LogError::InvalidCase {
            case_id: self.case_id.clone(),
            reason: reason.to_string(),
        };
        match self.events.last() {
            None => return Err(invalid("empty trace")),
            Some(last) if !last.is_end() => return Err(invalid("trace does not end with END")),
            _ => {}
        }
        if self.events[..self.events.len() - 1].iter().any(Event::is_end) {
            return Err(invalid("END inside the trace"));
        }
        if self.events.windows(2).any(|w| (w[0].ts, w[0].seq) >= (w[1].ts, w[1].seq)) {
            return Err(invalid("events not strictly ordered by (timestamp, seq)"));
        }
        if self.primary_diagnosis().is_none() {
            return Err(LogError::MissingPrimaryDiagnosis(self.case_id.clone()));
        }
        if self.diagnoses.len() > MAX_DIAGNOSES as usize
            || self.diagnoses.iter().any(|d| d.seq == 0 || d.seq > MAX_DIAGNOSES)
        {
            return Err(invalid("diagnosis seq outside 1..=10"));
        }
        if self.diagnoses.windows(2).any(|w| w[0].seq >= w[1].seq) {
            return Err(invalid("diagnoses not strictly ordered by seq"));
        }
        Ok(())
    }
}

/// Cases sharing one primary-diagnosis category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub id: String,
    pub diagnosis_taxonomy: String,
    pub procedure_taxonomy: String,
    pub cases: Vec<Case>,
}

impl EventLog {
    pub fn from_json(text: &str) -> Result<Self> {
        let log: EventLog = serde_json::from_str(text)?;
        log.validate()?;
        Ok(log)
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        let log: EventLog = serde_json::from_reader(reader)?;
        log.validate()?;
        Ok(log)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::with_capacity(self.cases.len());
        for case in &self.cases {
            if !ids.insert(case.case_id.as_str()) {
                return Err(LogError::InvalidCase {
                    case_id: case.case_id.clone(),
                    reason: "duplicate case id".into(),
                });
            }
            case.validate()?;
        }
        Ok(())
    }

    /// Taxonomy an event code belongs to; END has its own sentinel.
    pub fn taxonomy_of<'a>(&'a self, event: &Event) -> &'a str {
        if event.is_end() {
            END
        } else {
            &self.procedure_taxonomy
        }
    }

    pub fn case(&self, case_id: &str) -> Option<&Case> {
        self.cases.iter().find(|c| c.case_id == case_id)
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }
}

/// 3-character category of a code.
pub fn category(code: &str) -> &str {
    match code.char_indices().nth(3) {
        Some((idx, _)) => &code[..idx],
        None => code,
    }
}

/// One `diagnoses` interchange row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisRecord {
    pub case_id: String,
    pub code: String,
    pub seq_num: u32,
}

/// One `procedures` interchange row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcedureRecord {
    pub case_id: String,
    pub code: String,
    #[serde(with = "iso_timestamp")]
    pub timestamp: NaiveDateTime,
    pub seq_num: u32,
}

/// Accepts RFC 3339, `YYYY-MM-DDTHH:MM:SS[.f]`, the same with a space, or a
/// bare date. Offsets are normalised to UTC.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .or_else(|| {
            NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
}

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format("%Y-%m-%dT%H:%M:%S%.f").to_string()
}

mod iso_timestamp {
    use chrono::NaiveDateTime;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_timestamp(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
        let raw = String::deserialize(d)?;
        super::parse_timestamp(&raw).ok_or_else(|| D::Error::custom(format!("unparseable timestamp {raw:?}")))
    }
}

fn csv_error(err: csv::Error) -> LogError {
    let line = err.position().map_or(0, |p| p.line());
    LogError::Csv {
        line,
        message: err.to_string(),
    }
}

fn read_csv<T, R>(reader: R, expected: &[&str]) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
{
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(LogError::Csv {
            line: 1,
            message: format!("expected header {:?}, found {:?}", expected.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    rdr.deserialize().map(|r| r.map_err(csv_error)).collect()
}

pub fn read_diagnoses_csv<R: Read>(reader: R) -> Result<Vec<DiagnosisRecord>> {
    read_csv(reader, &["case_id", "code", "seq_num"])
}

pub fn read_procedures_csv<R: Read>(reader: R) -> Result<Vec<ProcedureRecord>> {
    read_csv(reader, &["case_id", "code", "timestamp", "seq_num"])
}

fn write_csv<T: Serialize, W: Write>(records: &[T], header: &[&str], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(header).map_err(csv_error)?;
    for r in records {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_diagnoses_csv<W: Write>(records: &[DiagnosisRecord], writer: W) -> Result<()> {
    write_csv(records, &["case_id", "code", "seq_num"], writer)
}

pub fn write_procedures_csv<W: Write>(records: &[ProcedureRecord], writer: W) -> Result<()> {
    write_csv(records, &["case_id", "code", "timestamp", "seq_num"], writer)
}

/// What to do with a case that references a code missing from a taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownCodePolicy {
    #[default]
    Drop,
    Fail,
}

#[derive(Debug, Clone)]
pub struct BuildOptions<'a> {
    pub min_cases: usize,
    pub max_diagnoses: u32,
    pub diagnosis_taxonomy_id: String,
    pub procedure_taxonomy_id: String,
    /// When set, diagnosis codes are checked against this taxonomy.
    pub diagnosis_taxonomy: Option<&'a Taxonomy>,
    /// When set, procedure codes are checked against this taxonomy.
    pub procedure_taxonomy: Option<&'a Taxonomy>,
    pub on_unknown: UnknownCodePolicy,
}

impl Default for BuildOptions<'_> {
    fn default() -> Self {
        Self {
            min_cases: DEFAULT_MIN_CASES,
            max_diagnoses: MAX_DIAGNOSES,
            diagnosis_taxonomy_id: "icd10cm".into(),
            procedure_taxonomy_id: "icd10pcs".into(),
            diagnosis_taxonomy: None,
            procedure_taxonomy: None,
            on_unknown: UnknownCodePolicy::Drop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategorySummary {
    pub category: String,
    pub cases: usize,
    pub kept: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildSummary {
    pub input_cases: usize,
    pub dropped_no_procedures: usize,
    pub dropped_missing_primary: usize,
    pub dropped_unknown_code: usize,
    pub truncated_diagnoses: usize,
    pub categories: Vec<CategorySummary>,
}

#[derive(Debug, Clone)]
pub struct BuildOutcome {
    pub logs: BTreeMap<String, EventLog>,
    pub summary: BuildSummary,
}

/// Builds one event log per primary-diagnosis category.
///
/// Diagnoses beyond `max_diagnoses` are dropped, cases without procedures
/// or without a primary diagnosis are skipped, procedures are ordered by
/// `(timestamp, seq_num, code)` and an END event one second after the last
/// procedure closes every trace. Categories with fewer than `min_cases`
/// cases are discarded.
pub fn build_logs(
    diagnoses: &[DiagnosisRecord],
    procedures: &[ProcedureRecord],
    opts: &BuildOptions<'_>,
) -> Result<BuildOutcome> {
    let mut summary = BuildSummary::default();
    let mut dx_by_case: BTreeMap<&str, Vec<&DiagnosisRecord>> = BTreeMap::new();
    for d in diagnoses {
        dx_by_case.entry(d.case_id.as_str()).or_default().push(d);
    }
    let mut px_by_case: BTreeMap<&str, Vec<&ProcedureRecord>> = BTreeMap::new();
    for p in procedures {
        px_by_case.entry(p.case_id.as_str()).or_default().push(p);
    }
    let case_ids: Vec<&str> = {
        let mut ids: Vec<&str> = dx_by_case.keys().chain(px_by_case.keys()).copied().collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    summary.input_cases = case_ids.len();

    let mut by_category: BTreeMap<String, Vec<Case>> = BTreeMap::new();
    'cases: for case_id in case_ids {
        let Some(procs) = px_by_case.get(case_id) else {
            summary.dropped_no_procedures += 1;
            continue;
        };
        let mut dx: Vec<&DiagnosisRecord> = dx_by_case.get(case_id).cloned().unwrap_or_default();
        let before = dx.len();
        dx.retain(|d| d.seq_num >= 1 && d.seq_num <= opts.max_diagnoses);
        summary.truncated_diagnoses += before - dx.len();
        dx.sort_by_key(|d| d.seq_num);
        dx.dedup_by(|b, a| {
            let dup = a.seq_num == b.seq_num;
            if dup {
                log::warn!("case {case_id}: duplicate diagnosis seq_num {} ignored", b.seq_num);
            }
            dup
        });
        if dx.first().is_none_or(|d| d.seq_num != 1) {
            log::warn!("case {case_id}: no primary diagnosis, dropped");
            summary.dropped_missing_primary += 1;
            continue;
        }

        let checks = dx
            .iter()
            .map(|d| (opts.diagnosis_taxonomy, d.code.as_str()))
            .chain(procs.iter().map(|p| (opts.procedure_taxonomy, p.code.as_str())));
        for (tax, code) in checks {
            if tax.is_some_and(|t| !t.contains(code)) {
                match opts.on_unknown {
                    UnknownCodePolicy::Fail => {
                        return Err(LogError::UnknownCode {
                            case_id: case_id.to_string(),
                            code: code.to_string(),
                        })
                    }
                    UnknownCodePolicy::Drop => {
                        log::warn!("case {case_id}: unknown code {code}, dropped");
                        summary.dropped_unknown_code += 1;
                        continue 'cases;
                    }
                }
            }
        }

        let mut procs: Vec<&ProcedureRecord> = procs.clone();
        procs.sort_by(|a, b| {
            (a.timestamp, a.seq_num, &a.code).cmp(&(b.timestamp, b.seq_num, &b.code))
        });
        let mut events: Vec<Event> = Vec::with_capacity(procs.len() + 1);
        let mut seq = 0u32;
        for p in &procs {
            // keep (ts, seq) strictly increasing when seq_nums repeat
            seq = if events.last().is_some_and(|e: &Event| e.ts == p.timestamp) {
                p.seq_num.max(seq + 1)
            } else {
                p.seq_num
            };
            events.push(Event {
                code: p.code.clone(),
                ts: p.timestamp,
                seq,
            });
        }
        let last = events.last().expect("at least one procedure");
        let end = Event {
            code: END.to_string(),
            ts: last.ts + TimeDelta::seconds(1),
            seq: last.seq + 1,
        };
        events.push(end);

        let case = Case {
            case_id: case_id.to_string(),
            admit_time: events[0].ts,
            diagnoses: dx
                .iter()
                .map(|d| Diagnosis {
                    code: d.code.clone(),
                    seq: d.seq_num,
                })
                .collect(),
            events,
        };
        by_category
            .entry(category(&case.diagnoses[0].code).to_string())
            .or_default()
            .push(case);
    }

    let mut logs = BTreeMap::new();
    for (cat, cases) in by_category {
        let kept = cases.len() >= opts.min_cases;
        summary.categories.push(CategorySummary {
            category: cat.clone(),
            cases: cases.len(),
            kept,
        });
        if kept {
            logs.insert(
                cat.clone(),
                EventLog {
                    id: cat,
                    diagnosis_taxonomy: opts.diagnosis_taxonomy_id.clone(),
                    procedure_taxonomy: opts.procedure_taxonomy_id.clone(),
                    cases,
                },
            );
        }
    }
    Ok(BuildOutcome { logs, summary })
}

/// A proper, non-empty trace prefix and the event that follows it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrefixInstance<'a> {
    pub prefix: &'a [Event],
    pub target: &'a Event,
}

impl PrefixInstance<'_> {
    pub fn len(&self) -> usize {
        self.prefix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefix.is_empty()
    }
}

/// All `([e1..ek], e(k+1))` pairs for `k = 1..|trace|-1`.
pub fn prefixes(case: &Case) -> Result<Vec<PrefixInstance<'_>>> {
    if case.events.len() < 2 {
        return Err(LogError::TraceTooShort {
            case_id: case.case_id.clone(),
            len: case.events.len(),
        });
    }
    Ok((1..case.events.len())
        .map(|k| PrefixInstance {
            prefix: &case.events[..k],
            target: &case.events[k],
        })
        .collect())
}

/// Descriptive statistics of one log. Trace lengths exclude END and the
/// standard deviation is the population one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogStats {
    pub n_traces: usize,
    pub n_trace_variants: usize,
    pub n_unique_events: usize,
    pub n_unique_diagnoses: usize,
    pub mean_trace_length: f64,
    pub std_trace_length: f64,
}

pub fn stats(log: &EventLog) -> Result<LogStats> {
    if log.cases.is_empty() {
        return Err(LogError::EmptyLog);
    }
    let mut variants: HashSet<Vec<&str>> = HashSet::new();
    let mut events: HashSet<&str> = HashSet::new();
    let mut diagnoses: HashSet<&str> = HashSet::new();
    let mut lengths = Vec::with_capacity(log.cases.len());
    for case in &log.cases {
        let procs: Vec<&str> = case
            .events
            .iter()
            .filter(|e| !e.is_end())
            .map(|e| e.code.as_str())
            .collect();
        events.extend(procs.iter().copied());
        lengths.push(procs.len() as f64);
        variants.insert(procs);
        diagnoses.extend(case.diagnoses.iter().map(|d| d.code.as_str()));
    }
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<f64>() / n;
    let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
    Ok(LogStats {
        n_traces: log.cases.len(),
        n_trace_variants: variants.len(),
        n_unique_events: events.len(),
        n_unique_diagnoses: diagnoses.len(),
        mean_trace_length: mean,
        std_trace_length: var.sqrt(),
    })
}
