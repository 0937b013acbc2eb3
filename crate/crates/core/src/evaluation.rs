//! Leave-one-out evaluation with prefix expansion, the average similarity
//! metric and one-sided significance tests.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::eventlog::{stats, EventLog, LogError, END};
use crate::predictor::{Mode, PredictError, PredictOptions, Predictor};
use crate::similarity::{SimilarityConfig, Taxonomies, Variant};
use crate::taxonomy::{SimilarityFn, Taxonomy};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("leave-one-out needs at least 2 cases, the log has {0}")]
    LogTooSmall(usize),
    #[error("no evaluation records")]
    EmptyRecords,
    #[error("sample lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("at least 2 samples required, got {0}")]
    TooFewSamples(usize),
    #[error("records are not paired on (case_id, prefix_len)")]
    Unpaired,
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

/// Outcome of one prefix instance for one predictor variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub log_id: String,
    pub case_id: String,
    pub prefix_len: usize,
    pub true_next: String,
    pub predicted: Vec<String>,
    pub max_sim: f64,
    pub variant: Variant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub n: usize,
    pub mode: Mode,
    pub neighbors: Option<usize>,
    pub variants: Vec<Variant>,
    /// Average per trace first, then over traces.
    pub per_trace: bool,
    pub welch: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            n: 5,
            mode: Mode::ScoreSum,
            neighbors: None,
            variants: vec![Variant::Taxonomic, Variant::Boolean],
            per_trace: false,
            welch: false,
        }
    }
}

impl EvalOptions {
    fn predict_options(&self) -> PredictOptions {
        PredictOptions {
            n: self.n,
            mode: self.mode,
            neighbors: self.neighbors,
        }
    }
}

/// Best similarity between the true next activity and any prediction.
/// END only matches END; an empty prediction scores 0.
pub fn max_sim(procedures: &Taxonomy, kind: SimilarityFn, true_next: &str, predicted: &[String]) -> f64 {
    let truth = if true_next == END { None } else { procedures.node(true_next).ok() };
    predicted
        .iter()
        .map(|p| {
            if p == true_next {
                return 1.0;
            }
            match (truth, p.as_str()) {
                (None, _) | (_, END) => 0.0,
                (Some(t), code) => procedures
                    .node(code)
                    .map_or(0.0, |c| procedures.similarity(kind, t, c)),
            }
        })
        .fold(0.0, f64::max)
}

/// LOO records for the predictor's configuration. Each case is held out
/// and every proper prefix `1..|events|` is predicted from the rest.
pub fn loo_records(predictor: &Predictor<'_>, variant: Variant, opts: &EvalOptions) -> Result<Vec<EvalRecord>> {
    let log = predictor.log();
    if log.cases.len() < 2 {
        return Err(EvalError::LogTooSmall(log.cases.len()));
    }
    let procedures = predictor.taxonomies().procedures;
    let popts = opts.predict_options();
    let folds = (0..log.cases.len())
        .into_par_iter()
        .map(|i| {
            let case = &log.cases[i];
            let full = predictor.resolved(i);
            (1..case.events.len())
                .map(|k| {
                    let (cands, _) = predictor.predict_resolved(&full.prefix(k), &popts, Some(i))?;
                    let predicted: Vec<String> = cands.into_iter().map(|c| c.activity).collect();
                    let true_next = case.events[k].code.clone();
                    Ok(EvalRecord {
                        log_id: log.id.clone(),
                        case_id: case.case_id.clone(),
                        prefix_len: k,
                        max_sim: max_sim(procedures, SimilarityFn::Sanchez, &true_next, &predicted),
                        true_next,
                        predicted,
                        variant,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(folds.into_iter().flatten().collect())
}

/// Paired T and B records over the same folds and prefixes.
pub fn loo_evaluate(
    log: &EventLog,
    tax: Taxonomies<'_>,
    cfg_t: SimilarityConfig,
    cfg_b: SimilarityConfig,
    opts: &EvalOptions,
) -> Result<(Vec<EvalRecord>, Vec<EvalRecord>)> {
    let pt = Predictor::new(log, tax, cfg_t)?;
    let pb = pt.with_config(cfg_b)?;
    Ok((
        loo_records(&pt, Variant::Taxonomic, opts)?,
        loo_records(&pb, Variant::Boolean, opts)?,
    ))
}

/// Mean `max_sim` over prefix instances.
pub fn average_similarity(records: &[EvalRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(EvalError::EmptyRecords);
    }
    Ok(records.iter().map(|r| r.max_sim).sum::<f64>() / records.len() as f64)
}

/// Mean over cases of each case's mean `max_sim`.
pub fn average_similarity_per_trace(records: &[EvalRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(EvalError::EmptyRecords);
    }
    let mut by_case: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = by_case.entry(&r.case_id).or_default();
        e.0 += r.max_sim;
        e.1 += 1;
    }
    Ok(by_case.values().map(|(s, c)| s / *c as f64).sum::<f64>() / by_case.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

fn upper_tail(statistic: f64, df: f64, mean_diff: f64, se: f64) -> TTest {
    if se == 0.0 || !se.is_finite() {
        // no spread: all evidence or none
        let p_value = if mean_diff > 0.0 { 0.0 } else { 1.0 };
        let statistic = if mean_diff > 0.0 {
            f64::INFINITY
        } else if mean_diff < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        };
        return TTest { statistic, df, p_value };
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    TTest {
        statistic,
        df,
        p_value: dist.sf(statistic).clamp(0.0, 1.0),
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Paired t-test of `mean(t - b) > 0`.
pub fn one_sided_paired_t_test(t: &[f64], b: &[f64]) -> Result<TTest> {
    if t.len() != b.len() {
        return Err(EvalError::LengthMismatch(t.len(), b.len()));
    }
    if t.len() < 2 {
        return Err(EvalError::TooFewSamples(t.len()));
    }
    let d: Vec<f64> = t.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, var) = mean_var(&d);
    let se = (var / d.len() as f64).sqrt();
    Ok(upper_tail(mean / se, (d.len() - 1) as f64, mean, se))
}

/// Welch (unequal variance, unpaired) t-test of `mean(t) > mean(b)`.
pub fn one_sided_welch_t_test(t: &[f64], b: &[f64]) -> Result<TTest> {
    if t.len() < 2 || b.len() < 2 {
        return Err(EvalError::TooFewSamples(t.len().min(b.len())));
    }
    let (mt, vt) = mean_var(t);
    let (mb, vb) = mean_var(b);
    let (qt, qb) = (vt / t.len() as f64, vb / b.len() as f64);
    let se = (qt + qb).sqrt();
    let df = (qt + qb).powi(2) / (qt.powi(2) / (t.len() - 1) as f64 + qb.powi(2) / (b.len() - 1) as f64);
    Ok(upper_tail((mt - mb) / se, df, mt - mb, se))
}

/// `(max_sim_T, max_sim_B)` pairs in the order of `records_t`.
pub fn pair(records_t: &[EvalRecord], records_b: &[EvalRecord]) -> Result<Vec<(f64, f64)>> {
    if records_t.len() != records_b.len() {
        return Err(EvalError::Unpaired);
    }
    let b: HashMap<(&str, usize), f64> = records_b
        .iter()
        .map(|r| ((r.case_id.as_str(), r.prefix_len), r.max_sim))
        .collect();
    if b.len() != records_b.len() {
        return Err(EvalError::Unpaired);
    }
    records_t
        .iter()
        .map(|r| {
            b.get(&(r.case_id.as_str(), r.prefix_len))
                .map(|&sb| (r.max_sim, sb))
                .ok_or(EvalError::Unpaired)
        })
        .collect()
}

fn p_value(pairs: &[(f64, f64)], welch: bool) -> Result<Option<f64>> {
    if pairs.len() < 2 {
        return Ok(None);
    }
    let (t, b): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let test = if welch {
        one_sided_welch_t_test(&t, &b)?
    } else {
        one_sided_paired_t_test(&t, &b)?
    };
    Ok(Some(test.p_value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixRow {
    pub prefix_len: usize,
    pub count: usize,
    pub avg_sim_b: Option<f64>,
    pub avg_sim_t: Option<f64>,
    pub p_value: Option<f64>,
}

fn group_by_prefix(records: &[EvalRecord]) -> BTreeMap<usize, Vec<EvalRecord>> {
    let mut groups: BTreeMap<usize, Vec<EvalRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.prefix_len).or_default().push(r.clone());
    }
    groups
}

/// Per prefix length: instance count, mean `max_sim` per variant and the
/// one-sided p-value when both variants are present. Either side may be
/// empty for single-variant runs.
pub fn per_prefix_analysis(records_t: &[EvalRecord], records_b: &[EvalRecord], welch: bool) -> Result<Vec<PrefixRow>> {
    let gt = group_by_prefix(records_t);
    let gb = group_by_prefix(records_b);
    let mut lens: Vec<usize> = gt.keys().chain(gb.keys()).copied().collect();
    lens.sort_unstable();
    lens.dedup();
    lens.into_iter()
        .map(|k| {
            let t = gt.get(&k).map(Vec::as_slice).unwrap_or_default();
            let b = gb.get(&k).map(Vec::as_slice).unwrap_or_default();
            let avg = |r: &[EvalRecord]| if r.is_empty() { None } else { average_similarity(r).ok() };
            let p = if !t.is_empty() && !b.is_empty() {
                p_value(&pair(t, b)?, welch)?
            } else {
                None
            };
            Ok(PrefixRow {
                prefix_len: k,
                count: t.len().max(b.len()),
                avg_sim_b: avg(b),
                avg_sim_t: avg(t),
                p_value: p,
            })
        })
        .collect()
}

/// One row of the per-log results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub log_id: String,
    pub n_traces: usize,
    pub mean_trace_length: f64,
    pub std_trace_length: f64,
    pub avg_sim_b: Option<f64>,
    pub avg_sim_t: Option<f64>,
    pub n_variants: usize,
    pub n_unique_events: usize,
    pub n_unique_diagnoses: usize,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixTable {
    pub log_id: String,
    pub rows: Vec<PrefixRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub variants: Vec<Variant>,
    pub logs: Vec<LogRow>,
    pub prefixes: Vec<PrefixTable>,
}

/// Records of one log split by variant.
#[derive(Debug, Clone, Default)]
pub struct LogRecords {
    pub t: Vec<EvalRecord>,
    pub b: Vec<EvalRecord>,
}

/// Runs the configured variants on one log.
pub fn evaluate_log(log: &EventLog, tax: Taxonomies<'_>, opts: &EvalOptions) -> Result<LogRecords> {
    let base = Predictor::new(log, tax, Variant::Taxonomic.config())?;
    let mut out = LogRecords::default();
    for &v in &opts.variants {
        let p = base.with_config(v.config())?;
        let records = loo_records(&p, v, opts)?;
        match v {
            Variant::Taxonomic => out.t = records,
            Variant::Boolean => out.b = records,
        }
    }
    Ok(out)
}

pub fn log_row(log: &EventLog, records: &LogRecords, opts: &EvalOptions) -> Result<LogRow> {
    let s = stats(log)?;
    let avg = |r: &[EvalRecord]| -> Result<Option<f64>> {
        if r.is_empty() {
            Ok(None)
        } else if opts.per_trace {
            average_similarity_per_trace(r).map(Some)
        } else {
            average_similarity(r).map(Some)
        }
    };
    let p = if records.t.is_empty() || records.b.is_empty() {
        None
    } else {
        p_value(&pair(&records.t, &records.b)?, opts.welch)?
    };
    Ok(LogRow {
        log_id: log.id.clone(),
        n_traces: s.n_traces,
        mean_trace_length: s.mean_trace_length,
        std_trace_length: s.std_trace_length,
        avg_sim_b: avg(&records.b)?,
        avg_sim_t: avg(&records.t)?,
        n_variants: s.n_trace_variants,
        n_unique_events: s.n_unique_events,
        n_unique_diagnoses: s.n_unique_diagnoses,
        p_value: p,
    })
}

impl EvalReport {
    pub fn new(n: usize, variants: Vec<Variant>) -> Self {
        Self {
            n,
            variants,
            logs: Vec::new(),
            prefixes: Vec::new(),
        }
    }

    pub fn add(&mut self, log: &EventLog, records: &LogRecords, opts: &EvalOptions) -> Result<()> {
        self.logs.push(log_row(log, records, opts)?);
        self.prefixes.push(PrefixTable {
            log_id: log.id.clone(),
            rows: per_prefix_analysis(&records.t, &records.b, opts.welch)?,
        });
        Ok(())
    }

    fn has(&self, v: Variant) -> bool {
        self.variants.contains(&v)
    }

    fn paired(&self) -> bool {
        self.has(Variant::Taxonomic) && self.has(Variant::Boolean)
    }

    pub fn log_columns(&self) -> Vec<&'static str> {
        let mut cols = vec!["log_id", "n_traces", "mean_trace_length", "std_trace_length"];
        if self.has(Variant::Boolean) {
            cols.push("avg_sim_B");
        }
        if self.has(Variant::Taxonomic) {
            cols.push("avg_sim_T");
        }
        cols.extend(["n_variants", "n_unique_events", "n_unique_diagnoses"]);
        if self.paired() {
            cols.push("p_value");
        }
        cols
    }

    pub fn prefix_columns(&self) -> Vec<&'static str> {
        let mut cols = vec!["log_id", "prefix_len", "count"];
        if self.has(Variant::Boolean) {
            cols.push("avg_sim_B");
        }
        if self.has(Variant::Taxonomic) {
            cols.push("avg_sim_T");
        }
        if self.paired() {
            cols.push("p_value");
        }
        cols
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.log_columns())?;
        for r in &self.logs {
            let mut rec = vec![
                r.log_id.clone(),
                r.n_traces.to_string(),
                r.mean_trace_length.to_string(),
                r.std_trace_length.to_string(),
            ];
            if self.has(Variant::Boolean) {
                rec.push(opt(r.avg_sim_b));
            }
            if self.has(Variant::Taxonomic) {
                rec.push(opt(r.avg_sim_t));
            }
            rec.extend([
                r.n_variants.to_string(),
                r.n_unique_events.to_string(),
                r.n_unique_diagnoses.to_string(),
            ]);
            if self.paired() {
                rec.push(opt(r.p_value));
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_prefix_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.prefix_columns())?;
        for table in &self.prefixes {
            for r in &table.rows {
                let mut rec = vec![table.log_id.clone(), r.prefix_len.to_string(), r.count.to_string()];
                if self.has(Variant::Boolean) {
                    rec.push(opt(r.avg_sim_b));
                }
                if self.has(Variant::Taxonomic) {
                    rec.push(opt(r.avg_sim_t));
                }
                if self.paired() {
                    rec.push(opt(r.p_value));
                }
                out.write_record(&rec)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// JSON with the same columns as the CSV tables.
    pub fn to_json(&self) -> Result<String> {
        let table = |cols: Vec<&'static str>, rows: Vec<Vec<serde_json::Value>>| -> serde_json::Value {
            rows.into_iter()
                .map(|r| {
                    cols.iter()
                        .map(|c| c.to_string())
                        .zip(r)
                        .collect::<serde_json::Map<_, _>>()
                        .into()
                })
                .collect::<Vec<serde_json::Value>>()
                .into()
        };
        let mut csv_logs = Vec::new();
        self.write_csv(&mut csv_logs)?;
        let mut csv_prefix = Vec::new();
        self.write_prefix_csv(&mut csv_prefix)?;
        let rows = |bytes: &[u8]| -> Result<Vec<Vec<serde_json::Value>>> {
            let mut rdr = csv::Reader::from_reader(bytes);
            rdr.records()
                .map(|r| Ok(r?.iter().map(json_cell).collect()))
                .collect()
        };
        let value = serde_json::json!({
            "n": self.n,
            "variants": self.variants,
            "logs": table(self.log_columns(), rows(&csv_logs)?),
            "prefixes": table(self.prefix_columns(), rows(&csv_prefix)?),
        });
        Ok(serde_json::to_string_pretty(&value)?)
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn json_cell(s: &str) -> serde_json::Value {
    if s.is_empty() {
        return serde_json::Value::Null;
    }
    if let Ok(i) = s.parse::<u64>() {
        return i.into();
    }
    match s.parse::<f64>() {
        Ok(f) => serde_json::Number::from_f64(f).map_or_else(|| s.into(), serde_json::Value::Number),
        Err(_) => s.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::tests::case_with;

    fn t0() -> Taxonomy {
        Taxonomy::from_edges("t0", [("A", "R"), ("B", "R"), ("A1", "A"), ("A2", "A"), ("B1", "B")]).unwrap()
    }

    fn log(cases: Vec<crate::eventlog::Case>) -> EventLog {
        EventLog {
            id: "toy".into(),
            diagnosis_taxonomy: "t0".into(),
            procedure_taxonomy: "t0".into(),
            cases,
        }
    }

    fn rec(case: &str, k: usize, max_sim: f64, variant: Variant) -> EvalRecord {
        EvalRecord {
            log_id: "toy".into(),
            case_id: case.into(),
            prefix_len: k,
            true_next: "A1".into(),
            predicted: vec![],
            max_sim,
            variant,
        }
    }

    #[test]
    fn max_sim_cases() {
        let t = t0();
        let s = |truth: &str, pred: &[&str]| {
            let pred: Vec<String> = pred.iter().map(|p| p.to_string()).collect();
            max_sim(&t, SimilarityFn::Sanchez, truth, &pred)
        };
        assert_eq!(s("A1", &["B1", "A1"]), 1.0);
        assert_eq!(s("A1", &[]), 0.0);
        assert_eq!(s("A1", &["B1"]), 0.0);
        assert!((s("A1", &["A2", "B1"]) - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
        assert_eq!(s("END", &["A1", "END"]), 1.0);
        assert_eq!(s("END", &["A1"]), 0.0);
        assert_eq!(s("A1", &["END"]), 0.0);
    }

    #[test]
    fn two_case_log_record_count() {
        let t = t0();
        let l = log(vec![case_with("a", &["A1", "B1"], &["A1"]), case_with("b", &["A1", "A2"], &["A1"])]);
        let (rt, rb) = loo_evaluate(
            &l,
            Taxonomies::new(&t, &t),
            Variant::Taxonomic.config(),
            Variant::Boolean.config(),
            &EvalOptions::default(),
        )
        .unwrap();
        assert_eq!(rt.len(), 4);
        assert_eq!(rb.len(), 4);
        pair(&rt, &rb).unwrap();
        // prefix [A1] of a: b proposes A2, unrelated to the true B1
        let r = &rt[0];
        assert_eq!((r.case_id.as_str(), r.prefix_len, r.true_next.as_str()), ("a", 1, "B1"));
        assert_eq!(r.predicted, vec!["A2"]);
        assert_eq!(r.max_sim, 0.0);
        // prefix [A1, B1] of a: b's END is predicted and matches
        assert_eq!(rt[1].predicted, vec!["END"]);
        assert_eq!(rt[1].max_sim, 1.0);
    }

    #[test]
    fn log_too_small() {
        let t = t0();
        let l = log(vec![case_with("a", &["A1"], &["A1"])]);
        let err = loo_evaluate(
            &l,
            Taxonomies::new(&t, &t),
            Variant::Taxonomic.config(),
            Variant::Boolean.config(),
            &EvalOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::LogTooSmall(1)));
    }

    #[test]
    fn empty_pool_scores_zero() {
        let t = t0();
        let l = log(vec![
            case_with("long", &["A1", "A1", "A1"], &["A1"]),
            case_with("short", &["A1"], &["A1"]),
        ]);
        let p = Predictor::new(&l, Taxonomies::new(&t, &t), SimilarityConfig::default()).unwrap();
        let r = loo_records(&p, Variant::Taxonomic, &EvalOptions::default()).unwrap();
        let deep = r.iter().find(|r| r.case_id == "long" && r.prefix_len == 3).unwrap();
        assert!(deep.predicted.is_empty());
        assert_eq!(deep.max_sim, 0.0);
    }

    #[test]
    fn averages() {
        let r = vec![rec("a", 1, 1.0, Variant::Taxonomic), rec("a", 2, 0.5, Variant::Taxonomic)];
        assert_eq!(average_similarity(&r).unwrap(), 0.75);
        assert!(matches!(average_similarity(&[]), Err(EvalError::EmptyRecords)));
        let r = vec![
            rec("a", 1, 1.0, Variant::Taxonomic),
            rec("a", 2, 1.0, Variant::Taxonomic),
            rec("a", 3, 1.0, Variant::Taxonomic),
            rec("b", 1, 0.0, Variant::Taxonomic),
        ];
        assert_eq!(average_similarity(&r).unwrap(), 0.75);
        assert_eq!(average_similarity_per_trace(&r).unwrap(), 0.5);
    }

    #[test]
    fn t_test_conventions() {
        let b = [0.2, 0.3, 0.4, 0.5, 0.6];
        let t: Vec<f64> = b.iter().map(|x| x + 0.125).collect();
        assert_eq!(one_sided_paired_t_test(&t, &b).unwrap().p_value, 0.0);
        assert_eq!(one_sided_paired_t_test(&b, &b).unwrap().p_value, 1.0);
        assert!(matches!(one_sided_paired_t_test(&b[..2], &b), Err(EvalError::LengthMismatch(2, 5))));
        assert!(matches!(one_sided_paired_t_test(&b[..1], &b[..1]), Err(EvalError::TooFewSamples(1))));
    }

    #[test]
    fn t_test_reference_values() {
        // scipy.stats.ttest_rel(t, b, alternative="greater")
        let t = [0.9, 0.8, 0.75, 0.6, 0.95];
        let b = [0.7, 0.85, 0.5, 0.55, 0.9];
        let r = one_sided_paired_t_test(&t, &b).unwrap();
        assert!((r.statistic - 1.8257418583505538).abs() < 1e-9, "{}", r.statistic);
        assert!((r.p_value - 0.07096372388702771).abs() < 1e-9, "{}", r.p_value);
        // scipy.stats.ttest_ind(t, b, equal_var=False, alternative="greater")
        let w = one_sided_welch_t_test(&t, &b).unwrap();
        assert!((w.statistic - 1.0000000000000009).abs() < 1e-9, "{}", w.statistic);
        assert!((w.p_value - 0.1741793133787346).abs() < 1e-9, "{}", w.p_value);
    }

    #[test]
    fn prefix_rows() {
        let mut t = Vec::new();
        let mut b = Vec::new();
        for i in 0..10 {
            t.push(rec(&format!("c{i}"), 1, 0.8 + 0.01 * i as f64, Variant::Taxonomic));
            b.push(rec(&format!("c{i}"), 1, 0.5, Variant::Boolean));
        }
        for i in 0..4 {
            t.push(rec(&format!("c{i}"), 2, 0.5, Variant::Taxonomic));
            b.push(rec(&format!("c{i}"), 2, 0.5, Variant::Boolean));
        }
        let rows = per_prefix_analysis(&t, &b, false).unwrap();
        assert_eq!(rows.iter().map(|r| (r.prefix_len, r.count)).collect::<Vec<_>>(), vec![(1, 10), (2, 4)]);
        assert!(rows[0].p_value.unwrap() < 1e-6);
        assert_eq!(rows[1].p_value, Some(1.0));
        let only_t = per_prefix_analysis(&t, &[], false).unwrap();
        assert!(only_t.iter().all(|r| r.avg_sim_b.is_none() && r.p_value.is_none()));
    }

    #[test]
    fn unpaired_records_rejected() {
        let t = vec![rec("a", 1, 1.0, Variant::Taxonomic)];
        let b = vec![rec("a", 2, 1.0, Variant::Boolean)];
        assert!(matches!(pair(&t, &b), Err(EvalError::Unpaired)));
    }

    #[test]
    fn report_columns() {
        let both = EvalReport::new(5, vec![Variant::Taxonomic, Variant::Boolean]);
        assert_eq!(
            both.log_columns(),
            vec![
                "log_id",
                "n_traces",
                "mean_trace_length",
                "std_trace_length",
                "avg_sim_B",
                "avg_sim_T",
                "n_variants",
                "n_unique_events",
                "n_unique_diagnoses",
                "p_value"
            ]
        );
        let t_only = EvalReport::new(5, vec![Variant::Taxonomic]);
        assert!(!t_only.log_columns().contains(&"avg_sim_B"));
        assert!(!t_only.log_columns().contains(&"p_value"));
        assert_eq!(t_only.prefix_columns(), vec!["log_id", "prefix_len", "count", "avg_sim_T"]);
    }

    #[test]
    fn report_round_trip_to_json() {
        let t = t0();
        let l = log(vec![
            case_with("a", &["A1", "B1"], &["A1"]),
            case_with("b", &["A1", "A2"], &["A1"]),
            case_with("c", &["A2", "B1", "A1"], &["A2"]),
        ]);
        let opts = EvalOptions::default();
        let recs = evaluate_log(&l, Taxonomies::new(&t, &t), &opts).unwrap();
        let mut report = EvalReport::new(opts.n, opts.variants.clone());
        report.add(&l, &recs, &opts).unwrap();
        let mut csv_out = Vec::new();
        report.write_csv(&mut csv_out).unwrap();
        let text = String::from_utf8(csv_out).unwrap();
        assert!(text.starts_with("log_id,n_traces,mean_trace_length"));
        assert!(text.lines().nth(1).unwrap().starts_with("toy,3,"));
        let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(json["logs"][0]["n_traces"], 3);
        assert_eq!(json["logs"][0]["log_id"], "toy");
        assert!(json["prefixes"].as_array().unwrap().len() >= 2);
    }
}
