//! Trace similarity: diagnosis-list similarity, control-flow similarity and
//! their alpha-weighted combination.
//!
//! Both components normalise the maximum-weight matching by the length of
//! the *query* side, so they are asymmetric.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::{Case, Diagnosis, END};
use crate::matching::{max_weight_matching, Matching, MatchingError, WeightedBipartiteGraph};
use crate::taxonomy::{NodeId, SimilarityFn, Taxonomy, TaxonomyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimilarityError {
    #[error("control-flow similarity needs a non-empty query and candidate trace")]
    EmptySequence,
    #[error("list similarity needs non-empty query and candidate lists")]
    EmptyList,
    #[error("static alpha weights must lie in [0, 1] and sum to 1, got ({0}, {1})")]
    InvalidAlpha(f64, f64),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
}

pub type Result<T, E = SimilarityError> = std::result::Result<T, E>;

/// A control-flow item: a procedure concept or the END marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activity {
    Node(NodeId),
    End,
}

/// Which concept similarity a predictor variant uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Taxonomic similarity on both taxonomies.
    #[serde(rename = "T")]
    Taxonomic,
    /// Exact-match similarity on both taxonomies.
    #[serde(rename = "B")]
    Boolean,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Taxonomic => "T",
            Variant::Boolean => "B",
        }
    }

    pub fn config(self) -> SimilarityConfig {
        match self {
            Variant::Taxonomic => SimilarityConfig::default(),
            Variant::Boolean => SimilarityConfig {
                diagnosis_fn: SimilarityFn::Boolean,
                procedure_fn: SimilarityFn::Boolean,
                alpha: AlphaMode::Dynamic,
            },
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "T" | "t" => Ok(Variant::Taxonomic),
            "B" | "b" => Ok(Variant::Boolean),
            other => Err(format!("unknown variant {other:?}, expected T or B")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum AlphaMode {
    /// `alpha = (1/(L+1), L/(L+1))` for a query of `L` procedures.
    #[default]
    Dynamic,
    Static { list: f64, cf: f64 },
}

/// Weights of the list and control-flow components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alpha {
    pub list: f64,
    pub cf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub diagnosis_fn: SimilarityFn,
    pub procedure_fn: SimilarityFn,
    pub alpha: AlphaMode,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            diagnosis_fn: SimilarityFn::Sanchez,
            procedure_fn: SimilarityFn::Sanchez,
            alpha: AlphaMode::Dynamic,
        }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<()> {
        if let AlphaMode::Static { list, cf } = self.alpha {
            let in_range = (0.0..=1.0).contains(&list) && (0.0..=1.0).contains(&cf);
            if !in_range || (list + cf - 1.0).abs() > 1e-9 {
                return Err(SimilarityError::InvalidAlpha(list, cf));
            }
        }
        Ok(())
    }

    pub fn alpha(&self, trace_len: usize) -> Alpha {
        alpha_schedule(self.alpha, trace_len)
    }
}

pub fn alpha_schedule(mode: AlphaMode, trace_len: usize) -> Alpha {
    match mode {
        AlphaMode::Dynamic => {
            let l = trace_len as f64;
            Alpha {
                list: 1.0 / (l + 1.0),
                cf: l / (l + 1.0),
            }
        }
        AlphaMode::Static { list, cf } => Alpha { list, cf },
    }
}

/// `alpha.list * sim_list + alpha.cf * sim_cf`.
#[inline]
pub fn combine(sim_list: f64, sim_cf: f64, alpha: Alpha) -> f64 {
    alpha.list * sim_list + alpha.cf * sim_cf
}

/// Diagnosis and procedure taxonomies of one log.
#[derive(Debug, Clone, Copy)]
pub struct Taxonomies<'a> {
    pub diagnoses: &'a Taxonomy,
    pub procedures: &'a Taxonomy,
}

impl<'a> Taxonomies<'a> {
    pub fn new(diagnoses: &'a Taxonomy, procedures: &'a Taxonomy) -> Self {
        Self { diagnoses, procedures }
    }

    pub fn activity(&self, code: &str) -> Result<Activity, TaxonomyError> {
        if code == END {
            Ok(Activity::End)
        } else {
            self.procedures.node(code).map(Activity::Node)
        }
    }

    pub fn activity_code(&self, a: Activity) -> &'a str {
        match a {
            Activity::Node(n) => self.procedures.code(n),
            Activity::End => END,
        }
    }

    /// Resolves a query: events are positioned `1..=k`, diagnoses by seq.
    pub fn resolve_query(&self, diagnoses: &[Diagnosis], events: &[&str]) -> Result<ResolvedTrace, TaxonomyError> {
        let diagnoses = diagnoses
            .iter()
            .map(|d| Ok((self.diagnoses.node(&d.code)?, d.seq)))
            .collect::<Result<_, TaxonomyError>>()?;
        let events = events
            .iter()
            .zip(1u32..)
            .map(|(code, pos)| Ok((self.activity(code)?, pos)))
            .collect::<Result<_, TaxonomyError>>()?;
        Ok(ResolvedTrace { diagnoses, events })
    }

    pub fn resolve_case(&self, case: &Case) -> Result<ResolvedTrace, TaxonomyError> {
        let codes: Vec<&str> = case.events.iter().map(|e| e.code.as_str()).collect();
        self.resolve_query(&case.diagnoses, &codes)
    }

    pub fn activity_similarity(&self, kind: SimilarityFn, a: Activity, b: Activity) -> f64 {
        match (a, b) {
            (Activity::Node(x), Activity::Node(y)) => self.procedures.similarity(kind, x, y),
            (Activity::End, Activity::End) => 1.0,
            _ => 0.0,
        }
    }
}

/// Codes resolved to taxonomy nodes, each with its matching position.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedTrace {
    pub diagnoses: Vec<(NodeId, u32)>,
    pub events: Vec<(Activity, u32)>,
}

impl ResolvedTrace {
    /// The first `k` events with the full diagnosis list.
    pub fn prefix(&self, k: usize) -> ResolvedTrace {
        ResolvedTrace {
            diagnoses: self.diagnoses.clone(),
            events: self.events[..k].to_vec(),
        }
    }

    /// Number of procedure events, END excluded.
    pub fn trace_len(&self) -> usize {
        self.events.iter().filter(|(a, _)| *a != Activity::End).count()
    }
}

fn matched<A, B, F>(
    query: &[(A, u32)],
    candidate: &[(B, u32)],
    sim: F,
) -> Result<(f64, WeightedBipartiteGraph, Matching), MatchingError>
where
    F: FnMut(&A, &B) -> f64,
{
    let g = WeightedBipartiteGraph::build(query, candidate, sim)?;
    let m = max_weight_matching(&g);
    Ok((m.total_weight / query.len() as f64, g, m))
}

/// Control-flow similarity `mwm / |query|`.
pub fn sim_cf(
    query: &[(Activity, u32)],
    candidate: &[(Activity, u32)],
    tax: &Taxonomies<'_>,
    kind: SimilarityFn,
) -> Result<f64> {
    if query.is_empty() || candidate.is_empty() {
        return Err(SimilarityError::EmptySequence);
    }
    let (s, _, _) = matched(query, candidate, |&a, &b| tax.activity_similarity(kind, a, b))?;
    Ok(s)
}

/// Diagnosis-list similarity `mwm / |query|`, positions are seq numbers.
pub fn sim_list(
    query: &[(NodeId, u32)],
    candidate: &[(NodeId, u32)],
    tax: &Taxonomy,
    kind: SimilarityFn,
) -> Result<f64> {
    if query.is_empty() || candidate.is_empty() {
        return Err(SimilarityError::EmptyList);
    }
    let (s, _, _) = matched(query, candidate, |&a, &b| tax.similarity(kind, a, b))?;
    Ok(s)
}

/// Scalar result of one query/candidate comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceScore {
    pub sim_list: f64,
    pub sim_cf: f64,
    pub alpha: Alpha,
    pub sim_trace: f64,
}

/// Similarity of a query prefix to a candidate case.
pub fn sim_trace(
    query: &ResolvedTrace,
    candidate: &ResolvedTrace,
    cfg: &SimilarityConfig,
    tax: &Taxonomies<'_>,
) -> Result<TraceScore> {
    let sl = sim_list(&query.diagnoses, &candidate.diagnoses, tax.diagnoses, cfg.diagnosis_fn)?;
    let scf = sim_cf(&query.events, &candidate.events, tax, cfg.procedure_fn)?;
    let alpha = cfg.alpha(query.trace_len());
    Ok(TraceScore {
        sim_list: sl,
        sim_cf: scf,
        alpha,
        sim_trace: combine(sl, scf, alpha),
    })
}

/// One matched pair in an explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedEdge {
    pub query_code: String,
    pub query_pos: u32,
    pub candidate_code: String,
    pub candidate_pos: u32,
    pub sim: f64,
    pub w_order: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchExplanation {
    pub total_weight: f64,
    pub edges: Vec<MatchedEdge>,
}

fn explain_matching(
    g: &WeightedBipartiteGraph,
    m: &Matching,
    query_code: impl Fn(usize) -> String,
    candidate_code: impl Fn(usize) -> String,
) -> MatchExplanation {
    MatchExplanation {
        total_weight: m.total_weight,
        edges: m
            .pairs
            .iter()
            .map(|&(i, j)| MatchedEdge {
                query_code: query_code(i),
                query_pos: g.left_pos(i),
                candidate_code: candidate_code(j),
                candidate_pos: g.right_pos(j),
                sim: g.sim(i, j),
                w_order: g.order_weight(i, j),
                weight: g.weight(i, j),
            })
            .collect(),
    }
}

/// Per-pair explanation with both matchings and their edge weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityBreakdown {
    pub sim_list: f64,
    pub sim_cf: f64,
    pub alpha: Alpha,
    pub sim_trace: f64,
    pub list_matching: MatchExplanation,
    pub cf_matching: MatchExplanation,
}

impl SimilarityBreakdown {
    pub fn score(&self) -> TraceScore {
        TraceScore {
            sim_list: self.sim_list,
            sim_cf: self.sim_cf,
            alpha: self.alpha,
            sim_trace: self.sim_trace,
        }
    }
}

/// Same computation as [`sim_trace`], keeping the matched edges.
pub fn explain(
    query: &ResolvedTrace,
    candidate: &ResolvedTrace,
    cfg: &SimilarityConfig,
    tax: &Taxonomies<'_>,
) -> Result<SimilarityBreakdown> {
    if query.diagnoses.is_empty() || candidate.diagnoses.is_empty() {
        return Err(SimilarityError::EmptyList);
    }
    if query.events.is_empty() || candidate.events.is_empty() {
        return Err(SimilarityError::EmptySequence);
    }
    let (sl, lg, lm) = matched(&query.diagnoses, &candidate.diagnoses, |&a, &b| {
        tax.diagnoses.similarity(cfg.diagnosis_fn, a, b)
    })?;
    let (scf, cg, cm) = matched(&query.events, &candidate.events, |&a, &b| {
        tax.activity_similarity(cfg.procedure_fn, a, b)
    })?;
    let alpha = cfg.alpha(query.trace_len());
    let dx_code = |list: &[(NodeId, u32)], i: usize| tax.diagnoses.code(list[i].0).to_string();
    let ev_code = |list: &[(Activity, u32)], i: usize| tax.activity_code(list[i].0).to_string();
    Ok(SimilarityBreakdown {
        sim_list: sl,
        sim_cf: scf,
        alpha,
        sim_trace: combine(sl, scf, alpha),
        list_matching: explain_matching(&lg, &lm, |i| dx_code(&query.diagnoses, i), |j| {
            dx_code(&candidate.diagnoses, j)
        }),
        cf_matching: explain_matching(&cg, &cm, |i| ev_code(&query.events, i), |j| {
            ev_code(&candidate.events, j)
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t0() -> Taxonomy {
        Taxonomy::from_edges("t0", [("A", "R"), ("B", "R"), ("A1", "A"), ("A2", "A"), ("B1", "B")]).unwrap()
    }

    fn events(t: &Taxonomies<'_>, codes: &[&str]) -> Vec<(Activity, u32)> {
        codes.iter().zip(1..).map(|(c, p)| (t.activity(c).unwrap(), p)).collect()
    }

    fn dx(t: &Taxonomy, items: &[(&str, u32)]) -> Vec<(NodeId, u32)> {
        items.iter().map(|(c, s)| (t.node(c).unwrap(), *s)).collect()
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_schedule(AlphaMode::Dynamic, 3), Alpha { list: 0.25, cf: 0.75 });
        assert_eq!(alpha_schedule(AlphaMode::Dynamic, 1), Alpha { list: 0.5, cf: 0.5 });
        let a = alpha_schedule(AlphaMode::Dynamic, 9);
        assert!((a.list - 0.1).abs() < 1e-15 && (a.cf - 0.9).abs() < 1e-15);
        let s = alpha_schedule(AlphaMode::Static { list: 0.3, cf: 0.7 }, 9);
        assert_eq!(s, Alpha { list: 0.3, cf: 0.7 });
    }

    #[test]
    fn static_alpha_validation() {
        let bad = SimilarityConfig {
            alpha: AlphaMode::Static { list: 0.5, cf: 0.6 },
            ..SimilarityConfig::default()
        };
        assert!(matches!(bad.validate(), Err(SimilarityError::InvalidAlpha(..))));
        let good = SimilarityConfig {
            alpha: AlphaMode::Static { list: 1.0, cf: 0.0 },
            ..SimilarityConfig::default()
        };
        good.validate().unwrap();
    }

    #[test]
    fn composition_of_worked_example() {
        // oracle: 0.25 * 0.57 + 0.75 * 0.41 = 0.1425 + 0.3075
        let v = combine(0.57, 0.41, Alpha { list: 0.25, cf: 0.75 });
        assert!((v - 0.45).abs() < 1e-12);
    }

    #[test]
    fn cf_examples() {
        let t = t0();
        let tx = Taxonomies::new(&t, &t);
        let s = sim_cf(&events(&tx, &["A1"]), &events(&tx, &["A1"]), &tx, SimilarityFn::Sanchez).unwrap();
        assert_eq!(s, 1.0);
        let s = sim_cf(
            &events(&tx, &["A1", "B1"]),
            &events(&tx, &["B1", "A1"]),
            &tx,
            SimilarityFn::Sanchez,
        )
        .unwrap();
        assert_eq!(s, 0.5);
        assert_eq!(
            sim_cf(&[], &events(&tx, &["A1"]), &tx, SimilarityFn::Sanchez).unwrap_err(),
            SimilarityError::EmptySequence
        );
    }

    #[test]
    fn end_marker_similarity() {
        let t = t0();
        let tx = Taxonomies::new(&t, &t);
        let s = sim_cf(&events(&tx, &["END"]), &events(&tx, &["END"]), &tx, SimilarityFn::Sanchez).unwrap();
        assert_eq!(s, 1.0);
        let s = sim_cf(&events(&tx, &["A1"]), &events(&tx, &["END"]), &tx, SimilarityFn::Sanchez).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn list_examples() {
        let t = t0();
        assert_eq!(sim_list(&dx(&t, &[("A1", 1)]), &dx(&t, &[("A1", 1)]), &t, SimilarityFn::Sanchez).unwrap(), 1.0);
        assert_eq!(sim_list(&dx(&t, &[("A1", 1)]), &dx(&t, &[("B1", 1)]), &t, SimilarityFn::Sanchez).unwrap(), 0.0);
        // A1/A2 siblings at seq distance 1: ln2/ln3 * 0.5
        let s = sim_list(&dx(&t, &[("A1", 1)]), &dx(&t, &[("B1", 1), ("A2", 2)]), &t, SimilarityFn::Sanchez).unwrap();
        assert!((s - 0.5 * std::f64::consts::LN_2 / 3f64.ln()).abs() < 1e-12);
        assert_eq!(
            sim_list(&[], &dx(&t, &[("A1", 1)]), &t, SimilarityFn::Sanchez).unwrap_err(),
            SimilarityError::EmptyList
        );
    }

    #[test]
    fn trace_similarity_and_breakdown() {
        let t = t0();
        let tx = Taxonomies::new(&t, &t);
        let q = ResolvedTrace {
            diagnoses: dx(&t, &[("A1", 1), ("B1", 2)]),
            events: events(&tx, &["A1", "A2"]),
        };
        let c = ResolvedTrace {
            diagnoses: dx(&t, &[("A2", 1)]),
            events: events(&tx, &["A2", "B1", "END"]),
        };
        let cfg = SimilarityConfig::default();
        let score = sim_trace(&q, &c, &cfg, &tx).unwrap();
        let b = explain(&q, &c, &cfg, &tx).unwrap();
        assert_eq!(b.score(), score);
        assert!((b.sim_trace - (b.alpha.list * b.sim_list + b.alpha.cf * b.sim_cf)).abs() < 1e-12);
        assert_eq!(b.alpha, Alpha { list: 1.0 / 3.0, cf: 2.0 / 3.0 });
        let edge = &b.cf_matching.edges[0];
        // sibling at equal position (ln2/ln3) beats the exact match one step away (0.5)
        assert_eq!((edge.query_code.as_str(), edge.candidate_code.as_str()), ("A1", "A2"));
        assert_eq!(edge.weight, edge.sim * edge.w_order);
        assert_eq!(edge.w_order, 1.0);
        assert_eq!(b.cf_matching.edges.len(), 1);
    }

    #[test]
    fn static_list_only_alpha() {
        let t = t0();
        let tx = Taxonomies::new(&t, &t);
        let q = ResolvedTrace {
            diagnoses: dx(&t, &[("A1", 1)]),
            events: events(&tx, &["B1"]),
        };
        let c = ResolvedTrace {
            diagnoses: dx(&t, &[("A2", 1)]),
            events: events(&tx, &["A1", "END"]),
        };
        let cfg = SimilarityConfig {
            alpha: AlphaMode::Static { list: 1.0, cf: 0.0 },
            ..SimilarityConfig::default()
        };
        let s = sim_trace(&q, &c, &cfg, &tx).unwrap();
        assert_eq!(s.sim_trace, s.sim_list);
    }

    #[test]
    fn boolean_variant_config() {
        let c = Variant::Boolean.config();
        assert_eq!(c.diagnosis_fn, SimilarityFn::Boolean);
        assert_eq!(c.procedure_fn, SimilarityFn::Boolean);
        assert_eq!("T".parse::<Variant>().unwrap(), Variant::Taxonomic);
        assert!("X".parse::<Variant>().is_err());
    }
}
