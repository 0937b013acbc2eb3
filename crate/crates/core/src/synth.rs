//! Seeded synthetic logs over small two-level toy taxonomies.
//!
//! Each case follows one of a few care pathways. The pathway is fixed by
//! the primary diagnosis, and every step of its template may be swapped for
//! a sibling code ("near miss") with a configurable rate.

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eventlog::{Case, Diagnosis, Event, EventLog, END};
use crate::taxonomy::{Taxonomy, TaxonomyError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub cases: usize,
    pub diagnosis_groups: usize,
    pub procedure_groups: usize,
    pub leaves_per_group: usize,
    pub pathways: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that a template step is replaced by a sibling code.
    pub near_miss_rate: f64,
    pub max_secondary: usize,
    /// Draw diagnosis lists from this many fixed profiles instead of freely.
    pub profiles: Option<usize>,
    /// Derive each trace from the diagnosis list alone, so equal lists get
    /// equal traces.
    pub deterministic_traces: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            cases: 200,
            diagnosis_groups: 4,
            procedure_groups: 5,
            leaves_per_group: 4,
            pathways: 6,
            min_len: 2,
            max_len: 7,
            near_miss_rate: 0.25,
            max_secondary: 3,
            profiles: None,
            deterministic_traces: false,
        }
    }
}

#[derive(Debug)]
pub struct SyntheticData {
    pub diagnoses: Taxonomy,
    pub procedures: Taxonomy,
    pub diagnosis_edges: Vec<(String, String)>,
    pub procedure_edges: Vec<(String, String)>,
    pub log: EventLog,
}

/// `root -> root+letter -> root+letter+digit`, e.g. `P -> PA -> PA1`.
pub fn toy_edges(root: &str, groups: usize, leaves: usize) -> Vec<(String, String)> {
    assert!((1..=26).contains(&groups), "1..=26 groups supported");
    let mut edges = Vec::with_capacity(groups * (leaves + 1));
    for g in 0..groups {
        let group = format!("{root}{}", char::from(b'A' + g as u8));
        edges.push((group.clone(), root.to_string()));
        for l in 1..=leaves {
            edges.push((format!("{group}{l}"), group.clone()));
        }
    }
    edges
}

fn leaves(edges: &[(String, String)], root: &str) -> Vec<Vec<String>> {
    let mut groups: Vec<Vec<String>> = Vec::new();
    for (child, parent) in edges {
        if parent == root {
            groups.push(Vec::new());
        } else {
            groups.last_mut().expect("group before leaf").push(child.clone());
        }
    }
    groups
}

fn sibling(groups: &[Vec<String>], g: usize, code: &str, rng: &mut impl Rng) -> String {
    let others: Vec<&String> = groups[g].iter().filter(|c| *c != code).collect();
    others.choose(rng).map_or_else(|| code.to_string(), |c| (*c).clone())
}

fn digest_seed(seed: u64, dx: &[Diagnosis]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for d in dx {
        h.update(format!("{}:{};", d.code, d.seq).as_bytes());
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

pub fn generate(cfg: &SynthConfig) -> Result<SyntheticData, TaxonomyError> {
    assert!(cfg.min_len >= 1 && cfg.min_len <= cfg.max_len, "invalid length range");
    assert!(cfg.pathways >= 1 && cfg.leaves_per_group >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dx_edges = toy_edges("D", cfg.diagnosis_groups, cfg.leaves_per_group);
    let px_edges = toy_edges("P", cfg.procedure_groups, cfg.leaves_per_group);
    let dx_groups = leaves(&dx_edges, "D");
    let px_groups = leaves(&px_edges, "P");
    let dx_all: Vec<&String> = dx_groups.iter().flatten().collect();

    // template steps as (group, leaf) pairs
    let templates: Vec<Vec<(usize, String)>> = (0..cfg.pathways)
        .map(|_| {
            let len = rng.random_range(cfg.min_len..=cfg.max_len);
            (0..len)
                .map(|_| {
                    let g = rng.random_range(0..px_groups.len());
                    (g, px_groups[g].choose(&mut rng).expect("non-empty group").clone())
                })
                .collect()
        })
        .collect();

    let draw_dx = |rng: &mut ChaCha8Rng| -> Vec<Diagnosis> {
        let mut picked: Vec<&String> = vec![*dx_all.choose(rng).expect("non-empty")];
        let n_secondary = rng.random_range(0..=cfg.max_secondary);
        let mut rest: Vec<&String> = dx_all.iter().copied().filter(|c| *c != picked[0]).collect();
        rest.shuffle(rng);
        picked.extend(rest.into_iter().take(n_secondary));
        picked
            .into_iter()
            .zip(1u32..)
            .map(|(code, seq)| Diagnosis {
                code: code.clone(),
                seq,
            })
            .collect()
    };
    let profiles: Option<Vec<Vec<Diagnosis>>> = cfg.profiles.map(|k| (0..k).map(|_| draw_dx(&mut rng)).collect());

    let base = NaiveDate::from_ymd_opt(2150, 1, 1)
        .and_then(|d| d.and_hms_opt(8, 0, 0))
        .expect("valid date");
    let mut cases = Vec::with_capacity(cfg.cases);
    for i in 0..cfg.cases {
        let diagnoses = match &profiles {
            Some(p) => p.choose(&mut rng).expect("at least one profile").clone(),
            None => draw_dx(&mut rng),
        };
        let primary = dx_all.iter().position(|c| **c == diagnoses[0].code).expect("known code");
        let pathway = primary * cfg.pathways / dx_all.len();
        let mut trace_rng = if cfg.deterministic_traces {
            ChaCha8Rng::seed_from_u64(digest_seed(cfg.seed, &diagnoses))
        } else {
            ChaCha8Rng::seed_from_u64(rng.random())
        };
        let codes: Vec<String> = templates[pathway]
            .iter()
            .map(|(g, code)| {
                if trace_rng.random_bool(cfg.near_miss_rate) {
                    sibling(&px_groups, *g, code, &mut trace_rng)
                } else {
                    code.clone()
                }
            })
            .collect();
        let admit: NaiveDateTime = base + TimeDelta::days(i as i64) + TimeDelta::minutes(rng.random_range(0..600));
        let mut events: Vec<Event> = codes
            .into_iter()
            .zip(0i64..)
            .map(|(code, k)| Event {
                code,
                ts: admit + TimeDelta::hours(k),
                seq: 1,
            })
            .collect();
        events.push(Event {
            code: END.to_string(),
            ts: admit + TimeDelta::hours(events.len() as i64 - 1) + TimeDelta::seconds(1),
            seq: 2,
        });
        cases.push(Case {
            case_id: format!("s{:04}", i + 1),
            admit_time: admit,
            diagnoses,
            events,
        });
    }

    let diagnoses = Taxonomy::from_edges("synth-dx", dx_edges.iter().map(|(c, p)| (c.as_str(), p.as_str())))?;
    let procedures = Taxonomy::from_edges("synth-px", px_edges.iter().map(|(c, p)| (c.as_str(), p.as_str())))?;
    Ok(SyntheticData {
        log: EventLog {
            id: format!("synthetic-{}", cfg.seed),
            diagnosis_taxonomy: diagnoses.id().to_string(),
            procedure_taxonomy: procedures.id().to_string(),
            cases,
        },
        diagnoses,
        procedures,
        diagnosis_edges: dx_edges,
        procedure_edges: px_edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_edges_shape() {
        let e = toy_edges("P", 2, 3);
        assert_eq!(e.len(), 8);
        assert_eq!(e[0], ("PA".to_string(), "P".to_string()));
        assert_eq!(e[1], ("PA1".to_string(), "PA".to_string()));
        let t = Taxonomy::from_edges("p", e.iter().map(|(c, p)| (c.as_str(), p.as_str()))).unwrap();
        assert_eq!(t.max_leaves(), 6);
    }

    #[test]
    fn same_seed_same_log() {
        let cfg = SynthConfig::default();
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.log, b.log);
        let c = generate(&SynthConfig { seed: 7, ..cfg }).unwrap();
        assert_ne!(a.log.cases, c.log.cases);
    }

    #[test]
    fn cases_are_valid() {
        let d = generate(&SynthConfig::default()).unwrap();
        d.log.validate().unwrap();
        assert_eq!(d.log.len(), 200);
        for c in &d.log.cases {
            assert!(c.trace_len() >= 2 && c.trace_len() <= 7);
            for e in &c.events {
                assert!(e.is_end() || d.procedures.contains(&e.code));
            }
            assert!(c.diagnoses.iter().all(|x| d.diagnoses.contains(&x.code)));
        }
    }

    #[test]
    fn deterministic_traces_follow_diagnoses() {
        let cfg = SynthConfig {
            profiles: Some(20),
            deterministic_traces: true,
            ..SynthConfig::default()
        };
        let d = generate(&cfg).unwrap();
        let codes = |c: &Case| c.events.iter().map(|e| e.code.clone()).collect::<Vec<_>>();
        let mut clones = 0;
        for a in &d.log.cases {
            for b in &d.log.cases {
                if a.case_id < b.case_id && a.diagnoses == b.diagnoses {
                    assert_eq!(codes(a), codes(b));
                    clones += 1;
                }
            }
        }
        assert!(clones > 0);
    }
}
