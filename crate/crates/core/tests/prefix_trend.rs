use chrono::{NaiveDate, TimeDelta};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use taxnext_core::evaluation::{loo_records, per_prefix_analysis, EvalOptions};
use taxnext_core::eventlog::{Case, Diagnosis, Event, EventLog, END};
use taxnext_core::predictor::Predictor;
use taxnext_core::similarity::{Taxonomies, Variant};
use taxnext_core::synth::toy_edges;
use taxnext_core::taxonomy::Taxonomy;

const STEPS: usize = 6;

fn taxonomy(id: &str, edges: &[(String, String)]) -> Taxonomy {
    Taxonomy::from_edges(id, edges.iter().map(|(c, p)| (c.as_str(), p.as_str()))).unwrap()
}

/// Step k follows the pathway of the primary diagnosis with probability
/// 1 - k/(STEPS-1) and is a uniformly random leaf otherwise, so the suffix
/// decorrelates from the prefix as it grows.
fn divergent_log(cases: usize, seed: u64) -> (EventLog, Vec<(String, String)>, Vec<(String, String)>) {
    let dx_edges = toy_edges("D", 3, 3);
    let px_edges = toy_edges("P", 6, 6);
    let leaf = |e: &[(String, String)]| -> Vec<String> {
        e.iter().filter(|(c, _)| c.len() == 3).map(|(c, _)| c.clone()).collect()
    };
    let dx_leaves = leaf(&dx_edges);
    let px_leaves = leaf(&px_edges);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pathways: Vec<Vec<String>> = (0..3)
        .map(|_| (0..STEPS).map(|_| px_leaves.choose(&mut rng).unwrap().clone()).collect())
        .collect();
    let base = NaiveDate::from_ymd_opt(2150, 1, 1).unwrap().and_hms_opt(8, 0, 0).unwrap();
    let cases = (0..cases)
        .map(|i| {
            let primary = dx_leaves.choose(&mut rng).unwrap().clone();
            let g = (primary.as_bytes()[1] - b'A') as usize;
            let admit = base + TimeDelta::days(i as i64);
            let mut events: Vec<Event> = (0..STEPS)
                .map(|k| {
                    let keep = 1.0 - k as f64 / (STEPS - 1) as f64;
                    let code = if rng.random_bool(keep) {
                        pathways[g][k].clone()
                    } else {
                        px_leaves.choose(&mut rng).unwrap().clone()
                    };
                    Event {
                        code,
                        ts: admit + TimeDelta::hours(k as i64),
                        seq: 1,
                    }
                })
                .collect();
            events.push(Event {
                code: END.into(),
                ts: admit + TimeDelta::hours(STEPS as i64),
                seq: 1,
            });
            Case {
                case_id: format!("d{i:04}"),
                admit_time: admit,
                diagnoses: vec![Diagnosis { code: primary, seq: 1 }],
                events,
            }
        })
        .collect();
    let log = EventLog {
        id: "divergent".into(),
        diagnosis_taxonomy: "dx".into(),
        procedure_taxonomy: "px".into(),
        cases,
    };
    (log, dx_edges, px_edges)
}

#[test]
fn mean_similarity_declines_with_prefix_length() {
    let (log, dx_edges, px_edges) = divergent_log(240, 11);
    let dx = taxonomy("dx", &dx_edges);
    let px = taxonomy("px", &px_edges);
    let p = Predictor::new(&log, Taxonomies::new(&dx, &px), Variant::Taxonomic.config()).unwrap();
    let records = loo_records(&p, Variant::Taxonomic, &EvalOptions::default()).unwrap();
    let rows = per_prefix_analysis(&records, &[], false).unwrap();
    assert_eq!(rows.len(), STEPS);
    // the last prefix predicts END, which every trace shares
    let means: Vec<f64> = rows[..STEPS - 1].iter().map(|r| r.avg_sim_t.unwrap()).collect();
    for w in means.windows(2) {
        assert!(w[1] <= w[0], "not non-increasing: {means:?}");
    }
    assert!(means[0] - means[STEPS - 2] > 0.2, "{means:?}");
    assert_eq!(rows[STEPS - 1].avg_sim_t, Some(1.0));
}
