//! Next-activity prediction for clinical event logs using taxonomic
//! similarity between diagnosis lists and procedure traces.

pub mod evaluation;
pub mod eventlog;
pub mod matching;
pub mod predictor;
pub mod similarity;
pub mod synth;
pub mod taxonomy;

pub use eventlog::{Case, Diagnosis, Event, EventLog, END};
pub use matching::{max_weight_matching, w_order, Matching, WeightedBipartiteGraph};
pub use similarity::{sim_trace, Activity, AlphaMode, ResolvedTrace, SimilarityConfig, Taxonomies, Variant};
pub use taxonomy::{SimilarityFn, Taxonomy};
