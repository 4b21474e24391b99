//! Portfolio files, run configuration and the ground-truth bootstrap.

mod bootstrap;
mod config;
mod csvio;

pub use bootstrap::{
    bootstrap_ground_truth, calibrated_thresholds, GroundTruthSpec, LinearTerm, Marginals,
    Transform,
};
pub use config::{parse_kv, RunConfig};
pub use csvio::{
    portfolio_to_csv_string, read_csv, read_csv_from, read_csv_unvalidated,
    read_csv_unvalidated_from, write_csv, write_csv_to,
};
