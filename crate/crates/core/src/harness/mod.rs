//! Data ingestion, baselines, metrics, serialization and experiments.

mod dct;
mod decompose;
mod experiment;
mod io;
mod metrics;
mod patches;

use std::fmt;
use std::str::FromStr;

pub use dct::{dct2_dictionary, dct_dictionary, dct_nominal_ops};
pub use decompose::decompose_dense;
pub use experiment::{
    run_config, run_experiment, run_on_dataset, write_csv, ExperimentConfig, ExperimentRow, CSV_HEADER,
};
pub use io::{format_hex_f64, load_chain, parse_hex_f64, read_chain, save_chain, write_chain};
pub use metrics::{evaluate, weighted_cost, CostModel, Synthesis};
pub use patches::{image_patches, ingest, load_gray, patches_to_dataset, PatchConfig};

use crate::error::{contract, Error, Result};
use crate::learners::{default_k, learn_b, learn_b_kron, learn_m, learn_o, learn_s, LearnConfig, Matcher, Trained};
use crate::linalg::Dataset;
use crate::scalar::Real;

/// Learner selector used by the CLI and experiment files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    B,
    M,
    MGreedy,
    BKron,
    O,
    S,
}

impl Algorithm {
    pub fn default_k(&self) -> usize {
        match self {
            Algorithm::B => default_k::B,
            Algorithm::M | Algorithm::MGreedy => default_k::M,
            Algorithm::BKron => default_k::BKRON,
            Algorithm::O => default_k::O,
            Algorithm::S => default_k::S,
        }
    }

    /// Sparse coder used for the returned code.
    pub fn coding(&self) -> &'static str {
        match self {
            Algorithm::O | Algorithm::S => "omp",
            _ => "hard_threshold",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "B" | "b" => Algorithm::B,
            "M" | "m" => Algorithm::M,
            "M-greedy" | "m-greedy" => Algorithm::MGreedy,
            "BKron" | "bkron" => Algorithm::BKron,
            "O" | "o" => Algorithm::O,
            "S" | "s" => Algorithm::S,
            other => return Err(contract(format!("unknown algorithm `{other}`"))),
        })
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::B => "B",
            Algorithm::M => "M",
            Algorithm::MGreedy => "M-greedy",
            Algorithm::BKron => "BKron",
            Algorithm::O => "O",
            Algorithm::S => "S",
        })
    }
}

/// Runs the selected learner. `M-greedy` overrides the configured matcher.
pub fn train<T: Real>(algo: Algorithm, data: &Dataset<T>, cfg: &LearnConfig) -> Result<Trained<T>> {
    match algo {
        Algorithm::B => learn_b(data, cfg),
        Algorithm::M => learn_m(data, cfg),
        Algorithm::MGreedy => learn_m(data, &cfg.clone().with_matcher(Matcher::Greedy)),
        Algorithm::BKron => learn_b_kron(data, cfg),
        Algorithm::O => learn_o(data, cfg),
        Algorithm::S => learn_s(data, cfg),
    }
}
