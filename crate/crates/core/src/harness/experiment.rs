//! Grid experiments over learners, budgets, sparsities and precisions.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;

use super::{dct2_dictionary, dct_dictionary, dct_nominal_ops, evaluate, ingest, train, weighted_cost, Algorithm, CostModel, PatchConfig};
use crate::error::{Error, Result};
use crate::learners::LearnConfig;
use crate::linalg::Dataset;
use crate::sopot::Precision;
use crate::sparse::hard_threshold;

const KEYS: &[&str] = &[
    "images",
    "algorithms",
    "m",
    "s",
    "p",
    "k_iters",
    "seed",
    "gamma",
    "patch_side",
    "stride",
    "mean_removal",
    "dct_baseline",
    "kron_samples",
];

#[derive(Deserialize)]
#[serde(untagged)]
enum PrecisionSpec {
    Int(u32),
    Text(String),
}

#[derive(Deserialize)]
struct RawConfig {
    images: Vec<PathBuf>,
    algorithms: Vec<String>,
    m: Vec<usize>,
    s: Vec<usize>,
    p: Option<Vec<PrecisionSpec>>,
    k_iters: Option<usize>,
    seed: Option<u64>,
    gamma: Option<f64>,
    patch_side: Option<usize>,
    stride: Option<usize>,
    mean_removal: Option<bool>,
    dct_baseline: Option<bool>,
    kron_samples: Option<usize>,
}

/// Parsed experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub images: Vec<PathBuf>,
    pub algorithms: Vec<Algorithm>,
    /// Factor budgets; the stage count `q` for M chains.
    pub m: Vec<usize>,
    pub s: Vec<usize>,
    /// Precisions; only shear/scaling chains use more than the first.
    pub p: Vec<Precision>,
    /// `None` selects each learner's default.
    pub k_iters: Option<usize>,
    pub seed: u64,
    pub cost: CostModel,
    pub patches: PatchConfig,
    pub dct_baseline: bool,
    pub kron_samples: usize,
}

impl ExperimentConfig {
    /// Parses TOML, resolving relative image paths against `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if let Some(bad) = table.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::InvalidConfigKey(bad.clone()));
        }
        let raw: RawConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if raw.images.is_empty() {
            return Err(Error::Config("`images` is empty".into()));
        }
        if raw.algorithms.is_empty() || raw.m.is_empty() || raw.s.is_empty() {
            return Err(Error::Config("`algorithms`, `m` and `s` need at least one entry".into()));
        }
        let algorithms = raw
            .algorithms
            .iter()
            .map(|a| a.parse())
            .collect::<Result<Vec<Algorithm>>>()?;
        let p = match raw.p {
            None => vec![Precision::Infinite],
            Some(list) => list
                .into_iter()
                .map(|entry| match entry {
                    PrecisionSpec::Int(k) => k.to_string().parse(),
                    PrecisionSpec::Text(t) => t.parse(),
                })
                .collect::<Result<Vec<_>>>()?,
        };
        if p.is_empty() {
            return Err(Error::Config("`p` needs at least one entry".into()));
        }
        let side = raw.patch_side.unwrap_or(8);
        let patches = PatchConfig {
            patch_side: side,
            stride: raw.stride.unwrap_or(side),
            mean_removal: raw.mean_removal.unwrap_or(true),
        };
        Ok(Self {
            images: raw
                .images
                .into_iter()
                .map(|p| if p.is_relative() { base.join(p) } else { p })
                .collect(),
            algorithms,
            m: raw.m,
            s: raw.s,
            p,
            k_iters: raw.k_iters,
            seed: raw.seed.unwrap_or(0),
            cost: CostModel::with_gamma(raw.gamma.unwrap_or(6.0))?,
            patches,
            dct_baseline: raw.dct_baseline.unwrap_or(true),
            kron_samples: raw.kron_samples.unwrap_or(20_000),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub algorithm: String,
    /// Empty for the DCT baseline.
    pub m: Option<usize>,
    pub s: usize,
    pub p: Precision,
    pub k_iters: Option<usize>,
    pub seed: u64,
    /// How codes were computed: `hard_threshold` or `omp`.
    pub coding: &'static str,
    pub epsilon: f64,
    pub factors: usize,
    pub additions: u64,
    pub multiplications: u64,
    pub shifts: u64,
    pub weighted_cost: f64,
    pub coding_bits: f64,
    pub wall_ms: f64,
}

pub const CSV_HEADER: &str = "algorithm,m,s,p,k_iters,seed,coding,epsilon,factors,additions,multiplications,shifts,weighted_cost,coding_bits,wall_ms";

impl ExperimentRow {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{:.6},{},{},{},{},{},{:.3},{:.3}",
            self.algorithm,
            opt(self.m),
            self.s,
            self.p,
            opt(self.k_iters),
            self.seed,
            self.coding,
            self.epsilon,
            self.factors,
            self.additions,
            self.multiplications,
            self.shifts,
            self.weighted_cost,
            self.coding_bits,
            self.wall_ms
        )
    }
}

struct GridPoint {
    algo: Algorithm,
    m: usize,
    s: usize,
    p: Precision,
}

fn grid(cfg: &ExperimentConfig) -> Vec<GridPoint> {
    let mut out = Vec::new();
    for &algo in &cfg.algorithms {
        let ps: &[Precision] = if algo == Algorithm::S { &cfg.p } else { &[Precision::Infinite] };
        for &m in &cfg.m {
            for &s in &cfg.s {
                for &p in ps {
                    out.push(GridPoint { algo, m, s, p });
                }
            }
        }
    }
    out
}

fn dct_row(data: &Dataset<f64>, cfg: &ExperimentConfig, s: usize) -> Result<ExperimentRow> {
    let start = Instant::now();
    let n = data.dim();
    let side = cfg.patches.patch_side;
    let analysis = if side * side == n { dct2_dictionary(side)? } else { dct_dictionary(n)? };
    let code = hard_threshold(&analysis.matmul(data.y())?, s)?;
    let eps = evaluate(data, &analysis.transpose(), &code)?;
    let ops = dct_nominal_ops(n);
    Ok(ExperimentRow {
        algorithm: "DCT".into(),
        m: None,
        s,
        p: Precision::Infinite,
        k_iters: None,
        seed: cfg.seed,
        coding: "hard_threshold",
        epsilon: eps,
        factors: 0,
        additions: ops.additions,
        multiplications: ops.multiplications,
        shifts: ops.shifts,
        weighted_cost: weighted_cost(ops, &cfg.cost),
        coding_bits: 0.0,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Runs every grid point on an already ingested dataset.
pub fn run_on_dataset(data: &Dataset<f64>, cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    let points = grid(cfg);
    let mut rows: Vec<ExperimentRow> = points
        .par_iter()
        .map(|pt| {
            let start = Instant::now();
            let mut lc = LearnConfig::new(pt.s, pt.m)
                .with_p(pt.p)
                .with_seed(cfg.seed)
                .with_k(cfg.k_iters.unwrap_or(pt.algo.default_k()));
            lc.kron_samples = cfg.kron_samples;
            let out = train(pt.algo, data, &lc)?;
            Ok(ExperimentRow {
                algorithm: pt.algo.to_string(),
                m: Some(pt.m),
                s: pt.s,
                p: pt.p,
                k_iters: Some(lc.k_iters),
                seed: cfg.seed,
                coding: pt.algo.coding(),
                epsilon: out.report.final_epsilon,
                factors: out.chain.len(),
                additions: out.report.ops.additions,
                multiplications: out.report.ops.multiplications,
                shifts: out.report.ops.shifts,
                weighted_cost: weighted_cost(out.report.ops, &cfg.cost),
                coding_bits: out.report.coding_bits,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect::<Result<_>>()?;
    if cfg.dct_baseline {
        for &s in &cfg.s {
            rows.push(dct_row(data, cfg, s)?);
        }
    }
    Ok(rows)
}

pub fn run_config(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    let data = ingest(&cfg.images, &cfg.patches)?;
    run_on_dataset(&data, cfg)
}

/// Reads a TOML experiment file and runs it.
pub fn run_experiment(config_path: &Path) -> Result<Vec<ExperimentRow>> {
    run_config(&ExperimentConfig::from_file(config_path)?)
}

pub fn write_csv<W: Write>(rows: &[ExperimentRow], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.to_csv())?;
    }
    Ok(())
}
