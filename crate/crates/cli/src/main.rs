use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mulfree::harness::{
    decompose_dense, evaluate, ingest, load_chain, run_experiment, save_chain, train, weighted_cost, write_csv,
    Algorithm, CostModel, PatchConfig,
};
use mulfree::learners::{code_against, LearnConfig, Matcher};
use mulfree::sopot::quantize;
use mulfree::{Factor, Matrix64, Precision};

#[derive(Parser)]
#[command(name = "mulfree", version, about = "Learn and evaluate multiplication-free sparsifying transforms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a transform from grayscale images.
    Train(TrainArgs),
    /// Code images against a saved transform and report the error.
    Eval(EvalArgs),
    /// Quantize a scalar to a sum of signed powers of two.
    Sopot {
        value: f64,
        #[arg(long, default_value = "3")]
        p: Precision,
    },
    /// Factor a dense invertible matrix into shears, scalings and swaps.
    Decompose {
        /// Whitespace-separated rows, one per line.
        matrix: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a TOML experiment grid and write CSV.
    Experiment {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PatchArgs {
    #[arg(long, default_value_t = 8)]
    patch_side: usize,
    /// Defaults to the patch side (non-overlapping).
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    keep_mean: bool,
}

impl PatchArgs {
    fn config(&self) -> PatchConfig {
        PatchConfig {
            patch_side: self.patch_side,
            stride: self.stride.unwrap_or(self.patch_side),
            mean_removal: !self.keep_mean,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value = "B")]
    algo: Algorithm,
    /// Factor budget.
    #[arg(long)]
    m: Option<usize>,
    /// Stage count for M chains (alias of --m).
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, default_value_t = 4)]
    s: usize,
    #[arg(long, default_value = "inf")]
    p: Precision,
    #[arg(long)]
    k_iters: Option<usize>,
    #[arg(long, default_value = "exact")]
    matcher: Matcher,
    #[arg(long, default_value_t = 6.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the learned chain.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    patches: PatchArgs,
    #[arg(required = true)]
    images: Vec<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    chain: PathBuf,
    #[arg(long, default_value_t = 4)]
    s: usize,
    #[arg(long, default_value_t = 6.0)]
    gamma: f64,
    #[command(flatten)]
    patches: PatchArgs,
    #[arg(required = true)]
    images: Vec<PathBuf>,
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let m = match (a.m, a.q) {
        (Some(m), None) | (None, Some(m)) => m,
        (Some(_), Some(_)) => bail!("give either --m or --q, not both"),
        (None, None) => bail!("a factor budget is required (--m, or --q for M chains)"),
    };
    let data = ingest::<f64, _>(&a.images, &a.patches.config())?;
    let cfg = LearnConfig::new(a.s, m)
        .with_p(a.p)
        .with_k(a.k_iters.unwrap_or(a.algo.default_k()))
        .with_matcher(a.matcher)
        .with_seed(a.seed);
    let out = train(a.algo, &data, &cfg)?;
    let model = CostModel::with_gamma(a.gamma)?;
    let r = &out.report;
    println!("algorithm      {}", a.algo);
    println!("data           n={} N={}", data.dim(), data.samples());
    println!("factors        {}", out.chain.len());
    println!("epsilon        {:.6}%", r.final_epsilon);
    println!(
        "ops/vector     {} adds, {} mults, {} shifts (inverse: {} / {} / {})",
        r.ops.additions,
        r.ops.multiplications,
        r.ops.shifts,
        r.inverse_ops.additions,
        r.inverse_ops.multiplications,
        r.inverse_ops.shifts
    );
    println!("weighted cost  {:.1} (gamma={})", weighted_cost(r.ops, &model), a.gamma);
    println!("coding bits    {:.1}", r.coding_bits);
    if let Some(c) = r.certificate {
        println!("certificate    {}", if c.holds { "holds" } else { "fails" });
    }
    if r.stopped_early {
        println!("note           appends stopped before the budget: no candidate lowered the objective");
    }
    if let Some(path) = a.out {
        save_chain(&out.chain, &path).with_context(|| format!("writing {}", path.display()))?;
        println!("saved          {}", path.display());
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let chain = load_chain::<f64>(&a.chain).with_context(|| format!("reading {}", a.chain.display()))?;
    let data = ingest::<f64, _>(&a.images, &a.patches.config())?;
    if data.dim() != chain.n() {
        bail!("chain is {0}×{0} but patches have dimension {1}", chain.n(), data.dim());
    }
    let code = code_against(data.y(), &chain, a.s)?;
    let eps = evaluate(&data, &chain, &code)?;
    let ops = chain.ops_per_vector();
    println!("epsilon        {eps:.6}%");
    println!("ops/vector     {} adds, {} mults, {} shifts", ops.additions, ops.multiplications, ops.shifts);
    println!("weighted cost  {:.1}", weighted_cost(ops, &CostModel::with_gamma(a.gamma)?));
    Ok(())
}

fn cmd_sopot(value: f64, p: Precision) -> Result<()> {
    let Precision::Terms(k) = p else {
        bail!("SOPOT quantization needs a finite term budget");
    };
    let q = quantize(value, k)?;
    let v: f64 = q.value();
    println!("{q}");
    println!("value  {v}");
    println!("error  {:e}", (v - value).abs());
    Ok(())
}

fn read_matrix(path: &PathBuf) -> Result<Matrix64> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            l.split_whitespace()
                .map(|t| t.parse::<f64>().with_context(|| format!("line {}: bad number `{t}`", k + 1)))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(Matrix64::from_rows(&rows)?)
}

fn cmd_decompose(matrix: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let s = read_matrix(&matrix)?;
    let chain = decompose_dense(&s)?;
    let (mut shears, mut scalings, mut swaps) = (0, 0, 0);
    for f in chain.factors() {
        match f {
            Factor::Shear { .. } => shears += 1,
            Factor::Scaling { .. } => scalings += 1,
            _ => swaps += 1,
        }
    }
    let err = chain.materialize().sub(&s)?.max_abs() / s.max_abs();
    println!("shears {shears}, scalings {scalings}, swaps {swaps}");
    println!("relative reconstruction error {err:e}");
    if let Some(path) = out {
        save_chain(&chain, &path)?;
        println!("saved {}", path.display());
    }
    Ok(())
}

fn cmd_experiment(config: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let rows = run_experiment(&config).with_context(|| format!("running {}", config.display()))?;
    match out {
        Some(path) => write_csv(&rows, BufWriter::new(File::create(&path)?))?,
        None => write_csv(&rows, io::stdout().lock())?,
    }
    io::stdout().flush()?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sopot { value, p } => cmd_sopot(value, p),
        Command::Decompose { matrix, out } => cmd_decompose(matrix, out),
        Command::Experiment { config, out } => cmd_experiment(config, out),
    }
}
