//! Training procedures for each transform family.
//!
//! Every learner starts from the singular basis code `X = T_s(UᵀY)` and
//! returns the chain, the code, and a [`TrainReport`].

mod b;
mod kron;
mod m;
mod o;
mod s;

use std::fmt;
use std::str::FromStr;

use crate::error::{contract, Error, Result};
use crate::factors::{Factor, TransformChain};
use crate::linalg::{left_singular_basis, Matrix};
use crate::ops::OpCount;
use crate::scalar::Real;
use crate::scoring::LocalOptimality;
use crate::sopot::Precision;
use crate::sparse::{hard_threshold, normalize_columns, omp, rescale_rows, SparseCode};

pub use b::learn_b;
pub use kron::{best_hadamard4, learn_b_kron, Hadamard4Choice};
pub use m::{learn_m, stage_weights};
pub use o::{append_o_factors, learn_o, OGrowth};
pub use s::{learn_s, s_phase_a};

/// Index pairing strategy for M-stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Matcher {
    Exact,
    Greedy,
}

impl FromStr for Matcher {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Matcher::Exact),
            "greedy" => Ok(Matcher::Greedy),
            other => Err(contract(format!("unknown matcher `{other}`"))),
        }
    }
}

impl fmt::Display for Matcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Matcher::Exact => "exact",
            Matcher::Greedy => "greedy",
        })
    }
}

/// Shared learner settings. `m` doubles as the stage count `q` for M chains.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnConfig {
    pub s: usize,
    pub m: usize,
    pub p: Precision,
    pub k_iters: usize,
    pub matcher: Matcher,
    pub seed: u64,
    /// Random 4-tuples scored per append when exhaustive search is too large.
    pub kron_samples: usize,
}

impl LearnConfig {
    pub fn new(s: usize, m: usize) -> Self {
        Self {
            s,
            m,
            p: Precision::Infinite,
            k_iters: 1,
            matcher: Matcher::Exact,
            seed: 0,
            kron_samples: 20_000,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k_iters = k;
        self
    }

    pub fn with_p(mut self, p: Precision) -> Self {
        self.p = p;
        self
    }

    pub fn with_matcher(mut self, matcher: Matcher) -> Self {
        self.matcher = matcher;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Scalings are restricted to signed powers of two exactly when `p` is finite.
    pub fn power_of_two_scalings(&self) -> bool {
        self.p.is_finite()
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.s == 0 || self.s > n {
            return Err(contract(format!("sparsity {} outside 1..={n}", self.s)));
        }
        if self.k_iters == 0 {
            return Err(contract("iteration count K must be at least 1"));
        }
        Ok(())
    }
}

/// Iteration counts used when the caller does not choose one.
pub mod default_k {
    pub const B: usize = 10;
    pub const M: usize = 1;
    pub const BKRON: usize = 1;
    pub const O: usize = 1;
    pub const S: usize = 5;
}

/// Progress and cost summary of one training run.
#[derive(Clone, Debug)]
pub struct TrainReport<T> {
    /// `‖Y − DX‖²` after every recorded sub-step.
    pub objective_trace: Vec<T>,
    /// The same trace as relative error in percent.
    pub epsilon_trace: Vec<T>,
    /// Smallest objective seen; the returned chain and code attain it.
    pub best_objective: T,
    /// Relative error of the returned pair, recomputed from scratch.
    pub final_epsilon: T,
    pub ops: OpCount,
    pub inverse_ops: OpCount,
    pub coding_bits: f64,
    /// O chains only: the row-energy certificate at the end of greedy appends.
    pub certificate: Option<LocalOptimality>,
    /// True when appends stopped before the factor budget was spent.
    pub stopped_early: bool,
}

/// Learned chain, its code, and the report.
#[derive(Clone, Debug)]
pub struct Trained<T> {
    pub chain: TransformChain<T>,
    pub code: SparseCode<T>,
    pub report: TrainReport<T>,
}

/// `‖Y − D·X‖²` evaluated through the chain.
pub fn objective<T: Real>(y: &Matrix<T>, chain: &TransformChain<T>, x: &Matrix<T>) -> Result<T> {
    let mut scratch = OpCount::ZERO;
    let dx = chain.apply(x, &mut scratch)?;
    Ok(y.sub(&dx)?.frobenius_sq())
}

/// Relative error in percent.
pub fn epsilon_of<T: Real>(obj: T, y_norm_sq: T) -> T {
    obj / y_norm_sq * T::lit(100.0)
}

fn initial_code<T: Real>(y: &Matrix<T>, s: usize) -> Result<Matrix<T>> {
    let u = left_singular_basis(y)?;
    Ok(hard_threshold(&u.transpose_mul(y)?, s)?.x)
}

/// `T_s(D⁻¹Y)` for an orthonormal chain.
fn orthonormal_code<T: Real>(y: &Matrix<T>, chain: &TransformChain<T>, s: usize) -> Result<Matrix<T>> {
    let mut scratch = OpCount::ZERO;
    let proj = chain.apply_inverse(y, &mut scratch)?;
    Ok(hard_threshold(&proj, s)?.x)
}

/// OMP against the column-normalized chain, mapped back to the raw chain.
fn omp_code<T: Real>(y: &Matrix<T>, chain: &TransformChain<T>, s: usize) -> Result<Matrix<T>> {
    let (d, dg) = normalize_columns(&chain.materialize())?;
    let mut x = omp(y, &d, s)?.x;
    rescale_rows(&mut x, &dg);
    Ok(x)
}

/// `Z ← Z·Fᵀ` for a block `F` acting on `idx`: mixes the listed columns.
fn mix_columns<T: Real>(z: &mut Matrix<T>, idx: &[usize], block: impl Fn(usize, usize) -> T) {
    let k = idx.len();
    let mut src = vec![T::zero(); k];
    for r in 0..z.rows() {
        for (a, &c) in idx.iter().enumerate() {
            src[a] = z[(r, c)];
        }
        for (a, &c) in idx.iter().enumerate() {
            z[(r, c)] = (0..k).map(|b| block(a, b) * src[b]).sum();
        }
    }
}

/// Codes `Y` against a chain: `T_s(D⁻¹Y)` when the chain is orthonormal, OMP otherwise.
pub fn code_against<T: Real>(y: &Matrix<T>, chain: &TransformChain<T>, s: usize) -> Result<SparseCode<T>> {
    if s == 0 || s > chain.n() {
        return Err(contract(format!("sparsity {s} outside 1..={}", chain.n())));
    }
    let x = if chain.is_orthonormal() {
        orthonormal_code(y, chain, s)?
    } else {
        omp_code(y, chain, s)?
    };
    Ok(SparseCode { x, s })
}

/// `Z ← Z·Fᵀ`.
fn right_mul_transpose<T: Real>(z: &mut Matrix<T>, f: &Factor<T>) {
    let mut t = z.transpose();
    f.apply_in_place(&mut t);
    *z = t.transpose();
}

/// `W ← F·W·Fᵀ` for symmetric `W`.
fn congruence<T: Real>(w: &mut Matrix<T>, f: &Factor<T>) {
    f.apply_in_place(w);
    let mut t = w.transpose();
    f.apply_in_place(&mut t);
    *w = t;
}

/// Collects trace entries and the report.
struct Recorder<T> {
    y_norm_sq: T,
    trace: Vec<T>,
}

impl<T: Real> Recorder<T> {
    fn new(y: &Matrix<T>) -> Result<Self> {
        let y_norm_sq = y.frobenius_sq();
        if y_norm_sq == T::zero() {
            return Err(contract("training data is identically zero"));
        }
        Ok(Self {
            y_norm_sq,
            trace: Vec::new(),
        })
    }

    fn push(&mut self, obj: T) {
        self.trace.push(obj);
    }

    fn best(&self) -> T {
        self.trace.iter().copied().fold(T::infinity(), T::min)
    }

    fn finish(
        self,
        y: &Matrix<T>,
        chain: TransformChain<T>,
        x: Matrix<T>,
        s: usize,
        certificate: Option<LocalOptimality>,
        stopped_early: bool,
    ) -> Result<Trained<T>> {
        let final_obj = objective(y, &chain, &x)?;
        let best_objective = self.best().min(final_obj);
        let epsilon_trace = self.trace.iter().map(|&o| epsilon_of(o, self.y_norm_sq)).collect();
        let report = TrainReport {
            objective_trace: self.trace,
            epsilon_trace,
            best_objective,
            final_epsilon: epsilon_of(final_obj, self.y_norm_sq),
            ops: chain.ops_per_vector(),
            inverse_ops: chain.inverse_ops_per_vector(),
            coding_bits: chain.coding_cost(),
            certificate,
            stopped_early,
        };
        Ok(Trained {
            chain,
            code: SparseCode { x, s },
            report,
        })
    }
}
