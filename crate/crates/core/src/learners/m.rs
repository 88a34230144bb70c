//! Chains of `q` perfect-matching stages of scaled ±1 blocks.

use num_rational::Rational64;

use super::{initial_code, mix_columns, orthonormal_code, LearnConfig, Matcher, Recorder, Trained};
use crate::error::{contract, Result};
use crate::factors::{catalog_b, Factor, Family, TransformChain, G1_COUNT};
use crate::linalg::{Dataset, Matrix};
use crate::matching::{exact_matching, greedy_matching, PairWeights};
use crate::scalar::Real;
use crate::scoring::b_scores_from_z;

/// Edge weights `−min_t C^(t)_ij` over the eight scaled blocks, tagged with the argmin.
pub fn stage_weights<T: Real>(z: &Matrix<T>) -> PairWeights {
    PairWeights::from_fn(z.rows(), |i, j| {
        let c = b_scores_from_z(z, i, j);
        let mut best = (c[0], 1u8);
        for (t, &score) in c.iter().enumerate().take(G1_COUNT as usize).skip(1) {
            if score < best.0 {
                best = (score, t as u8 + 1);
            }
        }
        (-best.0.to_f64_lossy(), best.1)
    })
}

/// Appends `q` stages greedily to the code `x` and returns the chain.
fn build_stages<T: Real>(
    y: &Matrix<T>,
    x: &Matrix<T>,
    q: usize,
    matcher: Matcher,
    rec: &mut Recorder<T>,
) -> Result<TransformChain<T>> {
    let n = y.rows();
    let mut z = y.mul_transpose(x)?;
    let mut obj = y.sub(x)?.frobenius_sq();
    let mut stages = Vec::with_capacity(q);
    for _ in 0..q {
        let weights = stage_weights(&z);
        let pairs = match matcher {
            Matcher::Exact => exact_matching(&weights)?,
            Matcher::Greedy => greedy_matching(&weights)?,
        };
        let mut variants = Vec::with_capacity(pairs.len());
        for &(i, j) in &pairs {
            let t = weights.tag(i, j);
            obj = obj + b_scores_from_z(&z, i, j)[t as usize - 1];
            variants.push(t);
        }
        for (&(i, j), &t) in pairs.iter().zip(&variants) {
            let blk = catalog_b(t).to_real::<T>();
            mix_columns(&mut z, &[i, j], |a, b| blk[a][b]);
        }
        rec.push(obj);
        stages.push(Factor::MStage { pairs, variants });
    }
    TransformChain::new(n, Family::M, stages, Rational64::new(-(q as i64), 2))
}

/// Builds `q = cfg.m` stages, each the matching that most lowers the objective.
///
/// Stage scores are read from `Z = Y·(D·X)ᵀ`, which is updated by column
/// mixing after every stage. With `K > 1` the construction is repeated
/// from the latest code and the best result is returned.
pub fn learn_m<T: Real>(data: &Dataset<T>, cfg: &LearnConfig) -> Result<Trained<T>> {
    let y = data.y();
    let n = data.dim();
    cfg.check(n)?;
    if n % 2 == 1 {
        return Err(contract(format!("M chains need an even dimension, got {n}")));
    }
    let mut rec = Recorder::new(y)?;
    let mut x = initial_code(y, cfg.s)?;
    rec.push(y.sub(&x)?.frobenius_sq());
    let mut best: Option<(T, TransformChain<T>, Matrix<T>)> = None;
    for _ in 0..cfg.k_iters {
        let chain = build_stages(y, &x, cfg.m, cfg.matcher, &mut rec)?;
        x = orthonormal_code(y, &chain, cfg.s)?;
        let obj = super::objective(y, &chain, &x)?;
        rec.push(obj);
        if best.as_ref().map_or(true, |b| obj < b.0) {
            best = Some((obj, chain, x.clone()));
        }
    }
    let (_, chain, x) = best.expect("K >= 1");
    rec.finish(y, chain, x, cfg.s, None, false)
}
