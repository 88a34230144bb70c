//! Chains of `m` binary orthonormal 2×2 blocks, updated one factor at a time.

use num_rational::Rational64;

use super::{initial_code, mix_columns, orthonormal_code, LearnConfig, Recorder, Trained};
use crate::error::Result;
use crate::factors::{catalog_b, Factor, Family, TransformChain, IDENTITY_VARIANT};
use crate::linalg::{Dataset, Matrix};
use crate::scalar::Real;
use crate::scoring::b_scores_from_z;

/// Best `(score, variant)` for every pair, refreshed only where `Z` moved.
struct PairCache<T> {
    n: usize,
    best: Vec<(T, u8)>,
}

impl<T: Real> PairCache<T> {
    fn new(z: &Matrix<T>) -> Self {
        let n = z.rows();
        let mut cache = Self {
            n,
            best: vec![(T::zero(), IDENTITY_VARIANT); n * n],
        };
        for i in 0..n {
            for j in i + 1..n {
                cache.rescore(z, i, j);
            }
        }
        cache
    }

    fn rescore(&mut self, z: &Matrix<T>, i: usize, j: usize) {
        let c = b_scores_from_z(z, i, j);
        let mut best = (T::zero(), IDENTITY_VARIANT);
        for (t, &score) in c.iter().enumerate().take(15) {
            if score < best.0 {
                best = (score, t as u8 + 1);
            }
        }
        self.best[i * self.n + j] = best;
    }

    fn touch(&mut self, z: &Matrix<T>, idx: &[usize]) {
        for &a in idx {
            for b in 0..self.n {
                if a != b {
                    self.rescore(z, a.min(b), a.max(b));
                }
            }
        }
    }

    /// Global argmin; ties go to the lexicographically first pair.
    fn argmin(&self) -> (T, usize, usize, u8) {
        let mut out = (T::zero(), 0, 1, IDENTITY_VARIANT);
        for i in 0..self.n {
            for j in i + 1..self.n {
                let (s, t) = self.best[i * self.n + j];
                if s < out.0 {
                    out = (s, i, j, t);
                }
            }
        }
        out
    }
}

fn block_of<T: Real>(f: &Factor<T>) -> (Vec<usize>, [[T; 2]; 2]) {
    match f {
        Factor::B { i, j, variant } => (vec![*i, *j], catalog_b(*variant).to_real()),
        _ => unreachable!("B chains hold B factors only"),
    }
}

/// Alternates factor-wise block updates with hard-threshold recoding.
///
/// Each outer iteration rebuilds `Z = Y·Xᵀ`, then visits factors `1..m`
/// in order. Factor `k` sees `Z_k = P_kᵀ·Z·Q_kᵀ` with `P_k`/`Q_k` the
/// products after/before it, so its best replacement is a table lookup.
/// The identity block is always a candidate, which keeps every sub-step
/// non-increasing.
pub fn learn_b<T: Real>(data: &Dataset<T>, cfg: &LearnConfig) -> Result<Trained<T>> {
    let y = data.y();
    let n = data.dim();
    cfg.check(n)?;
    let mut rec = Recorder::new(y)?;
    let y_norm_sq = y.frobenius_sq();
    let mut x = initial_code(y, cfg.s)?;
    let identity = Factor::B {
        i: 0,
        j: 1,
        variant: IDENTITY_VARIANT,
    };
    let mut factors = vec![identity; if n >= 2 { cfg.m } else { 0 }];
    rec.push(y.sub(&x)?.frobenius_sq());
    let mut chain = TransformChain::new(n, Family::B, factors.clone(), Rational64::from_integer(0))?;
    let m = factors.len();
    for _ in 0..cfg.k_iters {
        if m > 0 {
            let x_norm_sq = x.frobenius_sq();
            let mut z = y.mul_transpose(&x)?;
            for f in factors[1..].iter().rev() {
                f.apply_inverse_in_place(&mut z);
            }
            let mut cache = PairCache::new(&z);
            for k in 0..m {
                let (score, i, j, t) = cache.argmin();
                factors[k] = Factor::B { i, j, variant: t };
                rec.push(y_norm_sq + x_norm_sq - T::lit(2.0) * z.trace() + score);
                if k + 1 < m {
                    let (next_idx, _) = block_of(&factors[k + 1]);
                    factors[k + 1].apply_in_place(&mut z);
                    let (idx, blk) = block_of(&factors[k]);
                    mix_columns(&mut z, &idx, |a, b| blk[a][b]);
                    let mut touched = next_idx;
                    touched.extend(idx);
                    touched.sort_unstable();
                    touched.dedup();
                    cache.touch(&z, &touched);
                }
            }
        }
        chain = TransformChain::new(n, Family::B, factors.clone(), Rational64::from_integer(0))?;
        x = orthonormal_code(y, &chain, cfg.s)?;
        rec.push(super::objective(y, &chain, &x)?);
    }
    rec.finish(y, chain, x, cfg.s, None, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::testutil::*;
    use crate::learners::{default_k, objective};
    use crate::linalg::Dataset;

    #[test]
    fn trace_is_non_increasing() {
        for seed in 0..5 {
            let y = random_data(seed, 8, 64);
            let out = learn_b(&Dataset::new(y).unwrap(), &LearnConfig::new(2, 16).with_k(5)).unwrap();
            assert_eq!(out.report.objective_trace.len(), 1 + 5 * 17);
            assert_non_increasing(&out.report.objective_trace);
        }
    }

    #[test]
    fn recorded_substeps_match_dense_objective() {
        let y = random_data(9, 6, 30);
        let data = Dataset::new(y.clone()).unwrap();
        let one = learn_b(&data, &LearnConfig::new(2, 4).with_k(1)).unwrap();
        // after the sweep, before recoding, the objective uses the initial code
        let x0 = initial_code(&y, 2).unwrap();
        let dense = objective(&y, &one.chain, &x0).unwrap();
        let trace = &one.report.objective_trace;
        assert!((trace[trace.len() - 2] - dense).abs() < 1e-9 * dense);
    }

    #[test]
    fn zero_budget_thresholds_the_data() {
        let y = random_data(1, 6, 20);
        let out = learn_b(&Dataset::new(y.clone()).unwrap(), &LearnConfig::new(2, 0)).unwrap();
        // the identity chain recodes by thresholding the data itself
        let xt = crate::sparse::hard_threshold(&y, 2).unwrap().x;
        let expect = y.sub(&xt).unwrap().frobenius_sq() / y.frobenius_sq() * 100.0;
        assert!((out.report.final_epsilon - expect).abs() < 1e-10);
        assert!(out.chain.is_empty());
    }

    #[test]
    fn planted_chain_is_fit_exactly_with_full_budget() {
        let n = 6;
        let x = sparse_code(3, n, 40, n);
        let planted = TransformChain::<f64>::new(
            n,
            Family::B,
            vec![Factor::B { i: 1, j: 4, variant: 2 }],
            Rational64::from_integer(0),
        )
        .unwrap();
        let y = planted.materialize().matmul(&x).unwrap();
        let out = learn_b(&Dataset::new(y).unwrap(), &LearnConfig::new(n, 1).with_k(default_k::B)).unwrap();
        assert!(out.report.best_objective < 1e-10);
        let d = out.chain.materialize();
        let g = d.transpose_mul(&d).unwrap();
        assert!(g.sub(&Matrix::identity(n)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn single_factor_update_is_the_best_block() {
        // with m = 1 the first sub-step equals the exhaustive best single block
        let y = random_data(4, 5, 25);
        let x = initial_code(&y, 2).unwrap();
        let mut best = y.sub(&x).unwrap().frobenius_sq();
        for i in 0..5 {
            for j in i + 1..5 {
                for t in 1..=16u8 {
                    let mut bx = x.clone();
                    Factor::<f64>::B { i, j, variant: t }.apply_in_place(&mut bx);
                    best = best.min(y.sub(&bx).unwrap().frobenius_sq());
                }
            }
        }
        let out = learn_b(&Dataset::new(y).unwrap(), &LearnConfig::new(2, 1)).unwrap();
        assert!((out.report.objective_trace[1] - best).abs() < 1e-10 * best);
    }
}
