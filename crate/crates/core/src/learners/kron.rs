//! Greedy chains of orthonormal 4×4 Hadamard-type blocks.

use num_rational::Rational64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{initial_code, mix_columns, orthonormal_code, LearnConfig, Recorder, Trained};
use crate::error::{contract, Result};
use crate::factors::{catalog_hadamard4, permutations4, Factor, Family, Signs4, TransformChain, H4};
use crate::linalg::{Dataset, Matrix};
use crate::scalar::Real;

/// Best catalog block on one index tuple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hadamard4Choice<T> {
    pub idx: [usize; 4],
    pub variant: u16,
    /// Objective change `2 tr Z̃ − 2 Σ B̃_ab Z̃_ab`.
    pub score: T,
}

fn best_assignment(m: &[[f64; 4]; 4]) -> (f64, [usize; 4]) {
    let mut best = (f64::NEG_INFINITY, [0, 1, 2, 3]);
    for pi in permutations4() {
        let v: f64 = (0..4).map(|a| m[a][pi[a]].abs()).sum();
        if v > best.0 {
            best = (v, pi);
        }
    }
    best
}

fn sign_of(v: f64) -> i8 {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

/// Best block of the catalog on `idx` for the correlation table `z`.
///
/// Every entry is `½·D_σ·P_π·H₄` or `½·H₄·P_π·D_σ`, so the inner product
/// with `Z̃` splits into a signed assignment problem over 24 permutations
/// per side, with the signs chosen to match.
pub fn best_hadamard4<T: Real>(z: &Matrix<T>, idx: [usize; 4]) -> Result<Hadamard4Choice<T>> {
    if idx.windows(2).any(|w| w[0] >= w[1]) || idx[3] >= z.rows() {
        return Err(contract(format!("Hadamard4 indices {idx:?} not increasing below {}", z.rows())));
    }
    let mut zt = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            zt[a][b] = z[(idx[a], idx[b])].to_f64_lossy();
        }
    }
    // row a of a left candidate is σ_a·H4[π(a)]
    let mut left = [[0.0; 4]; 4];
    // column c of a right candidate is σ_c·H4[:, π⁻¹(c)]; store as [c][k]
    let mut right = [[0.0; 4]; 4];
    for a in 0..4 {
        for k in 0..4 {
            left[a][k] = 0.5 * (0..4).map(|b| zt[a][b] * H4[k][b] as f64).sum::<f64>();
            right[a][k] = 0.5 * (0..4).map(|r| H4[r][k] as f64 * zt[r][a]).sum::<f64>();
        }
    }
    let (lv, lpi) = best_assignment(&left);
    let (rv, rpi) = best_assignment(&right);
    let mut signs: Signs4 = [[0; 4]; 4];
    let inner = if lv >= rv {
        for r in 0..4 {
            let s = sign_of(left[r][lpi[r]]);
            for c in 0..4 {
                signs[r][c] = s * H4[lpi[r]][c];
            }
        }
        lv
    } else {
        // rpi maps column c to H4 column rpi[c]
        for c in 0..4 {
            let s = sign_of(right[c][rpi[c]]);
            for r in 0..4 {
                signs[r][c] = s * H4[r][rpi[c]];
            }
        }
        rv
    };
    let variant = catalog_hadamard4()
        .variant_of(&signs)
        .ok_or_else(|| contract("assignment produced a block outside the catalog"))?;
    let tr: T = idx.iter().map(|&i| z[(i, i)]).sum();
    Ok(Hadamard4Choice {
        idx,
        variant,
        score: T::lit(2.0) * tr - T::lit(2.0 * inner),
    })
}

fn binomial4(n: usize) -> usize {
    if n < 4 {
        0
    } else {
        n * (n - 1) * (n - 2) * (n - 3) / 24
    }
}

fn all_tuples(n: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(binomial4(n));
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    out
}

fn sampled_tuples(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<[usize; 4]> {
    (0..count)
        .map(|_| {
            let mut t = [0; 4];
            for (slot, v) in t.iter_mut().zip(sample(rng, n, 4).iter()) {
                *slot = v;
            }
            t.sort_unstable();
            t
        })
        .collect()
}

/// Best choice over the candidate tuples; ties go to the earliest tuple.
fn search<T: Real>(z: &Matrix<T>, tuples: &[[usize; 4]]) -> Result<Option<Hadamard4Choice<T>>> {
    let scored: Vec<Hadamard4Choice<T>> = tuples
        .par_iter()
        .map(|&t| best_hadamard4(z, t))
        .collect::<Result<_>>()?;
    Ok(scored.into_iter().reduce(|a, b| if b.score < a.score { b } else { a }))
}

/// Largest dimension searched exhaustively.
const EXHAUSTIVE_MAX_N: usize = 16;

fn touching_tuples(n: usize, prev: [usize; 4]) -> Vec<[usize; 4]> {
    all_tuples(n)
        .into_iter()
        .filter(|t| t.iter().any(|v| prev.contains(v)))
        .collect()
}

struct Candidates {
    n: usize,
    exhaustive: Option<Vec<[usize; 4]>>,
    samples: usize,
    rng: ChaCha8Rng,
}

impl Candidates {
    fn new(n: usize, cfg: &LearnConfig) -> Self {
        let exhaustive = (n <= EXHAUSTIVE_MAX_N).then(|| all_tuples(n));
        Self {
            n,
            exhaustive,
            samples: cfg.kron_samples,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        }
    }

    /// Every tuple for small `n`; otherwise a uniform sample plus all
    /// tuples sharing an index with `near`.
    fn draw(&mut self, near: Option<[usize; 4]>) -> Vec<[usize; 4]> {
        match &self.exhaustive {
            Some(all) => all.clone(),
            None => {
                let mut t = Vec::with_capacity(self.samples);
                if let Some(prev) = near {
                    t.extend(touching_tuples(self.n, prev));
                }
                t.extend(sampled_tuples(self.n, self.samples, &mut self.rng));
                t
            }
        }
    }
}

fn block_fn(variant: u16) -> impl Fn(usize, usize) -> f64 {
    let s = *catalog_hadamard4().block(variant);
    move |a, b| 0.5 * s[a][b] as f64
}

fn mix<T: Real>(z: &mut Matrix<T>, idx: [usize; 4], variant: u16) {
    let f = block_fn(variant);
    mix_columns(z, &idx, |a, b| T::lit(f(a, b)));
}

/// Greedy appends of the best block, then factor-wise refinement sweeps.
///
/// The first pass appends up to `m` blocks, stopping once no candidate
/// lowers the objective. With `K > 1`, later passes revisit each factor
/// against a fresh code, keeping it unless a candidate is strictly better.
/// Tuples are enumerated for `n ≤ 16`. Above that each search scores
/// `kron_samples` uniform tuples plus every tuple sharing an index with the
/// previous block.
pub fn learn_b_kron<T: Real>(data: &Dataset<T>, cfg: &LearnConfig) -> Result<Trained<T>> {
    let y = data.y();
    let n = data.dim();
    cfg.check(n)?;
    let mut rec = Recorder::new(y)?;
    let y_norm_sq = y.frobenius_sq();
    let mut x = initial_code(y, cfg.s)?;
    let mut obj = y.sub(&x)?.frobenius_sq();
    rec.push(obj);
    let mut cands = Candidates::new(n, cfg);
    let mut factors: Vec<Factor<T>> = Vec::new();
    let mut stopped_early = false;
    if n >= 4 {
        let mut z = y.mul_transpose(&x)?;
        while factors.len() < cfg.m {
            let near = factors.last().map(|f| match f {
                Factor::Hadamard4 { idx, .. } => *idx,
                _ => unreachable!("Kronecker chains hold Hadamard4 factors only"),
            });
            let tuples = cands.draw(near);
            match search(&z, &tuples)? {
                Some(c) if c.score < T::zero() => {
                    mix(&mut z, c.idx, c.variant);
                    obj = obj + c.score;
                    rec.push(obj);
                    factors.push(Factor::Hadamard4 {
                        idx: c.idx,
                        variant: c.variant,
                    });
                }
                _ => {
                    stopped_early = true;
                    break;
                }
            }
        }
    } else if cfg.m > 0 {
        stopped_early = true;
    }
    let mut chain = TransformChain::new(n, Family::BKron, factors.clone(), Rational64::from_integer(0))?;
    x = orthonormal_code(y, &chain, cfg.s)?;
    rec.push(super::objective(y, &chain, &x)?);

    let m = factors.len();
    for _ in 1..cfg.k_iters {
        if m == 0 {
            break;
        }
        let x_norm_sq = x.frobenius_sq();
        let mut z = y.mul_transpose(&x)?;
        for f in factors[1..].iter().rev() {
            f.apply_inverse_in_place(&mut z);
        }
        for k in 0..m {
            let (cur_idx, cur_var) = match factors[k] {
                Factor::Hadamard4 { idx, variant } => (idx, variant),
                _ => unreachable!("Kronecker chains hold Hadamard4 factors only"),
            };
            let f = block_fn(cur_var);
            let cur_score = crate::scoring::block_score_unchecked(&z, &cur_idx, |a, b| T::lit(f(a, b)));
            let mut tuples = cands.draw(Some(cur_idx));
            tuples.retain(|t| *t != cur_idx);
            let mut pick = (cur_score, cur_idx, cur_var);
            if let Some(c) = search(&z, &tuples)? {
                if c.score < pick.0 {
                    pick = (c.score, c.idx, c.variant);
                }
            }
            // the best block on the current tuple may beat the current variant
            let own = best_hadamard4(&z, cur_idx)?;
            if own.score < pick.0 {
                pick = (own.score, own.idx, own.variant);
            }
            factors[k] = Factor::Hadamard4 {
                idx: pick.1,
                variant: pick.2,
            };
            rec.push(y_norm_sq + x_norm_sq - T::lit(2.0) * z.trace() + pick.0);
            if k + 1 < m {
                factors[k + 1].apply_in_place(&mut z);
                mix(&mut z, pick.1, pick.2);
            }
        }
        chain = TransformChain::new(n, Family::BKron, factors.clone(), Rational64::from_integer(0))?;
        x = orthonormal_code(y, &chain, cfg.s)?;
        rec.push(super::objective(y, &chain, &x)?);
    }
    rec.finish(y, chain, x, cfg.s, None, stopped_early)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::objective;
    use crate::learners::testutil::*;
    use crate::scoring::block_score_unchecked;
    use rand::Rng;

    fn brute<T: Real>(z: &Matrix<T>, idx: [usize; 4]) -> T {
        let cat = catalog_hadamard4();
        (0..cat.len() as u16)
            .map(|v| {
                let s = cat.block(v);
                block_score_unchecked(z, &idx, |a, b| T::lit(0.5 * s[a][b] as f64))
            })
            .fold(T::infinity(), T::min)
    }

    #[test]
    fn fast_search_matches_catalog_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let z = Matrix::<f64>::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
            let mut t = [0; 4];
            for (slot, v) in t.iter_mut().zip(sample(&mut rng, 6, 4).iter()) {
                *slot = v;
            }
            t.sort_unstable();
            let fast = best_hadamard4(&z, t).unwrap();
            assert!((fast.score - brute(&z, t)).abs() < 1e-12);
            let s = catalog_hadamard4().block(fast.variant);
            let direct = block_score_unchecked(&z, &t, |a, b| 0.5 * s[a][b] as f64);
            assert!((direct - fast.score).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unsorted_tuples() {
        let z = Matrix::<f64>::identity(5);
        assert!(best_hadamard4(&z, [0, 2, 1, 3]).is_err());
        assert!(best_hadamard4(&z, [0, 1, 2, 5]).is_err());
    }

    #[test]
    fn greedy_trace_tracks_dense_objective() {
        let y = random_data(2, 8, 40);
        let out = learn_b_kron(&Dataset::new(y.clone()).unwrap(), &LearnConfig::new(2, 4)).unwrap();
        assert_non_increasing(&out.report.objective_trace);
        let x0 = initial_code(&y, 2).unwrap();
        let dense = objective(&y, &out.chain, &x0).unwrap();
        let trace = &out.report.objective_trace;
        assert!((trace[trace.len() - 2] - dense).abs() < 1e-9 * dense);
    }

    #[test]
    fn refinement_sweeps_do_not_increase() {
        for seed in 0..3 {
            let y = random_data(seed, 8, 50);
            let cfg = LearnConfig::new(3, 5).with_k(3);
            let out = learn_b_kron(&Dataset::new(y).unwrap(), &cfg).unwrap();
            assert_non_increasing(&out.report.objective_trace);
        }
    }

    #[test]
    fn sampled_search_is_seeded() {
        let y = random_data(7, 20, 30);
        let mut cfg = LearnConfig::new(2, 3).with_seed(11);
        cfg.kron_samples = 50;
        let a = learn_b_kron(&Dataset::new(y.clone()).unwrap(), &cfg).unwrap();
        let b = learn_b_kron(&Dataset::new(y).unwrap(), &cfg).unwrap();
        assert_eq!(a.chain, b.chain);
    }
}
