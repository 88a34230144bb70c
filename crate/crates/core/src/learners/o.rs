//! Greedy chains of unnormalized ±1 blocks.

use num_rational::Rational64;

use super::{congruence, initial_code, omp_code, right_mul_transpose, LearnConfig, Recorder, Trained};
use crate::error::{contract, Result};
use crate::factors::{Factor, Family, TransformChain};
use crate::linalg::{Dataset, Matrix};
use crate::scalar::Real;
use crate::scoring::{o_local_optimality, o_scores_from, LocalOptimality};

/// Result of greedy appends onto a fixed code.
#[derive(Clone, Debug)]
pub struct OGrowth<T> {
    pub factors: Vec<Factor<T>>,
    /// `D·X` for the appended chain.
    pub image: Matrix<T>,
    /// Objective before the first append and after each one.
    pub trace: Vec<T>,
    pub certificate: LocalOptimality,
    /// True when no block lowered the objective before `m` appends.
    pub stopped_early: bool,
}

/// Appends up to `m` blocks to `x`, each the one that most lowers `‖Y − O·X‖²`.
///
/// Stops as soon as no candidate gives a decrease larger than `1e-12·‖Y‖²`.
pub fn append_o_factors<T: Real>(y: &Matrix<T>, x: &Matrix<T>, m: usize) -> Result<OGrowth<T>> {
    if y.shape() != x.shape() {
        return Err(contract("data and code shapes differ"));
    }
    let n = y.rows();
    let tol = T::lit(1e-12) * y.frobenius_sq();
    let mut image = x.clone();
    let mut z = y.mul_transpose(&image)?;
    let mut w = image.mul_transpose(&image)?;
    let mut obj = y.sub(&image)?.frobenius_sq();
    let mut trace = vec![obj];
    let mut factors = Vec::new();
    let mut stopped_early = false;
    while factors.len() < m {
        let mut best = (T::zero(), 0, 0, 0u8);
        for i in 0..n {
            for j in i + 1..n {
                for (t, &h) in o_scores_from(&z, &w, i, j).iter().enumerate() {
                    if h < best.0 {
                        best = (h, i, j, t as u8 + 1);
                    }
                }
            }
        }
        if best.0 >= -tol {
            stopped_early = true;
            break;
        }
        let f = Factor::O {
            i: best.1,
            j: best.2,
            variant: best.3,
        };
        f.apply_in_place(&mut image);
        right_mul_transpose(&mut z, &f);
        congruence(&mut w, &f);
        obj = obj + best.0;
        trace.push(obj);
        factors.push(f);
    }
    let certificate = o_local_optimality(y, &image)?;
    Ok(OGrowth {
        factors,
        image,
        trace,
        certificate,
        stopped_early,
    })
}

/// Greedy O chain with an OMP code.
///
/// Each of the `K` rounds grows a chain from the latest code, records the
/// row-energy certificate at the end of the appends, and recodes by OMP
/// against the column-normalized chain. The best pair seen is returned,
/// including the pre-recode one.
pub fn learn_o<T: Real>(data: &Dataset<T>, cfg: &LearnConfig) -> Result<Trained<T>> {
    let y = data.y();
    let n = data.dim();
    cfg.check(n)?;
    let mut rec = Recorder::new(y)?;
    let mut x = initial_code(y, cfg.s)?;
    let identity = TransformChain::new(n, Family::O, Vec::new(), Rational64::from_integer(0))?;
    let init = y.sub(&x)?.frobenius_sq();
    rec.push(init);
    let mut best = (init, identity, x.clone(), None, false);
    for _ in 0..cfg.k_iters {
        let growth = append_o_factors(y, &x, cfg.m)?;
        for &v in &growth.trace[1..] {
            rec.push(v);
        }
        let chain = TransformChain::new(n, Family::O, growth.factors, Rational64::from_integer(0))?;
        let grown = *growth.trace.last().expect("trace holds the start");
        let cert = Some(growth.certificate);
        if grown < best.0 {
            best = (grown, chain.clone(), x.clone(), cert, growth.stopped_early);
        }
        x = omp_code(y, &chain, cfg.s)?;
        let obj = super::objective(y, &chain, &x)?;
        rec.push(obj);
        if obj < best.0 {
            best = (obj, chain, x.clone(), cert, growth.stopped_early);
        }
    }
    let (_, chain, x, cert, stopped) = best;
    rec.finish(y, chain, x, cfg.s, cert, stopped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::objective;
    use crate::learners::testutil::*;

    #[test]
    fn exact_code_needs_no_factors() {
        let y = random_data(1, 6, 20);
        let g = append_o_factors(&y, &y, 10).unwrap();
        assert!(g.factors.is_empty());
        assert!(g.stopped_early);
    }

    #[test]
    fn appended_trace_matches_dense_objective() {
        let y = random_data(2, 8, 40);
        let x = initial_code(&y, 2).unwrap();
        let g = append_o_factors(&y, &x, 6).unwrap();
        assert_non_increasing(&g.trace);
        let chain = TransformChain::new(8, Family::O, g.factors.clone(), Rational64::from_integer(0)).unwrap();
        let dense = objective(&y, &chain, &x).unwrap();
        assert!((g.trace.last().unwrap() - dense).abs() < 1e-9 * dense);
        let mut img = x.clone();
        for f in &g.factors {
            f.apply_in_place(&mut img);
        }
        assert!(img.sub(&g.image).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn greedy_step_is_the_best_single_block() {
        let y = random_data(3, 5, 25);
        let x = initial_code(&y, 2).unwrap();
        let g = append_o_factors(&y, &x, 1).unwrap();
        let mut best = y.sub(&x).unwrap().frobenius_sq();
        for i in 0..5 {
            for j in i + 1..5 {
                for t in 1..=8u8 {
                    let mut ox = x.clone();
                    Factor::<f64>::O { i, j, variant: t }.apply_in_place(&mut ox);
                    best = best.min(y.sub(&ox).unwrap().frobenius_sq());
                }
            }
        }
        assert!((g.trace[1] - best).abs() < 1e-10 * best);
    }

    #[test]
    fn report_carries_certificate_and_best_pair() {
        let y = random_data(4, 8, 40);
        let out = learn_o(&Dataset::new(y.clone()).unwrap(), &LearnConfig::new(3, 8).with_k(2)).unwrap();
        assert!(out.report.certificate.is_some());
        assert!(out.code.max_column_support() <= 3);
        let recomputed = objective(&y, &out.chain, &out.code.x).unwrap();
        assert!((recomputed - out.report.best_objective).abs() < 1e-9 * recomputed);
    }
}
