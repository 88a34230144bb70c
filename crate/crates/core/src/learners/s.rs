//! Chains of shears and scalings with optional SOPOT coefficients.

use num_rational::Rational64;

use super::{congruence, initial_code, omp_code, right_mul_transpose, LearnConfig, Recorder, Trained};
use crate::error::{contract, Result};
use crate::factors::{catalog_b, Coeff, Factor, Family, ShearSide, TransformChain};
use crate::linalg::{Dataset, Matrix};
use crate::scalar::Real;
use crate::scoring::{
    rank_one_decrease, scaling_init_from, scaling_update_from, shear_init_change, shear_init_from,
};
use crate::sopot::{quantize, Precision};

fn shear_coeff<T: Real>(v: T, p: Precision) -> Result<Coeff<T>> {
    match p {
        Precision::Terms(k) => Ok(Coeff::Sopot(quantize(v, k)?)),
        Precision::Infinite => Ok(Coeff::Raw(v)),
    }
}

fn side_of(lower: bool) -> ShearSide {
    if lower {
        ShearSide::Lower
    } else {
        ShearSide::Upper
    }
}

/// Greedy appends of shears and scalings onto a fixed code.
///
/// Candidates are ranked by their unquantized shear score and projected
/// scaling score; the winner's coefficient is then quantized to `cfg.p`
/// terms. Returns the chain and the objective after each append, starting
/// with `‖Y − X‖²`.
pub fn s_phase_a<T: Real>(y: &Matrix<T>, x: &Matrix<T>, cfg: &LearnConfig) -> Result<(TransformChain<T>, Vec<T>)> {
    if y.shape() != x.shape() {
        return Err(contract("data and code shapes differ"));
    }
    let n = y.rows();
    let pow2 = cfg.power_of_two_scalings();
    let tol = T::lit(1e-12) * y.frobenius_sq();
    let mut z = y.mul_transpose(x)?;
    let mut w = x.mul_transpose(x)?;
    let mut obj = y.sub(x)?.frobenius_sq();
    let mut trace = vec![obj];
    let mut chain = TransformChain::new(n, Family::S, Vec::new(), Rational64::from_integer(0))?;
    while chain.len() < cfg.m {
        // (score, i, j, Some(lower) for shears or None for a scaling, raw coefficient)
        let mut best: (T, usize, usize, Option<bool>, T) = (T::zero(), 0, 0, None, T::zero());
        let mut best_scale = None;
        for i in 0..n {
            let sc = scaling_init_from(&z, &w, i, pow2);
            if sc.score < best.0 {
                best = (sc.score, i, i, None, T::zero());
                best_scale = Some(sc.coeff);
            }
            for j in i + 1..n {
                let sh = shear_init_from(&z, &w, i, j);
                if sh.d_lower < best.0 {
                    best = (sh.d_lower, i, j, Some(true), sh.b);
                }
                if sh.d_upper < best.0 {
                    best = (sh.d_upper, i, j, Some(false), sh.c);
                }
            }
        }
        if best.0 >= -tol {
            break;
        }
        let (f, change) = match best.3 {
            Some(lower) => {
                let coeff = shear_coeff(best.4, cfg.p)?;
                let change = shear_init_change(&z, &w, best.1, best.2, lower, coeff.value());
                let f = Factor::Shear {
                    i: best.1,
                    j: best.2,
                    side: side_of(lower),
                    coeff,
                };
                (f, change)
            }
            None => (
                Factor::Scaling {
                    i: best.1,
                    scale: best_scale.expect("scaling candidate carries its coefficient"),
                },
                best.0,
            ),
        };
        if change >= -tol {
            break;
        }
        right_mul_transpose(&mut z, &f);
        congruence(&mut w, &f);
        obj = obj + change;
        trace.push(obj);
        chain.push(f)?;
    }
    Ok((chain, trace))
}

/// `A ← A·F⁻¹`.
fn right_mul_inverse<T: Real>(a: &mut Matrix<T>, f: &Factor<T>) -> Result<()> {
    let rows = a.rows();
    match f {
        Factor::Shear { i, j, side, coeff } => {
            let v = coeff.value();
            let (dst, src) = match side {
                ShearSide::Lower => (*i, *j),
                ShearSide::Upper => (*j, *i),
            };
            for r in 0..rows {
                let s = a[(r, src)];
                a[(r, dst)] = a[(r, dst)] - v * s;
            }
        }
        Factor::Scaling { i, scale } => {
            let v = scale.value();
            for r in 0..rows {
                a[(r, *i)] = a[(r, *i)] / v;
            }
        }
        Factor::B { i, j, variant } => {
            let blk = catalog_b(*variant).to_real::<T>();
            super::mix_columns(a, &[*i, *j], |p, q| blk[p][q]);
        }
        other => return Err(contract(format!("{} factor cannot appear in an S chain", other.kind()))),
    }
    Ok(())
}

/// `‖Y − A·X‖²` from `Z = Y·Xᵀ`, `W = X·Xᵀ`.
fn fit_from_tables<T: Real>(y_norm_sq: T, a: &Matrix<T>, z: &Matrix<T>, w: &Matrix<T>) -> Result<T> {
    let cross: T = a.as_slice().iter().zip(z.as_slice()).map(|(&p, &q)| p * q).sum();
    let ata = a.transpose_mul(a)?;
    let quad: T = ata.as_slice().iter().zip(w.as_slice()).map(|(&p, &q)| p * q).sum();
    Ok(y_norm_sq - T::lit(2.0) * cross + quad)
}

/// Decrease achieved by the factor `f` in the slot whose residual is `r_sq`.
fn slot_gain<T: Real>(
    f: &Factor<T>,
    m: &Matrix<T>,
    a_sq: &[T],
    x_sq: &[T],
    ctx: (T, &Matrix<T>, &Matrix<T>, &Matrix<T>, T),
) -> Result<T> {
    Ok(match f {
        Factor::Shear { i, j, side, coeff } => match side {
            ShearSide::Lower => rank_one_decrease(m[(*j, *i)], a_sq[*j] * x_sq[*i], coeff.value()),
            ShearSide::Upper => rank_one_decrease(m[(*i, *j)], a_sq[*i] * x_sq[*j], coeff.value()),
        },
        Factor::Scaling { i, scale } => {
            rank_one_decrease(m[(*i, *i)], a_sq[*i] * x_sq[*i], scale.value() - T::one())
        }
        Factor::B { i, j, variant } => {
            let (y_norm_sq, a, z, w, r_sq) = ctx;
            let mut ab = a.clone();
            let blk = catalog_b(*variant).to_real::<T>();
            // A·B = A·(Bᵀ)ᵀ, and Bᵀ is the transpose block
            super::mix_columns(&mut ab, &[*i, *j], |p, q| blk[q][p]);
            r_sq - fit_from_tables(y_norm_sq, &ab, z, w)?
        }
        other => return Err(contract(format!("{} factor cannot appear in an S chain", other.kind()))),
    })
}

/// Best quantized replacement for one slot: `(gain, factor)`.
fn best_replacement<T: Real>(
    m: &Matrix<T>,
    a_sq: &[T],
    x_sq: &[T],
    cfg: &LearnConfig,
) -> Result<Option<(T, Factor<T>)>> {
    let n = m.rows();
    let pow2 = cfg.power_of_two_scalings();
    let mut best: Option<(T, Factor<T>)> = None;
    let mut offer = |gain: T, f: Factor<T>| {
        if gain > T::zero() && best.as_ref().map_or(true, |b| gain > b.0) {
            best = Some((gain, f));
        }
    };
    for i in 0..n {
        let sc = scaling_update_from(m[(i, i)], a_sq[i] * x_sq[i], pow2);
        if sc.score > T::zero() {
            offer(sc.score, Factor::Scaling { i, scale: sc.coeff });
        }
        for j in i + 1..n {
            for lower in [true, false] {
                let (g, h) = if lower {
                    (m[(j, i)], a_sq[j] * x_sq[i])
                } else {
                    (m[(i, j)], a_sq[i] * x_sq[j])
                };
                if h <= T::zero() || g == T::zero() {
                    continue;
                }
                let coeff = shear_coeff(g / h, cfg.p)?;
                let gain = rank_one_decrease(g, h, coeff.value());
                offer(
                    gain,
                    Factor::Shear {
                        i,
                        j,
                        side: side_of(lower),
                        coeff,
                    },
                );
            }
        }
    }
    Ok(best)
}

struct Best<T> {
    obj: T,
    chain: TransformChain<T>,
    x: Matrix<T>,
}

impl<T: Real> Best<T> {
    fn offer(&mut self, obj: T, chain: &TransformChain<T>, x: &Matrix<T>) {
        if obj < self.obj {
            self.obj = obj;
            self.chain = chain.clone();
            self.x = x.clone();
        }
    }
}

/// One pass over all slots; returns nothing but updates `chain` in place.
fn sweep<T: Real>(
    y: &Matrix<T>,
    x: &Matrix<T>,
    chain: &mut TransformChain<T>,
    cfg: &LearnConfig,
    rec: &mut Recorder<T>,
    best: &mut Best<T>,
) -> Result<()> {
    let m = chain.len();
    let y_norm_sq = y.frobenius_sq();
    let mut z = y.mul_transpose(x)?;
    let mut w = x.mul_transpose(x)?;
    let mut a = chain.materialize();
    right_mul_inverse(&mut a, &chain.factors()[0])?;
    for k in 0..m {
        let r_sq = fit_from_tables(y_norm_sq, &a, &z, &w)?;
        // M = Aᵀ(Z − A·W) = Aᵀ·R·Xᵀ
        let p = z.sub(&a.matmul(&w)?)?;
        let mm = a.transpose_mul(&p)?;
        let a_sq: Vec<T> = (0..a.cols()).map(|c| (0..a.rows()).map(|r| a[(r, c)] * a[(r, c)]).sum()).collect();
        let x_sq: Vec<T> = (0..w.rows()).map(|i| w[(i, i)]).collect();
        let current = chain.factors()[k].clone();
        let keep = slot_gain(&current, &mm, &a_sq, &x_sq, (y_norm_sq, &a, &z, &w, r_sq))?;
        let mut gain = keep;
        if let Some((g, f)) = best_replacement(&mm, &a_sq, &x_sq, cfg)? {
            if g > keep {
                chain.replace(k, f)?;
                gain = g;
            }
        }
        let obj = r_sq - gain;
        rec.push(obj);
        best.offer(obj, chain, x);
        let f = &chain.factors()[k];
        right_mul_transpose(&mut z, f);
        congruence(&mut w, f);
        if k + 1 < m {
            right_mul_inverse(&mut a, &chain.factors()[k + 1])?;
        }
    }
    Ok(())
}

/// Shear/scaling chain: greedy appends, then `K` slot-wise refinement sweeps.
///
/// After the appends and after every sweep the code is recomputed by OMP
/// against the column-normalized chain. Each slot is replaced by its best
/// quantized shear or scaling only when that strictly beats the factor
/// already there. The best chain and code over every recorded state are
/// returned.
pub fn learn_s<T: Real>(data: &Dataset<T>, cfg: &LearnConfig) -> Result<Trained<T>> {
    let y = data.y();
    let n = data.dim();
    cfg.check(n)?;
    let mut rec = Recorder::new(y)?;
    let x0 = initial_code(y, cfg.s)?;
    let (mut chain, trace) = s_phase_a(y, &x0, cfg)?;
    for &v in &trace {
        rec.push(v);
    }
    let last = *trace.last().expect("trace holds the start");
    let mut best = Best {
        obj: last,
        chain: chain.clone(),
        x: x0,
    };
    let stopped_early = chain.len() < cfg.m;
    let mut x = omp_code(y, &chain, cfg.s)?;
    let obj = super::objective(y, &chain, &x)?;
    rec.push(obj);
    best.offer(obj, &chain, &x);
    if !chain.is_empty() {
        for _ in 0..cfg.k_iters {
            sweep(y, &x, &mut chain, cfg, &mut rec, &mut best)?;
            x = omp_code(y, &chain, cfg.s)?;
            let obj = super::objective(y, &chain, &x)?;
            rec.push(obj);
            best.offer(obj, &chain, &x);
        }
    }
    rec.finish(y, best.chain, best.x, cfg.s, None, stopped_early)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::objective;
    use crate::learners::testutil::*;
    use crate::factors::Scale;

    #[test]
    fn planted_scalings_are_recovered() {
        let n = 4;
        let x = random_data(1, n, 50);
        let mut y = x.clone();
        for (r, k) in [(0, 2.0), (1, 0.5)] {
            y.row_mut(r).iter_mut().for_each(|v| *v *= k);
        }
        let cfg = LearnConfig::new(n, 2).with_p(Precision::Terms(1));
        let (chain, trace) = s_phase_a(&y, &x, &cfg).unwrap();
        assert_eq!(chain.len(), 2);
        let mut got: Vec<(usize, f64)> = chain
            .factors()
            .iter()
            .map(|f| match f {
                Factor::Scaling { i, scale } => {
                    assert!(scale.is_pow2());
                    (*i, scale.value())
                }
                other => panic!("expected a scaling, got {}", other.kind()),
            })
            .collect();
        got.sort_by_key(|g| g.0);
        assert_eq!(got, vec![(0, 2.0), (1, 0.5)]);
        assert!(trace.last().unwrap().abs() < 1e-12 * y.frobenius_sq());
    }

    #[test]
    fn phase_a_trace_matches_dense_objective() {
        for p in [Precision::Infinite, Precision::Terms(1), Precision::Terms(3)] {
            let y = random_data(2, 6, 30);
            let x = initial_code(&y, 2).unwrap();
            let (chain, trace) = s_phase_a(&y, &x, &LearnConfig::new(2, 8).with_p(p)).unwrap();
            assert_non_increasing(&trace);
            let dense = objective(&y, &chain, &x).unwrap();
            assert!((trace.last().unwrap() - dense).abs() < 1e-9 * dense);
            if p.is_finite() {
                for f in chain.factors() {
                    match f {
                        Factor::Shear { coeff, .. } => assert!(matches!(coeff, Coeff::Sopot(_))),
                        Factor::Scaling { scale, .. } => assert!(scale.is_pow2()),
                        _ => unreachable!(),
                    }
                }
            }
        }
    }

    #[test]
    fn sweep_trace_matches_dense_objective() {
        let y = random_data(3, 6, 40);
        let cfg = LearnConfig::new(2, 6).with_k(2).with_p(Precision::Terms(2));
        let x0 = initial_code(&y, 2).unwrap();
        let (mut chain, _) = s_phase_a(&y, &x0, &cfg).unwrap();
        let x = omp_code(&y, &chain, 2).unwrap();
        let mut rec = Recorder::new(&y).unwrap();
        let mut best = Best {
            obj: f64::INFINITY,
            chain: chain.clone(),
            x: x.clone(),
        };
        let start = objective(&y, &chain, &x).unwrap();
        sweep(&y, &x, &mut chain, &cfg, &mut rec, &mut best).unwrap();
        let mut prev = start;
        for &v in &rec.trace {
            assert!(v <= prev + 1e-10 * prev);
            prev = v;
        }
        let dense = objective(&y, &chain, &x).unwrap();
        assert!((rec.trace.last().unwrap() - dense).abs() < 1e-9 * dense);
    }

    #[test]
    fn returned_pair_attains_best_objective() {
        for seed in 0..3 {
            let y = random_data(seed, 8, 40);
            let cfg = LearnConfig::new(3, 10).with_k(3).with_p(Precision::Terms(2));
            let out = learn_s(&Dataset::new(y.clone()).unwrap(), &cfg).unwrap();
            let again = objective(&y, &out.chain, &out.code.x).unwrap();
            assert!((again - out.report.best_objective).abs() < 1e-9 * again);
            assert!(out.code.max_column_support() <= 3);
        }
    }

    #[test]
    fn b_slots_are_scored_exactly() {
        let y = random_data(5, 4, 20);
        let x = random_data(6, 4, 20);
        let chain = TransformChain::new(
            4,
            Family::S,
            vec![
                Factor::B { i: 0, j: 2, variant: 15 },
                Factor::Scaling { i: 1, scale: Scale::Raw(1.5) },
            ],
            Rational64::from_integer(0),
        )
        .unwrap();
        let mut c = chain.clone();
        let mut rec = Recorder::new(&y).unwrap();
        let mut best = Best {
            obj: f64::INFINITY,
            chain: chain.clone(),
            x: x.clone(),
        };
        sweep(&y, &x, &mut c, &LearnConfig::new(4, 2), &mut rec, &mut best).unwrap();
        // the first entry keeps or improves the dense objective
        assert!(rec.trace[0] <= objective(&y, &chain, &x).unwrap() + 1e-10);
    }
}
