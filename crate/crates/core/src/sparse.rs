//! Per-column sparse coding: hard thresholding for orthonormal dictionaries
//! and batch OMP for general ones.

use rayon::prelude::*;

use crate::error::{contract, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// A code matrix with at most `s` nonzeros per column.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCode<T> {
    pub x: Matrix<T>,
    pub s: usize,
}

impl<T: Real> SparseCode<T> {
    pub fn max_column_support(&self) -> usize {
        (0..self.x.cols())
            .map(|c| (0..self.x.rows()).filter(|&r| self.x[(r, c)] != T::zero()).count())
            .max()
            .unwrap_or(0)
    }
}

fn check_budget(s: usize, n: usize) -> Result<()> {
    if s == 0 || s > n {
        return Err(contract(format!("sparsity {s} outside 1..={n}")));
    }
    Ok(())
}

/// Rows of the `s` largest magnitudes in `col`, smaller index first on ties.
fn top_s<T: Real>(col: &[T], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..col.len()).collect();
    idx.sort_by(|&a, &b| col[b].abs().partial_cmp(&col[a].abs()).unwrap().then(a.cmp(&b)));
    idx.truncate(s);
    idx
}

/// `T_s`: keeps the `s` largest-magnitude entries of each column.
pub fn hard_threshold<T: Real>(m: &Matrix<T>, s: usize) -> Result<SparseCode<T>> {
    let (n, cols) = m.shape();
    check_budget(s, n)?;
    let mut x = Matrix::zeros(n, cols);
    if s == n {
        x = m.clone();
    } else {
        for c in 0..cols {
            let col = m.column(c);
            for r in top_s(&col, s) {
                x[(r, c)] = col[r];
            }
        }
    }
    Ok(SparseCode { x, s })
}

/// Batch orthogonal matching pursuit with Gram precomputation and an
/// incrementally grown Cholesky factor of the selected Gram block.
pub fn omp<T: Real>(y: &Matrix<T>, d: &Matrix<T>, s: usize) -> Result<SparseCode<T>> {
    let n = d.rows();
    if d.cols() != n || y.rows() != n {
        return Err(Error::DimensionMismatch {
            op: "omp",
            lhs: d.shape(),
            rhs: y.shape(),
        });
    }
    check_budget(s, n)?;
    let tol = T::lit(1e-8);
    for c in 0..n {
        let norm: T = (0..n).map(|r| d[(r, c)] * d[(r, c)]).sum::<T>().sqrt();
        if (norm - T::one()).abs() > tol {
            return Err(contract(format!("dictionary column {c} is not unit norm")));
        }
    }
    let gram = d.transpose_mul(d)?;
    let alpha0 = d.transpose_mul(y)?;
    let cols: Vec<Vec<(usize, T)>> = (0..y.cols())
        .into_par_iter()
        .map(|c| omp_column(&gram, &alpha0.column(c), s))
        .collect();
    let mut x = Matrix::zeros(n, y.cols());
    for (c, entries) in cols.into_iter().enumerate() {
        for (r, v) in entries {
            x[(r, c)] = v;
        }
    }
    Ok(SparseCode { x, s })
}

fn omp_column<T: Real>(gram: &Matrix<T>, alpha0: &[T], s: usize) -> Vec<(usize, T)> {
    let n = alpha0.len();
    let scale = alpha0.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return Vec::new();
    }
    let floor = scale * T::epsilon() * T::lit(16.0);
    let mut alpha = alpha0.to_vec();
    let mut chosen: Vec<usize> = Vec::with_capacity(s);
    let mut selected = vec![false; n];
    // lower-triangular factor of G[I, I], row-major k×k
    let mut l: Vec<T> = Vec::with_capacity(s * s);
    let mut gamma: Vec<T> = Vec::new();
    for k in 0..s {
        let Some(j) = (0..n)
            .filter(|&r| !selected[r])
            .max_by(|&a, &b| alpha[a].abs().partial_cmp(&alpha[b].abs()).unwrap().then(b.cmp(&a)))
        else {
            break;
        };
        if alpha[j].abs() <= floor {
            break;
        }
        // extend the Cholesky factor with G[I, j]
        let g_col: Vec<T> = chosen.iter().map(|&i| gram[(i, j)]).collect();
        let w = forward_sub(&l, k, &g_col);
        let diag_sq = gram[(j, j)] - w.iter().map(|&v| v * v).sum::<T>();
        if diag_sq <= T::lit(1e-10) {
            break;
        }
        let mut next = vec![T::zero(); (k + 1) * (k + 1)];
        for r in 0..k {
            next[r * (k + 1)..r * (k + 1) + k].copy_from_slice(&l[r * k..r * k + k]);
        }
        next[k * (k + 1)..k * (k + 1) + k].copy_from_slice(&w);
        next[k * (k + 1) + k] = diag_sq.sqrt();
        l = next;
        chosen.push(j);
        selected[j] = true;
        let rhs: Vec<T> = chosen.iter().map(|&i| alpha0[i]).collect();
        gamma = back_sub_t(&l, k + 1, &forward_sub(&l, k + 1, &rhs));
        for (r, a) in alpha.iter_mut().enumerate() {
            let beta: T = chosen.iter().zip(&gamma).map(|(&i, &g)| gram[(r, i)] * g).sum();
            *a = alpha0[r] - beta;
        }
    }
    chosen.into_iter().zip(gamma).collect()
}

/// Solves `L·v = b` for lower-triangular `L` (k×k, row-major).
fn forward_sub<T: Real>(l: &[T], k: usize, b: &[T]) -> Vec<T> {
    let mut v = vec![T::zero(); k];
    for r in 0..k {
        let acc: T = (0..r).map(|c| l[r * k + c] * v[c]).sum();
        v[r] = (b[r] - acc) / l[r * k + r];
    }
    v
}

/// Solves `Lᵀ·v = b`.
fn back_sub_t<T: Real>(l: &[T], k: usize, b: &[T]) -> Vec<T> {
    let mut v = vec![T::zero(); k];
    for r in (0..k).rev() {
        let acc: T = (r + 1..k).map(|c| l[c * k + r] * v[c]).sum();
        v[r] = (b[r] - acc) / l[r * k + r];
    }
    v
}

/// Scales columns to unit norm; returns `S·Dg` and the diagonal of `Dg`.
pub fn normalize_columns<T: Real>(s: &Matrix<T>) -> Result<(Matrix<T>, Vec<T>)> {
    let (rows, cols) = s.shape();
    let mut dg = Vec::with_capacity(cols);
    for c in 0..cols {
        let norm = (0..rows).map(|r| s[(r, c)] * s[(r, c)]).sum::<T>().sqrt();
        if norm == T::zero() {
            return Err(contract(format!("column {c} is zero")));
        }
        dg.push(T::one() / norm);
    }
    let out = Matrix::from_fn(rows, cols, |r, c| s[(r, c)] * dg[c]);
    Ok((out, dg))
}

/// `X ← Dg·X`: rescales code rows after coding against a normalized dictionary.
pub fn rescale_rows<T: Real>(x: &mut Matrix<T>, dg: &[T]) {
    for (r, &k) in dg.iter().enumerate() {
        x.row_mut(r).iter_mut().for_each(|v| *v = *v * k);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::left_singular_basis;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_m(rng: &mut impl Rng, r: usize, c: usize) -> Matrix<f64> {
        Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_orthonormal(rng: &mut impl Rng, n: usize) -> Matrix<f64> {
        left_singular_basis(&rand_m(rng, n, 3 * n)).unwrap()
    }

    #[test]
    fn threshold_examples() {
        let m = Matrix::from_rows(&[[3.0], [-5.0], [1.0]]).unwrap();
        assert_eq!(hard_threshold(&m, 1).unwrap().x.as_slice(), &[0.0, -5.0, 0.0]);
        assert_eq!(hard_threshold(&m, 3).unwrap().x, m);
        assert!(hard_threshold(&m, 0).is_err());
        assert!(hard_threshold(&m, 4).is_err());
        let tie = Matrix::from_rows(&[[1.0], [-2.0], [2.0]]).unwrap();
        assert_eq!(hard_threshold(&tie, 1).unwrap().x.as_slice(), &[0.0, -2.0, 0.0]);
    }

    #[test]
    fn threshold_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = rand_m(&mut rng, 6, 20);
        let x = hard_threshold(&m, 2).unwrap().x;
        for c in 0..20 {
            let mut mags: Vec<f64> = m.column(c).iter().map(|v| v.abs()).collect();
            mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for r in 0..6 {
                let keep = m[(r, c)].abs() >= mags[1];
                assert_eq!(x[(r, c)], if keep { m[(r, c)] } else { 0.0 });
            }
        }
    }

    #[test]
    fn threshold_is_optimal_for_orthonormal_dictionaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [3usize, 5, 6] {
            let d = random_orthonormal(&mut rng, n);
            let y = rand_m(&mut rng, n, 4);
            for s in 1..=2 {
                let x = hard_threshold(&d.transpose_mul(&y).unwrap(), s).unwrap().x;
                let err = y.sub(&d.matmul(&x).unwrap()).unwrap().frobenius_sq();
                // exhaustive supports with least-squares fits per column
                let mut best = 0.0;
                for c in 0..y.cols() {
                    let proj = d.transpose_mul(&Matrix::new(n, 1, y.column(c)).unwrap()).unwrap();
                    let total: f64 = proj.as_slice().iter().map(|v| v * v).sum();
                    let mut best_kept = 0.0f64;
                    for mask in 0u32..(1 << n) {
                        if mask.count_ones() as usize == s {
                            let kept: f64 = (0..n).filter(|r| mask >> r & 1 == 1).map(|r| proj.as_slice()[r].powi(2)).sum();
                            best_kept = best_kept.max(kept);
                        }
                    }
                    best += total - best_kept;
                }
                assert!((err - best).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn omp_equals_threshold_for_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = random_orthonormal(&mut rng, 8);
        let y = rand_m(&mut rng, 8, 30);
        for s in [1, 3, 8] {
            let a = omp(&y, &d, s).unwrap().x;
            let b = hard_threshold(&d.transpose_mul(&y).unwrap(), s).unwrap().x;
            assert!(a.sub(&b).unwrap().max_abs() < 1e-10);
        }
    }

    #[test]
    fn omp_recovers_atoms_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (d, _) = normalize_columns(&rand_m(&mut rng, 5, 5)).unwrap();
        let y = Matrix::new(5, 1, d.column(3)).unwrap();
        let x = omp(&y, &d, 2).unwrap();
        assert!((x.x[(3, 0)] - 1.0).abs() < 1e-12);
        assert!(y.sub(&d.matmul(&x.x).unwrap()).unwrap().max_abs() < 1e-12);
        let zero = omp(&Matrix::zeros(5, 3), &d, 2).unwrap();
        assert_eq!(zero.x, Matrix::zeros(5, 3));
    }

    #[test]
    fn omp_residual_is_orthogonal_to_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (d, _) = normalize_columns(&rand_m(&mut rng, 6, 6)).unwrap();
        let y = rand_m(&mut rng, 6, 10);
        let code = omp(&y, &d, 3).unwrap();
        assert!(code.max_column_support() <= 3);
        let r = y.sub(&d.matmul(&code.x).unwrap()).unwrap();
        let corr = d.transpose_mul(&r).unwrap();
        for c in 0..10 {
            for a in 0..6 {
                if code.x[(a, c)] != 0.0 {
                    assert!(corr[(a, c)].abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn omp_rejects_unnormalized_dictionary() {
        let d = Matrix::from_diag(&[2.0, 1.0]);
        assert!(omp(&Matrix::zeros(2, 1), &d, 1).is_err());
    }

    #[test]
    fn omp_error_decreases_with_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (d, _) = normalize_columns(&rand_m(&mut rng, 6, 6)).unwrap();
        let y = rand_m(&mut rng, 6, 16);
        let mut prev = f64::INFINITY;
        for s in 1..=6 {
            let x = omp(&y, &d, s).unwrap().x;
            let e = y.sub(&d.matmul(&x).unwrap()).unwrap().frobenius_sq();
            assert!(e <= prev + 1e-10);
            prev = e;
        }
        assert!(prev < 1e-16);
    }

    #[test]
    fn normalize_examples() {
        let (m, dg) = normalize_columns(&Matrix::from_diag(&[2.0, 1.0])).unwrap();
        assert_eq!(dg, vec![0.5, 1.0]);
        assert_eq!(m, Matrix::identity(2));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = random_orthonormal(&mut rng, 4);
        let (_, dg) = normalize_columns(&q).unwrap();
        assert!(dg.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(normalize_columns(&Matrix::<f64>::zeros(2, 2)).is_err());
    }

    proptest! {
        #[test]
        fn normalized_columns_have_unit_norm(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (m, _) = normalize_columns(&rand_m(&mut rng, 5, 5)).unwrap();
            for c in 0..5 {
                let norm: f64 = m.column(c).iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!((norm - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn budget_always_respected(seed in 0u64..1000, s in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = rand_m(&mut rng, 5, 7);
            prop_assert!(hard_threshold(&m, s).unwrap().max_column_support() <= s);
        }
    }
}
