//! Orthonormal DCT-II reference transform.

use crate::error::{contract, Result};
use crate::linalg::Matrix;
use crate::ops::OpCount;
use crate::scalar::Real;

/// The `n×n` DCT-II matrix; row `k` is the `k`-th basis function.
///
/// As a synthesis dictionary use the transpose, whose columns are the atoms.
pub fn dct_dictionary<T: Real>(n: usize) -> Result<Matrix<T>> {
    if n < 2 {
        return Err(contract("DCT needs n >= 2"));
    }
    let nf = n as f64;
    Ok(Matrix::from_fn(n, n, |k, i| {
        let c = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        T::lit(c * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos())
    }))
}

/// Separable 2-D DCT on `side×side` patches vectorized column-major.
pub fn dct2_dictionary<T: Real>(side: usize) -> Result<Matrix<T>> {
    let d = dct_dictionary::<T>(side)?;
    let n = side * side;
    // entry (k, i) of the Kronecker product C ⊗ C
    Ok(Matrix::from_fn(n, n, |k, i| d[(k / side, i / side)] * d[(k % side, i % side)]))
}

/// Nominal fast-DCT arithmetic: `3/2·n log₂n` additions and `1/2·n log₂n` multiplications.
pub fn dct_nominal_ops(n: usize) -> OpCount {
    let nl = n as f64 * (n as f64).log2();
    OpCount::new((1.5 * nl).round() as u64, (0.5 * nl).round() as u64, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ortho_err(d: &Matrix<f64>) -> f64 {
        d.transpose_mul(d).unwrap().sub(&Matrix::identity(d.rows())).unwrap().max_abs()
    }

    #[test]
    fn orthonormal_with_constant_first_row() {
        for n in [2, 3, 8, 64] {
            let d = dct_dictionary::<f64>(n).unwrap();
            assert!(ortho_err(&d) < 1e-12);
            let c = 1.0 / (n as f64).sqrt();
            assert!(d.row(0).iter().all(|&v| (v - c).abs() < 1e-15));
        }
        assert!(ortho_err(&dct2_dictionary::<f64>(8).unwrap()) < 1e-12);
    }

    #[test]
    fn nominal_counts() {
        let ops = dct_nominal_ops(64);
        assert_eq!((ops.additions, ops.multiplications), (576, 192));
        assert_eq!(ops.total(), 768);
        assert!(dct_dictionary::<f64>(1).is_err());
    }
}
