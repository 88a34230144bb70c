//! Exact factorization of an invertible matrix into shears, scalings and swaps.

use num_rational::Rational64;

use crate::error::{contract, Error, Result};
use crate::factors::{Coeff, Factor, Family, Scale, ShearSide, TransformChain, SWAP_VARIANT};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Pivots smaller than this fraction of the largest entry count as zero.
const SINGULAR_RTOL: f64 = 1e-12;

/// Writes `S = Pᵀ·L·Dg·U` as a chain.
///
/// Partial pivoting gives `P·S = L·Dg·U` with unit triangular `L`, `U`.
/// `U` becomes one upper shear per nonzero above-diagonal entry, `Dg` one
/// scaling per diagonal entry different from 1, `L` one lower shear per
/// nonzero below-diagonal entry, and `Pᵀ` one swap block per pivot row
/// exchange. At most `n² − n` shears and `n` scalings are emitted.
pub fn decompose_dense<T: Real>(s: &Matrix<T>) -> Result<TransformChain<T>> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::DimensionMismatch {
            op: "decompose_dense",
            lhs: s.shape(),
            rhs: (n, n),
        });
    }
    let scale = s.max_abs();
    if n == 0 || scale == T::zero() {
        return Err(contract("cannot decompose an empty or zero matrix"));
    }
    let tol = T::lit(SINGULAR_RTOL) * scale;
    let mut lu = s.clone();
    let mut swaps = Vec::new();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&a, &b| lu[(a, k)].abs().partial_cmp(&lu[(b, k)].abs()).expect("finite entries"))
            .expect("non-empty range");
        if lu[(p, k)].abs() <= tol {
            return Err(Error::Singular {
                column: k,
                pivot: lu[(p, k)].to_f64_lossy(),
            });
        }
        if p != k {
            let (rk, rp) = lu.two_rows_mut(k, p);
            rk.swap_with_slice(rp);
            swaps.push((k, p));
        }
        let piv = lu[(k, k)];
        for r in k + 1..n {
            let l = lu[(r, k)] / piv;
            lu[(r, k)] = l;
            for c in k + 1..n {
                let v = lu[(k, c)];
                lu[(r, c)] = lu[(r, c)] - l * v;
            }
        }
    }

    let mut factors = Vec::new();
    // U = C_{n−1}⋯C_1 with C_j holding column j, so C_1 acts first
    for j in 1..n {
        for i in 0..j {
            let u = lu[(i, j)] / lu[(i, i)];
            if u != T::zero() {
                factors.push(Factor::Shear {
                    i,
                    j,
                    side: ShearSide::Upper,
                    coeff: Coeff::Raw(u),
                });
            }
        }
    }
    for i in 0..n {
        let d = lu[(i, i)];
        if d != T::one() {
            factors.push(Factor::Scaling { i, scale: Scale::Raw(d) });
        }
    }
    // L = R_0⋯R_{n−2} with R_k holding column k, so R_{n−2} acts first
    for k in (0..n.saturating_sub(1)).rev() {
        for r in k + 1..n {
            let l = lu[(r, k)];
            if l != T::zero() {
                factors.push(Factor::Shear {
                    i: k,
                    j: r,
                    side: ShearSide::Lower,
                    coeff: Coeff::Raw(l),
                });
            }
        }
    }
    // Pᵀ = P_0⋯P_{n−2}
    for &(k, p) in swaps.iter().rev() {
        factors.push(Factor::B {
            i: k,
            j: p,
            variant: SWAP_VARIANT,
        });
    }
    TransformChain::new(n, Family::S, factors, Rational64::from_integer(0))
}
