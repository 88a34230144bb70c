//! Three-shear factorization of 2×2 rotations and reflections.

use crate::error::{contract, Error, Result};
use crate::scalar::Real;

use super::{Coeff, Factor, Scale, ShearSide};

/// `U(u)·L(s)·U(u)`, optionally preceded by the flip `diag(1, −1)` for reflections.
///
/// `U(u) = [[1, u], [0, 1]]` and `L(s) = [[1, 0], [s, 1]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftingTriple<T> {
    /// Shear factors on coordinates `(0, 1)` in application order.
    pub shears: [Factor<T>; 3],
    pub reflection: bool,
}

impl<T: Real> LiftingTriple<T> {
    pub fn outer(&self) -> T {
        shear_value(&self.shears[0])
    }

    pub fn inner(&self) -> T {
        shear_value(&self.shears[1])
    }

    /// The factors placed on coordinates `(i, j)`, in application order.
    pub fn embed(&self, i: usize, j: usize) -> Vec<Factor<T>> {
        let mut out = Vec::with_capacity(4);
        if self.reflection {
            out.push(Factor::Scaling {
                i: j,
                scale: Scale::Pow2 {
                    negative: true,
                    exp: 0,
                },
            });
        }
        for f in &self.shears {
            if let Factor::Shear { side, coeff, .. } = f {
                out.push(Factor::Shear {
                    i,
                    j,
                    side: *side,
                    coeff: coeff.clone(),
                });
            }
        }
        out
    }

    /// The 2×2 product realized by the triple.
    pub fn matrix(&self) -> [[T; 2]; 2] {
        let mut m = crate::linalg::Matrix::<T>::identity(2);
        for f in self.embed(0, 1) {
            f.apply_in_place(&mut m);
        }
        [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
    }
}

fn shear_value<T: Real>(f: &Factor<T>) -> T {
    match f {
        Factor::Shear { coeff, .. } => coeff.value(),
        _ => unreachable!("lifting triples hold shears only"),
    }
}

/// Splits an orthonormal block `[[c, −s], [s, c]]` or `[[c, s], [s, −c]]`
/// into shears with coefficients `(c−1)/s`, `s`, `(c−1)/s`.
pub fn lifting_decompose<T: Real>(block: [[T; 2]; 2]) -> Result<LiftingTriple<T>> {
    let tol = T::lit(1e-10);
    let [[a, b], [c, d]] = block;
    let col_dev = (a * a + c * c - T::one()).abs()
        + (b * b + d * d - T::one()).abs()
        + (a * b + c * d).abs();
    if col_dev > tol {
        return Err(contract("lifting needs an orthonormal 2×2 block"));
    }
    let reflection = if (a - d).abs() <= tol && (b + c).abs() <= tol {
        false
    } else if (a + d).abs() <= tol && (b - c).abs() <= tol {
        true
    } else {
        return Err(contract("block is neither a rotation nor a reflection"));
    };
    let (cos, sin) = (a, c);
    if sin.abs() <= tol {
        return Err(Error::LiftingNotRequired);
    }
    let u = (cos - T::one()) / sin;
    let shear = |side, v: T| Factor::Shear {
        i: 0,
        j: 1,
        side,
        coeff: Coeff::Raw(v),
    };
    Ok(LiftingTriple {
        shears: [
            shear(ShearSide::Upper, u),
            shear(ShearSide::Lower, sin),
            shear(ShearSide::Upper, u),
        ],
        reflection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::catalog_b;

    fn close(a: [[f64; 2]; 2], b: [[f64; 2]; 2], tol: f64) -> bool {
        (0..2).all(|r| (0..2).all(|c| (a[r][c] - b[r][c]).abs() <= tol))
    }

    #[test]
    fn quarter_turn_is_exact() {
        let t = lifting_decompose([[0.0, -1.0], [1.0, 0.0]]).unwrap();
        assert_eq!((t.outer(), t.inner()), (-1.0, 1.0));
        assert_eq!(t.matrix(), [[0.0, -1.0], [1.0, 0.0]]);
    }

    #[test]
    fn every_scaled_catalog_block_lifts() {
        let r2 = 2f64.sqrt();
        let allowed = [1.0 - r2, r2 - 1.0, 1.0 + r2, -1.0 - r2];
        for v in 1..=8u8 {
            let block = catalog_b(v).to_real::<f64>();
            let t = lifting_decompose(block).unwrap();
            assert!(close(t.matrix(), block, 1e-14), "variant {v}");
            assert!(allowed.iter().any(|x| (x - t.outer()).abs() < 1e-14));
        }
    }

    #[test]
    fn rotation_by_angle() {
        let th = 0.3f64;
        let block = [[th.cos(), -th.sin()], [th.sin(), th.cos()]];
        let t = lifting_decompose(block).unwrap();
        assert!(!t.reflection);
        assert!(close(t.matrix(), block, 1e-14));
    }

    #[test]
    fn multiplier_less_blocks_are_rejected() {
        assert!(matches!(
            lifting_decompose([[1.0, 0.0], [0.0, -1.0]]),
            Err(Error::LiftingNotRequired)
        ));
        assert!(lifting_decompose([[1.0, 1.0], [0.0, 1.0]]).is_err());
    }
}
