//! Representation error and arithmetic cost.

use crate::error::{contract, Result};
use crate::factors::TransformChain;
use crate::linalg::{Dataset, Matrix};
use crate::ops::OpCount;
use crate::scalar::Real;
use crate::sparse::SparseCode;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostModel {
    /// Extra weight on each multiplication.
    pub gamma: f64,
    pub shift_weight: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            gamma: 6.0,
            shift_weight: 1.0,
        }
    }
}

impl CostModel {
    pub fn with_gamma(gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) {
            return Err(contract(format!("gamma must be non-negative, got {gamma}")));
        }
        Ok(Self {
            gamma,
            ..Self::default()
        })
    }
}

/// `A + γ·M` with shifts counted alongside additions.
pub fn weighted_cost(ops: OpCount, model: &CostModel) -> f64 {
    ops.additions as f64 + model.shift_weight * ops.shifts as f64 + model.gamma * ops.multiplications as f64
}

/// Anything that maps a code matrix `X` to `D·X`.
pub trait Synthesis<T> {
    fn synthesize(&self, x: &Matrix<T>) -> Result<Matrix<T>>;
}

impl<T: Real> Synthesis<T> for TransformChain<T> {
    fn synthesize(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut scratch = OpCount::ZERO;
        self.apply(x, &mut scratch)
    }
}

impl<T: Real> Synthesis<T> for Matrix<T> {
    fn synthesize(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.matmul(x)
    }
}

/// Relative error `‖Y − D·X‖² / ‖Y‖² · 100`.
pub fn evaluate<T: Real, D: Synthesis<T> + ?Sized>(data: &Dataset<T>, d: &D, code: &SparseCode<T>) -> Result<T> {
    let y = data.y();
    let y_sq = y.frobenius_sq();
    if y_sq == T::zero() {
        return Err(contract("relative error is undefined for zero data"));
    }
    let dx = d.synthesize(&code.x)?;
    Ok(y.sub(&dx)?.frobenius_sq() / y_sq * T::lit(100.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::{Factor, Family};
    use num_rational::Rational64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weighted_cost_examples() {
        let dct = crate::harness::dct_nominal_ops(64);
        assert_eq!(weighted_cost(dct, &CostModel::default()), 1728.0);
        let shift_add = OpCount::new(10, 0, 7);
        assert_eq!(weighted_cost(shift_add, &CostModel::with_gamma(100.0).unwrap()), 17.0);
        assert_eq!(weighted_cost(OpCount::new(3, 4, 5), &CostModel::with_gamma(0.0).unwrap()), 8.0);
        assert!(CostModel::with_gamma(-1.0).is_err());
    }

    #[test]
    fn evaluate_extremes_and_dense_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = Matrix::<f64>::from_fn(4, 10, |_, _| rng.gen_range(-1.0..1.0));
        let data = Dataset::new(y.clone()).unwrap();
        let id = Matrix::<f64>::identity(4);
        let exact = SparseCode { x: y.clone(), s: 4 };
        assert_eq!(evaluate(&data, &id, &exact).unwrap(), 0.0);
        let zero = SparseCode {
            x: Matrix::zeros(4, 10),
            s: 1,
        };
        assert_eq!(evaluate(&data, &id, &zero).unwrap(), 100.0);

        let chain = TransformChain::new(
            4,
            Family::O,
            vec![
                Factor::O { i: 0, j: 2, variant: 3 },
                Factor::O { i: 1, j: 3, variant: 6 },
            ],
            Rational64::from_integer(0),
        )
        .unwrap();
        let x = Matrix::<f64>::from_fn(4, 10, |_, _| rng.gen_range(-1.0..1.0));
        let code = SparseCode { x: x.clone(), s: 4 };
        let via_chain = evaluate(&data, &chain, &code).unwrap();
        let via_dense = evaluate(&data, &chain.materialize(), &code).unwrap();
        let oracle = y.sub(&chain.materialize().matmul(&x).unwrap()).unwrap().frobenius_sq() / y.frobenius_sq() * 100.0;
        assert!((via_chain - via_dense).abs() <= 1e-10 * via_dense);
        assert!((via_chain - oracle).abs() <= 1e-10 * oracle);
    }
}
