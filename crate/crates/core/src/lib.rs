//! Learning square dictionaries factored into cheap elementary transforms.
//!
//! Factors are binary orthonormal 2×2 blocks, 4×4 Hadamard blocks, shears and
//! power-of-two scalings. Applying a learned chain and its inverse needs few or
//! no multiplications; [`ops::OpCount`] tracks exactly how many.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the common double-precision instantiations.

pub mod error;
pub mod factors;
pub mod harness;
pub mod learners;
pub mod linalg;
pub mod matching;
pub mod ops;
pub mod scalar;
pub mod scoring;
pub mod sopot;
pub mod sparse;

pub use error::{Error, Result};
pub use factors::{Factor, Family, TransformChain};
pub use linalg::{Dataset, Matrix};
pub use ops::OpCount;
pub use scalar::Real;
pub use sopot::{Precision, SopotValue};

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Chain64 = TransformChain<f64>;
pub type Chain32 = TransformChain<f32>;
pub type Factor64 = Factor<f64>;
pub type Dataset64 = Dataset<f64>;
