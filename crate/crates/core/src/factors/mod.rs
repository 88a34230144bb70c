//! Elementary transforms and the chains built from them.
//!
//! A [`TransformChain`] realizes `D = 2^g · F_m ⋯ F_1`: factors are stored in
//! application order, so `factors[0]` touches an input vector first.

mod catalog;
mod lifting;

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;

pub use catalog::{
    catalog_b, catalog_hadamard4, g1_transpose_variant, left_candidate, permutations4,
    right_candidate, sign_vectors4, transpose4, transpose_variant, unscaled_g1, Block2,
    Hadamard4Catalog, Hadamard4Origin, Signs4, B_CATALOG, G1_COUNT, H4, IDENTITY_VARIANT,
    SWAP_VARIANT,
};
pub use lifting::{lifting_decompose, LiftingTriple};

use crate::error::{contract, Error, Result};
use crate::linalg::Matrix;
use crate::ops::OpCount;
use crate::scalar::Real;
use crate::sopot::SopotValue;

/// Which off-diagonal entry a shear occupies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShearSide {
    /// `x_j += b·x_i`
    Lower,
    /// `x_i += c·x_j`
    Upper,
}

impl ShearSide {
    pub fn as_str(&self) -> &'static str {
        match self {
            ShearSide::Lower => "lower",
            ShearSide::Upper => "upper",
        }
    }
}

impl FromStr for ShearSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lower" => Ok(ShearSide::Lower),
            "upper" => Ok(ShearSide::Upper),
            other => Err(contract(format!("unknown shear side `{other}`"))),
        }
    }
}

/// Shear coefficient: a working-precision real or a SOPOT expansion.
#[derive(Clone, Debug, PartialEq)]
pub enum Coeff<T> {
    Raw(T),
    Sopot(SopotValue),
}

impl<T: Real> Coeff<T> {
    pub fn value(&self) -> T {
        match self {
            Coeff::Raw(v) => *v,
            Coeff::Sopot(s) => s.value(),
        }
    }

    pub fn negated(&self) -> Self {
        match self {
            Coeff::Raw(v) => Coeff::Raw(-*v),
            Coeff::Sopot(s) => Coeff::Sopot(s.negated()),
        }
    }

    /// `x·coeff`, evaluated as shifted copies for SOPOT coefficients.
    #[inline]
    fn times(&self, x: T) -> T {
        match self {
            Coeff::Raw(v) => *v * x,
            Coeff::Sopot(s) => s.terms().iter().fold(T::zero(), |acc, t| {
                let shifted = x * T::pow2(t.exp);
                if t.sign < 0 {
                    acc - shifted
                } else {
                    acc + shifted
                }
            }),
        }
    }

    fn bits(&self) -> f64 {
        match self {
            Coeff::Raw(_) => RAW_COEFF_BITS,
            Coeff::Sopot(s) => s.coding_bits(),
        }
    }
}

/// Diagonal entry of a scaling factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scale<T> {
    Raw(T),
    /// `±2^exp`, applied as a shift.
    Pow2 { negative: bool, exp: i32 },
}

impl<T: Real> Scale<T> {
    pub fn value(&self) -> T {
        match *self {
            Scale::Raw(a) => a,
            Scale::Pow2 { negative, exp } => {
                let v = T::pow2(exp);
                if negative {
                    -v
                } else {
                    v
                }
            }
        }
    }

    pub fn is_pow2(&self) -> bool {
        matches!(self, Scale::Pow2 { .. })
    }

    /// Projects a nonzero value onto the signed power of two nearest in log scale.
    pub fn nearest_pow2(a: T) -> Self {
        let exp = a.abs().log2().round().to_i32().unwrap_or(0);
        Scale::Pow2 {
            negative: a < T::zero(),
            exp,
        }
    }
}

/// Bits charged for a coefficient stored at working precision.
pub const RAW_COEFF_BITS: f64 = 64.0;

/// One elementary transform. Pair indices satisfy `i < j`; all indices are 0-based.
#[derive(Clone, Debug, PartialEq)]
pub enum Factor<T> {
    /// Catalog block `t ∈ 1..=16`.
    B { i: usize, j: usize, variant: u8 },
    /// Unnormalized ±1 block `t ∈ 1..=8`, determinant ±2.
    O { i: usize, j: usize, variant: u8 },
    /// Orthonormal ±½ block on four increasing indices.
    Hadamard4 { idx: [usize; 4], variant: u16 },
    /// `n/2` disjoint unnormalized G1 blocks; the `2^{-1/2}` per stage lives in the chain scale.
    MStage { pairs: Vec<(usize, usize)>, variants: Vec<u8> },
    Shear {
        i: usize,
        j: usize,
        side: ShearSide,
        coeff: Coeff<T>,
    },
    Scaling { i: usize, scale: Scale<T> },
}

impl<T: Real> Factor<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Factor::B { .. } => "B",
            Factor::O { .. } => "O",
            Factor::Hadamard4 { .. } => "Hadamard4",
            Factor::MStage { .. } => "MStage",
            Factor::Shear { .. } => "Shear",
            Factor::Scaling { .. } => "Scaling",
        }
    }

    /// Coordinates the factor reads or writes.
    pub fn indices(&self) -> Vec<usize> {
        match self {
            Factor::B { i, j, .. } | Factor::O { i, j, .. } | Factor::Shear { i, j, .. } => {
                vec![*i, *j]
            }
            Factor::Hadamard4 { idx, .. } => idx.to_vec(),
            Factor::MStage { pairs, .. } => pairs.iter().flat_map(|&(a, b)| [a, b]).collect(),
            Factor::Scaling { i, .. } => vec![*i],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let pair = |i: usize, j: usize| {
            if i >= j || j >= n {
                Err(contract(format!("pair ({i}, {j}) must satisfy i < j < {n}")))
            } else {
                Ok(())
            }
        };
        match self {
            Factor::B { i, j, variant } => {
                pair(*i, *j)?;
                if !(1..=16).contains(variant) {
                    return Err(contract(format!("B variant {variant} outside 1..=16")));
                }
            }
            Factor::O { i, j, variant } => {
                pair(*i, *j)?;
                if !(1..=G1_COUNT).contains(variant) {
                    return Err(contract(format!("O variant {variant} outside 1..=8")));
                }
            }
            Factor::Hadamard4 { idx, variant } => {
                if idx.windows(2).any(|w| w[0] >= w[1]) || idx[3] >= n {
                    return Err(contract(format!("Hadamard4 indices {idx:?} not increasing below {n}")));
                }
                if *variant as usize >= catalog_hadamard4().len() {
                    return Err(contract(format!("Hadamard4 variant {variant} outside catalog")));
                }
            }
            Factor::MStage { pairs, variants } => {
                if pairs.len() != variants.len() {
                    return Err(contract("MStage needs one variant per pair"));
                }
                if pairs.len() * 2 != n {
                    return Err(contract(format!("MStage must pair all {n} coordinates")));
                }
                let mut seen = vec![false; n];
                for &(a, b) in pairs {
                    pair(a, b)?;
                    for x in [a, b] {
                        if std::mem::replace(&mut seen[x], true) {
                            return Err(contract(format!("MStage uses index {x} twice")));
                        }
                    }
                }
                if let Some(v) = variants.iter().find(|v| !(1..=G1_COUNT).contains(*v)) {
                    return Err(contract(format!("MStage variant {v} outside 1..=8")));
                }
            }
            Factor::Shear { i, j, coeff, .. } => {
                pair(*i, *j)?;
                if !coeff.value().is_finite() {
                    return Err(contract("shear coefficient must be finite"));
                }
            }
            Factor::Scaling { i, scale } => {
                if *i >= n {
                    return Err(contract(format!("scaling index {i} >= {n}")));
                }
                let a = scale.value();
                if a == T::zero() || !a.is_finite() {
                    return Err(contract("scaling coefficient must be finite and nonzero"));
                }
            }
        }
        Ok(())
    }

    /// Arithmetic per input column for the forward application.
    pub fn ops(&self) -> OpCount {
        match self {
            Factor::B { variant, .. } => {
                if *variant <= G1_COUNT {
                    OpCount::new(2, 2, 0)
                } else {
                    OpCount::ZERO
                }
            }
            Factor::O { .. } => OpCount::new(2, 0, 0),
            Factor::Hadamard4 { .. } => OpCount::new(12, 0, 4),
            Factor::MStage { pairs, .. } => OpCount::new(2 * pairs.len() as u64, 0, 0),
            Factor::Shear { coeff, .. } => match coeff {
                Coeff::Raw(_) => OpCount::new(1, 1, 0),
                Coeff::Sopot(s) => {
                    let p = s.len() as u64;
                    OpCount::new(p, 0, p)
                }
            },
            Factor::Scaling { scale, .. } => {
                if scale.is_pow2() {
                    OpCount::new(0, 0, 1)
                } else {
                    OpCount::new(0, 1, 0)
                }
            }
        }
    }

    /// Arithmetic per column for the inverse application. The `½` of an
    /// MStage inverse is pooled into the chain scale and not charged here.
    pub fn inverse_ops(&self) -> OpCount {
        match self {
            Factor::O { .. } => OpCount::new(2, 0, 2),
            other => other.ops(),
        }
    }

    pub fn coding_bits(&self, n: usize) -> f64 {
        let log_n = (n as f64).log2();
        match self {
            Factor::B { .. } => 4.0 + 2.0 * log_n,
            Factor::O { .. } => 3.0 + 2.0 * log_n,
            Factor::Hadamard4 { .. } => (catalog_hadamard4().len() as f64).log2() + 4.0 * log_n,
            Factor::MStage { .. } => {
                let nf = n as f64;
                (nf * nf.ln() - nf + 1.0) / std::f64::consts::LN_2
            }
            Factor::Shear { coeff, .. } => 1.0 + coeff.bits() + 2.0 * log_n,
            Factor::Scaling { scale, .. } => {
                let c = match scale {
                    Scale::Raw(_) => RAW_COEFF_BITS,
                    Scale::Pow2 { .. } => 9.0,
                };
                c + log_n
            }
        }
    }

    /// Whether the factor (taken alone) is an orthonormal matrix.
    pub fn is_orthonormal(&self) -> bool {
        matches!(self, Factor::B { .. } | Factor::Hadamard4 { .. })
    }

    pub fn apply_in_place(&self, v: &mut Matrix<T>) {
        match self {
            Factor::B { i, j, variant } => {
                let b = catalog_b(*variant);
                let k = if b.scaled {
                    Some(T::FRAC_1_SQRT_2())
                } else {
                    None
                };
                mix_signed(v, *i, *j, b.signs, k);
            }
            Factor::O { i, j, variant } => mix_signed(v, *i, *j, unscaled_g1(*variant), None),
            Factor::Hadamard4 { idx, variant } => {
                mix4(v, idx, catalog_hadamard4().block(*variant), false)
            }
            Factor::MStage { pairs, variants } => {
                for (&(a, b), &t) in pairs.iter().zip(variants) {
                    mix_signed(v, a, b, unscaled_g1(t), None);
                }
            }
            Factor::Shear { i, j, side, coeff } => shear(v, *i, *j, *side, coeff),
            Factor::Scaling { i, scale } => {
                let a = scale.value();
                v.row_mut(*i).iter_mut().for_each(|x| *x = *x * a);
            }
        }
    }

    pub fn apply_inverse_in_place(&self, v: &mut Matrix<T>) {
        match self {
            Factor::B { i, j, variant } => {
                Factor::<T>::B {
                    i: *i,
                    j: *j,
                    variant: transpose_variant(*variant),
                }
                .apply_in_place(v);
            }
            Factor::O { i, j, variant } => {
                let s = unscaled_g1(*variant);
                let t = [[s[0][0], s[1][0]], [s[0][1], s[1][1]]];
                mix_signed(v, *i, *j, t, Some(T::lit(0.5)));
            }
            Factor::Hadamard4 { idx, variant } => {
                mix4(v, idx, catalog_hadamard4().block(*variant), true)
            }
            Factor::MStage { pairs, variants } => {
                for (&(a, b), &t) in pairs.iter().zip(variants) {
                    let s = unscaled_g1(t);
                    mix_signed(v, a, b, [[s[0][0], s[1][0]], [s[0][1], s[1][1]]], None);
                }
            }
            Factor::Shear { i, j, side, coeff } => shear(v, *i, *j, *side, &coeff.negated()),
            Factor::Scaling { i, scale } => match *scale {
                Scale::Raw(a) => v.row_mut(*i).iter_mut().for_each(|x| *x = *x / a),
                Scale::Pow2 { negative, exp } => {
                    let inv = Scale::<T>::Pow2 {
                        negative,
                        exp: -exp,
                    }
                    .value();
                    v.row_mut(*i).iter_mut().for_each(|x| *x = *x * inv);
                }
            },
        }
    }

    /// Dense `n×n` matrix of the factor alone.
    pub fn to_dense(&self, n: usize) -> Matrix<T> {
        let mut m = Matrix::identity(n);
        self.apply_in_place(&mut m);
        m
    }
}

/// `(x_i, x_j) ← k·S·(x_i, x_j)` for a sign/zero pattern `S`.
fn mix_signed<T: Real>(v: &mut Matrix<T>, i: usize, j: usize, s: [[i8; 2]; 2], k: Option<T>) {
    let (ri, rj) = v.two_rows_mut(i, j);
    let comb = |a: i8, x: T, b: i8, y: T| -> T {
        let term = |s: i8, z: T| match s {
            1 => Some(z),
            -1 => Some(-z),
            _ => None,
        };
        match (term(a, x), term(b, y)) {
            (Some(p), Some(q)) => p + q,
            (Some(p), None) => p,
            (None, Some(q)) => q,
            (None, None) => T::zero(),
        }
    };
    for (x, y) in ri.iter_mut().zip(rj.iter_mut()) {
        let (a, b) = (*x, *y);
        let mut ni = comb(s[0][0], a, s[0][1], b);
        let mut nj = comb(s[1][0], a, s[1][1], b);
        if let Some(k) = k {
            ni = ni * k;
            nj = nj * k;
        }
        *x = ni;
        *y = nj;
    }
}

/// Applies `½·S` (or `½·Sᵀ`) on four coordinates.
fn mix4<T: Real>(v: &mut Matrix<T>, idx: &[usize; 4], s: &Signs4, transpose: bool) {
    let half = T::lit(0.5);
    let cols = v.cols();
    let mut src = [T::zero(); 4];
    for c in 0..cols {
        for (r, &row) in idx.iter().enumerate() {
            src[r] = v[(row, c)];
        }
        for (a, &row) in idx.iter().enumerate() {
            let mut acc = T::zero();
            for (b, &x) in src.iter().enumerate() {
                let sign = if transpose { s[b][a] } else { s[a][b] };
                acc = if sign > 0 { acc + x } else { acc - x };
            }
            v[(row, c)] = acc * half;
        }
    }
}

fn shear<T: Real>(v: &mut Matrix<T>, i: usize, j: usize, side: ShearSide, coeff: &Coeff<T>) {
    let (ri, rj) = v.two_rows_mut(i, j);
    match side {
        ShearSide::Lower => {
            for (x, y) in ri.iter().zip(rj.iter_mut()) {
                *y = *y + coeff.times(*x);
            }
        }
        ShearSide::Upper => {
            for (x, y) in ri.iter_mut().zip(rj.iter()) {
                *x = *x + coeff.times(*y);
            }
        }
    }
}

/// Which learner produced a chain; constrains the admissible factor kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    B,
    O,
    M,
    BKron,
    S,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::B => "B",
            Family::O => "O",
            Family::M => "M",
            Family::BKron => "BKron",
            Family::S => "S",
        }
    }

    fn admits<T: Real>(&self, f: &Factor<T>) -> bool {
        match (self, f) {
            (Family::B, Factor::B { .. }) => true,
            (Family::O, Factor::O { .. }) => true,
            (Family::M, Factor::MStage { .. }) => true,
            (Family::BKron, Factor::Hadamard4 { .. }) => true,
            (Family::S, Factor::Shear { .. } | Factor::Scaling { .. }) => true,
            (Family::S, Factor::B { variant, .. }) => *variant > G1_COUNT,
            _ => false,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "B" => Ok(Family::B),
            "O" => Ok(Family::O),
            "M" => Ok(Family::M),
            "BKron" => Ok(Family::BKron),
            "S" => Ok(Family::S),
            other => Err(contract(format!("unknown chain family `{other}`"))),
        }
    }
}

/// Ordered factors plus a global `2^g` scale.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformChain<T> {
    n: usize,
    family: Family,
    factors: Vec<Factor<T>>,
    global_scale_log2: Rational64,
}

impl<T: Real> TransformChain<T> {
    pub fn new(
        n: usize,
        family: Family,
        factors: Vec<Factor<T>>,
        global_scale_log2: Rational64,
    ) -> Result<Self> {
        let chain = Self {
            n,
            family,
            factors,
            global_scale_log2,
        };
        chain.validate()?;
        Ok(chain)
    }

    /// The empty chain (`D = I`).
    pub fn identity(n: usize, family: Family) -> Self {
        Self {
            n,
            family,
            factors: Vec::new(),
            global_scale_log2: Rational64::from_integer(0),
        }
    }

    fn validate(&self) -> Result<()> {
        for f in &self.factors {
            f.validate(self.n)?;
            if !self.family.admits(f) {
                return Err(contract(format!(
                    "{} factor not allowed in a {} chain",
                    f.kind(),
                    self.family
                )));
            }
        }
        if self.family == Family::M {
            let expect = Rational64::new(-(self.factors.len() as i64), 2);
            if self.global_scale_log2 != expect {
                return Err(contract(format!(
                    "M chain with {} stages needs scale exponent {expect}",
                    self.factors.len()
                )));
            }
        }
        Ok(())
    }

    /// Appends a factor that will be applied after the existing ones.
    pub fn push(&mut self, f: Factor<T>) -> Result<()> {
        if self.family == Family::M {
            return Err(contract("M chains are assembled whole"));
        }
        f.validate(self.n)?;
        if !self.family.admits(&f) {
            return Err(contract(format!(
                "{} factor not allowed in a {} chain",
                f.kind(),
                self.family
            )));
        }
        self.factors.push(f);
        Ok(())
    }

    /// Replaces factor `k`, checking the same admissibility rules as `push`.
    pub fn replace(&mut self, k: usize, f: Factor<T>) -> Result<Factor<T>> {
        f.validate(self.n)?;
        if !self.family.admits(&f) {
            return Err(contract(format!(
                "{} factor not allowed in a {} chain",
                f.kind(),
                self.family
            )));
        }
        Ok(std::mem::replace(&mut self.factors[k], f))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn family(&self) -> Family {
        self.family
    }

    #[inline]
    pub fn factors(&self) -> &[Factor<T>] {
        &self.factors
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.factors.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    #[inline]
    pub fn global_scale_log2(&self) -> Rational64 {
        self.global_scale_log2
    }

    fn mstage_count(&self) -> i64 {
        self.factors
            .iter()
            .filter(|f| matches!(f, Factor::MStage { .. }))
            .count() as i64
    }

    fn inverse_scale_log2(&self) -> Rational64 {
        -self.global_scale_log2 - Rational64::from_integer(self.mstage_count())
    }

    /// Arithmetic needed to transform one vector.
    pub fn ops_per_vector(&self) -> OpCount {
        let body: OpCount = self.factors.iter().map(Factor::ops).sum();
        body + scale_ops(self.global_scale_log2, self.n)
    }

    pub fn inverse_ops_per_vector(&self) -> OpCount {
        let body: OpCount = self.factors.iter().map(Factor::inverse_ops).sum();
        body + scale_ops(self.inverse_scale_log2(), self.n)
    }

    fn check_rows(&self, v: &Matrix<T>, op: &'static str) -> Result<()> {
        if v.rows() != self.n {
            return Err(Error::DimensionMismatch {
                op,
                lhs: (self.n, self.n),
                rhs: v.shape(),
            });
        }
        Ok(())
    }

    /// `D·V`, charging the counter per column.
    pub fn apply(&self, v: &Matrix<T>, counter: &mut OpCount) -> Result<Matrix<T>> {
        let mut out = v.clone();
        self.apply_in_place(&mut out, counter)?;
        Ok(out)
    }

    pub fn apply_in_place(&self, v: &mut Matrix<T>, counter: &mut OpCount) -> Result<()> {
        self.check_rows(v, "apply")?;
        for f in &self.factors {
            f.apply_in_place(v);
        }
        apply_scale(v, self.global_scale_log2);
        *counter += self.ops_per_vector() * v.cols() as u64;
        Ok(())
    }

    /// `D⁻¹·V`, charging the counter per column.
    pub fn apply_inverse(&self, v: &Matrix<T>, counter: &mut OpCount) -> Result<Matrix<T>> {
        let mut out = v.clone();
        self.apply_inverse_in_place(&mut out, counter)?;
        Ok(out)
    }

    pub fn apply_inverse_in_place(&self, v: &mut Matrix<T>, counter: &mut OpCount) -> Result<()> {
        self.check_rows(v, "apply_inverse")?;
        apply_scale(v, self.inverse_scale_log2());
        for f in self.factors.iter().rev() {
            f.apply_inverse_in_place(v);
        }
        *counter += self.inverse_ops_per_vector() * v.cols() as u64;
        Ok(())
    }

    /// Dense `n×n` matrix of the chain, for testing and OMP dictionaries.
    pub fn materialize(&self) -> Matrix<T> {
        let mut m = Matrix::identity(self.n);
        let mut scratch = OpCount::ZERO;
        self.apply_in_place(&mut m, &mut scratch)
            .expect("identity has n rows");
        m
    }

    /// Storage estimate for the chain in bits.
    pub fn coding_cost(&self) -> f64 {
        self.factors.iter().map(|f| f.coding_bits(self.n)).sum()
    }

    /// True when every factor and the global scale are orthonormal maps.
    pub fn is_orthonormal(&self) -> bool {
        match self.family {
            Family::M => true,
            _ => {
                self.global_scale_log2 == Rational64::from_integer(0)
                    && self.factors.iter().all(Factor::is_orthonormal)
            }
        }
    }
}

fn scale_ops(g: Rational64, n: usize) -> OpCount {
    let n = n as u64;
    if *g.numer() == 0 {
        OpCount::ZERO
    } else if g.is_integer() {
        OpCount::new(0, 0, n)
    } else {
        OpCount::new(0, n, 0)
    }
}

/// `2^g` in the working precision.
pub fn pow2_rational<T: Real>(g: Rational64) -> T {
    let k = g.floor().to_integer() as i32;
    let frac = g - Rational64::from_integer(k as i64);
    let base = T::pow2(k);
    if *frac.numer() == 0 {
        base
    } else if frac == Rational64::new(1, 2) {
        base * T::SQRT_2()
    } else {
        base * T::lit(2f64.powf(*frac.numer() as f64 / *frac.denom() as f64))
    }
}

fn apply_scale<T: Real>(v: &mut Matrix<T>, g: Rational64) {
    if *g.numer() == 0 {
        return;
    }
    let k = pow2_rational::<T>(g);
    v.as_mut_slice().iter_mut().for_each(|x| *x = *x * k);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sopot::quantize;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> Matrix<f64> {
        Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn det(m: &Matrix<f64>) -> f64 {
        let n = m.rows();
        let mut a = m.clone();
        let mut d = 1.0;
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| a[(x, c)].abs().total_cmp(&a[(y, c)].abs()))
                .unwrap();
            if a[(p, c)] == 0.0 {
                return 0.0;
            }
            if p != c {
                for k in 0..n {
                    let t = a[(p, k)];
                    a[(p, k)] = a[(c, k)];
                    a[(c, k)] = t;
                }
                d = -d;
            }
            d *= a[(c, c)];
            for r in c + 1..n {
                let f = a[(r, c)] / a[(c, c)];
                for k in c..n {
                    let t = a[(c, k)];
                    a[(r, k)] -= f * t;
                }
            }
        }
        d
    }

    fn max_diff(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
        a.sub(b).unwrap().max_abs()
    }

    fn random_b_chain(rng: &mut impl Rng, n: usize, m: usize) -> TransformChain<f64> {
        let factors = (0..m)
            .map(|_| {
                let i = rng.gen_range(0..n - 1);
                let j = rng.gen_range(i + 1..n);
                Factor::B {
                    i,
                    j,
                    variant: rng.gen_range(1..=16),
                }
            })
            .collect();
        TransformChain::new(n, Family::B, factors, Rational64::from_integer(0)).unwrap()
    }

    fn random_m_chain(rng: &mut impl Rng, n: usize, q: usize) -> TransformChain<f64> {
        let factors = (0..q)
            .map(|_| {
                let mut perm: Vec<usize> = (0..n).collect();
                for k in (1..n).rev() {
                    perm.swap(k, rng.gen_range(0..=k));
                }
                let pairs = perm
                    .chunks(2)
                    .map(|c| (c[0].min(c[1]), c[0].max(c[1])))
                    .collect::<Vec<_>>();
                let variants = pairs.iter().map(|_| rng.gen_range(1..=8)).collect();
                Factor::MStage { pairs, variants }
            })
            .collect();
        TransformChain::new(n, Family::M, factors, Rational64::new(-(q as i64), 2)).unwrap()
    }

    fn random_kron_chain(rng: &mut impl Rng, n: usize, m: usize) -> TransformChain<f64> {
        let cat = catalog_hadamard4();
        let factors = (0..m)
            .map(|_| {
                let mut idx = [0usize; 4];
                let mut all: Vec<usize> = (0..n).collect();
                for (k, slot) in idx.iter_mut().enumerate() {
                    let pick = rng.gen_range(k..n);
                    all.swap(k, pick);
                    *slot = all[k];
                }
                idx.sort_unstable();
                Factor::Hadamard4 {
                    idx,
                    variant: rng.gen_range(0..cat.len() as u16),
                }
            })
            .collect();
        TransformChain::new(n, Family::BKron, factors, Rational64::from_integer(0)).unwrap()
    }

    #[test]
    fn empty_chain_is_identity() {
        let chain = TransformChain::<f64>::identity(3, Family::B);
        let v = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let mut c = OpCount::ZERO;
        assert_eq!(chain.apply(&v, &mut c).unwrap(), v);
        assert_eq!(c, OpCount::ZERO);
    }

    #[test]
    fn swap_block_permutes_without_arithmetic() {
        let chain = TransformChain::new(
            3,
            Family::B,
            vec![Factor::B {
                i: 0,
                j: 1,
                variant: SWAP_VARIANT,
            }],
            Rational64::from_integer(0),
        )
        .unwrap();
        let v = Matrix::from_rows(&[[1.5], [-2.0], [7.0]]).unwrap();
        let mut c = OpCount::ZERO;
        let out = chain.apply(&v, &mut c).unwrap();
        assert_eq!(out.as_slice(), &[-2.0, 1.5, 7.0]);
        assert_eq!(c, OpCount::ZERO);
    }

    #[test]
    fn g1_chain_costs_two_adds_two_mults_each() {
        let factors = (0..5)
            .map(|k| Factor::B {
                i: k % 3,
                j: 3,
                variant: (k % 8 + 1) as u8,
            })
            .collect();
        let chain = TransformChain::<f64>::new(4, Family::B, factors, Rational64::from_integer(0)).unwrap();
        let mut c = OpCount::ZERO;
        chain.apply(&Matrix::identity(4), &mut c).unwrap();
        assert_eq!(c, OpCount::new(2 * 5 * 4, 2 * 5 * 4, 0));
        assert_eq!(chain.ops_per_vector(), OpCount::new(10, 10, 0));
    }

    #[test]
    fn m_chain_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let even = random_m_chain(&mut rng, 8, 4);
        assert_eq!(even.ops_per_vector(), OpCount::new(32, 0, 8));
        assert_eq!(even.inverse_ops_per_vector(), OpCount::new(32, 0, 8));
        let odd = random_m_chain(&mut rng, 8, 3);
        assert_eq!(odd.ops_per_vector(), OpCount::new(24, 8, 0));
    }

    #[test]
    fn sopot_shear_inverts_exactly() {
        let coeff = Coeff::Sopot(quantize(0.75f64, 2).unwrap());
        let f = Factor::Shear {
            i: 0,
            j: 1,
            side: ShearSide::Lower,
            coeff,
        };
        assert_eq!(f.ops(), OpCount::new(2, 0, 2));
        let chain = TransformChain::new(2, Family::S, vec![f], Rational64::from_integer(0)).unwrap();
        if let Factor::Shear { coeff, .. } = &chain.factors()[0] {
            assert_eq!(coeff.negated().value(), -0.75);
        }
        let v = Matrix::from_rows(&[[0.375, -3.5, 17.0], [1.25, 0.0, -0.5]]).unwrap();
        let mut c = OpCount::ZERO;
        let fwd = chain.apply(&v, &mut c).unwrap();
        assert_eq!(fwd.row(1), &[1.25 + 0.75 * 0.375, 0.75 * -3.5, -0.5 + 0.75 * 17.0]);
        let back = chain.apply_inverse(&fwd, &mut c).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn pow2_scaling_inverse_is_a_shift() {
        let f = Factor::<f64>::Scaling {
            i: 2,
            scale: Scale::Pow2 {
                negative: false,
                exp: 2,
            },
        };
        assert_eq!(f.inverse_ops(), OpCount::new(0, 0, 1));
        let mut v = Matrix::from_rows(&[[1.0], [1.0], [3.0]]).unwrap();
        f.apply_in_place(&mut v);
        assert_eq!(v[(2, 0)], 12.0);
        f.apply_inverse_in_place(&mut v);
        assert_eq!(v[(2, 0)], 3.0);
    }

    #[test]
    fn hadamard_factor_counts() {
        let f = Factor::<f64>::Hadamard4 {
            idx: [0, 1, 2, 3],
            variant: 0,
        };
        assert_eq!(f.ops(), OpCount::new(12, 0, 4));
        let d = f.to_dense(4);
        assert!((d[(1, 1)] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn orthonormal_chains_round_trip_and_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [4usize, 6, 8, 16] {
            let chains = [
                random_b_chain(&mut rng, n, 3 * n),
                random_m_chain(&mut rng, n, 5),
                random_kron_chain(&mut rng, n, n),
            ];
            for chain in chains {
                let d = chain.materialize();
                let gram = d.transpose_mul(&d).unwrap();
                let tol = 1e-12 * chain.len().max(1) as f64;
                assert!(max_diff(&gram, &Matrix::identity(n)) <= tol, "{:?}", chain.family());
                let v = random_matrix(&mut rng, n, 7);
                let mut c = OpCount::ZERO;
                let fwd = chain.apply(&v, &mut c).unwrap();
                assert!(max_diff(&fwd, &d.matmul(&v).unwrap()) <= 1e-10);
                let back = chain.apply_inverse(&fwd, &mut c).unwrap();
                assert!(max_diff(&back, &v) <= 1e-11 * chain.len() as f64 * v.max_abs());
                let inv = chain.apply_inverse(&v, &mut c).unwrap();
                assert!(max_diff(&inv, &d.transpose().matmul(&v).unwrap()) <= 1e-10);
            }
        }
    }

    #[test]
    fn o_chain_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=6usize {
            let m = rng.gen_range(1..6);
            let factors = (0..m)
                .map(|_| {
                    let i = rng.gen_range(0..n - 1);
                    Factor::O {
                        i,
                        j: rng.gen_range(i + 1..n),
                        variant: rng.gen_range(1..=8),
                    }
                })
                .collect();
            let chain = TransformChain::<f64>::new(n, Family::O, factors, Rational64::from_integer(0)).unwrap();
            let d = det(&chain.materialize()).abs();
            assert!((d - 2f64.powi(m)).abs() < 1e-9);
            let v = random_matrix(&mut rng, n, 3);
            let mut c = OpCount::ZERO;
            let back = chain
                .apply_inverse(&chain.apply(&v, &mut c).unwrap(), &mut c)
                .unwrap();
            assert!(max_diff(&back, &v) < 1e-12);
        }
    }

    #[test]
    fn shear_determinant_is_one() {
        let f = Factor::Shear {
            i: 1,
            j: 3,
            side: ShearSide::Upper,
            coeff: Coeff::Raw(-0.37),
        };
        assert!((det(&f.to_dense(5)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn op_counts_do_not_depend_on_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let chain = random_b_chain(&mut rng, 6, 9);
        let (mut a, mut b) = (OpCount::ZERO, OpCount::ZERO);
        chain.apply(&random_matrix(&mut rng, 6, 5), &mut a).unwrap();
        chain.apply(&random_matrix(&mut rng, 6, 5), &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coding_costs() {
        let b = TransformChain::<f64>::new(
            64,
            Family::B,
            vec![Factor::B { i: 0, j: 1, variant: 3 }],
            Rational64::from_integer(0),
        )
        .unwrap();
        assert_eq!(b.coding_cost(), 16.0);
        let shear = Factor::<f64>::Shear {
            i: 0,
            j: 1,
            side: ShearSide::Lower,
            coeff: Coeff::Raw(0.3),
        };
        assert_eq!(shear.coding_bits(64), 77.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_m_chain(&mut rng, 64, 8);
        let expect = 8.0 / std::f64::consts::LN_2 * (64.0 * 64f64.ln() - 63.0);
        assert!((m.coding_cost() - expect).abs() < 1e-9);
    }

    #[test]
    fn rejects_malformed_factors() {
        let zero = Rational64::from_integer(0);
        let bad = |f: Factor<f64>, fam| TransformChain::new(4, fam, vec![f], zero).is_err();
        assert!(bad(Factor::B { i: 2, j: 1, variant: 1 }, Family::B));
        assert!(bad(Factor::B { i: 0, j: 4, variant: 1 }, Family::B));
        assert!(bad(Factor::B { i: 0, j: 1, variant: 17 }, Family::B));
        assert!(bad(Factor::O { i: 0, j: 1, variant: 9 }, Family::O));
        assert!(bad(Factor::O { i: 0, j: 1, variant: 1 }, Family::B));
        assert!(bad(
            Factor::Scaling {
                i: 0,
                scale: Scale::Raw(0.0)
            },
            Family::S
        ));
        assert!(bad(
            Factor::MStage {
                pairs: vec![(0, 1), (1, 2)],
                variants: vec![1, 1]
            },
            Family::M
        ));
        // M scale must match the stage count
        let stage = Factor::<f64>::MStage {
            pairs: vec![(0, 1), (2, 3)],
            variants: vec![1, 2],
        };
        assert!(TransformChain::new(4, Family::M, vec![stage.clone()], zero).is_err());
        assert!(TransformChain::new(4, Family::M, vec![stage], Rational64::new(-1, 2)).is_ok());
    }

    #[test]
    fn apply_rejects_wrong_height() {
        let chain = TransformChain::<f64>::identity(3, Family::B);
        let mut c = OpCount::ZERO;
        assert!(chain.apply(&Matrix::zeros(2, 2), &mut c).is_err());
    }

    proptest! {
        #[test]
        fn dyadic_shear_scaling_round_trip_is_exact(
            xs in prop::collection::vec(-1000i32..1000, 8),
            b in -64i32..64,
            e in -4i32..5,
        ) {
            let b = b as f64 / 16.0;
            let coeff = if b == 0.0 { Coeff::Raw(0.0) } else { Coeff::Sopot(quantize(b, 8).unwrap()) };
            let factors = vec![
                Factor::Shear { i: 0, j: 1, side: ShearSide::Lower, coeff },
                Factor::Scaling { i: 1, scale: Scale::Pow2 { negative: true, exp: e } },
                Factor::B { i: 0, j: 1, variant: SWAP_VARIANT },
            ];
            let chain = TransformChain::new(2, Family::S, factors, Rational64::from_integer(0)).unwrap();
            let v = Matrix::new(2, 4, xs.iter().map(|&x| x as f64 / 8.0).collect()).unwrap();
            let mut c = OpCount::ZERO;
            let back = chain.apply_inverse(&chain.apply(&v, &mut c).unwrap(), &mut c).unwrap();
            prop_assert_eq!(back, v);
        }
    }
}
