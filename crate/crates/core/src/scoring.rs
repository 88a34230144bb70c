//! Closed-form objective changes for inserting one elementary factor.
//!
//! With `Z = Y·Xᵀ` and `W = X·Xᵀ`, every candidate factor changes
//! `‖Y − F·X‖²` by an amount that depends only on a few entries of `Z` and
//! `W`, so scanning all pairs costs `O(n²)` instead of `O(n³N)`.

use crate::error::{contract, Error, Result};
use crate::factors::{catalog_b, unscaled_g1, Scale, G1_COUNT};
use crate::linalg::{dot, Matrix};
use crate::scalar::Real;

/// Correlation tables for a fixed `(Y, X)` pair.
#[derive(Clone, Debug)]
pub struct ScoreTables<T> {
    z: Matrix<T>,
    w: Matrix<T>,
    y_norm_sq: T,
    x_norm_sq: T,
}

impl<T: Real> ScoreTables<T> {
    /// Assembles tables from precomputed parts; `w` may be empty when only
    /// orthonormal scores are needed.
    pub fn from_parts(z: Matrix<T>, w: Matrix<T>, y_norm_sq: T, x_norm_sq: T) -> Self {
        Self {
            z,
            w,
            y_norm_sq,
            x_norm_sq,
        }
    }

    #[inline]
    pub fn z(&self) -> &Matrix<T> {
        &self.z
    }

    #[inline]
    pub fn w(&self) -> &Matrix<T> {
        &self.w
    }

    pub fn trace_z(&self) -> T {
        self.z.trace()
    }

    /// `‖Y‖² + ‖X‖² − 2 tr Z`, i.e. `‖Y − X‖²`.
    pub fn baseline(&self) -> T {
        self.y_norm_sq + self.x_norm_sq - T::lit(2.0) * self.trace_z()
    }

    pub fn n(&self) -> usize {
        self.z.rows()
    }
}

pub fn build_tables<T: Real>(y: &Matrix<T>, x: &Matrix<T>) -> Result<ScoreTables<T>> {
    if y.shape() != x.shape() {
        return Err(Error::DimensionMismatch {
            op: "build_tables",
            lhs: y.shape(),
            rhs: x.shape(),
        });
    }
    Ok(ScoreTables {
        z: y.mul_transpose(x)?,
        w: x.mul_transpose(x)?,
        y_norm_sq: y.frobenius_sq(),
        x_norm_sq: x.frobenius_sq(),
    })
}

fn check_pair(n: usize, i: usize, j: usize) -> Result<()> {
    if i >= j || j >= n {
        return Err(contract(format!("pair ({i}, {j}) must satisfy i < j < {n}")));
    }
    Ok(())
}

/// `C^(t)` for all sixteen catalog blocks, read straight from `Z`.
pub fn b_scores_from_z<T: Real>(z: &Matrix<T>, i: usize, j: usize) -> [T; 16] {
    let two = T::lit(2.0);
    let zt = [[z[(i, i)], z[(i, j)]], [z[(j, i)], z[(j, j)]]];
    let diag = zt[0][0] + zt[1][1];
    let mut out = [T::zero(); 16];
    for (t, slot) in out.iter_mut().enumerate() {
        let b = catalog_b(t as u8 + 1);
        let mut acc = T::zero();
        for r in 0..2 {
            for c in 0..2 {
                match b.signs[r][c] {
                    1 => acc = acc + zt[r][c],
                    -1 => acc = acc - zt[r][c],
                    _ => {}
                }
            }
        }
        if b.scaled {
            acc = acc * T::FRAC_1_SQRT_2();
        }
        *slot = two * (diag - acc);
    }
    out
}

/// `C^(t)_{ij}` for `t = 1..=16`: `‖Y − B_ij X‖² = baseline + C^(t)`.
pub fn b_scores<T: Real>(tables: &ScoreTables<T>, i: usize, j: usize) -> Result<[T; 16]> {
    check_pair(tables.n(), i, j)?;
    Ok(b_scores_from_z(&tables.z, i, j))
}

/// Objective change for embedding an orthonormal `k×k` block on `indices`:
/// `2 tr(Z̃) − 2 Σ B̃_ab Z̃_ab`.
pub fn block_score<T: Real>(tables: &ScoreTables<T>, indices: &[usize], block: &Matrix<T>) -> Result<T> {
    let k = indices.len();
    if block.shape() != (k, k) {
        return Err(contract("block size must match the index tuple"));
    }
    if indices.windows(2).any(|w| w[0] >= w[1]) || indices.last().is_some_and(|&l| l >= tables.n()) {
        return Err(contract("block indices must be strictly increasing and in range"));
    }
    let gram = block.transpose_mul(block)?;
    if gram.sub(&Matrix::identity(k))?.max_abs() > T::lit(1e-10) {
        return Err(contract("block is not orthonormal"));
    }
    Ok(block_score_unchecked(&tables.z, indices, |a, b| block[(a, b)]))
}

/// `block_score` without validation, for hot loops over known-good catalogs.
pub fn block_score_unchecked<T: Real>(z: &Matrix<T>, indices: &[usize], block: impl Fn(usize, usize) -> T) -> T {
    let mut tr = T::zero();
    let mut inner = T::zero();
    for (a, &ra) in indices.iter().enumerate() {
        tr = tr + z[(ra, ra)];
        for (b, &rb) in indices.iter().enumerate() {
            inner = inner + block(a, b) * z[(ra, rb)];
        }
    }
    T::lit(2.0) * (tr - inner)
}

/// `H^(t)` for the eight ±1 patterns `[[a,b],[c,d]]` from `Z` and `W`.
pub fn o_scores_from<T: Real>(z: &Matrix<T>, w: &Matrix<T>, i: usize, j: usize) -> [T; 8] {
    let two = T::lit(2.0);
    let mut out = [T::zero(); 8];
    for (t, slot) in out.iter_mut().enumerate() {
        let s = unscaled_g1(t as u8 + 1);
        let f = |v: i8| T::lit(v as f64);
        let (a, b, c, d) = (f(s[0][0]), f(s[0][1]), f(s[1][0]), f(s[1][1]));
        *slot = w[(i, i)] + w[(j, j)]
            - two * (a - T::one()) * z[(i, i)]
            - two * (d - T::one()) * z[(j, j)]
            - two * b * z[(i, j)]
            - two * c * z[(j, i)]
            + two * (a * b + c * d) * w[(i, j)];
    }
    out
}

/// `H^(t)_{ij}` for `t = 1..=8`: `‖Y − O_ij X‖² = baseline + H^(t)`.
pub fn o_scores<T: Real>(tables: &ScoreTables<T>, i: usize, j: usize) -> Result<[T; 8]> {
    check_pair(tables.n(), i, j)?;
    if tables.w.shape() != tables.z.shape() {
        return Err(contract("O scores need the W table"));
    }
    debug_assert_eq!(G1_COUNT, 8);
    Ok(o_scores_from(&tables.z, &tables.w, i, j))
}

/// Outcome of the row-energy test `‖x_j‖ ≥ ‖y_i − x_i‖` for all `i ≠ j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalOptimality {
    pub holds: bool,
    /// First `(i, j)` in row-major order violating the inequality.
    pub witness: Option<(usize, usize)>,
}

pub fn o_local_optimality<T: Real>(y: &Matrix<T>, x: &Matrix<T>) -> Result<LocalOptimality> {
    if y.shape() != x.shape() {
        return Err(Error::DimensionMismatch {
            op: "o_local_optimality",
            lhs: y.shape(),
            rhs: x.shape(),
        });
    }
    let n = y.rows();
    let x_norm: Vec<T> = (0..n).map(|r| x.row_norm_sq(r).sqrt()).collect();
    let err_norm: Vec<T> = (0..n)
        .map(|r| {
            y.row(r)
                .iter()
                .zip(x.row(r))
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
                .sqrt()
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && x_norm[j] - err_norm[i] < T::zero() {
                return Ok(LocalOptimality {
                    holds: false,
                    witness: Some((i, j)),
                });
            }
        }
    }
    Ok(LocalOptimality {
        holds: true,
        witness: None,
    })
}

/// Best shear on each side of a pair. Scores are objective changes (≤ 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShearInit<T> {
    /// Lower shear `x_j += b·x_i`.
    pub d_lower: T,
    /// Upper shear `x_i += c·x_j`.
    pub d_upper: T,
    pub b: T,
    pub c: T,
}

pub fn shear_init_from<T: Real>(z: &Matrix<T>, w: &Matrix<T>, i: usize, j: usize) -> ShearInit<T> {
    let side = |num: T, den: T| {
        if den > T::zero() {
            let coeff = num / den;
            (-(num * num) / den, coeff)
        } else {
            (T::zero(), T::zero())
        }
    };
    let (d_lower, b) = side(z[(j, i)] - w[(i, j)], w[(i, i)]);
    let (d_upper, c) = side(z[(i, j)] - w[(i, j)], w[(j, j)]);
    ShearInit {
        d_lower,
        d_upper,
        b,
        c,
    }
}

pub fn shear_init_scores<T: Real>(tables: &ScoreTables<T>, i: usize, j: usize) -> Result<ShearInit<T>> {
    check_pair(tables.n(), i, j)?;
    Ok(shear_init_from(&tables.z, &tables.w, i, j))
}

/// Objective change of a lower shear with a given coefficient.
pub fn shear_init_change<T: Real>(z: &Matrix<T>, w: &Matrix<T>, i: usize, j: usize, lower: bool, coeff: T) -> T {
    let two = T::lit(2.0);
    if lower {
        -two * coeff * (z[(j, i)] - w[(i, j)]) + coeff * coeff * w[(i, i)]
    } else {
        -two * coeff * (z[(i, j)] - w[(i, j)]) + coeff * coeff * w[(j, j)]
    }
}

/// Scaling along one coordinate: the score and the coefficient to commit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingScore<T> {
    pub score: T,
    pub coeff: Scale<T>,
}

fn unit_scale<T: Real>(pow2: bool) -> Scale<T> {
    if pow2 {
        Scale::Pow2 {
            negative: false,
            exp: 0,
        }
    } else {
        Scale::Raw(T::one())
    }
}

/// `F_i` and the coefficient; `F = −2Z_ii(a−1) + W_ii(a²−1)` at the committed `a`.
pub fn scaling_init_from<T: Real>(z: &Matrix<T>, w: &Matrix<T>, i: usize, pow2: bool) -> ScalingScore<T> {
    let (zii, wii) = (z[(i, i)], w[(i, i)]);
    if wii <= T::zero() || zii == T::zero() {
        return ScalingScore {
            score: T::zero(),
            coeff: unit_scale(pow2),
        };
    }
    let a_star = zii / wii;
    let coeff = if pow2 {
        Scale::nearest_pow2(a_star)
    } else {
        Scale::Raw(a_star)
    };
    let a = coeff.value();
    ScalingScore {
        score: scaling_init_change(zii, wii, a),
        coeff,
    }
}

pub fn scaling_init_change<T: Real>(zii: T, wii: T, a: T) -> T {
    -T::lit(2.0) * zii * (a - T::one()) + wii * (a * a - T::one())
}

pub fn scaling_init_score<T: Real>(tables: &ScoreTables<T>, i: usize, pow2: bool) -> Result<ScalingScore<T>> {
    if i >= tables.n() {
        return Err(contract(format!("scaling index {i} out of range")));
    }
    Ok(scaling_init_from(&tables.z, &tables.w, i, pow2))
}

/// State for re-optimizing one factor of a chain `A_k·F_k·X_k`.
///
/// `a` is the product of the factors after position `k`, `x` the image of
/// the code through the factors before it, and `r = Y − A_k·X_k`.
#[derive(Clone, Debug)]
pub struct SweepContext<T> {
    pub a: Matrix<T>,
    pub x: Matrix<T>,
    pub r: Matrix<T>,
}

impl<T: Real> SweepContext<T> {
    pub fn new(y: &Matrix<T>, a: Matrix<T>, x: Matrix<T>) -> Result<Self> {
        let r = y.sub(&a.matmul(&x)?)?;
        Ok(Self { a, x, r })
    }

    /// `‖f_k‖²`, the objective with factor `k` removed.
    pub fn residual_sq(&self) -> T {
        self.r.frobenius_sq()
    }

    /// All correlations `M = A_kᵀ·R·X_kᵀ` plus the norms scores divide by.
    pub fn tables(&self) -> Result<SweepTables<T>> {
        let rx = self.r.mul_transpose(&self.x)?;
        let m = self.a.transpose_mul(&rx)?;
        let n = self.a.cols();
        let a_norm_sq = (0..n)
            .map(|c| (0..self.a.rows()).map(|r| self.a[(r, c)] * self.a[(r, c)]).sum())
            .collect();
        let x_norm_sq = (0..self.x.rows()).map(|r| self.x.row_norm_sq(r)).collect();
        Ok(SweepTables {
            m,
            a_norm_sq,
            x_norm_sq,
        })
    }

    fn correlation(&self, a_col: usize, x_row: usize) -> T {
        let x = self.x.row(x_row);
        (0..self.r.rows())
            .map(|r| self.a[(r, a_col)] * dot(self.r.row(r), x))
            .sum()
    }

    fn a_col_norm_sq(&self, c: usize) -> T {
        (0..self.a.rows()).map(|r| self.a[(r, c)] * self.a[(r, c)]).sum()
    }
}

/// `m[(j, i)] = a_jᵀ R x_i` with column norms of `A_k` and row norms of `X_k`.
#[derive(Clone, Debug)]
pub struct SweepTables<T> {
    pub m: Matrix<T>,
    pub a_norm_sq: Vec<T>,
    pub x_norm_sq: Vec<T>,
}

/// Best shear reductions on each side. `e_lower`/`e_upper` are decreases (≥ 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShearUpdate<T> {
    pub e_lower: T,
    pub e_upper: T,
    pub b: T,
    pub c: T,
}

fn rank_one_fit<T: Real>(g: T, h: T) -> (T, T) {
    if h > T::zero() {
        (g * g / h, g / h)
    } else {
        (T::zero(), T::zero())
    }
}

pub fn shear_update_from<T: Real>(t: &SweepTables<T>, i: usize, j: usize) -> ShearUpdate<T> {
    let (e_lower, b) = rank_one_fit(t.m[(j, i)], t.a_norm_sq[j] * t.x_norm_sq[i]);
    let (e_upper, c) = rank_one_fit(t.m[(i, j)], t.a_norm_sq[i] * t.x_norm_sq[j]);
    ShearUpdate {
        e_lower,
        e_upper,
        b,
        c,
    }
}

/// Decrease of `‖R − coeff·a xᵀ‖²` relative to `‖R‖²` for a given coefficient.
pub fn rank_one_decrease<T: Real>(g: T, h: T, coeff: T) -> T {
    T::lit(2.0) * coeff * g - coeff * coeff * h
}

pub fn shear_update_scores<T: Real>(ctx: &SweepContext<T>, i: usize, j: usize) -> Result<ShearUpdate<T>> {
    check_pair(ctx.a.cols(), i, j)?;
    let (e_lower, b) = rank_one_fit(
        ctx.correlation(j, i),
        ctx.a_col_norm_sq(j) * ctx.x.row_norm_sq(i),
    );
    let (e_upper, c) = rank_one_fit(
        ctx.correlation(i, j),
        ctx.a_col_norm_sq(i) * ctx.x.row_norm_sq(j),
    );
    Ok(ShearUpdate {
        e_lower,
        e_upper,
        b,
        c,
    })
}

/// `G_i` as a decrease, with `a* = g/h + 1` optionally projected to `±2^k`.
pub fn scaling_update_from<T: Real>(g: T, h: T, pow2: bool) -> ScalingScore<T> {
    if h <= T::zero() {
        return ScalingScore {
            score: T::zero(),
            coeff: unit_scale(pow2),
        };
    }
    let a_star = g / h + T::one();
    if a_star == T::zero() {
        return ScalingScore {
            score: T::zero(),
            coeff: unit_scale(pow2),
        };
    }
    let coeff = if pow2 {
        Scale::nearest_pow2(a_star)
    } else {
        Scale::Raw(a_star)
    };
    ScalingScore {
        score: rank_one_decrease(g, h, coeff.value() - T::one()),
        coeff,
    }
}

pub fn scaling_update_score<T: Real>(ctx: &SweepContext<T>, i: usize, pow2: bool) -> Result<ScalingScore<T>> {
    if i >= ctx.a.cols() {
        return Err(contract(format!("scaling index {i} out of range")));
    }
    Ok(scaling_update_from(
        ctx.correlation(i, i),
        ctx.a_col_norm_sq(i) * ctx.x.row_norm_sq(i),
        pow2,
    ))
}
