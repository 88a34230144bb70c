//! Sums of signed powers of two.
//!
//! A coefficient `Σ s_t 2^{v_t}` with at most `p` terms multiplies a value
//! using only shifts and additions. [`quantize`] builds the expansion greedily,
//! one nearest power of two at a time.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::ops::OpCount;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Term {
    /// `+1` or `-1`.
    pub sign: i8,
    pub exp: i32,
}

/// A value in the SOPOT set: terms with strictly decreasing exponents.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SopotWire", into = "SopotWire")]
pub struct SopotValue {
    terms: Vec<Term>,
}

impl SopotValue {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: Vec<Term>) -> Result<Self> {
        if terms.iter().any(|t| t.sign != 1 && t.sign != -1) {
            return Err(contract("SOPOT signs must be +1 or -1"));
        }
        if terms.windows(2).any(|w| w[0].exp <= w[1].exp) {
            return Err(contract("SOPOT exponents must be strictly decreasing"));
        }
        Ok(Self { terms })
    }

    /// A single signed power of two.
    pub fn power_of_two(negative: bool, exp: i32) -> Self {
        Self {
            terms: vec![Term {
                sign: if negative { -1 } else { 1 },
                exp,
            }],
        }
    }

    #[inline]
    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Number of terms, i.e. the `p` actually used.
    #[inline]
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn value<T: Real>(&self) -> T {
        self.terms.iter().fold(T::zero(), |acc, t| {
            let p = T::pow2(t.exp);
            if t.sign < 0 {
                acc - p
            } else {
                acc + p
            }
        })
    }

    pub fn negated(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    sign: -t.sign,
                    exp: t.exp,
                })
                .collect(),
        }
    }

    /// Cost of storing the expansion: a sign bit and an 8-bit exponent per term.
    pub fn coding_bits(&self) -> f64 {
        9.0 * self.terms.len() as f64
    }
}

impl fmt::Display for SopotValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            let sign = if t.sign < 0 { "-" } else if k == 0 { "" } else { "+" };
            write!(f, "{sign}2^{}", t.exp)?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct SopotWire {
    s: Vec<i8>,
    v: Vec<i32>,
}

impl From<SopotValue> for SopotWire {
    fn from(value: SopotValue) -> Self {
        Self {
            s: value.terms.iter().map(|t| t.sign).collect(),
            v: value.terms.iter().map(|t| t.exp).collect(),
        }
    }
}

impl TryFrom<SopotWire> for SopotValue {
    type Error = Error;

    fn try_from(w: SopotWire) -> Result<Self> {
        if w.s.len() != w.v.len() {
            return Err(contract("SOPOT sign and exponent lists differ in length"));
        }
        let terms = w
            .s
            .into_iter()
            .zip(w.v)
            .map(|(sign, exp)| Term { sign, exp })
            .collect();
        Self::from_terms(terms)
    }
}

/// Coefficient precision: a term budget, or the full working precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Precision {
    Terms(u32),
    Infinite,
}

impl Precision {
    pub fn is_finite(&self) -> bool {
        matches!(self, Precision::Terms(_))
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precision::Terms(p) => write!(f, "{p}"),
            Precision::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(Precision::Infinite);
        }
        match s.parse::<u32>() {
            Ok(p) if p >= 1 => Ok(Precision::Terms(p)),
            _ => Err(contract(format!("precision must be a positive integer or `inf`, got `{s}`"))),
        }
    }
}

/// Exponent `k` minimizing `|a − 2^k|` for `a > 0`, larger `k` on ties.
pub fn nearest_power_exponent<T: Real>(a: T) -> i32 {
    debug_assert!(a > T::zero());
    let guess = a.log2().round().to_i32().unwrap_or(0);
    let mut best = guess - 1;
    let mut best_err = (a - T::pow2(best)).abs();
    for k in [guess, guess + 1] {
        let err = (a - T::pow2(k)).abs();
        if err <= best_err {
            best = k;
            best_err = err;
        }
    }
    best
}

/// Greedy SOPOT expansion of `x` with at most `p` terms.
///
/// Each step takes the power of two nearest the remaining residual, so the
/// error shrinks by at least a factor three per term. Stops early once the
/// residual is exactly zero.
pub fn quantize<T: Real>(x: T, p: u32) -> Result<SopotValue> {
    if !x.is_finite() {
        return Err(contract("cannot quantize a non-finite value"));
    }
    if p == 0 {
        return Err(contract("SOPOT precision must be at least 1"));
    }
    let mut terms = Vec::with_capacity(p as usize);
    let mut y = T::zero();
    let mut r = x;
    for _ in 0..p {
        if r == T::zero() {
            break;
        }
        let exp = nearest_power_exponent(r.abs());
        let sign: i8 = if r < T::zero() { -1 } else { 1 };
        let step = T::pow2(exp);
        y = if sign < 0 { y - step } else { y + step };
        r = x - y;
        terms.push(Term { sign, exp });
    }
    SopotValue::from_terms(terms)
}

/// `v · value(c)` computed as a signed sum of shifted copies of `v`.
///
/// Charges one shift per term and one addition per term after the first.
pub fn shift_add_multiply<T: Real>(v: T, c: &SopotValue, counter: &mut OpCount) -> T {
    let p = c.len() as u64;
    counter.shifts += p;
    counter.additions += p.saturating_sub(1);
    c.terms.iter().fold(T::zero(), |acc, t| {
        let shifted = v * T::pow2(t.exp);
        if t.sign < 0 {
            acc - shifted
        } else {
            acc + shifted
        }
    })
}
