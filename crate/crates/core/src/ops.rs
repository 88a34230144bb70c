use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul};

use serde::{Deserialize, Serialize};

/// Arithmetic performed by one or more transform applications.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpCount {
    pub additions: u64,
    pub multiplications: u64,
    pub shifts: u64,
}

impl OpCount {
    pub const ZERO: Self = Self::new(0, 0, 0);

    pub const fn new(additions: u64, multiplications: u64, shifts: u64) -> Self {
        Self {
            additions,
            multiplications,
            shifts,
        }
    }

    pub fn total(&self) -> u64 {
        self.additions + self.multiplications + self.shifts
    }
}

impl Add for OpCount {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            additions: self.additions + rhs.additions,
            multiplications: self.multiplications + rhs.multiplications,
            shifts: self.shifts + rhs.shifts,
        }
    }
}

impl AddAssign for OpCount {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Mul<u64> for OpCount {
    type Output = Self;

    fn mul(self, k: u64) -> Self {
        Self {
            additions: self.additions * k,
            multiplications: self.multiplications * k,
            shifts: self.shifts * k,
        }
    }
}

impl Sum for OpCount {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, Add::add)
    }
}
