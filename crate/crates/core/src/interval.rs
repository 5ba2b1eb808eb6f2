//! Closed rational subintervals of `[0,1]`, the atom of uncertainty.

use std::fmt;

use num::traits::{One, Signed, Zero};
use thiserror::Error;

use crate::rational::Rat;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IntervalError {
    #[error("empty interval: lo {lo} > hi {hi}")]
    Empty { lo: Rat, hi: Rat },
    #[error("interval bound {bound} outside [0,1]")]
    OutOfRange { bound: Rat },
}

/// A closed interval `[lo, hi]` with `0 <= lo <= hi <= 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval {
    lo: Rat,
    hi: Rat,
}

impl Interval {
    pub fn new(lo: Rat, hi: Rat) -> Result<Self, IntervalError> {
        if lo.is_negative() || lo > Rat::one() {
            return Err(IntervalError::OutOfRange { bound: lo });
        }
        if hi.is_negative() || hi > Rat::one() {
            return Err(IntervalError::OutOfRange { bound: hi });
        }
        if lo > hi {
            return Err(IntervalError::Empty { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(p: Rat) -> Result<Self, IntervalError> {
        Interval::new(p.clone(), p)
    }

    pub fn zero() -> Self {
        Interval {
            lo: Rat::zero(),
            hi: Rat::zero(),
        }
    }

    pub fn one() -> Self {
        Interval {
            lo: Rat::one(),
            hi: Rat::one(),
        }
    }

    pub fn full() -> Self {
        Interval {
            lo: Rat::zero(),
            hi: Rat::one(),
        }
    }

    pub fn lo(&self) -> &Rat {
        &self.lo
    }

    pub fn hi(&self) -> &Rat {
        &self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    /// True for the point interval `[0,0]`, the implicit bound of undeclared
    /// transitions.
    pub fn is_zero(&self) -> bool {
        self.hi.is_zero()
    }

    pub fn contains(&self, v: &Rat) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    /// Interval inclusion `self ⊆ other`.
    pub fn subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}
