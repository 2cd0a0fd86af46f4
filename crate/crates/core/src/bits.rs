//! Bit strings, the OneMinMax objective, dominance and standard bit mutation.
//!
//! Positions are 1-indexed throughout the crate; position 1 is the leftmost
//! character of the textual form, matching the per-position counters used by
//! the diversity bookkeeping.

use std::fmt;
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rng::RandomSource;

/// Fixed-length binary genotype. Length is fixed at creation.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    bits: Box<[bool]>,
}

impl BitString {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "bit string length must be at least 1");
        BitString {
            bits: vec![false; n].into_boxed_slice(),
        }
    }

    pub fn ones(n: usize) -> Self {
        assert!(n >= 1, "bit string length must be at least 1");
        BitString {
            bits: vec![true; n].into_boxed_slice(),
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        assert!(!bits.is_empty(), "bit string length must be at least 1");
        BitString {
            bits: bits.into_boxed_slice(),
        }
    }

    /// Uniformly random string of length `n`.
    pub fn random(n: usize, rng: &mut RandomSource) -> Self {
        assert!(n >= 1);
        let bits = (0..n).map(|_| rng.index(2) == 1).collect::<Vec<_>>();
        Self::from_bits(bits)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    /// Bit at 1-based position `pos`.
    pub fn get(&self, pos: usize) -> bool {
        self.bits[pos - 1]
    }

    pub fn set(&mut self, pos: usize, value: bool) {
        self.bits[pos - 1] = value;
    }

    pub fn flip(&mut self, pos: usize) {
        self.bits[pos - 1] = !self.bits[pos - 1];
    }

    pub fn one_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn zero_count(&self) -> usize {
        self.len() - self.one_count()
    }

    pub fn complement(&self) -> Self {
        BitString {
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }

    /// 1-based positions that hold a one-bit.
    pub fn one_positions(&self) -> Vec<usize> {
        (1..=self.len()).filter(|&p| self.get(p)).collect()
    }

    /// 1-based positions that hold a zero-bit.
    pub fn zero_positions(&self) -> Vec<usize> {
        (1..=self.len()).filter(|&p| !self.get(p)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in self.bits.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseBitStringError {
    #[error("empty bit string")]
    Empty,
    #[error("invalid character {ch:?} at position {pos}")]
    BadChar { pos: usize, ch: char },
}

impl FromStr for BitString {
    type Err = ParseBitStringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(ParseBitStringError::Empty);
        }
        let mut bits = Vec::with_capacity(s.len());
        for (idx, ch) in s.chars().enumerate() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return Err(ParseBitStringError::BadChar { pos: idx + 1, ch }),
            }
        }
        Ok(BitString::from_bits(bits))
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// A bi-objective fitness value under maximization. For OneMinMax the two
/// components are the one-bit and zero-bit counts, so `ones + zeros = n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub ones: usize,
    pub zeros: usize,
}

impl ObjectiveValue {
    pub fn new(ones: usize, zeros: usize) -> Self {
        ObjectiveValue { ones, zeros }
    }
}

pub fn one_count(x: &BitString) -> usize {
    x.one_count()
}

/// OneMinMax value `(|x|, n - |x|)`.
pub fn one_min_max(x: &BitString) -> ObjectiveValue {
    let ones = x.one_count();
    ObjectiveValue::new(ones, x.len() - ones)
}

/// True iff `a` is at least `b` in both components and strictly better in one.
pub fn dominates(a: ObjectiveValue, b: ObjectiveValue) -> bool {
    a.ones >= b.ones && a.zeros >= b.zeros && (a.ones > b.ones || a.zeros > b.zeros)
}

/// Hamming distance; the strings must have equal length.
pub fn hamming(x: &BitString, y: &BitString) -> usize {
    assert_eq!(x.len(), y.len(), "hamming distance needs equal lengths");
    x.iter().zip(y.iter()).filter(|(a, b)| a != b).count()
}

/// Flips each bit of `x` independently with probability exactly 1/n.
///
/// Bits are drawn in ascending position order, one uniform draw per
/// position, so a fixed seed reproduces the same offspring everywhere.
pub fn standard_bit_mutation(x: &BitString, rng: &mut RandomSource) -> BitString {
    let mut y = x.clone();
    mutate_in_place(&mut y, rng);
    y
}

/// Allocation-free variant: copies `x` into `out` and mutates there.
pub fn mutate_into(x: &BitString, out: &mut BitString, rng: &mut RandomSource) {
    assert_eq!(x.len(), out.len());
    out.bits.copy_from_slice(&x.bits);
    mutate_in_place(out, rng);
}

fn mutate_in_place(y: &mut BitString, rng: &mut RandomSource) {
    let n = y.len();
    for pos in 1..=n {
        if rng.one_in(n) {
            y.flip(pos);
        }
    }
}

/// Exact probability that standard bit mutation turns `x` into `y`:
/// `(1/n)^H (1 - 1/n)^(n-H)` with `H` the Hamming distance, as a rational.
pub fn mutation_probability(x: &BitString, y: &BitString) -> BigRational {
    let n = x.len();
    assert!(n >= 2, "mutation probability needs n >= 2");
    let h = hamming(x, y);
    let num = BigInt::from(n - 1).pow((n - h) as u32);
    let den = BigInt::from(n).pow(n as u32);
    BigRational::new(num, den)
}
