//! Total Hamming distance via per-position one-counts.
//!
//! `D(P) = sum_k m_k (m - m_k)` where `m_k` counts the one-bits in position
//! `k` across the population. Everything here is exact integer arithmetic:
//! the acceptance rule compares diversities for equality, so no floats are
//! allowed anywhere near these values.

use crate::bits::BitString;

/// Per-position one-counts `m_1..m_n` plus the population size `m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnCounts {
    counts: Vec<usize>,
    size: usize,
}

impl ColumnCounts {
    pub fn empty(n: usize) -> Self {
        assert!(n >= 1);
        ColumnCounts {
            counts: vec![0; n],
            size: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    /// Population size `m`.
    pub fn population_size(&self) -> usize {
        self.size
    }

    /// One-count of 1-based position `pos`.
    pub fn count(&self, pos: usize) -> usize {
        self.counts[pos - 1]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn add(&mut self, x: &BitString) {
        assert_eq!(x.len(), self.n());
        for (slot, bit) in self.counts.iter_mut().zip(x.iter()) {
            *slot += bit as usize;
        }
        self.size += 1;
    }

    pub fn remove(&mut self, x: &BitString) {
        assert_eq!(x.len(), self.n());
        assert!(self.size > 0);
        for (slot, bit) in self.counts.iter_mut().zip(x.iter()) {
            *slot -= bit as usize;
        }
        self.size -= 1;
    }

    /// Swaps member `old` for `new` without changing the population size.
    pub fn replace(&mut self, old: &BitString, new: &BitString) {
        assert_eq!(old.len(), self.n());
        assert_eq!(new.len(), self.n());
        for ((slot, o), n) in self.counts.iter_mut().zip(old.iter()).zip(new.iter()) {
            *slot = *slot + n as usize - o as usize;
        }
    }
}

/// Builds counts from a non-empty population of equal-length strings.
pub fn column_counts(population: &[BitString]) -> ColumnCounts {
    assert!(!population.is_empty(), "population must be non-empty");
    let mut c = ColumnCounts::empty(population[0].len());
    for x in population {
        c.add(x);
    }
    c
}

/// Total Hamming distance from counts: `sum_k m_k (m - m_k)`.
pub fn total_hamming(c: &ColumnCounts) -> u64 {
    let m = c.size as u64;
    c.counts.iter().map(|&mk| mk as u64 * (m - mk as u64)).sum()
}

/// Sum of Hamming distances over unordered pairs; the independent oracle for
/// [`total_hamming`].
pub fn pairwise_total_hamming(population: &[BitString]) -> u64 {
    assert!(!population.is_empty());
    let mut total = 0u64;
    for (i, x) in population.iter().enumerate() {
        for y in &population[i + 1..] {
            total += crate::bits::hamming(x, y) as u64;
        }
    }
    total
}

/// Diversity change from replacing member `old` by `new`, in O(n) from the
/// counts alone. `old` must be consistent with `c` (it is a member).
pub fn diversity_delta(c: &ColumnCounts, old: &BitString, new: &BitString) -> i64 {
    assert_eq!(old.len(), c.n());
    assert_eq!(new.len(), c.n());
    let m = c.size as i64;
    let mut delta = 0i64;
    for ((&mk, o), n) in c.counts.iter().zip(old.iter()).zip(new.iter()) {
        if o != n {
            let mk = mk as i64;
            let mk_new = mk - o as i64 + n as i64;
            delta += mk_new * (m - mk_new) - mk * (m - mk);
        }
    }
    delta
}

/// Sum of distances from member `x` (counted in `c`) to all other members.
pub fn member_distance_sum(c: &ColumnCounts, x: &BitString) -> u64 {
    assert_eq!(x.len(), c.n());
    let m = c.size as u64;
    c.counts
        .iter()
        .zip(x.iter())
        .map(|(&mk, bit)| if bit { m - mk as u64 } else { mk as u64 })
        .sum()
}

/// Sum of distances from outsider `y` (not counted in `c`) to all members.
pub fn outsider_distance_sum(c: &ColumnCounts, y: &BitString) -> u64 {
    assert_eq!(y.len(), c.n());
    let m = c.size as u64;
    c.counts
        .iter()
        .zip(y.iter())
        .map(|(&mk, bit)| if bit { m - mk as u64 } else { mk as u64 })
        .sum()
}

/// Largest possible total Hamming distance of any population of `m` strings
/// of length `n`: `m^2 n / 4` for even `m`, `n (m^2 - 1) / 4` for odd `m`.
pub fn max_diversity(n: usize, m: usize) -> u64 {
    assert!(n >= 1 && m >= 1);
    let (n, m) = (n as u128, m as u128);
    let value = if m % 2 == 0 {
        m * m * n / 4
    } else {
        n * (m * m - 1) / 4
    };
    value as u64
}
