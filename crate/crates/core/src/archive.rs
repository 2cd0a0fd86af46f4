//! The population archive and its acceptance rule.
//!
//! One individual per objective value. An offspring with the same fitness as
//! an incumbent replaces it iff the replacement does not decrease the total
//! Hamming distance (ties accept the newcomer). An offspring with a new
//! fitness is inserted unless dominated, evicting everything it dominates.
//! For OneMinMax the fitness bucket is just the one-count, giving O(1)
//! lookup, but the general dominance path is kept and works for any
//! bi-objective function.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{dominates, one_min_max, BitString, ObjectiveValue};
use crate::diversity::{
    diversity_delta, max_diversity, member_distance_sum, outsider_distance_sum, ColumnCounts,
};
use crate::rng::RandomSource;

/// A bi-objective fitness with an injective bucket index per value.
pub trait Objective {
    fn eval(&self, x: &BitString) -> ObjectiveValue;
    fn bucket(&self, value: ObjectiveValue) -> usize;
    fn bucket_count(&self) -> usize;
}

/// `g(x) = (|x|, n - |x|)`; bucket `i` holds the individual with `i` one-bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OneMinMax {
    n: usize,
}

impl OneMinMax {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        OneMinMax { n }
    }
}

impl Objective for OneMinMax {
    fn eval(&self, x: &BitString) -> ObjectiveValue {
        debug_assert_eq!(x.len(), self.n);
        one_min_max(x)
    }

    fn bucket(&self, value: ObjectiveValue) -> usize {
        value.ones
    }

    fn bucket_count(&self) -> usize {
        self.n + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeKind {
    ReplacedSameFitness,
    InsertedNewFitness,
    RejectedDiversity,
    RejectedDominated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AcceptanceOutcome {
    pub kind: OutcomeKind,
    /// Bucket of the replaced incumbent, for same-fitness replacements.
    pub replaced_index: Option<usize>,
    pub diversity_after: u64,
    /// True iff the population actually changed (a tie-accept of an identical
    /// string is accepted but changes nothing).
    pub changed: bool,
}

impl AcceptanceOutcome {
    pub fn accepted(&self) -> bool {
        matches!(
            self.kind,
            OutcomeKind::ReplacedSameFitness | OutcomeKind::InsertedNewFitness
        )
    }
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("empty snapshot")]
    Empty,
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: crate::bits::ParseBitStringError,
    },
    #[error("line {line}: length {got} != {expected}")]
    LengthMismatch {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("duplicate objective value (bucket {bucket})")]
    DuplicateFitness { bucket: usize },
}

#[derive(Clone, Debug)]
pub struct Archive<O: Objective> {
    objective: O,
    slots: Vec<Option<BitString>>,
    occupied: Vec<usize>, // sorted bucket ids
    counts: ColumnCounts,
    diversity: u64,
    n: usize,
}

pub type OmmArchive = Archive<OneMinMax>;

impl<O: Objective> Archive<O> {
    /// Archive holding exactly the initial individual.
    pub fn new(objective: O, x: BitString) -> Self {
        let n = x.len();
        let mut a = Archive {
            slots: vec![None; objective.bucket_count()],
            occupied: Vec::new(),
            counts: ColumnCounts::empty(n),
            diversity: 0,
            n,
            objective,
        };
        a.insert(x);
        a.debug_check();
        a
    }

    /// Builds an archive from distinct-fitness individuals.
    pub fn from_individuals(
        objective: O,
        individuals: Vec<BitString>,
    ) -> Result<Self, SnapshotError> {
        let mut it = individuals.into_iter();
        let first = it.next().ok_or(SnapshotError::Empty)?;
        let n = first.len();
        let mut a = Archive {
            slots: vec![None; objective.bucket_count()],
            occupied: Vec::new(),
            counts: ColumnCounts::empty(n),
            diversity: 0,
            n,
            objective,
        };
        for (line, x) in std::iter::once(first).chain(it).enumerate() {
            if x.len() != n {
                return Err(SnapshotError::LengthMismatch {
                    line: line + 1,
                    expected: n,
                    got: x.len(),
                });
            }
            let bucket = a.objective.bucket(a.objective.eval(&x));
            if a.slots[bucket].is_some() {
                return Err(SnapshotError::DuplicateFitness { bucket });
            }
            a.insert(x);
        }
        a.debug_check();
        Ok(a)
    }

    fn insert(&mut self, x: BitString) {
        let bucket = self.objective.bucket(self.objective.eval(&x));
        debug_assert!(self.slots[bucket].is_none());
        self.diversity += outsider_distance_sum(&self.counts, &x);
        self.counts.add(&x);
        self.slots[bucket] = Some(x);
        let pos = self.occupied.partition_point(|&b| b < bucket);
        self.occupied.insert(pos, bucket);
    }

    fn evict(&mut self, bucket: usize) {
        let x = self.slots[bucket].take().expect("evicting empty bucket");
        self.diversity -= member_distance_sum(&self.counts, &x);
        self.counts.remove(&x);
        self.occupied.retain(|&b| b != bucket);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of individuals currently stored.
    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        false // never empty after construction
    }

    pub fn diversity(&self) -> u64 {
        self.diversity
    }

    pub fn counts(&self) -> &ColumnCounts {
        &self.counts
    }

    pub fn get(&self, bucket: usize) -> Option<&BitString> {
        self.slots[bucket].as_ref()
    }

    /// Individuals in ascending bucket order.
    pub fn individuals(&self) -> impl Iterator<Item = (usize, &BitString)> + '_ {
        self.occupied
            .iter()
            .map(move |&b| (b, self.slots[b].as_ref().unwrap()))
    }

    /// Uniform draw over the present individuals.
    pub fn select_parent(&self, rng: &mut RandomSource) -> (usize, &BitString) {
        let bucket = self.occupied[rng.index(self.occupied.len())];
        (bucket, self.slots[bucket].as_ref().unwrap())
    }

    /// True iff every fitness bucket is filled.
    pub fn is_front_covered(&self) -> bool {
        self.occupied.len() == self.slots.len()
    }

    /// Front covered with the largest possible diversity.
    pub fn is_optimal(&self) -> bool {
        self.is_front_covered() && self.diversity == max_diversity(self.n, self.len())
    }

    /// Offers `y` to the archive, applying Algorithm-style acceptance.
    pub fn offer(&mut self, y: &BitString) -> AcceptanceOutcome {
        assert_eq!(y.len(), self.n);
        let value = self.objective.eval(y);
        let bucket = self.objective.bucket(value);

        if let Some(incumbent) = &self.slots[bucket] {
            let delta = diversity_delta(&self.counts, incumbent, y);
            if delta < 0 {
                return AcceptanceOutcome {
                    kind: OutcomeKind::RejectedDiversity,
                    replaced_index: None,
                    diversity_after: self.diversity,
                    changed: false,
                };
            }
            let changed = incumbent != y;
            if changed {
                let old = self.slots[bucket].take().unwrap();
                self.counts.replace(&old, y);
                self.diversity = (self.diversity as i64 + delta) as u64;
                self.slots[bucket] = Some(y.clone());
                self.debug_check();
            }
            return AcceptanceOutcome {
                kind: OutcomeKind::ReplacedSameFitness,
                replaced_index: Some(bucket),
                diversity_after: self.diversity,
                changed,
            };
        }

        if self
            .individuals()
            .any(|(_, w)| dominates(self.objective.eval(w), value))
        {
            return AcceptanceOutcome {
                kind: OutcomeKind::RejectedDominated,
                replaced_index: None,
                diversity_after: self.diversity,
                changed: false,
            };
        }

        let doomed: Vec<usize> = self
            .individuals()
            .filter(|(_, z)| dominates(value, self.objective.eval(z)))
            .map(|(b, _)| b)
            .collect();
        for b in doomed {
            self.evict(b);
        }
        self.insert(y.clone());
        self.debug_check();
        AcceptanceOutcome {
            kind: OutcomeKind::InsertedNewFitness,
            replaced_index: None,
            diversity_after: self.diversity,
            changed: true,
        }
    }

    /// Outcome [`Archive::offer`] would produce, without mutating anything.
    pub fn probe(&self, y: &BitString) -> AcceptanceOutcome {
        assert_eq!(y.len(), self.n);
        let value = self.objective.eval(y);
        let bucket = self.objective.bucket(value);

        if let Some(incumbent) = &self.slots[bucket] {
            let delta = diversity_delta(&self.counts, incumbent, y);
            if delta < 0 {
                return AcceptanceOutcome {
                    kind: OutcomeKind::RejectedDiversity,
                    replaced_index: None,
                    diversity_after: self.diversity,
                    changed: false,
                };
            }
            let changed = incumbent != y;
            return AcceptanceOutcome {
                kind: OutcomeKind::ReplacedSameFitness,
                replaced_index: Some(bucket),
                diversity_after: (self.diversity as i64 + delta) as u64,
                changed,
            };
        }

        if self
            .individuals()
            .any(|(_, w)| dominates(self.objective.eval(w), value))
        {
            return AcceptanceOutcome {
                kind: OutcomeKind::RejectedDominated,
                replaced_index: None,
                diversity_after: self.diversity,
                changed: false,
            };
        }

        let mut counts = self.counts.clone();
        let mut diversity = self.diversity;
        for (_, z) in self
            .individuals()
            .filter(|(_, z)| dominates(value, self.objective.eval(z)))
        {
            diversity -= member_distance_sum(&counts, z);
            counts.remove(z);
        }
        diversity += outsider_distance_sum(&counts, y);
        AcceptanceOutcome {
            kind: OutcomeKind::InsertedNewFitness,
            replaced_index: None,
            diversity_after: diversity,
            changed: true,
        }
    }

    #[cfg(debug_assertions)]
    fn debug_check(&self) {
        let members: Vec<BitString> = self.individuals().map(|(_, x)| x.clone()).collect();
        let counts = crate::diversity::column_counts(&members);
        assert_eq!(&counts, &self.counts, "cached counts drifted");
        assert_eq!(
            crate::diversity::total_hamming(&counts),
            self.diversity,
            "cached diversity drifted"
        );
    }

    #[cfg(not(debug_assertions))]
    fn debug_check(&self) {}
}

impl OmmArchive {
    pub fn new_omm(x: BitString) -> OmmArchive {
        let n = x.len();
        Archive::new(OneMinMax::new(n), x)
    }

    /// One line per individual, ascending one-count, textual bits.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        for (_, x) in self.individuals() {
            let _ = writeln!(out, "{x}");
        }
        out
    }

    pub fn from_snapshot(s: &str) -> Result<OmmArchive, SnapshotError> {
        let mut individuals = Vec::new();
        for (idx, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let x: BitString = line
                .parse()
                .map_err(|source| SnapshotError::Parse { line: idx + 1, source })?;
            individuals.push(x);
        }
        let n = individuals.first().ok_or(SnapshotError::Empty)?.len();
        Archive::from_individuals(OneMinMax::new(n), individuals)
    }
}
