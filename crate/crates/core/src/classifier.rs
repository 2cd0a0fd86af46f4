//! Instrumentation of the population's random walk.
//!
//! For a front-covering population of odd size-`n` strings (`m = n + 1`), a
//! position is *balanced* with `(n+1)/2` one-bits, *almost balanced* one off,
//! and *unbalanced* otherwise. An almost balanced population has exactly two
//! almost balanced positions: the *hot* one with `(n+3)/2` one-bits and the
//! *cold* one with `(n-1)/2`. Individuals split into the index sets `I_bc`
//! according to their bits at (hot, cold); the `J` sets single out
//! individuals at Hamming distance one from a fitness neighbour in specific
//! patterns, which inflates their replacement probability. States 1-3
//! stratify almost balanced populations by `(|I10|, |Jhot|, |J00|)` and the
//! phase rules segment a run at state-dependent boundaries.
//!
//! All fractional thresholds (`n/32`, `n/16`, `n/8`) are compared exactly as
//! rationals, e.g. `|I10| >= n/32` is `32 * |I10| >= n`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::OmmArchive;
use crate::bits::BitString;
use crate::diversity::ColumnCounts;
use crate::trace::TraceRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BalanceLabel {
    Balanced,
    AlmostBalanced,
    Unbalanced,
}

/// Per-position balance labels plus the hot/cold positions when unique.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PositionBalance {
    labels: Vec<BalanceLabel>,
    /// The unique position with `(n+3)/2` one-bits, if exactly one exists.
    pub hot: Option<usize>,
    /// The unique position with `(n-1)/2` one-bits, if exactly one exists.
    pub cold: Option<usize>,
}

impl PositionBalance {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Label of 1-based position `pos`.
    pub fn label(&self, pos: usize) -> BalanceLabel {
        self.labels[pos - 1]
    }

    pub fn balanced_positions(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.n()).filter(|&p| self.label(p) == BalanceLabel::Balanced)
    }

    pub fn is_balanced(&self) -> bool {
        self.labels.iter().all(|&l| l == BalanceLabel::Balanced)
    }

    /// Exactly two almost balanced positions, everything else balanced.
    pub fn is_almost_balanced(&self) -> bool {
        let almost = self
            .labels
            .iter()
            .filter(|&&l| l == BalanceLabel::AlmostBalanced)
            .count();
        almost == 2
            && self.hot.is_some()
            && self.cold.is_some()
            && !self.labels.iter().any(|&l| l == BalanceLabel::Unbalanced)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("position balance is defined for odd n only (n = {n})")]
    EvenProblemSize { n: usize },
    #[error("population must cover the front: size {got}, expected {expected}")]
    NotCoveringFront { expected: usize, got: usize },
    #[error("population has no unique hot/cold position")]
    MissingHotCold,
}

/// Labels every position of a front-covering population (`m = n + 1`, odd `n`).
pub fn classify_positions(c: &ColumnCounts) -> Result<PositionBalance, ClassifyError> {
    let n = c.n();
    if n % 2 == 0 {
        return Err(ClassifyError::EvenProblemSize { n });
    }
    if c.population_size() != n + 1 {
        return Err(ClassifyError::NotCoveringFront {
            expected: n + 1,
            got: c.population_size(),
        });
    }
    let balanced = (n + 1) / 2;
    let labels: Vec<BalanceLabel> = c
        .counts()
        .iter()
        .map(|&mk| {
            if mk == balanced {
                BalanceLabel::Balanced
            } else if mk + 1 == balanced || mk == balanced + 1 {
                BalanceLabel::AlmostBalanced
            } else {
                BalanceLabel::Unbalanced
            }
        })
        .collect();
    let unique = |target: usize| -> Option<usize> {
        let mut found = None;
        for pos in 1..=n {
            if c.count(pos) == target {
                if found.is_some() {
                    return None;
                }
                found = Some(pos);
            }
        }
        found
    };
    Ok(PositionBalance {
        labels,
        hot: unique(balanced + 1),
        cold: unique(balanced - 1),
    })
}

/// Index class of an individual by its bits at (hot, cold).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexClass {
    /// Zero at hot, one at cold: cannot be replaced at all.
    I01,
    /// Zero at both: replacements can only move the cold position.
    I00,
    /// One at both: replacements can only move the hot position.
    I11,
    /// One at hot, zero at cold: the only individuals whose replacement can
    /// reach the optimal diversity.
    I10,
}

/// Sizes of the sets driving the state stratification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetSizes {
    pub i10: usize,
    pub jhot: usize,
    pub j00: usize,
    pub j10: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum State {
    State1,
    State2,
    State3,
}

impl State {
    pub fn index(self) -> usize {
        match self {
            State::State1 => 0,
            State::State2 => 1,
            State::State3 => 2,
        }
    }
}

/// State of an almost balanced population from its set sizes.
pub fn state_of(sizes: &SetSizes, n: usize) -> State {
    if 32 * sizes.i10 >= n && sizes.jhot <= 19 && sizes.j00 <= 9 {
        State::State3
    } else if sizes.jhot <= 17 {
        State::State2
    } else {
        State::State1
    }
}

/// Full classification of an almost balanced population: the `I` partition,
/// the `J` sets and the derived state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    classes: Vec<IndexClass>,
    class_counts: [usize; 4],
    j00: BTreeSet<usize>,
    j11: BTreeSet<usize>,
    j10: BTreeSet<usize>,
    jhot: BTreeSet<usize>,
    state: State,
    hot: usize,
    cold: usize,
}

fn class_slot(class: IndexClass) -> usize {
    match class {
        IndexClass::I01 => 0,
        IndexClass::I00 => 1,
        IndexClass::I11 => 2,
        IndexClass::I10 => 3,
    }
}

/// True iff `x` and `y` differ exactly at position `pos` and nowhere else.
fn differs_only_at(x: &BitString, y: &BitString, pos: usize) -> bool {
    x.get(pos) != y.get(pos) && crate::bits::hamming(x, y) == 1
}

impl Classification {
    pub fn compute(a: &OmmArchive, pb: &PositionBalance) -> Result<Self, ClassifyError> {
        let (hot, cold) = match (pb.hot, pb.cold) {
            (Some(h), Some(c)) => (h, c),
            _ => return Err(ClassifyError::MissingHotCold),
        };
        let n = a.n();
        assert!(a.is_front_covered(), "classification needs a covered front");
        let mut cl = Classification {
            classes: Vec::with_capacity(n + 1),
            class_counts: [0; 4],
            j00: BTreeSet::new(),
            j11: BTreeSet::new(),
            j10: BTreeSet::new(),
            jhot: BTreeSet::new(),
            state: State::State1,
            hot,
            cold,
        };
        for i in 0..=n {
            let class = cl.class_from_bits(a.get(i).unwrap());
            cl.classes.push(class);
            cl.class_counts[class_slot(class)] += 1;
        }
        for i in 0..=n {
            cl.refresh_j_memberships(a, i);
        }
        cl.state = state_of(&cl.sizes(), n);
        Ok(cl)
    }

    fn class_from_bits(&self, x: &BitString) -> IndexClass {
        match (x.get(self.hot), x.get(self.cold)) {
            (false, true) => IndexClass::I01,
            (false, false) => IndexClass::I00,
            (true, true) => IndexClass::I11,
            (true, false) => IndexClass::I10,
        }
    }

    fn refresh_j_memberships(&mut self, a: &OmmArchive, i: usize) {
        let n = a.n();
        let x = a.get(i).unwrap();
        let class = self.classes[i];

        let in_jhot = i >= 1 && differs_only_at(x, a.get(i - 1).unwrap(), self.hot);
        set_membership(&mut self.jhot, i, in_jhot);

        let in_j00 = class == IndexClass::I00
            && i < n
            && differs_only_at(x, a.get(i + 1).unwrap(), self.cold);
        set_membership(&mut self.j00, i, in_j00);

        let in_j11 = class == IndexClass::I11 && in_jhot;
        set_membership(&mut self.j11, i, in_j11);

        let in_j10 = class == IndexClass::I10 && {
            let mut tilde = x.clone();
            tilde.flip(self.hot);
            tilde.flip(self.cold);
            // x_{i-1} has exactly one zero-bit among the one-positions of
            // x~_i, or x_{i+1} has exactly one one-bit among its zeros.
            let below = i >= 1 && {
                let prev = a.get(i - 1).unwrap();
                (1..=n).filter(|&p| tilde.get(p) && !prev.get(p)).count() == 1
            };
            below || (i < n && {
                let next = a.get(i + 1).unwrap();
                (1..=n).filter(|&p| !tilde.get(p) && next.get(p)).count() == 1
            })
        };
        set_membership(&mut self.j10, i, in_j10);
    }

    /// Refreshes the memberships a replacement at index `i` can touch. Valid
    /// only while the hot and cold positions stayed put; callers recompute
    /// from scratch when they move.
    pub fn update_after_replacement(&mut self, a: &OmmArchive, pb: &PositionBalance, i: usize) {
        debug_assert_eq!(pb.hot, Some(self.hot));
        debug_assert_eq!(pb.cold, Some(self.cold));
        // With hot and cold unchanged the replaced individual kept its bits
        // in both, so its class is unchanged; only the distance-one
        // relations of {i-1, i, i+1} can have moved.
        debug_assert_eq!(self.classes[i], self.class_from_bits(a.get(i).unwrap()));
        let n = a.n();
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(n);
        for k in lo..=hi {
            self.refresh_j_memberships(a, k);
        }
        self.state = state_of(&self.sizes(), n);
    }

    pub fn class_of(&self, i: usize) -> IndexClass {
        self.classes[i]
    }

    pub fn indices(&self, class: IndexClass) -> Vec<usize> {
        (0..self.classes.len())
            .filter(|&i| self.classes[i] == class)
            .collect()
    }

    pub fn class_size(&self, class: IndexClass) -> usize {
        self.class_counts[class_slot(class)]
    }

    pub fn j00(&self) -> &BTreeSet<usize> {
        &self.j00
    }

    pub fn j11(&self) -> &BTreeSet<usize> {
        &self.j11
    }

    pub fn j10(&self) -> &BTreeSet<usize> {
        &self.j10
    }

    pub fn jhot(&self) -> &BTreeSet<usize> {
        &self.jhot
    }

    pub fn hot(&self) -> usize {
        self.hot
    }

    pub fn cold(&self) -> usize {
        self.cold
    }

    pub fn sizes(&self) -> SetSizes {
        SetSizes {
            i10: self.class_counts[class_slot(IndexClass::I10)],
            jhot: self.jhot.len(),
            j00: self.j00.len(),
            j10: self.j10.len(),
        }
    }

    pub fn state(&self) -> State {
        self.state
    }

    /// The string differing from `x_i` exactly at the hot and cold positions;
    /// accepting it from an `I10` index reaches the optimal diversity.
    pub fn tilde(&self, a: &OmmArchive, i: usize) -> BitString {
        let mut t = a.get(i).unwrap().clone();
        t.flip(self.hot);
        t.flip(self.cold);
        t
    }
}

fn set_membership(set: &mut BTreeSet<usize>, i: usize, member: bool) {
    if member {
        set.insert(i);
    } else {
        set.remove(&i);
    }
}

/// Balanced positions the cold position can relocate to: at least `n/16` of
/// the individuals with a zero-bit at cold carry a one-bit there.
pub fn cold_candidates(a: &OmmArchive, pb: &PositionBalance) -> Vec<usize> {
    let cold = pb.cold.expect("cold position required");
    pb.balanced_positions()
        .filter(|&k| {
            let count = a
                .individuals()
                .filter(|(_, x)| !x.get(cold) && x.get(k))
                .count();
            16 * count >= a.n()
        })
        .collect()
}

/// Mirror image: balanced positions with at least `n/16` zero-bits among the
/// individuals with a one-bit at hot.
pub fn hot_candidates(a: &OmmArchive, pb: &PositionBalance) -> Vec<usize> {
    let hot = pb.hot.expect("hot position required");
    pb.balanced_positions()
        .filter(|&k| {
            let count = a
                .individuals()
                .filter(|(_, x)| x.get(hot) && !x.get(k))
                .count();
            16 * count >= a.n()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseEndReason {
    OptimalFromState1,
    State2JhotGrew,
    State2I10Replaced,
    State3Changed,
    Truncated,
}

/// A maximal trace segment between the state-dependent phase boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub start_iter: u64,
    pub end_iter: u64,
    pub end_reason: PhaseEndReason,
    pub ended_optimal: bool,
}

/// Population info after an iteration, as seen by the phase rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepPost {
    Optimal,
    AlmostBalanced { state: State, jhot: usize },
}

/// Incremental phase segmentation. The runner feeds it live; offline
/// segmentation feeds it from a trace, so both produce identical phases.
#[derive(Clone, Debug, Default)]
pub struct PhaseTracker {
    phases: Vec<Phase>,
    current_start: Option<u64>,
}

impl PhaseTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Processes iteration `iter`, whose starting population was almost
    /// balanced in `pre_state` with `pre_jhot = |Jhot|`.
    pub fn step(
        &mut self,
        iter: u64,
        pre_state: State,
        pre_jhot: usize,
        changed: bool,
        replaced_class: Option<IndexClass>,
        post: StepPost,
    ) {
        if self.current_start.is_none() {
            self.current_start = Some(iter);
        }
        let optimal = post == StepPost::Optimal;
        let reason = match pre_state {
            State::State1 => optimal.then_some(PhaseEndReason::OptimalFromState1),
            State::State2 => {
                match post {
                    // Entering State 3 keeps the phase alive no matter what.
                    StepPost::AlmostBalanced {
                        state: State::State3,
                        ..
                    } => None,
                    _ if changed && replaced_class == Some(IndexClass::I10) => {
                        Some(PhaseEndReason::State2I10Replaced)
                    }
                    StepPost::AlmostBalanced { jhot, .. } if jhot > pre_jhot => {
                        Some(PhaseEndReason::State2JhotGrew)
                    }
                    _ => None,
                }
            }
            State::State3 => changed.then_some(PhaseEndReason::State3Changed),
        };
        if let Some(end_reason) = reason {
            self.phases.push(Phase {
                start_iter: self.current_start.take().unwrap(),
                end_iter: iter,
                end_reason,
                ended_optimal: optimal,
            });
        }
    }

    /// Closes any pending phase as truncated at `last_iter`.
    pub fn finish(mut self, last_iter: u64) -> Vec<Phase> {
        if let Some(start) = self.current_start.take() {
            if start <= last_iter {
                self.phases.push(Phase {
                    start_iter: start,
                    end_iter: last_iter,
                    end_reason: PhaseEndReason::Truncated,
                    ended_optimal: false,
                });
            }
        }
        self.phases
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PhaseError {
    #[error("trace contains no iteration records")]
    EmptyTrace,
    #[error("iteration numbers not strictly increasing at record {at}")]
    NonMonotonicIter { at: usize },
    #[error("record for iteration {iter} has a state but no set sizes")]
    MissingSizes { iter: u64 },
}

/// Splits a recorded trace into phases using the same rules the live tracker
/// applies. The final record may be a population snapshot emitted after the
/// last iteration; it supplies the post-iteration view for its predecessor.
pub fn segment_phases(records: &[TraceRecord]) -> Result<Vec<Phase>, PhaseError> {
    if records.iter().all(|r| r.final_snapshot) {
        return Err(PhaseError::EmptyTrace);
    }
    for (idx, pair) in records.windows(2).enumerate() {
        if pair[1].iter <= pair[0].iter {
            return Err(PhaseError::NonMonotonicIter { at: idx + 1 });
        }
    }
    let mut tracker = PhaseTracker::new();
    let mut last_iter = 0;
    for (idx, r) in records.iter().enumerate() {
        if r.final_snapshot {
            break;
        }
        last_iter = r.iter;
        let Some(state) = r.state else { continue };
        let sizes = r.sizes.ok_or(PhaseError::MissingSizes { iter: r.iter })?;
        let post = if r.optimal {
            StepPost::Optimal
        } else {
            match records.get(idx + 1) {
                Some(next) => match (next.state, next.sizes) {
                    (Some(s2), Some(sz2)) => StepPost::AlmostBalanced {
                        state: s2,
                        jhot: sz2.jhot,
                    },
                    // Successor view unavailable: leave the tail truncated.
                    _ => break,
                },
                None => break,
            }
        };
        tracker.step(r.iter, state, sizes.jhot, r.changed, r.replaced_class, post);
    }
    Ok(tracker.finish(last_iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::OneMinMax;
    use crate::diversity::column_counts;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn archive(strings: &[&str]) -> OmmArchive {
        let v: Vec<BitString> = strings.iter().map(|s| s.parse().unwrap()).collect();
        let n = v[0].len();
        OmmArchive::from_individuals(OneMinMax::new(n), v).unwrap()
    }

    fn stair3() -> OmmArchive {
        archive(&["000", "001", "011", "111"])
    }

    #[test]
    fn classify_positions_examples() {
        let a = stair3();
        let pb = classify_positions(a.counts()).unwrap();
        assert_eq!(pb.label(1), BalanceLabel::AlmostBalanced);
        assert_eq!(pb.label(2), BalanceLabel::Balanced);
        assert_eq!(pb.label(3), BalanceLabel::AlmostBalanced);
        assert_eq!(pb.cold, Some(1));
        assert_eq!(pb.hot, Some(3));
        assert!(pb.is_almost_balanced());

        let opt = archive(&["000", "001", "110", "111"]);
        let pb = classify_positions(opt.counts()).unwrap();
        assert!(pb.is_balanced());
        assert_eq!(pb.hot, None);
        assert_eq!(pb.cold, None);
    }

    #[test]
    fn classify_positions_unbalanced() {
        // Counts (0, 3, 3): position 1 unbalanced; two positions share the
        // hot count, so no hot is reported. (No front-covering population
        // has these counts, but the position classifier only sees counts.)
        let c = column_counts(&[bs("010"), bs("011"), bs("011"), bs("001")]);
        assert_eq!(c.counts(), &[0, 3, 3]);
        let pb = classify_positions(&c).unwrap();
        assert_eq!(pb.label(1), BalanceLabel::Unbalanced);
        assert_eq!(pb.hot, None);
        assert_eq!(pb.cold, None);
        assert!(!pb.is_almost_balanced());
    }

    #[test]
    fn classify_positions_errors() {
        let even = column_counts(&[bs("00"), bs("01"), bs("11")]);
        assert_eq!(
            classify_positions(&even),
            Err(ClassifyError::EvenProblemSize { n: 2 })
        );
        let partial = column_counts(&[bs("000"), bs("001")]);
        assert_eq!(
            classify_positions(&partial),
            Err(ClassifyError::NotCoveringFront { expected: 4, got: 2 })
        );
    }

    #[test]
    fn index_sets_example() {
        let a = stair3();
        let pb = classify_positions(a.counts()).unwrap();
        let cl = Classification::compute(&a, &pb).unwrap();
        assert_eq!(cl.indices(IndexClass::I00), vec![0]);
        assert_eq!(cl.indices(IndexClass::I10), vec![1, 2]);
        assert_eq!(cl.indices(IndexClass::I11), vec![3]);
        assert!(cl.indices(IndexClass::I01).is_empty());
        assert_eq!(cl.class_size(IndexClass::I00), cl.class_size(IndexClass::I11));
        assert_eq!(
            cl.class_size(IndexClass::I10),
            cl.class_size(IndexClass::I01) + 2
        );
        assert!(cl.class_size(IndexClass::I10) >= 2);
    }

    #[test]
    fn j_sets_example() {
        let a = stair3();
        let pb = classify_positions(a.counts()).unwrap();
        let cl = Classification::compute(&a, &pb).unwrap();
        assert_eq!(cl.jhot().iter().copied().collect::<Vec<_>>(), vec![1]);
        assert!(cl.j00().is_empty());
        assert!(cl.j11().is_empty());
        // Index 1: x~_1 = 100, x_0 = 000 has exactly one zero-bit in S1 = {1}.
        // Index 2: x~_2 = 110, x_3 = 111 has exactly one one-bit in S0 = {3}.
        assert_eq!(cl.j10().iter().copied().collect::<Vec<_>>(), vec![1, 2]);
        assert!(cl.j11().is_subset(cl.jhot()));
        assert!(cl
            .jhot()
            .iter()
            .all(|i| cl.j11().contains(i) || cl.j10().contains(i)));
    }

    #[test]
    fn tilde_flips_hot_and_cold() {
        let a = stair3();
        let pb = classify_positions(a.counts()).unwrap();
        let cl = Classification::compute(&a, &pb).unwrap();
        assert_eq!(cl.tilde(&a, 1), bs("100"));
        assert_eq!(cl.tilde(&a, 2), bs("110"));
    }

    #[test]
    fn state_examples() {
        let n = 128;
        let s = |i10, jhot, j00| state_of(&SetSizes { i10, jhot, j00, j10: 0 }, n);
        assert_eq!(s(n / 16, 3, 0), State::State3);
        assert_eq!(s(1, 10, 0), State::State2);
        assert_eq!(s(1, 18, 0), State::State1);
        // Exact threshold: 32 * i10 >= n.
        assert_eq!(s(4, 0, 0), State::State3);
        assert_eq!(s(3, 0, 0), State::State2);
    }

    #[test]
    fn candidates_examples() {
        let a = stair3();
        let pb = classify_positions(a.counts()).unwrap();
        assert_eq!(cold_candidates(&a, &pb), vec![2]);
        assert_eq!(hot_candidates(&a, &pb), vec![2]);
    }

    #[test]
    fn hot_candidates_by_complement_symmetry() {
        let a = archive(&["00000", "10000", "01100", "00111", "01111", "11111"]);
        let pb = classify_positions(a.counts()).unwrap();
        assert!(pb.is_almost_balanced(), "{:?}", a.counts().counts());
        assert_eq!((pb.cold, pb.hot), (Some(1), Some(3)));
        let complemented: Vec<BitString> =
            a.individuals().map(|(_, x)| x.complement()).collect();
        let ca = OmmArchive::from_individuals(OneMinMax::new(5), complemented).unwrap();
        let cpb = classify_positions(ca.counts()).unwrap();
        let mut hot = hot_candidates(&a, &pb);
        let mut cold = cold_candidates(&ca, &cpb);
        hot.sort_unstable();
        cold.sort_unstable();
        assert_eq!(hot, cold);
    }

    #[test]
    fn incremental_update_matches_full_recompute() {
        use crate::bits::mutate_into;
        use crate::rng::RandomSource;

        for n in [5usize, 9, 15] {
            let mut rng = RandomSource::from_seed(900 + n as u64);
            let fresh = |rng: &mut RandomSource| {
                crate::harness::build_almost_balanced_population(n, rng).unwrap()
            };
            let mut a = fresh(&mut rng);
            let mut pb = classify_positions(a.counts()).unwrap();
            let mut cl = Classification::compute(&a, &pb).unwrap();
            let mut scratch = BitString::zeros(n);
            let mut steps = 0;
            while steps < 400 {
                let (_, parent) = a.select_parent(&mut rng);
                mutate_into(parent, &mut scratch, &mut rng);
                let out = a.offer(&scratch);
                if a.is_optimal() {
                    a = fresh(&mut rng);
                    pb = classify_positions(a.counts()).unwrap();
                    cl = Classification::compute(&a, &pb).unwrap();
                    continue;
                }
                if !out.changed {
                    continue;
                }
                steps += 1;
                let pb2 = classify_positions(a.counts()).unwrap();
                assert!(pb2.is_almost_balanced());
                if pb2.hot == pb.hot && pb2.cold == pb.cold {
                    cl.update_after_replacement(&a, &pb2, out.replaced_index.unwrap());
                } else {
                    cl = Classification::compute(&a, &pb2).unwrap();
                }
                pb = pb2;
                assert_eq!(cl, Classification::compute(&a, &pb).unwrap(), "n={n}");
            }
        }
    }

    #[test]
    fn phase_rules() {
        // State 3: any change ends the phase.
        let mut t = PhaseTracker::new();
        t.step(1, State::State3, 2, false, None, almost(State::State3, 2));
        t.step(2, State::State3, 2, true, Some(IndexClass::I00), almost(State::State3, 2));
        let phases = t.finish(2);
        assert_eq!(phases.len(), 1);
        assert_eq!(phases[0].end_reason, PhaseEndReason::State3Changed);
        assert_eq!((phases[0].start_iter, phases[0].end_iter), (1, 2));

        // State 2: a J00 replacement that does not grow Jhot is no boundary;
        // entering State 3 is no boundary; growing Jhot outside State 3 is.
        let mut t = PhaseTracker::new();
        t.step(1, State::State2, 4, true, Some(IndexClass::I00), almost(State::State2, 4));
        t.step(2, State::State2, 4, true, Some(IndexClass::I00), almost(State::State3, 6));
        t.step(3, State::State3, 6, true, Some(IndexClass::I11), almost(State::State2, 6));
        t.step(4, State::State2, 6, true, Some(IndexClass::I11), almost(State::State2, 7));
        let phases = t.finish(4);
        assert_eq!(phases.len(), 2);
        assert_eq!(phases[0].end_reason, PhaseEndReason::State3Changed);
        assert_eq!(phases[1].end_reason, PhaseEndReason::State2JhotGrew);

        // State 1 ends only by reaching the optimum.
        let mut t = PhaseTracker::new();
        t.step(1, State::State1, 20, true, Some(IndexClass::I00), almost(State::State1, 20));
        t.step(2, State::State1, 20, true, Some(IndexClass::I10), StepPost::Optimal);
        let phases = t.finish(2);
        assert_eq!(phases.len(), 1);
        assert_eq!(phases[0].end_reason, PhaseEndReason::OptimalFromState1);
        assert!(phases[0].ended_optimal);

        // All-quiet run: one truncated phase.
        let mut t = PhaseTracker::new();
        for iter in 1..=5 {
            t.step(iter, State::State2, 1, false, None, almost(State::State2, 1));
        }
        let phases = t.finish(5);
        assert_eq!(phases.len(), 1);
        assert_eq!(phases[0].end_reason, PhaseEndReason::Truncated);
        assert!(!phases[0].ended_optimal);
    }

    fn almost(state: State, jhot: usize) -> StepPost {
        StepPost::AlmostBalanced { state, jhot }
    }
}
