//! Exact brute-force ground truth at small n.
//!
//! For an almost balanced front-covering population the oracle enumerates,
//! per fitness level, every string that could replace the incumbent without
//! decreasing the diversity, flags the strictly improving ones, and computes
//! exact rational one-iteration probabilities (uniform parent choice followed
//! by standard bit mutation). Exhaustive search over covering populations
//! certifies the closed-form diversity maximum at tiny n. Everything is
//! arbitrary-precision rational so equivalence tests need no tolerances.

use std::collections::BTreeSet;

use itertools::Itertools;
use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::ToPrimitive;
use num::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::archive::OmmArchive;
use crate::bits::{hamming, BitString};
use crate::classifier::{classify_positions, Classification, ClassifyError, IndexClass, PositionBalance};
use crate::diversity::{diversity_delta, pairwise_total_hamming};

/// Largest n for which per-level enumeration stays desk-scale.
pub const MAX_ENUM_N: usize = 13;
/// Largest n for which all covering populations can be enumerated.
pub const MAX_BRUTE_FORCE_N: usize = 5;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("n = {n} exceeds the enumeration bound {max}")]
    TooLarge { n: usize, max: usize },
    #[error("population is not almost balanced")]
    NotAlmostBalanced,
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

/// Valid and improving replacements for one index, with their exact
/// one-iteration generation probabilities.
#[derive(Clone, Debug)]
pub struct ReplacementReport {
    pub index: usize,
    pub class: IndexClass,
    /// Strings distinct from the incumbent whose acceptance keeps `D` intact
    /// or improves it.
    pub valid_set: BTreeSet<BitString>,
    /// The subset that strictly improves `D`.
    pub improving_set: BTreeSet<BitString>,
    pub replace_prob: BigRational,
    pub improve_prob: BigRational,
}

fn preconditions(a: &OmmArchive) -> Result<(PositionBalance, Classification), OracleError> {
    let n = a.n();
    if n > MAX_ENUM_N {
        return Err(OracleError::TooLarge { n, max: MAX_ENUM_N });
    }
    let pb = classify_positions(a.counts())?;
    if !pb.is_almost_balanced() {
        return Err(OracleError::NotAlmostBalanced);
    }
    let cls = Classification::compute(a, &pb)?;
    Ok((pb, cls))
}

/// All strings of length `n` with exactly `ones` one-bits.
pub fn level_strings(n: usize, ones: usize) -> impl Iterator<Item = BitString> {
    (1..=n).combinations(ones).map(move |positions| {
        let mut x = BitString::zeros(n);
        for p in positions {
            x.set(p, true);
        }
        x
    })
}

/// Exact probability that one iteration (uniform parent, standard bit
/// mutation) generates any string of `set`.
fn generation_probability(a: &OmmArchive, set: &BTreeSet<BitString>) -> BigRational {
    let n = a.n();
    let powers: Vec<BigInt> = (0..=n)
        .map(|k| BigInt::from(n - 1).pow(k as u32))
        .collect();
    let mut numerator = BigInt::zero();
    for (_, parent) in a.individuals() {
        for y in set {
            numerator += &powers[n - hamming(parent, y)];
        }
    }
    let denominator = BigInt::from(n + 1) * BigInt::from(n).pow(n as u32);
    BigRational::new(numerator, denominator)
}

/// Enumerates every level-`i` replacement of `x_i` that does not decrease
/// the diversity. This is the definitional ground truth the lemma-shaped
/// predictions are tested against.
pub fn valid_replacements(a: &OmmArchive, i: usize) -> Result<ReplacementReport, OracleError> {
    let (_pb, cls) = preconditions(a)?;
    let incumbent = a.get(i).expect("front covered");
    let mut valid_set = BTreeSet::new();
    let mut improving_set = BTreeSet::new();
    for y in level_strings(a.n(), i) {
        if &y == incumbent {
            continue;
        }
        let delta = diversity_delta(a.counts(), incumbent, &y);
        if delta >= 0 {
            if delta > 0 {
                improving_set.insert(y.clone());
            }
            valid_set.insert(y);
        }
    }
    let replace_prob = generation_probability(a, &valid_set);
    let improve_prob = generation_probability(a, &improving_set);
    Ok(ReplacementReport {
        index: i,
        class: cls.class_of(i),
        valid_set,
        improving_set,
        replace_prob,
        improve_prob,
    })
}

/// Exact probability that one iteration replaces `x_i` with a different
/// accepted string.
pub fn exact_replace_prob(a: &OmmArchive, i: usize) -> Result<BigRational, OracleError> {
    Ok(valid_replacements(a, i)?.replace_prob)
}

/// Exact probability that one iteration reaches the optimal diversity.
/// Zero by convention on an already optimal population.
pub fn exact_optimal_prob(a: &OmmArchive) -> Result<BigRational, OracleError> {
    if a.is_optimal() {
        return Ok(BigRational::zero());
    }
    preconditions(a)?;
    let mut total = BigRational::zero();
    for i in 0..=a.n() {
        total += valid_replacements(a, i)?.improve_prob;
    }
    Ok(total)
}

/// Maximum of the pairwise diversity over all populations covering the
/// front, by exhaustive search. Certifies the closed form at tiny n.
pub fn brute_force_max_diversity(n: usize) -> Result<u64, OracleError> {
    if n > MAX_BRUTE_FORCE_N {
        return Err(OracleError::TooLarge {
            n,
            max: MAX_BRUTE_FORCE_N,
        });
    }
    let levels: Vec<Vec<BitString>> = (0..=n).map(|i| level_strings(n, i).collect()).collect();
    let mut chosen: Vec<BitString> = Vec::with_capacity(n + 1);
    let mut best = 0u64;
    fn recurse(levels: &[Vec<BitString>], chosen: &mut Vec<BitString>, best: &mut u64) {
        match levels.split_first() {
            None => *best = (*best).max(pairwise_total_hamming(chosen)),
            Some((level, rest)) => {
                for cand in level {
                    chosen.push(cand.clone());
                    recurse(rest, chosen, best);
                    chosen.pop();
                }
            }
        }
    }
    recurse(&levels, &mut chosen, &mut best);
    Ok(best)
}

/// Row of the replacement-probability bound table, by index class refined
/// with the `J` memberships.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TableRow {
    #[serde(rename = "I01")]
    I01,
    #[serde(rename = "I00-minus-J00")]
    I00MinusJ00,
    #[serde(rename = "J00")]
    J00,
    #[serde(rename = "I11-minus-J11")]
    I11MinusJ11,
    #[serde(rename = "J11")]
    J11,
    #[serde(rename = "I10-minus-J10")]
    I10MinusJ10,
    #[serde(rename = "J10")]
    J10,
}

impl std::fmt::Display for TableRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TableRow::I01 => "I01",
            TableRow::I00MinusJ00 => "I00\\J00",
            TableRow::J00 => "J00",
            TableRow::I11MinusJ11 => "I11\\J11",
            TableRow::J11 => "J11",
            TableRow::I10MinusJ10 => "I10\\J10",
            TableRow::J10 => "J10",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Table1Row {
    pub index: usize,
    pub row: TableRow,
    pub replace_prob: f64,
    pub replace_exact: String,
    pub replace_lower: f64,
    pub replace_upper: f64,
    pub improve_prob: f64,
    pub improve_lower: f64,
    pub replace_ok: bool,
    pub improve_ok: bool,
}

impl Table1Row {
    pub fn ok(&self) -> bool {
        self.replace_ok && self.improve_ok
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Table1Report {
    pub n: usize,
    pub slack: f64,
    pub rows: Vec<Table1Row>,
}

impl Table1Report {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.ok()).count()
    }
}

/// Compares the exact per-index probabilities against the analytical bound
/// table, with the asymptotic `1 +- O(1/n)` factors replaced by
/// `1 -+ slack/n`. The checks are sanity rails, not theorems at finite n;
/// callers report rather than fail on violations.
pub fn check_table1_bounds(a: &OmmArchive, slack: f64) -> Result<Table1Report, OracleError> {
    let (_pb, cls) = preconditions(a)?;
    let n = a.n();
    let nf = n as f64;
    let e = std::f64::consts::E;
    let lo = 1.0 - slack / nf;
    let up = 1.0 + slack / nf;
    const EPS: f64 = 1e-12;

    let mut rows = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let report = valid_replacements(a, i)?;
        let fi = i as f64;
        let row = match report.class {
            IndexClass::I01 => TableRow::I01,
            IndexClass::I00 => {
                if cls.j00().contains(&i) {
                    TableRow::J00
                } else {
                    TableRow::I00MinusJ00
                }
            }
            IndexClass::I11 => {
                if cls.j11().contains(&i) {
                    TableRow::J11
                } else {
                    TableRow::I11MinusJ11
                }
            }
            IndexClass::I10 => {
                if cls.j10().contains(&i) {
                    TableRow::J10
                } else {
                    TableRow::I10MinusJ10
                }
            }
        };
        let (replace_lower, replace_upper, improve_lower) = match row {
            TableRow::I01 => (0.0, 0.0, 0.0),
            TableRow::I00MinusJ00 => (fi / (e * nf.powi(3)) * lo, 7.0 / (e * nf * nf) * up, 0.0),
            TableRow::J00 => (
                fi / (e * nf * nf) * lo,
                (fi + 2.0) / (e * nf * nf) * up,
                0.0,
            ),
            TableRow::I11MinusJ11 => (
                (nf - fi) / (e * nf.powi(3)) * lo,
                7.0 / (e * nf * nf) * up,
                0.0,
            ),
            TableRow::J11 => (
                (nf - fi) / (e * nf * nf) * lo,
                (nf - fi + 2.0) / (e * nf * nf) * up,
                0.0,
            ),
            // The 13/n^2 upper bound carries no asymptotic factor; checked
            // verbatim.
            TableRow::I10MinusJ10 => (
                1.0 / (2.0 * e * nf * nf) * lo,
                13.0 / (nf * nf),
                lo / (e * nf.powi(3)),
            ),
            TableRow::J10 => (
                ((nf - fi).min(fi) + 1.0) / (e * nf * nf) * lo,
                2.0 / nf * up,
                lo / (e * nf * nf),
            ),
        };
        let replace_prob = report.replace_prob.to_f64().unwrap();
        let improve_prob = report.improve_prob.to_f64().unwrap();
        let replace_ok = if row == TableRow::I01 {
            report.replace_prob.is_zero()
        } else {
            replace_prob >= replace_lower - EPS && replace_prob <= replace_upper + EPS
        };
        let improve_ok = improve_prob >= improve_lower - EPS;
        rows.push(Table1Row {
            index: i,
            row,
            replace_prob,
            replace_exact: report.replace_prob.to_string(),
            replace_lower,
            replace_upper,
            improve_prob,
            improve_lower,
            replace_ok,
            improve_ok,
        });
    }
    Ok(Table1Report {
        n,
        slack,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::OneMinMax;
    use crate::diversity::max_diversity;

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

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn valid_sets_on_the_n3_stair() {
        let a = stair3();

        // Index 0 is in I00 with i = 0: nothing can replace the all-zeros
        // string at its level.
        let r = valid_replacements(&a, 0).unwrap();
        assert_eq!(r.class, IndexClass::I00);
        assert!(r.valid_set.is_empty());
        assert!(r.replace_prob.is_zero());

        // Index 3 is in I11 with i = n: no other string has n one-bits.
        let r = valid_replacements(&a, 3).unwrap();
        assert_eq!(r.class, IndexClass::I11);
        assert!(r.valid_set.is_empty());
        assert!(r.replace_prob.is_zero());

        // Index 1 (I10): the swap family around x~_1 = 100 plus x~_1 itself.
        let r = valid_replacements(&a, 1).unwrap();
        assert_eq!(r.class, IndexClass::I10);
        assert_eq!(
            r.valid_set.iter().cloned().collect::<Vec<_>>(),
            vec![bs("010"), bs("100")]
        );
        assert_eq!(
            r.improving_set.iter().cloned().collect::<Vec<_>>(),
            vec![bs("100")]
        );
        assert_eq!(r.replace_prob, ratio(7, 36));

        // Index 2 (I10): x~_2 = 110.
        let r = valid_replacements(&a, 2).unwrap();
        assert_eq!(
            r.valid_set.iter().cloned().collect::<Vec<_>>(),
            vec![bs("101"), bs("110")]
        );
        assert_eq!(
            r.improving_set.iter().cloned().collect::<Vec<_>>(),
            vec![bs("110")]
        );
    }

    #[test]
    fn i01_cannot_be_replaced() {
        // n = 5 almost balanced population with cold = 1, hot = 3; index 1
        // (10000) has a one-bit at cold and a zero-bit at hot.
        let a = archive(&["00000", "10000", "01100", "00111", "01111", "11111"]);
        let r = valid_replacements(&a, 1).unwrap();
        assert_eq!(r.class, IndexClass::I01);
        assert!(r.valid_set.is_empty());
        assert!(r.replace_prob.is_zero());
        assert!(r.improve_prob.is_zero());
    }

    #[test]
    fn shapes_match_lemma_predictions_on_n5() {
        let a = archive(&["00000", "10000", "01100", "00111", "01111", "11111"]);
        let pb = classify_positions(a.counts()).unwrap();
        let cls = Classification::compute(&a, &pb).unwrap();
        let (hot, cold) = (pb.hot.unwrap(), pb.cold.unwrap());
        for i in 0..=a.n() {
            let r = valid_replacements(&a, i).unwrap();
            let x = a.get(i).unwrap();
            match cls.class_of(i) {
                IndexClass::I01 => assert!(r.valid_set.is_empty()),
                IndexClass::I11 => {
                    // n - i strings: hot flipped off plus one zero flipped on.
                    let mut predicted = BTreeSet::new();
                    for z in x.zero_positions() {
                        let mut y = x.clone();
                        y.flip(hot);
                        y.flip(z);
                        predicted.insert(y);
                    }
                    assert_eq!(r.valid_set, predicted, "i={i}");
                    assert!(r.improving_set.is_empty());
                }
                IndexClass::I00 => {
                    // i strings: cold flipped on plus one one flipped off.
                    let mut predicted = BTreeSet::new();
                    for o in x.one_positions() {
                        let mut y = x.clone();
                        y.flip(cold);
                        y.flip(o);
                        predicted.insert(y);
                    }
                    assert_eq!(r.valid_set, predicted, "i={i}");
                    assert!(r.improving_set.is_empty());
                }
                IndexClass::I10 => {
                    let tilde = cls.tilde(&a, i);
                    let mut predicted = BTreeSet::new();
                    for s0 in tilde.zero_positions() {
                        for s1 in tilde.one_positions() {
                            let mut y = tilde.clone();
                            y.flip(s0);
                            y.flip(s1);
                            if &y != x {
                                predicted.insert(y);
                            }
                        }
                    }
                    predicted.insert(tilde.clone());
                    assert_eq!(r.valid_set, predicted, "i={i}");
                    assert_eq!(
                        r.improving_set.iter().cloned().collect::<Vec<_>>(),
                        vec![tilde]
                    );
                }
            }
        }
    }

    #[test]
    fn optimal_prob_on_the_n3_stair() {
        let a = stair3();
        assert_eq!(exact_optimal_prob(&a).unwrap(), ratio(1, 6));

        let optimal = archive(&["000", "001", "110", "111"]);
        assert!(exact_optimal_prob(&optimal).unwrap().is_zero());
    }

    #[test]
    fn improve_is_bounded_by_replace() {
        let a = stair3();
        for i in 0..=3 {
            let r = valid_replacements(&a, i).unwrap();
            assert!(r.improving_set.is_subset(&r.valid_set));
            assert!(r.improve_prob <= r.replace_prob);
            assert!(r.replace_prob <= BigRational::new(BigInt::from(1), BigInt::from(1)));
        }
    }

    #[test]
    fn brute_force_matches_closed_form() {
        for (n, expected) in [(2usize, 4u64), (3, 12), (4, 24), (5, 45)] {
            let brute = brute_force_max_diversity(n).unwrap();
            assert_eq!(brute, expected);
            assert_eq!(brute, max_diversity(n, n + 1));
        }
        assert!(matches!(
            brute_force_max_diversity(6),
            Err(OracleError::TooLarge { .. })
        ));
    }

    #[test]
    fn enumeration_bound_enforced() {
        let a = archive(&["000", "001", "011", "111"]);
        assert!(valid_replacements(&a, 0).is_ok());
        let optimal = archive(&["000", "001", "110", "111"]);
        assert!(matches!(
            valid_replacements(&optimal, 0),
            Err(OracleError::NotAlmostBalanced)
        ));
    }

    #[test]
    fn table1_report_runs() {
        let a = stair3();
        let report = check_table1_bounds(&a, 16.0).unwrap();
        assert_eq!(report.rows.len(), 4);
        let i01_free = report.rows.iter().all(|r| r.row != TableRow::I01);
        assert!(i01_free);
        for r in &report.rows {
            assert!(r.improve_ok || r.improve_prob < r.improve_lower);
        }
    }
}
