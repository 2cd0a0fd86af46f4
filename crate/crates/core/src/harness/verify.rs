//! Lemma-verification sweep: samples almost balanced populations (synthetic
//! perturbations plus snapshots harvested from short runs) and checks, per
//! population, the exact valid-replacement characterizations, the set-size
//! relations, the J-set sandwich and the candidate-count lower bounds. The
//! probability bound table is checked as an advisory rail. A Monte Carlo
//! cross-check compares simulated one-step frequencies against the exact
//! oracle probabilities.

use std::collections::BTreeSet;

use num::traits::ToPrimitive;
use num::Zero;
use serde::Serialize;

use crate::archive::{OmmArchive, OutcomeKind};
use crate::bits::{mutate_into, BitString};
use crate::classifier::{
    classify_positions, cold_candidates, hot_candidates, Classification, IndexClass,
};
use crate::diversity::max_diversity;
use crate::harness::population::build_almost_balanced_population;
use crate::harness::HarnessError;
use crate::oracle::{self, Table1Row};
use crate::rng::RandomSource;

#[derive(Clone, Debug)]
pub struct LemmaSuiteConfig {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    /// Replaces the asymptotic `1 +- O(1/n)` factors by `1 -+ slack/n` in the
    /// bound table.
    pub slack: f64,
    /// Monte Carlo iterations for the one-step frequency cross-check;
    /// 0 disables it.
    pub mc_iterations: u64,
}

impl LemmaSuiteConfig {
    pub fn new(n: usize, samples: usize, seed: u64) -> Self {
        LemmaSuiteConfig {
            n,
            samples,
            seed,
            slack: 16.0,
            mc_iterations: 0,
        }
    }
}

/// An exact check that failed, with the offending population serialized.
#[derive(Clone, Debug, Serialize)]
pub struct HardFailure {
    pub population: String,
    pub what: String,
}

/// One bound-table row of one sampled population.
#[derive(Clone, Debug, Serialize)]
pub struct BoundViolation {
    /// Sample id; the snapshot lives in `LemmaSuiteReport::populations`.
    pub population: usize,
    pub row: Table1Row,
}

#[derive(Clone, Debug, Serialize)]
pub struct McRow {
    pub label: String,
    pub expected: f64,
    pub observed: u64,
    pub sigma: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct McReport {
    pub iterations: u64,
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn ok(&self) -> bool {
        self.rows.iter().all(|r| r.ok)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaSuiteReport {
    pub n: usize,
    pub samples: usize,
    pub synthetic: usize,
    pub harvested: usize,
    /// Oracle-vs-lemma valid-set comparisons performed (one per index per
    /// population).
    pub shape_checks: u64,
    /// Set-size, sandwich and candidate-count assertions performed.
    pub structure_checks: u64,
    pub hard_failures: Vec<HardFailure>,
    /// Every bound-table row of every sampled population.
    pub table: Vec<BoundViolation>,
    /// Snapshots of the sampled populations, by sample id.
    pub populations: Vec<String>,
    pub mc: Option<McReport>,
}

impl LemmaSuiteReport {
    pub fn exact_checks_pass(&self) -> bool {
        self.hard_failures.is_empty() && self.mc.as_ref().map_or(true, |m| m.ok())
    }

    pub fn table_rows_checked(&self) -> usize {
        self.table.len()
    }

    pub fn bound_violations(&self) -> impl Iterator<Item = &BoundViolation> {
        self.table.iter().filter(|e| !e.row.ok())
    }
}

/// Counts of one-step outcomes simulated from a fixed population: how often
/// each index got replaced by a different string, and how often the step
/// reached the optimal diversity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OneStepCounts {
    pub iterations: u64,
    pub replacements: Vec<u64>,
    pub optimal_hits: u64,
}

/// Simulates `iterations` independent single iterations from `archive`
/// (without committing any change) and tallies the outcomes.
pub fn one_step_frequencies(archive: &OmmArchive, iterations: u64, seed: u64) -> OneStepCounts {
    let n = archive.n();
    let mut rng = RandomSource::stream(seed, n as u64);
    let max_div = max_diversity(n, archive.len());
    let mut replacements = vec![0u64; n + 1];
    let mut optimal_hits = 0;
    let mut scratch = BitString::zeros(n);
    for _ in 0..iterations {
        let (_, parent) = archive.select_parent(&mut rng);
        mutate_into(parent, &mut scratch, &mut rng);
        let outcome = archive.probe(&scratch);
        if outcome.kind == OutcomeKind::ReplacedSameFitness && outcome.changed {
            replacements[outcome.replaced_index.unwrap()] += 1;
            if outcome.diversity_after == max_div {
                optimal_hits += 1;
            }
        }
    }
    OneStepCounts {
        iterations,
        replacements,
        optimal_hits,
    }
}

/// The lemma-predicted valid/improving sets for index `i` of an almost
/// balanced population, built from the hot/cold structure alone (no
/// enumeration): the oracle must agree exactly.
pub fn predicted_replacement_sets(
    archive: &OmmArchive,
    cls: &Classification,
    i: usize,
) -> (BTreeSet<BitString>, BTreeSet<BitString>) {
    let x = archive.get(i).expect("front covered");
    let (hot, cold) = (cls.hot(), cls.cold());
    let mut valid = BTreeSet::new();
    let mut improving = BTreeSet::new();
    match cls.class_of(i) {
        IndexClass::I01 => {}
        IndexClass::I11 => {
            // Move the hot position: flip it off plus one zero-bit on.
            for z in x.zero_positions() {
                let mut y = x.clone();
                y.flip(hot);
                y.flip(z);
                valid.insert(y);
            }
        }
        IndexClass::I00 => {
            // Move the cold position: flip it on plus one one-bit off.
            for o in x.one_positions() {
                let mut y = x.clone();
                y.flip(cold);
                y.flip(o);
                valid.insert(y);
            }
        }
        IndexClass::I10 => {
            // Exactly one one-bit among the zeros of x~ and one zero-bit
            // among its ones, except x itself; x~ improves.
            let tilde = cls.tilde(archive, i);
            for s0 in tilde.zero_positions() {
                for s1 in tilde.one_positions() {
                    let mut y = tilde.clone();
                    y.flip(s0);
                    y.flip(s1);
                    if &y != x {
                        valid.insert(y);
                    }
                }
            }
            valid.insert(tilde.clone());
            improving.insert(tilde);
        }
    }
    (valid, improving)
}

fn harvest_populations(
    n: usize,
    count: usize,
    rng: &mut RandomSource,
) -> Result<Vec<OmmArchive>, HarnessError> {
    let mut out = Vec::with_capacity(count);
    let mut archive = build_almost_balanced_population(n, rng)?;
    let mut scratch = BitString::zeros(n);
    while out.len() < count {
        let (_, parent) = archive.select_parent(rng);
        mutate_into(parent, &mut scratch, rng);
        let outcome = archive.offer(&scratch);
        if !outcome.changed {
            continue;
        }
        if archive.is_optimal() {
            archive = build_almost_balanced_population(n, rng)?;
            continue;
        }
        out.push(archive.clone());
    }
    Ok(out)
}

pub fn lemma_suite(cfg: &LemmaSuiteConfig) -> Result<LemmaSuiteReport, HarnessError> {
    if cfg.n % 2 == 0 {
        return Err(HarnessError::EvenProblemSize { n: cfg.n });
    }
    if !(5..=oracle::MAX_ENUM_N).contains(&cfg.n) {
        return Err(HarnessError::BadConfig(format!(
            "lemma suite needs 5 <= n <= {}, got {}",
            oracle::MAX_ENUM_N,
            cfg.n
        )));
    }
    if cfg.samples == 0 {
        return Err(HarnessError::BadConfig("samples must be positive".into()));
    }

    let mut rng = RandomSource::stream(cfg.seed, cfg.n as u64);
    let synthetic = cfg.samples.div_ceil(2);
    let harvested = cfg.samples - synthetic;
    let mut populations = Vec::with_capacity(cfg.samples);
    for _ in 0..synthetic {
        populations.push(build_almost_balanced_population(cfg.n, &mut rng)?);
    }
    populations.extend(harvest_populations(cfg.n, harvested, &mut rng)?);

    let mut report = LemmaSuiteReport {
        n: cfg.n,
        samples: populations.len(),
        synthetic,
        harvested,
        shape_checks: 0,
        structure_checks: 0,
        hard_failures: Vec::new(),
        table: Vec::new(),
        populations: populations.iter().map(|a| a.to_snapshot()).collect(),
        mc: None,
    };

    for (id, archive) in populations.iter().enumerate() {
        check_population(id, archive, cfg.slack, &mut report);
    }

    if cfg.mc_iterations > 0 {
        let fixed = &populations[0];
        report.mc = Some(monte_carlo_check(fixed, cfg.mc_iterations, cfg.seed ^ 0x4d43));
    }

    Ok(report)
}

fn check_population(id: usize, archive: &OmmArchive, slack: f64, report: &mut LemmaSuiteReport) {
    let n = archive.n();
    let snapshot = || archive.to_snapshot();
    let mut fail = |what: String| {
        report.hard_failures.push(HardFailure {
            population: snapshot(),
            what,
        });
    };

    let pb = match classify_positions(archive.counts()) {
        Ok(pb) if pb.is_almost_balanced() => pb,
        _ => {
            fail("population is not almost balanced".into());
            return;
        }
    };
    let cls = Classification::compute(archive, &pb).expect("hot/cold present");

    // Exact valid-set characterizations, oracle enumeration vs lemma shape.
    for i in 0..=n {
        report.shape_checks += 1;
        let oracle_report = match oracle::valid_replacements(archive, i) {
            Ok(r) => r,
            Err(e) => {
                fail(format!("oracle failed at index {i}: {e}"));
                continue;
            }
        };
        let (valid, improving) = predicted_replacement_sets(archive, &cls, i);
        if oracle_report.valid_set != valid {
            fail(format!(
                "index {i} ({:?}): oracle valid set {:?} != predicted {:?}",
                cls.class_of(i),
                oracle_report.valid_set,
                valid
            ));
        }
        if oracle_report.improving_set != improving {
            fail(format!(
                "index {i} ({:?}): oracle improving set {:?} != predicted {:?}",
                cls.class_of(i),
                oracle_report.improving_set,
                improving
            ));
        }
    }

    // Set-size relations, sandwich, candidate counts.
    report.structure_checks += 1;
    let (i01, i00, i11, i10) = (
        cls.class_size(IndexClass::I01),
        cls.class_size(IndexClass::I00),
        cls.class_size(IndexClass::I11),
        cls.class_size(IndexClass::I10),
    );
    if i00 != i11 {
        fail(format!("|I00| = {i00} != |I11| = {i11}"));
    }
    if i10 != i01 + 2 {
        fail(format!("|I10| = {i10} != |I01| + 2 = {}", i01 + 2));
    }
    if !(2..=(n + 3) / 2).contains(&i10) {
        fail(format!("|I10| = {i10} outside [2, (n+3)/2]"));
    }
    if 2 * i00 > n - 1 {
        fail(format!("|I00| = {i00} above (n-1)/2"));
    }
    if !cls.j11().is_subset(cls.jhot()) {
        fail("J11 not a subset of Jhot".into());
    }
    if !cls
        .jhot()
        .iter()
        .all(|i| cls.j11().contains(i) || cls.j10().contains(i))
    {
        fail("Jhot escapes J11 union J10".into());
    }
    let cold_cand = cold_candidates(archive, &pb);
    let hot_cand = hot_candidates(archive, &pb);
    if 8 * cold_cand.len() < n {
        fail(format!("only {} cold-candidates at n = {n}", cold_cand.len()));
    }
    if 8 * hot_cand.len() < n {
        fail(format!("only {} hot-candidates at n = {n}", hot_cand.len()));
    }

    // Advisory probability rails.
    match oracle::check_table1_bounds(archive, slack) {
        Ok(table) => {
            for row in table.rows {
                report.table.push(BoundViolation { population: id, row });
            }
        }
        Err(e) => fail(format!("bound table failed: {e}")),
    }
}

fn monte_carlo_check(archive: &OmmArchive, iterations: u64, seed: u64) -> McReport {
    let n = archive.n();
    let counts = one_step_frequencies(archive, iterations, seed);
    let mut rows = Vec::with_capacity(n + 2);
    let mut push = |label: String, p: f64, observed: u64| {
        let expected = iterations as f64 * p;
        let sigma = (iterations as f64 * p * (1.0 - p)).sqrt();
        let ok = (observed as f64 - expected).abs() <= 4.0 * sigma;
        rows.push(McRow {
            label,
            expected,
            observed,
            sigma,
            ok,
        });
    };
    for i in 0..=n {
        let p = oracle::exact_replace_prob(archive, i)
            .expect("lemma-suite populations are enumerable")
            .to_f64()
            .unwrap();
        push(format!("replace[{i}]"), p, counts.replacements[i]);
    }
    let p_opt = oracle::exact_optimal_prob(archive)
        .unwrap_or_else(|_| num::rational::BigRational::zero())
        .to_f64()
        .unwrap();
    push("optimal".into(), p_opt, counts.optimal_hits);
    McReport { iterations, rows }
}
