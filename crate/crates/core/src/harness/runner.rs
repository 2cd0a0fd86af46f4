//! One seeded trial of the engine, with the walk instrumentation attached.
//!
//! Per iteration: choose a parent uniformly from the archive, apply standard
//! bit mutation (one uniform draw per position, ascending), offer the
//! offspring. The per-trial random stream is `RandomSource::stream(seed, n)`,
//! so a `(n, seed)` pair fully determines the trial on every platform.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::archive::{OmmArchive, OutcomeKind};
use crate::bits::{mutate_into, BitString};
use crate::classifier::{
    classify_positions, Classification, IndexClass, Phase, PhaseTracker, PositionBalance,
    SetSizes, State, StepPost,
};
use crate::diversity::max_diversity;
use crate::harness::population::build_almost_balanced_population;
use crate::rng::RandomSource;
use crate::trace::{TraceHeader, TraceRecord, TraceWriter};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    /// Start from a second-best (almost balanced) population; run until the
    /// diversity is optimal.
    LastStage,
    /// Start from a single random individual; run until the front is covered
    /// and the diversity is optimal.
    FullRun,
}

impl RunMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::LastStage => "last-stage",
            RunMode::FullRun => "full-run",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialSpec {
    pub n: usize,
    pub seed: u64,
    pub mode: RunMode,
    pub max_iters: u64,
}

impl TrialSpec {
    pub fn rng(&self) -> RandomSource {
        RandomSource::stream(self.seed, self.n as u64)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceCounts {
    pub replaced_same_fitness: u64,
    pub inserted_new_fitness: u64,
    pub rejected_diversity: u64,
    pub rejected_dominated: u64,
}

impl AcceptanceCounts {
    fn record(&mut self, kind: OutcomeKind) {
        match kind {
            OutcomeKind::ReplacedSameFitness => self.replaced_same_fitness += 1,
            OutcomeKind::InsertedNewFitness => self.inserted_new_fitness += 1,
            OutcomeKind::RejectedDiversity => self.rejected_diversity += 1,
            OutcomeKind::RejectedDominated => self.rejected_dominated += 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub n: usize,
    pub seed: u64,
    pub mode: RunMode,
    /// Iterations executed (== the hitting iteration unless truncated).
    pub iterations: u64,
    pub iterations_to_cover: Option<u64>,
    pub iterations_to_optimal: Option<u64>,
    pub truncated: bool,
    pub final_diversity: u64,
    pub phases: Vec<Phase>,
    pub acceptance: AcceptanceCounts,
    /// Iterations spent in States 1..3 over the almost balanced stretch.
    pub state_occupancy: [u64; 3],
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunResult {
    pub fn state_fractions(&self) -> [f64; 3] {
        let total: u64 = self.state_occupancy.iter().sum();
        if total == 0 {
            return [0.0; 3];
        }
        self.state_occupancy
            .map(|c| c as f64 / total as f64)
    }

    pub const CSV_HEADER: &'static str =
        "n,seed,iters_to_cover,iters_to_optimal,n_phases,frac_state1,frac_state2,frac_state3";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        let [f1, f2, f3] = self.state_fractions();
        format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6}",
            self.n,
            self.seed,
            opt(self.iterations_to_cover),
            opt(self.iterations_to_optimal),
            self.phases.len(),
            f1,
            f2,
            f3
        )
    }
}

struct Instrument {
    pb: PositionBalance,
    cls: Classification,
    changes_seen: u64,
}

impl Instrument {
    fn try_new(archive: &OmmArchive) -> Option<Instrument> {
        if archive.n() % 2 == 0 || !archive.is_front_covered() {
            return None;
        }
        let pb = classify_positions(archive.counts()).ok()?;
        if !pb.is_almost_balanced() {
            return None;
        }
        let cls = Classification::compute(archive, &pb).ok()?;
        Some(Instrument {
            pb,
            cls,
            changes_seen: 0,
        })
    }

    /// Structural relations that hold on every almost balanced population.
    fn assert_structure(&self, archive: &OmmArchive) {
        let n = archive.n();
        let cls = &self.cls;
        assert_eq!(
            cls.class_size(IndexClass::I00),
            cls.class_size(IndexClass::I11)
        );
        assert_eq!(
            cls.class_size(IndexClass::I10),
            cls.class_size(IndexClass::I01) + 2
        );
        assert!(cls.class_size(IndexClass::I10) >= 2);
        assert!(2 * cls.class_size(IndexClass::I10) <= n + 3);
        assert!(2 * cls.class_size(IndexClass::I00) <= n - 1);
        assert!(cls.j11().is_subset(cls.jhot()));
        assert!(cls
            .jhot()
            .iter()
            .all(|i| cls.j11().contains(i) || cls.j10().contains(i)));
        // Candidate counting is quadratic; sample it.
        if cfg!(debug_assertions) && n >= 5 && self.changes_seen % 64 == 0 {
            let cold = crate::classifier::cold_candidates(archive, &self.pb);
            let hot = crate::classifier::hot_candidates(archive, &self.pb);
            assert!(8 * cold.len() >= n, "cold candidates {} at n={n}", cold.len());
            assert!(8 * hot.len() >= n, "hot candidates {} at n={n}", hot.len());
        }
    }
}

/// Runs one seeded trial without tracing.
pub fn run_trial(spec: &TrialSpec) -> RunResult {
    let mut sink: Option<&mut TraceWriter<io::Sink>> = None;
    run_trial_impl(spec, &mut sink).expect("no trace sink, no io")
}

/// Runs one seeded trial, streaming records into `writer`.
pub fn run_trial_traced<W: Write>(
    spec: &TrialSpec,
    writer: &mut TraceWriter<W>,
) -> io::Result<RunResult> {
    let mut writer = Some(writer);
    run_trial_impl(spec, &mut writer)
}

/// Last-stage trial: almost balanced start, runs until optimal diversity.
pub fn run_last_stage(n: usize, seed: u64, max_iters: u64) -> RunResult {
    run_trial(&TrialSpec {
        n,
        seed,
        mode: RunMode::LastStage,
        max_iters,
    })
}

/// Full trial: random initial individual, runs until optimal diversity.
pub fn run_full(n: usize, seed: u64, max_iters: u64) -> RunResult {
    run_trial(&TrialSpec {
        n,
        seed,
        mode: RunMode::FullRun,
        max_iters,
    })
}

fn run_trial_impl<W: Write>(
    spec: &TrialSpec,
    writer: &mut Option<&mut TraceWriter<W>>,
) -> io::Result<RunResult> {
    let started = Instant::now();
    let n = spec.n;
    let mut rng = spec.rng();
    let mut archive = match spec.mode {
        RunMode::LastStage => build_almost_balanced_population(n, &mut rng)
            .expect("last-stage trials need odd n >= 3"),
        RunMode::FullRun => OmmArchive::new_omm(BitString::random(n, &mut rng)),
    };

    if let Some(w) = writer.as_deref_mut() {
        w.write_header(&TraceHeader {
            n,
            seed: spec.seed,
            mode: spec.mode.as_str().to_string(),
            max_iters: spec.max_iters,
            level: w.level(),
            initial_diversity: archive.diversity(),
            max_diversity: max_diversity(n, n + 1),
        })?;
    }

    let mut iterations_to_cover = archive.is_front_covered().then_some(0);
    let mut iterations_to_optimal = None;
    let mut acceptance = AcceptanceCounts::default();
    let mut occupancy = [0u64; 3];
    let mut tracker = PhaseTracker::new();
    let mut instr = Instrument::try_new(&archive);
    let mut scratch = BitString::zeros(n);
    let mut executed = 0;
    let mut last_diversity = archive.diversity();

    for t in 1..=spec.max_iters {
        executed = t;
        let pre: Option<(State, SetSizes, Option<usize>, Option<usize>)> = instr
            .as_ref()
            .map(|ins| (ins.cls.state(), ins.cls.sizes(), ins.pb.hot, ins.pb.cold));

        let (parent_bucket, parent) = archive.select_parent(&mut rng);
        mutate_into(parent, &mut scratch, &mut rng);
        let incumbent_backup = if instr.is_some() {
            archive.get(scratch.one_count()).cloned()
        } else {
            None
        };

        let outcome = archive.offer(&scratch);
        acceptance.record(outcome.kind);
        assert!(
            outcome.diversity_after >= last_diversity || iterations_to_cover.is_none(),
            "diversity decreased after coverage"
        );
        last_diversity = outcome.diversity_after;

        if iterations_to_cover.is_none() && archive.is_front_covered() {
            iterations_to_cover = Some(t);
        }
        let optimal = archive.is_optimal();

        let replaced_class = match (&instr, outcome.replaced_index) {
            (Some(ins), Some(i)) => Some(ins.cls.class_of(i)),
            _ => None,
        };
        let mut post = None;
        if let Some(ins) = instr.as_mut() {
            if outcome.changed {
                ins.changes_seen += 1;
                if optimal {
                    // The only way to reach the optimum from an almost
                    // balanced population: an I10 individual swapped for its
                    // hot/cold flip.
                    let i = outcome
                        .replaced_index
                        .expect("covered front: changes are replacements");
                    assert_eq!(
                        replaced_class,
                        Some(IndexClass::I10),
                        "final acceptance must replace an I10 individual"
                    );
                    let mut tilde = incumbent_backup.clone().expect("incumbent existed");
                    tilde.flip(ins.pb.hot.unwrap());
                    tilde.flip(ins.pb.cold.unwrap());
                    assert_eq!(
                        Some(&tilde),
                        archive.get(i),
                        "final acceptance must install the hot/cold flip"
                    );
                    post = Some(StepPost::Optimal);
                    // Classification is meaningless on the optimal population.
                } else {
                    let pb = classify_positions(archive.counts())
                        .expect("covered front with odd n stays classifiable");
                    assert!(
                        pb.is_almost_balanced(),
                        "exactly two almost balanced positions must persist"
                    );
                    if pb.hot == ins.pb.hot && pb.cold == ins.pb.cold {
                        let i = outcome
                            .replaced_index
                            .expect("covered front: changes are replacements");
                        ins.cls.update_after_replacement(&archive, &pb, i);
                    } else {
                        ins.cls = Classification::compute(&archive, &pb)
                            .expect("almost balanced population classifies");
                    }
                    ins.pb = pb;
                    if cfg!(debug_assertions) && ins.changes_seen % 256 == 0 {
                        assert_eq!(
                            ins.cls,
                            Classification::compute(&archive, &ins.pb).unwrap(),
                            "incremental classification drifted"
                        );
                    }
                    ins.assert_structure(&archive);
                    post = Some(StepPost::AlmostBalanced {
                        state: ins.cls.state(),
                        jhot: ins.cls.sizes().jhot,
                    });
                }
            } else {
                post = Some(StepPost::AlmostBalanced {
                    state: ins.cls.state(),
                    jhot: ins.cls.sizes().jhot,
                });
            }
        } else if outcome.changed && !optimal {
            instr = Instrument::try_new(&archive);
            if let Some(ins) = &instr {
                ins.assert_structure(&archive);
            }
        }
        if optimal {
            instr = None;
        }

        if let Some((state, sizes, _, _)) = pre {
            occupancy[state.index()] += 1;
            tracker.step(
                t,
                state,
                sizes.jhot,
                outcome.changed,
                replaced_class,
                post.expect("instrumented iterations always have a post view"),
            );
        }

        if let Some(w) = writer.as_deref_mut() {
            let (state, sizes, hot, cold) = match pre {
                Some((s, sz, h, c)) => (Some(s), Some(sz), h, c),
                None => (None, None, None, None),
            };
            w.write_record(&TraceRecord {
                iter: t,
                accepted: outcome.accepted(),
                changed: outcome.changed,
                replaced_index: outcome.replaced_index,
                replaced_class,
                diversity: outcome.diversity_after,
                optimal,
                state,
                sizes,
                hot,
                cold,
                final_snapshot: false,
                parent_index: Some(parent_bucket),
                offspring: Some(scratch.clone()),
            })?;
        }

        if optimal {
            iterations_to_optimal = Some(t);
            break;
        }
    }

    if let Some(w) = writer.as_deref_mut() {
        let (state, sizes, hot, cold) = match &instr {
            Some(ins) => (
                Some(ins.cls.state()),
                Some(ins.cls.sizes()),
                ins.pb.hot,
                ins.pb.cold,
            ),
            None => (None, None, None, None),
        };
        w.write_record(&TraceRecord {
            iter: executed + 1,
            accepted: false,
            changed: false,
            replaced_index: None,
            replaced_class: None,
            diversity: archive.diversity(),
            optimal: iterations_to_optimal.is_some(),
            state,
            sizes,
            hot,
            cold,
            final_snapshot: true,
            parent_index: None,
            offspring: None,
        })?;
    }

    Ok(RunResult {
        n,
        seed: spec.seed,
        mode: spec.mode,
        iterations: executed,
        iterations_to_cover,
        iterations_to_optimal,
        truncated: iterations_to_optimal.is_none(),
        final_diversity: archive.diversity(),
        phases: tracker.finish(executed),
        acceptance,
        state_occupancy: occupancy,
        wall_time: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::PhaseEndReason;
    use crate::trace::TraceLevel;

    #[test]
    fn last_stage_reaches_optimum_on_tiny_instances() {
        for seed in 0..20 {
            let r = run_last_stage(3, seed, 100_000);
            assert!(!r.truncated, "seed {seed}");
            assert_eq!(r.final_diversity, 12);
            assert_eq!(r.iterations_to_cover, Some(0));
            assert_eq!(r.iterations_to_optimal, Some(r.iterations));
            let last = r.phases.last().unwrap();
            assert!(last.ended_optimal);
            assert_ne!(last.end_reason, PhaseEndReason::Truncated);
        }
    }

    #[test]
    fn seeded_trials_are_reproducible() {
        let spec = TrialSpec {
            n: 15,
            seed: 42,
            mode: RunMode::LastStage,
            max_iters: 1_000_000,
        };
        let a = run_trial(&spec);
        let b = run_trial(&spec);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn full_run_covers_then_optimizes() {
        for seed in 0..10 {
            let r = run_full(9, seed, 10_000_000);
            assert!(!r.truncated);
            let cover = r.iterations_to_cover.unwrap();
            let optimal = r.iterations_to_optimal.unwrap();
            assert!(cover <= optimal);
            assert!(r.acceptance.inserted_new_fitness >= 9);
        }
    }

    #[test]
    fn full_run_handles_even_n() {
        let r = run_full(6, 3, 10_000_000);
        assert!(!r.truncated);
        assert_eq!(r.state_occupancy, [0, 0, 0]); // never instrumented
        assert_eq!(r.final_diversity, crate::diversity::max_diversity(6, 7));
    }

    #[test]
    fn truncation_is_reported() {
        // Ten seeds, three iterations each: at n = 31 the chance that any
        // single trial finds the optimum this fast is well under 1%.
        let truncated = (0..10)
            .map(|seed| run_last_stage(31, seed, 3))
            .filter(|r| r.truncated)
            .collect::<Vec<_>>();
        assert!(!truncated.is_empty());
        let r = &truncated[0];
        assert_eq!(r.iterations, 3);
        assert_eq!(r.iterations_to_optimal, None);
        let last = r.phases.last().unwrap();
        assert_eq!(last.end_reason, PhaseEndReason::Truncated);
        assert!(!last.ended_optimal);
    }

    #[test]
    fn online_and_offline_phases_agree() {
        use crate::classifier::segment_phases;
        for seed in 0..10 {
            let spec = TrialSpec {
                n: 9,
                seed,
                mode: RunMode::LastStage,
                max_iters: 200_000,
            };
            let mut buf = Vec::new();
            let result = {
                let mut w = TraceWriter::new(&mut buf, TraceLevel::States);
                run_trial_traced(&spec, &mut w).unwrap()
            };
            let text = String::from_utf8(buf).unwrap();
            let records: Vec<TraceRecord> = text
                .lines()
                .skip(1)
                .map(|l| serde_json::from_str(l).unwrap())
                .collect();
            let offline = segment_phases(&records).unwrap();
            assert_eq!(offline, result.phases, "seed {seed}");
        }
    }

    #[test]
    fn occupancy_covers_every_instrumented_iteration() {
        let r = run_last_stage(15, 3, 1_000_000);
        let total: u64 = r.state_occupancy.iter().sum();
        assert_eq!(total, r.iterations);
        let [f1, f2, f3] = r.state_fractions();
        assert!((f1 + f2 + f3 - 1.0).abs() < 1e-12);
    }
}
