//! Diversity-optimizing GSEMO on OneMinMax.
//!
//! The engine evolves an archive holding one individual per OneMinMax fitness
//! value and breaks same-fitness ties by total Hamming distance. Around it sit
//! the instrumentation used to analyse the population's random walk (position
//! balance, hot/cold positions, index sets, states and phases), exact
//! brute-force oracles for small problem sizes, and a seeded experiment
//! harness for hitting-time scaling studies.

pub mod archive;
pub mod bits;
pub mod classifier;
pub mod diversity;
pub mod harness;
pub mod oracle;
pub mod rng;
pub mod trace;

pub use archive::{AcceptanceOutcome, Archive, Objective, OmmArchive, OneMinMax, OutcomeKind};
pub use bits::{
    dominates, hamming, mutation_probability, one_count, one_min_max, standard_bit_mutation,
    BitString, ObjectiveValue,
};
pub use classifier::{
    classify_positions, cold_candidates, hot_candidates, segment_phases, state_of, Classification,
    IndexClass, Phase, PhaseEndReason, PositionBalance, SetSizes, State,
};
pub use diversity::{
    column_counts, diversity_delta, max_diversity, pairwise_total_hamming, total_hamming,
    ColumnCounts,
};
pub use rng::RandomSource;

/// Caps the worker pool used for batched trials. No effect without the
/// `parallel` feature. Must be called before the first batch runs.
pub fn init_threads(jobs: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(jobs) = jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
}
