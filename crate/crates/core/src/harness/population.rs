//! Constructors for the reference populations.

use crate::archive::{Archive, OmmArchive, OneMinMax};
use crate::bits::BitString;
use crate::diversity::max_diversity;
use crate::harness::HarnessError;
use crate::rng::RandomSource;

/// The optimally diverse front-covering population for odd `n`:
/// `x_i = 1^i 0^(n-i)` up to the middle, bit-wise inverses above it. Every
/// position ends up with `(n+1)/2` one-bits.
pub fn build_optimal_population(n: usize) -> Result<OmmArchive, HarnessError> {
    if n % 2 == 0 {
        return Err(HarnessError::EvenProblemSize { n });
    }
    let half = (n - 1) / 2;
    let mut individuals = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = if i <= half {
            let mut x = BitString::zeros(n);
            for p in 1..=i {
                x.set(p, true);
            }
            x
        } else {
            // complement of x_{n-i}
            let mut x = BitString::ones(n);
            for p in 1..=(n - i) {
                x.set(p, false);
            }
            x
        };
        individuals.push(x);
    }
    let archive = Archive::from_individuals(OneMinMax::new(n), individuals)
        .expect("one individual per level by construction");
    debug_assert!(archive.is_optimal());
    Ok(archive)
}

/// Starts from the optimal construction and flips one one-bit (`one_pos`)
/// and one zero-bit (`zero_pos`) of `x_i`. The result covers the front with
/// exactly two almost balanced positions (cold = `one_pos`, hot = `zero_pos`)
/// and diversity `max - 2`.
pub fn perturb_optimal(
    n: usize,
    i: usize,
    one_pos: usize,
    zero_pos: usize,
) -> Result<OmmArchive, HarnessError> {
    let optimal = build_optimal_population(n)?;
    assert!(
        (1..n).contains(&i),
        "perturbed index must be an interior level"
    );
    let mut individuals: Vec<BitString> = optimal.individuals().map(|(_, x)| x.clone()).collect();
    let x = &mut individuals[i];
    assert!(x.get(one_pos), "position {one_pos} must hold a one-bit");
    assert!(!x.get(zero_pos), "position {zero_pos} must hold a zero-bit");
    x.flip(one_pos);
    x.flip(zero_pos);
    let archive = Archive::from_individuals(OneMinMax::new(n), individuals)
        .expect("levels unchanged by a balanced flip pair");
    debug_assert_eq!(archive.diversity(), max_diversity(n, n + 1) - 2);
    Ok(archive)
}

/// Uniformly random second-best population: picks an interior index, a
/// one-bit and a zero-bit of that individual (in this draw order) and flips
/// both.
pub fn build_almost_balanced_population(
    n: usize,
    rng: &mut RandomSource,
) -> Result<OmmArchive, HarnessError> {
    if n % 2 == 0 {
        return Err(HarnessError::EvenProblemSize { n });
    }
    if n < 3 {
        return Err(HarnessError::TooSmall { n, min: 3 });
    }
    let optimal = build_optimal_population(n)?;
    let i = 1 + rng.index(n - 1);
    let x = optimal.get(i).unwrap();
    let ones = x.one_positions();
    let zeros = x.zero_positions();
    let one_pos = ones[rng.index(ones.len())];
    let zero_pos = zeros[rng.index(zeros.len())];
    perturb_optimal(n, i, one_pos, zero_pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::classify_positions;

    #[test]
    fn optimal_population_examples() {
        let a = build_optimal_population(3).unwrap();
        assert_eq!(a.to_snapshot(), "000\n100\n011\n111\n");
        assert_eq!(a.diversity(), 12);
        assert!(a.is_optimal());

        let a = build_optimal_population(5).unwrap();
        assert_eq!(a.diversity(), 45);
        for pos in 1..=5 {
            assert_eq!(a.counts().count(pos), 3);
        }

        assert!(matches!(
            build_optimal_population(4),
            Err(HarnessError::EvenProblemSize { n: 4 })
        ));
    }

    #[test]
    fn forced_perturbation_example() {
        let a = perturb_optimal(3, 1, 1, 3).unwrap();
        assert_eq!(a.to_snapshot(), "000\n001\n011\n111\n");
        assert_eq!(a.diversity(), 10);
        let pb = classify_positions(a.counts()).unwrap();
        assert_eq!((pb.cold, pb.hot), (Some(1), Some(3)));
    }

    #[test]
    fn random_perturbations_are_second_best() {
        let mut rng = RandomSource::from_seed(77);
        for n in [3usize, 5, 9, 15] {
            for _ in 0..50 {
                let a = build_almost_balanced_population(n, &mut rng).unwrap();
                assert_eq!(a.diversity(), max_diversity(n, n + 1) - 2);
                let pb = classify_positions(a.counts()).unwrap();
                assert!(pb.is_almost_balanced());
                assert!(pb.hot.is_some() && pb.cold.is_some());
            }
        }
    }
}
