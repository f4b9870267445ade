//! Fixtures shared by the benchmarks.

use bgw_core::continuum::{sample_excursion, Excursion};
use bgw_core::rng;
use bgw_core::sampler::{sample_conditioned, AnnotatedTree};
use bgw_core::OffspringModel;

/// Deterministic conditioned tree of size `n`.
pub fn tree(model: &OffspringModel, n: u64, seed: u64) -> AnnotatedTree {
    sample_conditioned(model, n, &mut rng::stream(seed, 0, 0)).expect("size in support")
}

/// Deterministic Brownian excursion on `m` steps.
pub fn excursion(m: usize, seed: u64) -> Excursion {
    sample_excursion(m, &mut rng::stream(seed, 1, 0))
}
