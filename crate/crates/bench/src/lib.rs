//! Fixtures shared by the benchmarks.

use spectral_trickle::complex::{path_system, perturbed_product_system, quarantine_system, Graph};
use spectral_trickle::influence::spectral_influence_matrix;
use spectral_trickle::trickle::construct_walk_from_ci;
use spectral_trickle::{SpinSystem, WalkGraph};

/// A gapped system with its auto walk.
pub fn gapped(d: usize, spins: usize) -> (SpinSystem, WalkGraph) {
    (0u64..)
        .find_map(|seed| {
            let sys = perturbed_product_system(d, spins, 0.6, seed).ok()?;
            let ci = spectral_influence_matrix(&sys).ok()?;
            let walk = construct_walk_from_ci(&sys, &ci).ok()?.walk;
            Some((sys, walk))
        })
        .expect("some seed yields a gap")
}

pub fn path(d: usize, spins: usize) -> SpinSystem {
    path_system(d, spins, 0).expect("path generator")
}

pub fn quarantine_cycle(n: usize, q: usize) -> SpinSystem {
    quarantine_system(&Graph::cycle(n), q).expect("quarantine generator")
}
