//! Shared fixtures for the benchmarks.

use vpd_core::phase_space::sample_initial;
use vpd_core::{InitialDataSpec, ParticleEnsemble, Vec3};

/// Two overlapping clusters with `per_species` particles each.
pub fn two_clusters(per_species: usize) -> ParticleEnsemble {
    let (ions, electrons) = sample_initial(&InitialDataSpec {
        r0: 1.0,
        center_offset: Vec3::new(0.5, 0.0, 0.0),
        particles_per_species: per_species,
        mass_per_species: 1.0,
        seed: 42,
    })
    .expect("valid fixture");
    ions.merge(electrons)
}
