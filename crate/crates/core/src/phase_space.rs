//! Particle representation of the two distribution functions `f+` (ions) and
//! `f-` (electrons), plus sampling of smooth compactly supported initial data.
//!
//! Masses are one for both species and the charge magnitude is folded into the
//! particle weight, so particle `i` carries charge `q_i = sign_i * w_i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Maximum rejection-sampling draws per particle coordinate before the initial data are
/// declared degenerate.
pub const DEFAULT_REJECTION_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Ion,
    Electron,
}

impl Species {
    /// +1 for ions, -1 for electrons.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Species::Ion => 1.0,
            Species::Electron => -1.0,
        }
    }

    pub fn from_sign(sign: f64) -> Option<Self> {
        if sign == 1.0 {
            Some(Species::Ion)
        } else if sign == -1.0 {
            Some(Species::Electron)
        } else {
            None
        }
    }
}

/// Empirical-measure form of `f+` and `f-`: structure of arrays, species may be
/// mixed in any order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleEnsemble {
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub w: Vec<f64>,
    pub species: Vec<Species>,
}

impl ParticleEnsemble {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            x: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            w: Vec::with_capacity(n),
            species: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, x: Vec3, v: Vec3, w: f64, species: Species) {
        self.x.push(x);
        self.v.push(v);
        self.w.push(w);
        self.species.push(species);
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.x.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    #[inline]
    pub fn sign(&self, i: usize) -> f64 {
        self.species[i].sign()
    }

    #[inline]
    pub fn charge(&self, i: usize) -> f64 {
        self.species[i].sign() * self.w[i]
    }

    pub fn charges(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.charge(i)).collect()
    }

    /// Concatenates two ensembles (e.g. the ion and electron halves).
    pub fn merge(mut self, other: ParticleEnsemble) -> Self {
        self.x.extend(other.x);
        self.v.extend(other.v);
        self.w.extend(other.w);
        self.species.extend(other.species);
        self
    }

    /// Total weight of one species (`M0+` or `M0-`).
    pub fn species_weight(&self, species: Species) -> f64 {
        self.w
            .iter()
            .zip(&self.species)
            .filter(|(_, s)| **s == species)
            .map(|(w, _)| *w)
            .sum()
    }

    /// Sub-ensemble containing one species only.
    pub fn select(&self, species: Species) -> ParticleEnsemble {
        let mut out = ParticleEnsemble::new();
        for i in 0..self.len() {
            if self.species[i] == species {
                out.push(self.x[i], self.v[i], self.w[i], species);
            }
        }
        out
    }

    /// Appends the image `(x, v) -> (-x, -v)` of every particle with the
    /// species preserved, interleaved so particle `2k+1` mirrors particle `2k`.
    /// The result is charge-mirror symmetric, hence its damping vector vanishes.
    pub fn mirror_symmetrized(&self) -> ParticleEnsemble {
        let mut out = ParticleEnsemble::with_capacity(2 * self.len());
        for i in 0..self.len() {
            out.push(self.x[i], self.v[i], self.w[i], self.species[i]);
            out.push(-self.x[i], -self.v[i], self.w[i], self.species[i]);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.v).all(|p| p.is_finite())
    }
}

/// Initial data: smooth bumps in `x` and `v`, ions centred at `+center_offset`,
/// electrons at `-center_offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDataSpec {
    pub r0: f64,
    pub center_offset: Vec3,
    pub particles_per_species: usize,
    pub mass_per_species: f64,
    pub seed: u64,
}

impl InitialDataSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(Error::Config(format!(
                "r0 must be positive, got {}",
                self.r0
            )));
        }
        if !(self.mass_per_species >= 0.0 && self.mass_per_species.is_finite()) {
            return Err(Error::Config(format!(
                "mass_per_species must be nonnegative, got {}",
                self.mass_per_species
            )));
        }
        if !self.center_offset.is_finite() {
            return Err(Error::Config("center_offset must be finite".into()));
        }
        Ok(())
    }

    /// Analytic supremum of `f0` for one species. It is preserved along
    /// characteristics, so it bounds `f(t)` for all times.
    pub fn f_sup(&self) -> f64 {
        let norm = bump_ball_integral() * self.r0.powi(3);
        self.mass_per_species / (norm * norm) * (-2.0f64).exp()
    }

    /// Analytic velocity moment `int int |v|^p f0 dx dv` of one species.
    pub fn moment_analytic(&self, p: f64) -> f64 {
        let radial = |q: f64| {
            simpson(
                |s| 4.0 * std::f64::consts::PI * s.powf(q) * bump_profile(s),
                0.0,
                1.0,
                4000,
            )
        };
        self.mass_per_species * self.r0.powf(p) * radial(2.0 + p) / radial(2.0)
    }
}

/// `exp(-1/(1-s^2))` on `|s| < 1`, zero elsewhere.
pub fn bump_profile(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// `int_{|y|<1} bump_profile(|y|) dy` over the unit ball in three dimensions.
pub fn bump_ball_integral() -> f64 {
    simpson(
        |s| 4.0 * std::f64::consts::PI * s * s * bump_profile(s),
        0.0,
        1.0,
        4000,
    )
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let weight = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += weight * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Samples both species; returns `(ions, electrons)`.
pub fn sample_initial(spec: &InitialDataSpec) -> Result<(ParticleEnsemble, ParticleEnsemble)> {
    sample_initial_with_cap(spec, DEFAULT_REJECTION_CAP)
}

pub fn sample_initial_with_cap(
    spec: &InitialDataSpec,
    cap: u64,
) -> Result<(ParticleEnsemble, ParticleEnsemble)> {
    spec.validate()?;
    let ions = sample_species(spec, Species::Ion, spec.center_offset, 0, cap)?;
    let electrons = sample_species(spec, Species::Electron, -spec.center_offset, 1, cap)?;
    Ok((ions, electrons))
}

fn sample_species(
    spec: &InitialDataSpec,
    species: Species,
    center: Vec3,
    stream: u64,
    cap: u64,
) -> Result<ParticleEnsemble> {
    let n = spec.particles_per_species;
    let mut out = ParticleEnsemble::with_capacity(n);
    if n == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let weight = spec.mass_per_species / n as f64;
    for index in 0..n {
        let dx =
            sample_bump_ball(&mut rng, spec.r0, cap).ok_or(Error::DegenerateSpec { index, cap })?;
        let v =
            sample_bump_ball(&mut rng, spec.r0, cap).ok_or(Error::DegenerateSpec { index, cap })?;
        out.push(center + dx, v, weight, species);
    }
    Ok(out)
}

/// Draws a point with density proportional to `bump_profile(|y| / r0)` by
/// rejection from the enclosing cube.
fn sample_bump_ball(rng: &mut ChaCha20Rng, r0: f64, cap: u64) -> Option<Vec3> {
    let peak = bump_profile(0.0);
    for _ in 0..cap {
        let y = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let u: f64 = rng.gen();
        if u * peak < bump_profile(y.norm()) {
            return Some(y * r0);
        }
    }
    None
}

/// `M_p = sum_i w_i |v_i|^p` over both species.
pub fn moment(ensemble: &ParticleEnsemble, p: f64) -> f64 {
    ensemble
        .v
        .iter()
        .zip(&ensemble.w)
        .map(|(v, w)| w * v.norm().powf(p))
        .sum()
}

/// Dipole moment `D = sum_i q_i x_i`.
pub fn dipole(ensemble: &ParticleEnsemble) -> Vec3 {
    (0..ensemble.len())
        .map(|i| ensemble.charge(i) * ensemble.x[i])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(n: usize, seed: u64) -> InitialDataSpec {
        InitialDataSpec {
            r0: 1.0,
            center_offset: Vec3::new(0.5, 0.0, 0.0),
            particles_per_species: n,
            mass_per_species: 1.0,
            seed,
        }
    }

    #[test]
    fn bump_values() {
        assert_eq!(bump_profile(1.5), 0.0);
        assert_eq!(bump_profile(1.0), 0.0);
        assert_eq!(bump_profile(-1.0), 0.0);
        assert_relative_eq!(bump_profile(0.0), 0.367879441171442, epsilon = 1e-14);
        assert_relative_eq!(bump_profile(0.5), 0.263597138115727, epsilon = 1e-14);
    }

    #[test]
    fn bump_ball_integral_matches_adaptive_quadrature() {
        // reference from an independent adaptive Gauss-Kronrod quadrature
        assert_relative_eq!(bump_ball_integral(), 0.44108888727660434, epsilon = 1e-12);
    }

    #[test]
    fn empty_spec_gives_empty_ensembles() {
        let (ions, electrons) = sample_initial(&spec(0, 1)).unwrap();
        assert!(ions.is_empty() && electrons.is_empty());
    }

    #[test]
    fn samples_respect_support_and_weights() {
        let s = spec(500, 3);
        let (ions, electrons) = sample_initial(&s).unwrap();
        for (ens, c) in [(&ions, s.center_offset), (&electrons, -s.center_offset)] {
            assert_eq!(ens.len(), 500);
            for i in 0..ens.len() {
                assert!((ens.x[i] - c).norm() <= s.r0);
                assert!(ens.v[i].norm() <= s.r0);
                assert_eq!(ens.w[i], 1.0 / 500.0);
            }
        }
        assert!(ions.species.iter().all(|&sp| sp == Species::Ion));
        assert!(electrons.species.iter().all(|&sp| sp == Species::Electron));
        assert_relative_eq!(ions.species_weight(Species::Ion), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_initial(&spec(64, 42)).unwrap();
        let b = sample_initial(&spec(64, 42)).unwrap();
        assert_eq!(a, b);
        let c = sample_initial(&spec(64, 43)).unwrap();
        assert_ne!(a.0.x, c.0.x);
    }

    #[test]
    fn tiny_cap_reports_degenerate_spec() {
        let err = sample_initial_with_cap(&spec(10, 1), 1).unwrap_err();
        assert!(matches!(err, Error::DegenerateSpec { .. }), "{err}");
    }

    #[test]
    fn moment_examples() {
        let mut e = ParticleEnsemble::new();
        e.push(Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0), 1.0, Species::Ion);
        assert_eq!(moment(&e, 2.0), 4.0);
        e.push(Vec3::ZERO, Vec3::ZERO, 0.5, Species::Electron);
        assert_eq!(moment(&e, 0.0), 1.5);
    }

    #[test]
    fn dipole_examples() {
        let mut e = ParticleEnsemble::new();
        e.push(Vec3::new(1.0, 0.0, 0.0), Vec3::ZERO, 1.0, Species::Ion);
        e.push(
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::ZERO,
            1.0,
            Species::Electron,
        );
        assert_eq!(dipole(&e), Vec3::new(2.0, 0.0, 0.0));

        let (ions, electrons) = sample_initial(&spec(20, 5)).unwrap();
        let sym = ions.merge(electrons).mirror_symmetrized();
        assert!(dipole(&sym).norm() < 1e-14);
    }

    #[test]
    fn analytic_moments_match_sampled_ones() {
        let s = spec(20_000, 11);
        let (ions, _) = sample_initial(&s).unwrap();
        assert_relative_eq!(moment(&ions, 0.0), s.moment_analytic(0.0), epsilon = 1e-12);
        assert_relative_eq!(
            moment(&ions, 2.0),
            s.moment_analytic(2.0),
            max_relative = 0.03
        );
    }

    proptest! {
        #[test]
        fn dipole_shift_law(ax in -3.0..3.0f64, ay in -3.0..3.0f64, az in -3.0..3.0f64, seed in 0u64..1000) {
            let (ions, electrons) = sample_initial(&InitialDataSpec { mass_per_species: 0.7, ..spec(7, seed) }).unwrap();
            let mut ens = ions.merge(electrons);
            ens.w[0] *= 2.0; // unbalance the charge
            let before = dipole(&ens);
            let a = Vec3::new(ax, ay, az);
            for x in ens.x.iter_mut() {
                *x += a;
            }
            let net = ens.species_weight(Species::Ion) - ens.species_weight(Species::Electron);
            let expected = before + a * net;
            prop_assert!((dipole(&ens) - expected).norm() < 1e-12);
        }

        #[test]
        fn moment_monotone_under_adding_particles(p in 0.0..4.0f64, w in 1e-3..2.0f64, vx in -2.0..2.0f64) {
            let (ions, electrons) = sample_initial(&spec(5, 9)).unwrap();
            let mut ens = ions.merge(electrons);
            let before = moment(&ens, p);
            ens.push(Vec3::ZERO, Vec3::new(vx, 0.1, 0.0), w, Species::Electron);
            prop_assert!(moment(&ens, p) >= before);
        }
    }
}
