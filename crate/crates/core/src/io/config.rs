//! Run configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decay::DEFAULT_BOUND_FACTOR;
use crate::dynamics::{IntegratorConfig, PushMode};
use crate::error::{Error, Result};
use crate::fields::{GridSpec, Softening};
use crate::phase_space::{sample_initial, InitialDataSpec, ParticleEnsemble, Species};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Vpd,
    Baseline,
    Gauge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeciesSelection {
    #[default]
    Both,
    Ion,
    Electron,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataConfig {
    pub r0: f64,
    pub center_offset: [f64; 3],
    pub particles_per_species: usize,
    pub mass_per_species: f64,
    /// Keep only one species (degenerate runs).
    #[serde(default)]
    pub species: SpeciesSelection,
    /// Append the point reflection `(x, v) -> (-x, -v)` of every particle.
    #[serde(default)]
    pub mirror: bool,
}

/// One explicitly placed particle, for small fixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleConfig {
    pub x: [f64; 3],
    pub v: [f64; 3],
    pub w: f64,
    pub species: Species,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub cells_per_axis: usize,
    pub box_half_width: f64,
    /// Grid diagnostics on every `every`-th record.
    #[serde(default = "one")]
    pub every: u64,
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            cells_per_axis: self.cells_per_axis,
            box_half_width: self.box_half_width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PLists {
    #[serde(default = "default_rho_p")]
    pub rho: Vec<f64>,
    #[serde(default = "default_grad_u_p")]
    pub grad_u: Vec<f64>,
    /// Velocity-moment exponent for the interpolation inequality.
    #[serde(default = "two")]
    pub interp: f64,
}

impl Default for PLists {
    fn default() -> Self {
        Self {
            rho: default_rho_p(),
            grad_u: default_grad_u_p(),
            interp: 2.0,
        }
    }
}

/// Tolerances used by `check` and `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    /// Global relative dissipation residual.
    #[serde(default = "default_dissipation_tol")]
    pub dissipation_tol: f64,
    /// Absolute tolerance of the finite-difference identity residuals at the
    /// diagnostic cadence.
    #[serde(default = "default_identity_tol")]
    pub identity_tol: f64,
    /// Decay window; defaults to `[t_end / 2, t_end]`.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    #[serde(default = "default_bound_factor")]
    pub bound_factor: f64,
    /// Relative tolerance of the interpolation inequality.
    #[serde(default = "default_interp_tol")]
    pub interp_tol: f64,
    /// Relative change of `E_kin` over the last fifth of the run.
    #[serde(default = "default_plateau_tol")]
    pub plateau_tol: f64,
    #[serde(default = "default_gauge_tol")]
    pub gauge_tol: f64,
    #[serde(default = "default_degenerate_tol")]
    pub degenerate_tol: f64,
    /// Whether the plateau and decay checks apply. Bound systems never
    /// disperse and should set this to `false`.
    #[serde(default = "default_true")]
    pub expect_dispersion: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            dissipation_tol: default_dissipation_tol(),
            identity_tol: default_identity_tol(),
            window: None,
            bound_factor: default_bound_factor(),
            interp_tol: default_interp_tol(),
            plateau_tol: default_plateau_tol(),
            gauge_tol: default_gauge_tol(),
            degenerate_tol: default_degenerate_tol(),
            expect_dispersion: true,
        }
    }
}

fn default_true() -> bool {
    true
}

fn one() -> u64 {
    1
}
fn one_usize() -> usize {
    1
}
fn two() -> f64 {
    2.0
}
fn default_rho_p() -> Vec<f64> {
    vec![1.0, 5.0 / 3.0]
}
fn default_grad_u_p() -> Vec<f64> {
    vec![2.0, 3.75]
}
fn default_output() -> PathBuf {
    PathBuf::from("run")
}
fn default_dissipation_tol() -> f64 {
    1e-6
}
fn default_identity_tol() -> f64 {
    1e-5
}
fn default_bound_factor() -> f64 {
    DEFAULT_BOUND_FACTOR
}
fn default_interp_tol() -> f64 {
    1e-3
}
fn default_plateau_tol() -> f64 {
    0.05
}
fn default_gauge_tol() -> f64 {
    1e-4
}
fn default_degenerate_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub epsilon: f64,
    pub mode: ModeName,
    pub seed: u64,
    #[serde(default = "one")]
    pub diag_stride: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Pairwise softening length; defaults to `0.05 r0 N^{-1/3}`.
    #[serde(default)]
    pub softening: Option<f64>,
    #[serde(default = "one_usize")]
    pub workers: usize,
    /// Snapshot every this many steps (and at the final step); 0 disables.
    #[serde(default)]
    pub snapshot_stride: u64,
    #[serde(default)]
    pub initial_data: Option<InitialDataConfig>,
    #[serde(default)]
    pub particles: Option<Vec<ParticleConfig>>,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub p_lists: PLists,
    #[serde(default)]
    pub checks: CheckConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical serialisation.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(
            self.to_toml_string()?.as_bytes(),
        )))
    }

    pub fn push_mode(&self) -> PushMode {
        match self.mode {
            ModeName::Vpd => PushMode::Vpd {
                epsilon: self.epsilon,
            },
            ModeName::Baseline => PushMode::BaselineVp,
            ModeName::Gauge => PushMode::GaugeW {
                epsilon: self.epsilon,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be nonnegative, got {}",
                self.epsilon
            )));
        }
        if self.mode == ModeName::Baseline && self.epsilon != 0.0 {
            return Err(Error::Config(
                "baseline mode is undamped; set epsilon = 0".into(),
            ));
        }
        if self.diag_stride == 0 {
            return Err(Error::Config("diag_stride must be at least 1".into()));
        }
        if self.mode == ModeName::Gauge && self.diag_stride != 1 {
            return Err(Error::Config("gauge mode requires diag_stride = 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.integrator.validate()?;
        match (&self.initial_data, &self.particles) {
            (Some(data), None) => self.initial_spec(data).validate()?,
            (None, Some(list)) => {
                if self.softening.is_none() {
                    return Err(Error::Config(
                        "explicit particle lists require an explicit softening".into(),
                    ));
                }
                if list.iter().any(|p| !(p.w >= 0.0 && p.w.is_finite())) {
                    return Err(Error::Config("particle weights must be nonnegative".into()));
                }
            }
            _ => {
                return Err(Error::Config(
                    "exactly one of [initial_data] or [[particles]] must be given".into(),
                ))
            }
        }
        if let Some(delta) = self.softening {
            Softening::new(delta).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(grid) = &self.grid {
            grid.spec()
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
            if grid.every == 0 {
                return Err(Error::Config("grid.every must be at least 1".into()));
            }
        }
        for &p in &self.p_lists.rho {
            if !(1.0..=5.0 / 3.0 + 1e-12).contains(&p) {
                return Err(Error::Config(format!(
                    "density norm exponent {p} outside [1, 5/3]"
                )));
            }
        }
        for &p in &self.p_lists.grad_u {
            if !(2.0..=3.75).contains(&p) {
                return Err(Error::Config(format!(
                    "field norm exponent {p} outside [2, 15/4]"
                )));
            }
        }
        if !(self.p_lists.interp > 0.0) {
            return Err(Error::Config(
                "interpolation moment exponent must be positive".into(),
            ));
        }
        if let Some([lo, hi]) = self.checks.window {
            if !(lo < hi) {
                return Err(Error::Config(format!("check window [{lo}, {hi}] is empty")));
            }
        }
        Ok(())
    }

    fn initial_spec(&self, data: &InitialDataConfig) -> InitialDataSpec {
        InitialDataSpec {
            r0: data.r0,
            center_offset: Vec3::from(data.center_offset),
            particles_per_species: data.particles_per_species,
            mass_per_species: data.mass_per_species,
            seed: self.seed,
        }
    }

    /// Sampled or listed initial ensemble, in physical velocities.
    pub fn initial_ensemble(&self) -> Result<ParticleEnsemble> {
        if let Some(list) = &self.particles {
            let mut e = ParticleEnsemble::with_capacity(list.len());
            for p in list {
                e.push(Vec3::from(p.x), Vec3::from(p.v), p.w, p.species);
            }
            return Ok(e);
        }
        let data = self.initial_data.as_ref().expect("validated");
        let (ions, electrons) = sample_initial(&self.initial_spec(data))?;
        let e = match data.species {
            SpeciesSelection::Both => ions.merge(electrons),
            SpeciesSelection::Ion => ions,
            SpeciesSelection::Electron => electrons,
        };
        Ok(if data.mirror {
            e.mirror_symmetrized()
        } else {
            e
        })
    }

    /// Upper bound on each species' initial phase-space density, when known
    /// analytically. A reflected copy can overlap the original, doubling it.
    pub fn f_sup(&self) -> Option<f64> {
        self.initial_data.as_ref().map(|d| {
            let sup = self.initial_spec(d).f_sup();
            if d.mirror {
                2.0 * sup
            } else {
                sup
            }
        })
    }

    pub fn softening_for(&self, ensemble: &ParticleEnsemble) -> Softening {
        match (self.softening, &self.initial_data) {
            (Some(d), _) => Softening(d),
            (None, Some(data)) => Softening::default_for(data.r0, ensemble.len()),
            (None, None) => Softening(0.0),
        }
    }

    /// Decay window, defaulting to the second half of the run.
    pub fn window(&self) -> (f64, f64) {
        match self.checks.window {
            Some([lo, hi]) => (lo, hi),
            None => (0.5 * self.integrator.t_end, self.integrator.t_end),
        }
    }
}
