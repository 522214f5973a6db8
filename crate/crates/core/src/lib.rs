//! Kinetic particle simulation of the two-species Vlasov–Poisson system with
//! radiation damping (VPD), together with the diagnostics and decay analysis
//! used to check its energy-dissipation identity and late-time field decay.
//!
//! The crate is organised bottom-up:
//!
//! - [`phase_space`]: particle ensembles, species, compactly supported initial data.
//! - [`fields`]: softened direct-summation field, the damping vector `D[2]`,
//!   cloud-in-cell deposition and a free-space grid Poisson solver.
//! - [`dynamics`]: RK time stepping of the damped characteristics, the
//!   gauge-transformed system, an adaptive reference integrator and a flow
//!   volume probe.
//! - [`diagnostics`]: energies, moments, virial quantities and identity residuals.
//! - [`decay`]: power-law fits and bounded-product verdicts.
//! - [`io`]: run configuration, on-disk formats and the `run`/`check`/`compare`/`fit`
//!   commands.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decay;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod io;
pub mod phase_space;
pub mod vec3;
pub use decay::{BoundVerdict, DecayFit, Trend};
pub use diagnostics::DiagnosticsRecord;
pub use dynamics::{IntegratorConfig, PushMode, Scheme, SimState};
pub use error::{Error, Result};
pub use fields::{FieldSolution, GridSpec, Softening};
pub use phase_space::{InitialDataSpec, ParticleEnsemble, Species};
pub use vec3::Vec3;
