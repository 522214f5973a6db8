//! Phase-space volume of the linearised flow map of one designated
//! characteristic.

use nalgebra::Matrix6;

use super::{Integrator, IntegratorConfig, PushMode, Scheme, Tracers};
use crate::error::{Error, Result};
use crate::fields::Softening;
use crate::phase_space::ParticleEnsemble;
use crate::vec3::Vec3;

/// Determinant of the central-difference Jacobian of the flow map
/// `(x, v)(0) -> (x, v)(horizon)` for particle `designated`.
///
/// Twelve displaced copies (`+-h` along each phase-space axis) are advanced
/// as test particles in the field of the evolving background, so each
/// column of the Jacobian sees the same external force. The determinant is
/// 1 up to `O(h^2)` plus integration error.
pub fn flow_volume_probe(
    ensemble: &ParticleEnsemble,
    designated: usize,
    mode: PushMode,
    softening: Softening,
    dt: f64,
    horizon: f64,
    h: f64,
) -> Result<f64> {
    if mode.is_gauge() {
        return Err(Error::InvalidArgument(
            "volume probe runs in physical variables; use Vpd or BaselineVp".into(),
        ));
    }
    if designated >= ensemble.len() {
        return Err(Error::InvalidArgument(format!(
            "designated particle {designated} out of range for {} particles",
            ensemble.len()
        )));
    }
    let z = ensemble.x[designated]
        .max_abs()
        .max(ensemble.v[designated].max_abs());
    if !(h > 100.0 * f64::EPSILON * (1.0 + z)) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {h} below the rounding floor"
        )));
    }
    let config = IntegratorConfig {
        dt,
        scheme: Scheme::Rk4,
        t_end: horizon,
    };
    config.validate()?;
    let mut integrator = Integrator::new(config, mode, softening)?;

    let mut tracers = Tracers {
        x: Vec::with_capacity(12),
        v: Vec::with_capacity(12),
        sign: ensemble.sign(designated),
        exclude: Some(designated),
    };
    for axis in 0..6 {
        for dir in [1.0, -1.0] {
            let mut x = ensemble.x[designated];
            let mut v = ensemble.v[designated];
            let bump = |u: &mut Vec3, a: usize| match a {
                0 => u.x += dir * h,
                1 => u.y += dir * h,
                _ => u.z += dir * h,
            };
            if axis < 3 {
                bump(&mut x, axis);
            } else {
                bump(&mut v, axis - 3);
            }
            tracers.x.push(x);
            tracers.v.push(v);
        }
    }

    let mut state = integrator.initial_state(ensemble.clone())?;
    for _ in 0..config.n_steps() {
        integrator.step_inner(&mut state, Some(&mut tracers))?;
    }

    let mut jac = Matrix6::<f64>::zeros();
    for col in 0..6 {
        let (p, m) = (2 * col, 2 * col + 1);
        for row in 0..3 {
            jac[(row, col)] = (tracers.x[p][row] - tracers.x[m][row]) / (2.0 * h);
            jac[(row + 3, col)] = (tracers.v[p][row] - tracers.v[m][row]) / (2.0 * h);
        }
    }
    Ok(jac.determinant())
}
