//! Scalar and vector diagnostics of an ensemble and residuals of the exact
//! identities satisfied by the damped particle flow.

use crate::error::{Error, Result};
use crate::fields::{lp_norm, FieldSolution, PoissonSolution, ScalarGrid};
use crate::phase_space::{dipole, moment, ParticleEnsemble};
use crate::vec3::Vec3;

/// One row of the diagnostic series. `None` marks a value that was not
/// computed at this record (written as `NaN`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub e_kin: f64,
    pub e_pot_pair: f64,
    pub e_pot_grid: Option<f64>,
    pub e_total: f64,
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub dipole: Vec3,
    pub d2: Vec3,
    pub i: Vec3,
    pub r: f64,
    pub s: f64,
    pub q: f64,
    /// `(p, ||rho||_p)` for each configured exponent.
    pub rho_lp: Vec<(f64, Option<f64>)>,
    /// `(p, ||grad U||_p)` for each configured exponent.
    pub grad_u_lp: Vec<(f64, Option<f64>)>,
    pub diss_residual: Option<f64>,
    /// Relative slack of the interpolation inequality, minimum over species.
    pub interp_slack: Option<f64>,
}

impl DiagnosticsRecord {
    /// Record without grid quantities or residuals.
    pub fn from_state(t: f64, ensemble: &ParticleEnsemble, field: &FieldSolution) -> Self {
        let e = energies(ensemble, field, None);
        let (s, q, i) = virials(ensemble, t);
        Self {
            t,
            e_kin: e.kinetic,
            e_pot_pair: e.potential_pair,
            e_pot_grid: None,
            e_total: e.total,
            m0: moment(ensemble, 0.0),
            m1: moment(ensemble, 1.0),
            m2: moment(ensemble, 2.0),
            dipole: dipole(ensemble),
            d2: field.d2,
            i,
            r: scatter_r(ensemble, t),
            s,
            q,
            rho_lp: Vec::new(),
            grad_u_lp: Vec::new(),
            diss_residual: None,
            interp_slack: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energies {
    pub kinetic: f64,
    pub potential_pair: f64,
    pub potential_grid: Option<f64>,
    pub total: f64,
}

pub fn kinetic_energy(ensemble: &ParticleEnsemble) -> f64 {
    0.5 * (0..ensemble.len())
        .map(|i| ensemble.w[i] * ensemble.v[i].norm_squared())
        .sum::<f64>()
}

pub fn energies(
    ensemble: &ParticleEnsemble,
    field: &FieldSolution,
    grid: Option<&PoissonSolution>,
) -> Energies {
    let kinetic = kinetic_energy(ensemble);
    Energies {
        kinetic,
        potential_pair: field.potential_energy,
        potential_grid: grid.map(PoissonSolution::field_energy),
        total: kinetic + field.potential_energy,
    }
}

/// Rate form of the dissipation identity between consecutive records:
/// `(E(t1) - E(t0)) / dt + eps * <|D2|^2>`, where the mean of `|D2|^2` over
/// the interval comes from the integrator's stage quadrature when available
/// and from the squared midpoint interpolant of the endpoint values otherwise.
pub fn dissipation_residual(
    prev: &DiagnosticsRecord,
    next: &DiagnosticsRecord,
    epsilon: f64,
    d2_sq_mean: Option<f64>,
) -> Result<f64> {
    let dt = next.t - prev.t;
    if !(dt > 0.0) {
        return Err(Error::NonUniformSpacing { index: 1 });
    }
    let mean = d2_sq_mean.unwrap_or_else(|| ((prev.d2 + next.d2) * 0.5).norm_squared());
    Ok((next.e_total - prev.e_total) / dt + epsilon * mean)
}

/// `R = sum_i w_i |x_i - v_i t|^2` over both species.
pub fn scatter_r(ensemble: &ParticleEnsemble, t: f64) -> f64 {
    (0..ensemble.len())
        .map(|i| ensemble.w[i] * (ensemble.x[i] - ensemble.v[i] * t).norm_squared())
        .sum()
}

/// `(S, Q, I)` with `S = sum w x.v`, `Q = sum w |x|^2`, `I = sum q (x - v t)`.
pub fn virials(ensemble: &ParticleEnsemble, t: f64) -> (f64, f64, Vec3) {
    let mut s = 0.0;
    let mut q = 0.0;
    let mut i_vec = Vec3::ZERO;
    for k in 0..ensemble.len() {
        let w = ensemble.w[k];
        s += w * ensemble.x[k].dot(ensemble.v[k]);
        q += w * ensemble.x[k].norm_squared();
        i_vec += (ensemble.x[k] - ensemble.v[k] * t) * ensemble.charge(k);
    }
    (s, q, i_vec)
}

/// Common spacing of a sample grid, checked to relative precision `1e-9`.
pub fn uniform_spacing(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: times.len(),
        });
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::NonUniformSpacing { index: 1 });
    }
    for (k, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(w[1].abs() * 1e-6) {
            return Err(Error::NonUniformSpacing { index: k + 1 });
        }
    }
    Ok(dt)
}

fn require(len: usize, needed: usize, others: &[usize]) -> Result<()> {
    if len < needed {
        return Err(Error::TooFewSamples { needed, got: len });
    }
    if others.iter().any(|&n| n != len) {
        return Err(Error::InvalidArgument("series lengths differ".into()));
    }
    Ok(())
}

/// Max over interior samples of `|dI/dt - (eps M0 - t) D2|`, with `dI/dt`
/// from centred differences.
pub fn i_identity_residual(
    times: &[f64],
    i_series: &[Vec3],
    d2_series: &[Vec3],
    m0: f64,
    epsilon: f64,
) -> Result<f64> {
    require(times.len(), 3, &[i_series.len(), d2_series.len()])?;
    let dt = uniform_spacing(times)?;
    let mut worst = 0.0f64;
    for k in 1..times.len() - 1 {
        let rate = (i_series[k + 1] - i_series[k - 1]) * (0.5 / dt);
        let expected = d2_series[k] * (epsilon * m0 - times[k]);
        worst = worst.max((rate - expected).norm());
    }
    Ok(worst)
}

/// Max over interior samples of `|D'' - (D2 + eps M0 D2')|` with centred
/// differences. `with_correction = false` drops the `eps M0 D2'` term.
pub fn ddot_d_residual(
    times: &[f64],
    d_series: &[Vec3],
    d2_series: &[Vec3],
    m0: f64,
    epsilon: f64,
    with_correction: bool,
) -> Result<f64> {
    require(times.len(), 5, &[d_series.len(), d2_series.len()])?;
    let dt = uniform_spacing(times)?;
    let mut worst = 0.0f64;
    for k in 1..times.len() - 1 {
        let accel = (d_series[k + 1] - d_series[k] * 2.0 + d_series[k - 1]) * (1.0 / (dt * dt));
        let mut expected = d2_series[k];
        if with_correction {
            expected += (d2_series[k + 1] - d2_series[k - 1]) * (epsilon * m0 * 0.5 / dt);
        }
        worst = worst.max((accel - expected).norm());
    }
    Ok(worst)
}

pub fn ddot_d_consistency(
    times: &[f64],
    d_series: &[Vec3],
    d2_series: &[Vec3],
    m0: f64,
    epsilon: f64,
) -> Result<f64> {
    ddot_d_residual(times, d_series, d2_series, m0, epsilon, true)
}

/// Constant of the interpolation inequality
/// `||rho||_{(3+p)/3} <= C_p ||f||_inf^{p/(3+p)} M_p^{3/(3+p)}`, from
/// minimising `(4 pi / 3) R^3 ||f||_inf + R^{-p} m_p` pointwise in the radius.
pub fn interpolation_constant(p: f64) -> f64 {
    ((3.0 + p) / 3.0) * (4.0 * std::f64::consts::PI / p).powf(p / (3.0 + p))
}

/// Right-hand side of the interpolation inequality.
pub fn interpolation_bound(f_inf: f64, m_p: f64, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "moment exponent must be positive, got {p}"
        )));
    }
    Ok(interpolation_constant(p) * f_inf.powf(p / (3.0 + p)) * m_p.powf(3.0 / (3.0 + p)))
}

/// Slack and scale of the interpolation inequality on a deposited density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationSlack {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl InterpolationSlack {
    /// Slack relative to the larger side; 0 when both vanish.
    pub fn relative(&self) -> f64 {
        let scale = self.lhs.max(self.rhs);
        if scale > 0.0 {
            self.slack / scale
        } else {
            0.0
        }
    }
}

pub fn interpolation_check(
    rho: &ScalarGrid,
    f_inf: f64,
    m_p: f64,
    p: f64,
) -> Result<InterpolationSlack> {
    let rhs = interpolation_bound(f_inf, m_p, p)?;
    let lhs = lp_norm(rho, (3.0 + p) / 3.0)?;
    Ok(InterpolationSlack {
        lhs,
        rhs,
        slack: rhs - lhs,
    })
}
