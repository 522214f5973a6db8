//! Time integration of the damped characteristics
//!
//! ```text
//! dx/dt = v + sign * eps * D2(t),   dv/dt = sign * grad U(t, x)
//! ```
//!
//! where `D2 = sum_i w_i grad U(x_i)` is recomputed at every RK stage. Two
//! related systems share the same stepping machinery: the undamped baseline
//! (`eps = 0`) and the gauge-transformed system in the velocity variable
//! `vbar = v + sign * eps * D2`, which is standard Vlasov–Poisson with the
//! extra uniform force `sign * eps * dD2/dt`.

mod oracle;
mod probe;

use std::borrow::Cow;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use oracle::{oracle_integrate, Trajectory, ORACLE_MAX_PARTICLES};
pub use probe::flow_volume_probe;

use crate::error::{Error, Result};
use crate::fields::{pairwise_field_with, Evaluation, FieldSolution, Softening};
use crate::phase_space::ParticleEnsemble;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PushMode {
    Vpd { epsilon: f64 },
    BaselineVp,
    GaugeW { epsilon: f64 },
}

impl PushMode {
    pub fn epsilon(&self) -> f64 {
        match *self {
            PushMode::Vpd { epsilon } | PushMode::GaugeW { epsilon } => epsilon,
            PushMode::BaselineVp => 0.0,
        }
    }

    pub fn is_gauge(&self) -> bool {
        matches!(self, PushMode::GaugeW { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rk4,
    Rk2,
}

impl Scheme {
    pub fn order(self) -> u32 {
        match self {
            Scheme::Rk4 => 4,
            Scheme::Rk2 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub t_end: f64,
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "t_end must be nonnegative, got {}",
                self.t_end
            )));
        }
        let steps = (self.t_end / self.dt).round();
        if (steps * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(1.0) {
            return Err(Error::Config(format!(
                "t_end = {} is not an integer multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }
}

/// Phase-space velocity of every particle.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDerivative {
    pub dx: Vec<Vec3>,
    pub dv: Vec<Vec3>,
}

/// Right-hand side of the damped characteristics. The drift `eps * D2` is a
/// global functional, identical for all particles of a species.
pub fn rhs_vpd(
    ensemble: &ParticleEnsemble,
    field: &FieldSolution,
    epsilon: f64,
) -> PhaseDerivative {
    let drift = field.d2 * epsilon;
    let n = ensemble.len();
    let mut dx = Vec::with_capacity(n);
    let mut dv = Vec::with_capacity(n);
    for i in 0..n {
        let s = ensemble.sign(i);
        dx.push(ensemble.v[i] + drift * s);
        dv.push(field.e[i] * s);
    }
    PhaseDerivative { dx, dv }
}

/// Right-hand side of the gauge-transformed system: standard Vlasov–Poisson
/// in `(x, vbar)` with potential `W = U + eps * dD2/dt . x`.
pub fn gauge_rhs(
    ensemble: &ParticleEnsemble,
    field: &FieldSolution,
    epsilon: f64,
    d2_dot: Vec3,
) -> PhaseDerivative {
    let kick = d2_dot * epsilon;
    let n = ensemble.len();
    let mut dx = Vec::with_capacity(n);
    let mut dv = Vec::with_capacity(n);
    for i in 0..n {
        let s = ensemble.sign(i);
        dx.push(ensemble.v[i]);
        dv.push((field.e[i] + kick) * s);
    }
    PhaseDerivative { dx, dv }
}

/// `v -> v + sign * eps * d2` (VPD velocities to gauge velocities) or its
/// inverse when `direction` is negative.
pub fn shift_velocities(ensemble: &mut ParticleEnsemble, d2: Vec3, epsilon: f64, direction: f64) {
    let shift = d2 * (epsilon * direction);
    for i in 0..ensemble.len() {
        let s = ensemble.sign(i);
        ensemble.v[i] += shift * s;
    }
}

/// Integration state. In gauge mode `ensemble.v` holds `vbar`.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub ensemble: ParticleEnsemble,
    /// Field at the current positions.
    pub field: FieldSolution,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// `D2` at each RK stage state, in stage order.
    pub stage_d2: Vec<Vec3>,
    /// Stage quadrature of `int |D2|^2 dt` over the step, with the same
    /// weights as the RK update.
    pub d2_sq_integral: f64,
}

/// Massless test particles advanced alongside the system; they feel the
/// field of every source except `exclude` and the same drift as real
/// particles, but do not act back.
#[derive(Debug, Clone)]
pub(crate) struct Tracers {
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub sign: f64,
    pub exclude: Option<usize>,
}

/// Lagged `D2` samples at accepted step times, used to estimate `dD2/dt` in
/// gauge mode.
#[derive(Debug, Clone)]
struct D2History {
    dt: f64,
    /// Most recent last; at most three entries.
    values: VecDeque<Vec3>,
}

impl D2History {
    /// Seeds the buffer at `t0` with a linear backward extrapolation using a
    /// centred estimate of the initial slope.
    fn seeded(dt: f64, d2: Vec3, slope: Vec3) -> Self {
        let values = VecDeque::from(vec![d2 - slope * (2.0 * dt), d2 - slope * dt, d2]);
        Self { dt, values }
    }

    fn push(&mut self, d2: Vec3) {
        if self.values.len() == 3 {
            self.values.pop_front();
        }
        self.values.push_back(d2);
    }

    /// Derivative at `t_n + s * dt` of the quadratic through the last three
    /// samples (at `s = -2, -1, 0`).
    fn derivative(&self, s: f64) -> Vec3 {
        let f2 = self.values[0];
        let f1 = self.values[1];
        let f0 = self.values[2];
        (f0 * ((2.0 * s + 3.0) / 2.0) - f1 * (2.0 * s + 2.0) + f2 * ((2.0 * s + 1.0) / 2.0))
            * (1.0 / self.dt)
    }
}

/// Fixed-step RK integrator with per-stage field and `D2` recomputation.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub config: IntegratorConfig,
    pub mode: PushMode,
    pub softening: Softening,
    pub evaluation: Evaluation,
    history: Option<D2History>,
}

impl Integrator {
    pub fn new(config: IntegratorConfig, mode: PushMode, softening: Softening) -> Result<Self> {
        if !(mode.epsilon() >= 0.0 && mode.epsilon().is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be nonnegative, got {}",
                mode.epsilon()
            )));
        }
        if !(config.dt > 0.0 && config.dt.is_finite()) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                config.dt
            )));
        }
        Ok(Self {
            config,
            mode,
            softening,
            evaluation: Evaluation::Serial,
            history: None,
        })
    }

    pub fn with_evaluation(mut self, evaluation: Evaluation) -> Self {
        self.evaluation = evaluation;
        self
    }

    fn field(&self, ensemble: &ParticleEnsemble) -> Result<FieldSolution> {
        pairwise_field_with(ensemble, self.softening, self.evaluation)
    }

    /// Builds the state at `t = 0` from data given in physical (VPD)
    /// velocities. In gauge mode the velocities are shifted to `vbar` and the
    /// `D2` lag buffer is seeded.
    pub fn initial_state(&mut self, ensemble: ParticleEnsemble) -> Result<SimState> {
        let mut ensemble = ensemble;
        let field = self.field(&ensemble)?;
        if let PushMode::GaugeW { epsilon } = self.mode {
            shift_velocities(&mut ensemble, field.d2, epsilon, 1.0);
            // dD2/dt is the derivative of D2 along dx/dt = vbar; centred
            // difference with step dt.
            let h = self.config.dt;
            let mut ahead = ensemble.clone();
            let mut behind = ensemble.clone();
            for i in 0..ensemble.len() {
                ahead.x[i] += ensemble.v[i] * h;
                behind.x[i] -= ensemble.v[i] * h;
            }
            let slope = (self.field(&ahead)?.d2 - self.field(&behind)?.d2) * (0.5 / h);
            self.history = Some(D2History::seeded(h, field.d2, slope));
        } else {
            self.history = None;
        }
        Ok(SimState {
            t: 0.0,
            ensemble,
            field,
            steps: 0,
        })
    }

    /// The state with physical (VPD) velocities; borrows unless in gauge mode.
    pub fn physical_ensemble<'a>(&self, state: &'a SimState) -> Cow<'a, ParticleEnsemble> {
        match self.mode {
            PushMode::GaugeW { epsilon } => {
                let mut e = state.ensemble.clone();
                shift_velocities(&mut e, state.field.d2, epsilon, -1.0);
                Cow::Owned(e)
            }
            _ => Cow::Borrowed(&state.ensemble),
        }
    }

    fn derivative(
        &self,
        ensemble: &ParticleEnsemble,
        field: &FieldSolution,
        stage_offset: f64,
    ) -> PhaseDerivative {
        match self.mode {
            PushMode::Vpd { epsilon } => rhs_vpd(ensemble, field, epsilon),
            PushMode::BaselineVp => rhs_vpd(ensemble, field, 0.0),
            PushMode::GaugeW { epsilon } => {
                let d2_dot = self
                    .history
                    .as_ref()
                    .map(|h| h.derivative(stage_offset))
                    .unwrap_or(Vec3::ZERO);
                gauge_rhs(ensemble, field, epsilon, d2_dot)
            }
        }
    }

    /// One RK step: time advances by `dt`, weights and species unchanged.
    pub fn step(&mut self, state: &mut SimState) -> Result<StepReport> {
        self.step_inner(state, None)
    }

    pub(crate) fn step_inner(
        &mut self,
        state: &mut SimState,
        tracers: Option<&mut Tracers>,
    ) -> Result<StepReport> {
        let dt = self.config.dt;
        let (offsets, weights): (&[f64], &[f64]) = match self.config.scheme {
            Scheme::Rk4 => (
                &[0.0, 0.5, 0.5, 1.0],
                &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            ),
            Scheme::Rk2 => (&[0.0, 0.5], &[0.0, 1.0]),
        };
        let stages = offsets.len();
        let y0 = &state.ensemble;
        let mut stage_ensemble = y0.clone();
        let mut stage_field = state.field.clone();
        let mut acc_x = y0.x.clone();
        let mut acc_v = y0.v.clone();
        let mut stage_d2 = Vec::with_capacity(stages);
        let mut d2_sq_integral = 0.0;

        let tracer_base = tracers.as_ref().map(|t| (t.x.clone(), t.v.clone()));
        let mut tracer_stage = tracer_base.clone();
        let mut tracer_acc = tracer_base.clone();

        for stage in 0..stages {
            if stage > 0 {
                stage_field = self.field(&stage_ensemble)?;
            }
            stage_d2.push(stage_field.d2);
            d2_sq_integral += weights[stage] * dt * stage_field.d2.norm_squared();
            let k = self.derivative(&stage_ensemble, &stage_field, offsets[stage]);

            let tracer_k = match (tracers.as_deref(), tracer_stage.as_ref()) {
                (Some(t), Some((tx, tv))) => Some(self.tracer_derivative(
                    t,
                    tx,
                    tv,
                    &stage_ensemble,
                    &stage_field,
                    offsets[stage],
                )),
                _ => None,
            };

            for i in 0..y0.len() {
                acc_x[i] += k.dx[i] * (weights[stage] * dt);
                acc_v[i] += k.dv[i] * (weights[stage] * dt);
            }
            if let (Some((ax, av)), Some((kx, kv))) = (tracer_acc.as_mut(), tracer_k.as_ref()) {
                for c in 0..ax.len() {
                    ax[c] += kx[c] * (weights[stage] * dt);
                    av[c] += kv[c] * (weights[stage] * dt);
                }
            }

            if stage + 1 < stages {
                let a = offsets[stage + 1] * dt;
                for i in 0..y0.len() {
                    stage_ensemble.x[i] = y0.x[i] + k.dx[i] * a;
                    stage_ensemble.v[i] = y0.v[i] + k.dv[i] * a;
                }
                check_finite(&stage_ensemble, stage + 1, state.t + a)?;
                if let (Some((bx, bv)), Some((sx, sv)), Some((kx, kv))) = (
                    tracer_base.as_ref(),
                    tracer_stage.as_mut(),
                    tracer_k.as_ref(),
                ) {
                    for c in 0..bx.len() {
                        sx[c] = bx[c] + kx[c] * a;
                        sv[c] = bv[c] + kv[c] * a;
                    }
                }
            }
        }

        let mut next = stage_ensemble;
        next.x = acc_x;
        next.v = acc_v;
        check_finite(&next, stages, state.t + dt)?;
        state.field = self.field(&next)?;
        state.ensemble = next;
        state.steps += 1;
        state.t = state.steps as f64 * dt;
        if let Some(history) = self.history.as_mut() {
            history.push(state.field.d2);
        }
        if let (Some(t), Some((ax, av))) = (tracers, tracer_acc) {
            t.x = ax;
            t.v = av;
        }
        Ok(StepReport {
            stage_d2,
            d2_sq_integral,
        })
    }

    fn tracer_derivative(
        &self,
        tracers: &Tracers,
        tx: &[Vec3],
        tv: &[Vec3],
        sources: &ParticleEnsemble,
        field: &FieldSolution,
        stage_offset: f64,
    ) -> (Vec<Vec3>, Vec<Vec3>) {
        let e = crate::fields::field_at_points(sources, tracers.exclude, tx, self.softening);
        let s = tracers.sign;
        match self.mode {
            PushMode::GaugeW { epsilon } => {
                let kick = self
                    .history
                    .as_ref()
                    .map(|h| h.derivative(stage_offset))
                    .unwrap_or(Vec3::ZERO)
                    * epsilon;
                (tv.to_vec(), e.iter().map(|e| (*e + kick) * s).collect())
            }
            mode => {
                let drift = field.d2 * (mode.epsilon() * s);
                (
                    tv.iter().map(|v| *v + drift).collect(),
                    e.iter().map(|e| *e * s).collect(),
                )
            }
        }
    }
}

fn check_finite(ensemble: &ParticleEnsemble, stage: usize, time: f64) -> Result<()> {
    for i in 0..ensemble.len() {
        if !(ensemble.x[i].is_finite() && ensemble.v[i].is_finite()) {
            return Err(Error::NonFinite {
                index: i,
                stage,
                time,
            });
        }
    }
    Ok(())
}
