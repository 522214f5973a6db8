//! Adaptive Dormand–Prince 5(4) reference integrator for small systems.
//!
//! Deliberately shares no code with the fixed-step integrator or the field
//! module: the right-hand side is written out directly on a flat state
//! vector so the two paths can be compared.

use crate::error::{Error, Result};
use crate::phase_space::ParticleEnsemble;
use crate::vec3::Vec3;

pub const ORACLE_MAX_PARTICLES: usize = 8;

/// Sampled solution of the small-N system.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<ParticleEnsemble>,
    /// `int_0^t |D2|^2 ds` at each sample, integrated as an extra ODE component.
    pub d2_sq_integral: Vec<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct System {
    n: usize,
    signs: Vec<f64>,
    weights: Vec<f64>,
    epsilon: f64,
    delta_sq: f64,
}

impl System {
    /// State layout: `[x0 v0 x1 v1 ... | Q]` with `dQ/dt = |D2|^2`.
    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut field = vec![[0.0f64; 3]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let dx = y[6 * i] - y[6 * j];
                let dy = y[6 * i + 1] - y[6 * j + 1];
                let dz = y[6 * i + 2] - y[6 * j + 2];
                let r2 = dx * dx + dy * dy + dz * dz + self.delta_sq;
                let f = self.signs[j] * self.weights[j] / (r2 * r2.sqrt());
                field[i][0] += f * dx;
                field[i][1] += f * dy;
                field[i][2] += f * dz;
            }
        }
        let mut d2 = [0.0f64; 3];
        for (w, e) in self.weights.iter().zip(&field) {
            for a in 0..3 {
                d2[a] += w * e[a];
            }
        }
        for i in 0..n {
            let s = self.signs[i];
            for a in 0..3 {
                out[6 * i + a] = y[6 * i + 3 + a] + s * self.epsilon * d2[a];
                out[6 * i + 3 + a] = s * field[i][a];
            }
        }
        out[6 * n] = d2[0] * d2[0] + d2[1] * d2[1] + d2[2] * d2[2];
    }
}

/// Integrates the softened damped system with local error control `tol` and
/// returns the solution at each of `sample_times` (increasing, starting at 0).
pub fn oracle_integrate(
    ensemble: &ParticleEnsemble,
    epsilon: f64,
    delta: f64,
    sample_times: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    let n = ensemble.len();
    if n > ORACLE_MAX_PARTICLES {
        return Err(Error::InvalidArgument(format!(
            "oracle supports at most {ORACLE_MAX_PARTICLES} particles, got {n}"
        )));
    }
    if !(tol > 0.0 && tol <= 1e-10) {
        return Err(Error::InvalidArgument(format!(
            "oracle tolerance must lie in (0, 1e-10], got {tol}"
        )));
    }
    if sample_times.first() != Some(&0.0) || sample_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "sample times must start at 0 and increase strictly".into(),
        ));
    }
    let sys = System {
        n,
        signs: (0..n).map(|i| ensemble.sign(i)).collect(),
        weights: ensemble.w.clone(),
        epsilon,
        delta_sq: delta * delta,
    };
    let dim = 6 * n + 1;
    let mut y = vec![0.0; dim];
    for i in 0..n {
        for a in 0..3 {
            y[6 * i + a] = ensemble.x[i][a];
            y[6 * i + 3 + a] = ensemble.v[i][a];
        }
    }

    let unpack = |y: &[f64]| {
        let mut e = ensemble.clone();
        for i in 0..n {
            e.x[i] = Vec3::new(y[6 * i], y[6 * i + 1], y[6 * i + 2]);
            e.v[i] = Vec3::new(y[6 * i + 3], y[6 * i + 4], y[6 * i + 5]);
        }
        e
    };

    let mut traj = Trajectory {
        times: vec![0.0],
        snapshots: vec![unpack(&y)],
        d2_sq_integral: vec![0.0],
        accepted_steps: 0,
        rejected_steps: 0,
    };

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    let mut y_stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut t = 0.0;
    let mut h = tol.powf(0.2) * 0.1;
    sys.rhs(&y, &mut k[0]);

    for &target in &sample_times[1..] {
        while t < target {
            let last = t + h >= target;
            let step = if last { target - t } else { h };
            if step < 1e-14 * (1.0 + t.abs()) {
                return Err(Error::StepUnderflow { time: t, h: step });
            }
            for s in 1..7 {
                for c in 0..dim {
                    let mut acc = y[c];
                    for (l, kl) in k.iter().enumerate().take(s) {
                        acc += step * A[s][l] * kl[c];
                    }
                    y_stage[c] = acc;
                }
                sys.rhs(&y_stage, &mut k[s]);
            }
            // stage 7 is evaluated at the 5th-order solution (FSAL)
            y_new.copy_from_slice(&y_stage);
            let mut err = 0.0f64;
            for c in 0..dim {
                let mut e = 0.0;
                for s in 0..7 {
                    e += (B5[s] - B4[s]) * k[s][c];
                }
                let scale = tol * (1.0f64).max(y[c].abs()).max(y_new[c].abs());
                err = err.max((step * e).abs() / scale);
            }
            if !err.is_finite() {
                return Err(Error::StepUnderflow { time: t, h: step });
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                y.copy_from_slice(&y_new);
                let fsal = k[6].clone();
                k[0] = fsal;
                traj.accepted_steps += 1;
            } else {
                traj.rejected_steps += 1;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // after a truncated final step keep the unconstrained size
            if !(last && err <= 1.0) {
                h = step * factor;
            }
        }
        traj.times.push(t);
        traj.snapshots.push(unpack(&y));
        traj.d2_sq_integral.push(y[6 * n]);
    }
    Ok(traj)
}
