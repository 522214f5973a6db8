//! Electric field `grad U`, potential energy and damping vector `D[2]` from
//! particle data.
//!
//! The primary path is softened direct summation. The potential solves
//! `Laplace U = 4 pi (rho+ - rho-)` with `U -> 0` at infinity, so a unit
//! positive charge at `y` contributes
//!
//! ```text
//! U(x)      = -1 / sqrt(|x-y|^2 + delta^2)
//! grad U(x) = (x - y) / (|x-y|^2 + delta^2)^(3/2)
//! ```
//!
//! and ions are accelerated by `+grad U`, electrons by `-grad U`. The grid
//! path (cloud-in-cell deposition plus a free-space FFT convolution) is only
//! used for `L^p` diagnostics of `rho` and `grad U`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::phase_space::{ParticleEnsemble, Species};
use crate::vec3::Vec3;

/// Kernel regularisation length `delta >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Softening(pub f64);

impl Softening {
    pub fn new(delta: f64) -> Result<Self> {
        if delta >= 0.0 && delta.is_finite() {
            Ok(Softening(delta))
        } else {
            Err(Error::InvalidArgument(format!(
                "softening must be finite and nonnegative, got {delta}"
            )))
        }
    }

    /// `0.05 * r0 * N^(-1/3)` for `N` particles in total.
    pub fn default_for(r0: f64, total_particles: usize) -> Self {
        Softening(0.05 * r0 * (total_particles.max(1) as f64).powf(-1.0 / 3.0))
    }

    #[inline]
    pub fn delta(self) -> f64 {
        self.0
    }
}

/// How the O(N^2) pair sum is evaluated.
///
/// `Serial` walks each unordered pair once and is bit-reproducible. `Rows`
/// computes every particle's field as an independent row sum across the rayon
/// pool; results are deterministic per particle but may differ from `Serial`
/// in the last few ulps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Evaluation {
    #[default]
    Serial,
    Rows,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution {
    /// `grad U` at each particle, self term excluded.
    pub e: Vec<Vec3>,
    /// `(1/2) sum_{i != j} q_i q_j / sqrt(r_ij^2 + delta^2)`.
    pub potential_energy: f64,
    /// `sum_i w_i grad U(x_i)` over both species.
    pub d2: Vec3,
    pub delta: Softening,
}

impl FieldSolution {
    /// Momentum identity check value `sum_i q_i E_i`.
    pub fn net_force(&self, ensemble: &ParticleEnsemble) -> Vec3 {
        (0..ensemble.len())
            .map(|i| ensemble.charge(i) * self.e[i])
            .sum()
    }
}

/// Softened direct summation (serial, pair-symmetric).
pub fn pairwise_field(ensemble: &ParticleEnsemble, delta: Softening) -> Result<FieldSolution> {
    pairwise_field_with(ensemble, delta, Evaluation::Serial)
}

pub fn pairwise_field_with(
    ensemble: &ParticleEnsemble,
    delta: Softening,
    evaluation: Evaluation,
) -> Result<FieldSolution> {
    let q = ensemble.charges();
    let (e, potential_energy) = match evaluation {
        Evaluation::Serial => pair_sum_serial(&ensemble.x, &q, delta.0)?,
        Evaluation::Rows => pair_sum_rows(&ensemble.x, &q, delta.0)?,
    };
    let d2 = weighted_field_sum(&ensemble.w, &e);
    Ok(FieldSolution {
        e,
        potential_energy,
        d2,
        delta,
    })
}

/// The damping vector `D[2] = sum_i w_i E_i` of an already computed field.
pub fn damping_vector(field: &FieldSolution) -> Vec3 {
    field.d2
}

fn weighted_field_sum(w: &[f64], e: &[Vec3]) -> Vec3 {
    w.iter().zip(e).map(|(w, e)| *w * *e).sum()
}

fn pair_sum_serial(x: &[Vec3], q: &[f64], delta: f64) -> Result<(Vec<Vec3>, f64)> {
    let n = x.len();
    let d2 = delta * delta;
    let mut e = vec![Vec3::ZERO; n];
    let mut pot = 0.0;
    for i in 0..n {
        let xi = x[i];
        let qi = q[i];
        let mut ei = Vec3::ZERO;
        let mut pot_i = 0.0;
        for j in (i + 1)..n {
            let d = xi - x[j];
            let r2 = d.norm_squared() + d2;
            if r2 == 0.0 {
                return Err(Error::SingularConfiguration { i, j });
            }
            let inv = 1.0 / r2.sqrt();
            let inv3 = inv * inv * inv;
            ei += d * (q[j] * inv3);
            e[j] -= d * (qi * inv3);
            pot_i += q[j] * inv;
        }
        e[i] += ei;
        pot += qi * pot_i;
    }
    Ok((e, pot))
}

fn pair_sum_rows(x: &[Vec3], q: &[f64], delta: f64) -> Result<(Vec<Vec3>, f64)> {
    let d2 = delta * delta;
    let rows: Result<Vec<(Vec3, f64)>> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let xi = x[i];
            let mut ei = Vec3::ZERO;
            let mut pot_i = 0.0;
            for (j, (xj, qj)) in x.iter().zip(q).enumerate() {
                if j == i {
                    continue;
                }
                let d = xi - *xj;
                let r2 = d.norm_squared() + d2;
                if r2 == 0.0 {
                    return Err(Error::SingularConfiguration {
                        i: i.min(j),
                        j: i.max(j),
                    });
                }
                let inv = 1.0 / r2.sqrt();
                ei += d * (qj * inv * inv * inv);
                pot_i += qj * inv;
            }
            Ok((ei, pot_i))
        })
        .collect();
    let rows = rows?;
    let pot = 0.5 * rows.iter().zip(q).map(|((_, p), qi)| qi * p).sum::<f64>();
    Ok((rows.into_iter().map(|(e, _)| e).collect(), pot))
}

/// `grad U` generated by `sources` at arbitrary `points`, optionally skipping
/// one source particle (the probe's own image).
pub fn field_at_points(
    sources: &ParticleEnsemble,
    exclude: Option<usize>,
    points: &[Vec3],
    delta: Softening,
) -> Vec<Vec3> {
    let d2 = delta.0 * delta.0;
    points
        .iter()
        .map(|p| {
            let mut acc = Vec3::ZERO;
            for j in 0..sources.len() {
                if Some(j) == exclude {
                    continue;
                }
                let d = *p - sources.x[j];
                let r2 = d.norm_squared() + d2;
                if r2 > 0.0 {
                    let inv = 1.0 / r2.sqrt();
                    acc += d * (sources.charge(j) * inv * inv * inv);
                }
            }
            acc
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Grid path
// ---------------------------------------------------------------------------

/// Uniform grid over `[-L, L]^3`; values live at cell centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub cells_per_axis: usize,
    pub box_half_width: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.cells_per_axis < 4 || !self.cells_per_axis.is_power_of_two() {
            return Err(Error::Config(format!(
                "cells_per_axis must be a power of two >= 4, got {}",
                self.cells_per_axis
            )));
        }
        if !(self.box_half_width > 0.0 && self.box_half_width.is_finite()) {
            return Err(Error::Config(format!(
                "box_half_width must be positive, got {}",
                self.box_half_width
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn cell_size(&self) -> f64 {
        2.0 * self.box_half_width / self.cells_per_axis as f64
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.cell_size().powi(3)
    }

    /// Position of the centre of cell `k` along one axis.
    #[inline]
    pub fn center(&self, k: usize) -> f64 {
        -self.box_half_width + (k as f64 + 0.5) * self.cell_size()
    }
}

/// Scalar field on a [`GridSpec`], x-major (`index = (i*n + j)*n + k`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub spec: GridSpec,
    pub data: Vec<f64>,
}

impl ScalarGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        let n = spec.cells_per_axis;
        Self {
            spec,
            data: vec![0.0; n * n * n],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.spec.cells_per_axis
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.n();
        (i * n + j) * n + k
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    /// `sum_cells value * cell_volume`.
    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.spec.cell_volume()
    }

    /// Trilinear interpolation between cell centres; zero outside the
    /// centre lattice.
    pub fn interpolate(&self, p: Vec3) -> f64 {
        let Some(stencil) = cic_stencil(&self.spec, p) else {
            return 0.0;
        };
        stencil.iter().map(|&(idx, wgt)| self.data[idx] * wgt).sum()
    }
}

/// Eight (flat index, weight) pairs of the trilinear stencil, or `None` when
/// `p` is not strictly inside the lattice of cell centres.
fn cic_stencil(spec: &GridSpec, p: Vec3) -> Option<[(usize, f64); 8]> {
    let n = spec.cells_per_axis;
    let h = spec.cell_size();
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..3 {
        let s = (p[a] + spec.box_half_width) / h - 0.5;
        if !(s >= 0.0 && s <= (n - 1) as f64) {
            return None;
        }
        let i0 = (s.floor() as usize).min(n - 2);
        base[a] = i0;
        frac[a] = s - i0 as f64;
    }
    let mut out = [(0usize, 0.0f64); 8];
    let mut c = 0;
    for di in 0..2 {
        let wx = if di == 0 { 1.0 - frac[0] } else { frac[0] };
        for dj in 0..2 {
            let wy = if dj == 0 { 1.0 - frac[1] } else { frac[1] };
            for dk in 0..2 {
                let wz = if dk == 0 { 1.0 - frac[2] } else { frac[2] };
                let idx = ((base[0] + di) * n + (base[1] + dj)) * n + base[2] + dk;
                out[c] = (idx, wx * wy * wz);
                c += 1;
            }
        }
    }
    Some(out)
}

/// Cloud-in-cell deposition of one species' number density.
pub fn deposit_species(
    ensemble: &ParticleEnsemble,
    species: Species,
    grid: &GridSpec,
    time: f64,
) -> Result<ScalarGrid> {
    let mut out = ScalarGrid::zeros(*grid);
    let inv_vol = 1.0 / grid.cell_volume();
    for i in 0..ensemble.len() {
        if ensemble.species[i] != species {
            continue;
        }
        let stencil = cic_stencil(grid, ensemble.x[i]).ok_or(Error::OutOfBox {
            index: i,
            position: ensemble.x[i].to_array(),
            half_width: grid.box_half_width,
            time,
        })?;
        for (idx, wgt) in stencil {
            out.data[idx] += ensemble.w[i] * wgt * inv_vol;
        }
    }
    Ok(out)
}

/// Deposits `(rho+, rho-)`.
pub fn grid_deposit(
    ensemble: &ParticleEnsemble,
    grid: &GridSpec,
    time: f64,
) -> Result<(ScalarGrid, ScalarGrid)> {
    Ok((
        deposit_species(ensemble, Species::Ion, grid, time)?,
        deposit_species(ensemble, Species::Electron, grid, time)?,
    ))
}

/// `(sum_cells |value|^p * cell_volume)^(1/p)`; `p = inf` gives the max norm.
pub fn lp_norm(field: &ScalarGrid, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "L^p norm needs p >= 1, got {p}"
        )));
    }
    if p.is_infinite() {
        return Ok(field.data.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let sum: f64 = field.data.iter().map(|v| v.abs().powf(p)).sum();
    Ok((sum * field.spec.cell_volume()).powf(1.0 / p))
}

/// `L^p` norm of the magnitude of a vector field given by components.
pub fn lp_norm_vector(components: &[ScalarGrid; 3], p: f64) -> Result<f64> {
    let magnitude = ScalarGrid {
        spec: components[0].spec,
        data: (0..components[0].data.len())
            .map(|i| {
                let (a, b, c) = (
                    components[0].data[i],
                    components[1].data[i],
                    components[2].data[i],
                );
                (a * a + b * b + c * c).sqrt()
            })
            .collect(),
    };
    lp_norm(&magnitude, p)
}

/// Density norm the grid would report if no two particles shared a cell.
/// Once an ensemble has dispersed to less than one particle per cell, the
/// deposited `L^p` norm of `rho+ + rho-` sits at this level instead of
/// decaying further.
pub fn isolated_lp_floor(ensemble: &ParticleEnsemble, grid: &GridSpec, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "floor needs finite p >= 1, got {p}"
        )));
    }
    let vol = grid.cell_volume();
    let mut sum = 0.0;
    for i in 0..ensemble.len() {
        let stencil = cic_stencil(grid, ensemble.x[i]).ok_or(Error::OutOfBox {
            index: i,
            position: ensemble.x[i].to_array(),
            half_width: grid.box_half_width,
            time: f64::NAN,
        })?;
        sum += stencil
            .iter()
            .map(|&(_, wgt)| (ensemble.w[i] * wgt / vol).powf(p))
            .sum::<f64>();
    }
    Ok((sum * vol).powf(1.0 / p))
}

/// Sum of the grid field energies of every particle taken alone, the level
/// at which [`PoissonSolution::field_energy`] saturates for a dispersed
/// ensemble. Self energy scales with `w^2`; its dependence on the sub-cell
/// position is averaged over every `stride`-th particle.
pub fn self_energy_floor(
    ensemble: &ParticleEnsemble,
    solver: &PoissonSolver,
    stride: usize,
) -> Result<f64> {
    if stride == 0 || ensemble.is_empty() {
        return Err(Error::InvalidArgument(
            "self energy needs particles and stride >= 1".into(),
        ));
    }
    let mut unit_sum = 0.0;
    let mut samples = 0usize;
    for i in (0..ensemble.len()).step_by(stride) {
        let mut single = ParticleEnsemble::with_capacity(1);
        single.push(ensemble.x[i], Vec3::ZERO, 1.0, Species::Ion);
        let rho = deposit_species(&single, Species::Ion, solver.spec(), f64::NAN)?;
        unit_sum += solver.solve(&rho)?.field_energy();
        samples += 1;
    }
    let w_sq: f64 = ensemble.w.iter().map(|w| w * w).sum();
    Ok(w_sq * unit_sum / samples as f64)
}

/// Solution of the free-space Poisson problem on the grid.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub potential: ScalarGrid,
    pub grad: [ScalarGrid; 3],
}

impl PoissonSolution {
    /// `(1/8 pi) sum_cells |grad U|^2 * cell_volume`, nonnegative by construction.
    pub fn field_energy(&self) -> f64 {
        let vol = self.potential.spec.cell_volume();
        let sum: f64 = (0..self.potential.data.len())
            .map(|i| {
                let (a, b, c) = (
                    self.grad[0].data[i],
                    self.grad[1].data[i],
                    self.grad[2].data[i],
                );
                a * a + b * b + c * c
            })
            .sum();
        sum * vol / (8.0 * std::f64::consts::PI)
    }
}

/// Free-space Poisson solver by zero padding to `2n` per axis and FFT
/// convolution with the Green's function `-1/|x|` (Hockney's method).
pub struct PoissonSolver {
    spec: GridSpec,
    m: usize,
    green_hat: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PoissonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonSolver")
            .field("spec", &self.spec)
            .finish()
    }
}

/// `int_{[-1/2,1/2]^3} dx / |x|`, used for the self cell of the Green's function.
const UNIT_CUBE_INVERSE_DISTANCE: f64 = 2.380_077_363_979_553;

impl PoissonSolver {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.cells_per_axis;
        let m = 2 * n;
        let h = spec.cell_size();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let offset = |a: usize| -> f64 {
            if a <= n {
                a as f64
            } else {
                a as f64 - m as f64
            }
        };
        let mut green = vec![Complex64::new(0.0, 0.0); m * m * m];
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let r = (offset(a).powi(2) + offset(b).powi(2) + offset(c).powi(2)).sqrt();
                    let g = if r == 0.0 {
                        -UNIT_CUBE_INVERSE_DISTANCE / h
                    } else {
                        -1.0 / (h * r)
                    };
                    green[(a * m + b) * m + c] = Complex64::new(g, 0.0);
                }
            }
        }
        let mut solver = Self {
            spec,
            m,
            green_hat: Vec::new(),
            forward,
            inverse,
        };
        solver.fft3(&mut green, false, m);
        solver.green_hat = green;
        Ok(solver)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Solves `Laplace U = 4 pi rho` with `U -> 0` at infinity. `rho` is the
    /// signed charge density `rho+ - rho-`.
    pub fn solve(&self, rho: &ScalarGrid) -> Result<PoissonSolution> {
        if rho.spec != self.spec {
            return Err(Error::InvalidArgument(
                "density grid does not match solver grid".into(),
            ));
        }
        let n = self.spec.cells_per_axis;
        let m = self.m;
        let vol = self.spec.cell_volume();
        let mut buf = vec![Complex64::new(0.0, 0.0); m * m * m];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    buf[(i * m + j) * m + k] = Complex64::new(rho.at(i, j, k) * vol, 0.0);
                }
            }
        }
        self.fft3(&mut buf, false, n);
        for (b, g) in buf.iter_mut().zip(&self.green_hat) {
            *b *= *g;
        }
        self.fft3(&mut buf, true, n);
        let scale = 1.0 / (m * m * m) as f64;
        let mut potential = ScalarGrid::zeros(self.spec);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let idx = potential.index(i, j, k);
                    potential.data[idx] = buf[(i * m + j) * m + k].re * scale;
                }
            }
        }
        let grad = gradient(&potential);
        Ok(PoissonSolution { potential, grad })
    }

    /// In-place 3D FFT on the `m^3` buffer. `occupied` is the extent of the
    /// nonzero (forward) or needed (inverse) corner block along each axis;
    /// lines entirely outside it are skipped.
    fn fft3(&self, data: &mut [Complex64], inverse: bool, occupied: usize) {
        let m = self.m;
        let plan = if inverse {
            &self.inverse
        } else {
            &self.forward
        };
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // Forward: z lines only where (x, y) are occupied, then y lines where x
        // is occupied, then all x lines. Inverse runs the mirror order.
        let axes: [usize; 3] = if inverse { [0, 1, 2] } else { [2, 1, 0] };
        for (pass, &axis) in axes.iter().enumerate() {
            let stride = match axis {
                0 => m * m,
                1 => m,
                _ => 1,
            };
            for u in 0..m {
                for w in 0..m {
                    let (i, j, k) = match axis {
                        0 => (0, u, w),
                        1 => (u, 0, w),
                        _ => (u, w, 0),
                    };
                    let coords = [i, j, k];
                    let transverse_ok = (0..3).filter(|&a| a != axis).all(|a| {
                        // forward: axes not yet transformed are still zero
                        // beyond `occupied`; inverse: axes already transformed
                        // are only needed inside `occupied`
                        let limited = if inverse {
                            axes[..pass].contains(&a)
                        } else {
                            axes[pass + 1..].contains(&a)
                        };
                        !limited || coords[a] < occupied
                    });
                    if !transverse_ok {
                        continue;
                    }
                    let start = (i * m + j) * m + k;
                    if stride == 1 {
                        plan.process_with_scratch(&mut data[start..start + m], &mut scratch);
                    } else {
                        for t in 0..m {
                            line[t] = data[start + t * stride];
                        }
                        plan.process_with_scratch(&mut line, &mut scratch);
                        for t in 0..m {
                            data[start + t * stride] = line[t];
                        }
                    }
                }
            }
        }
    }
}

/// Second-order centred differences, one-sided second-order at the faces.
pub fn gradient(u: &ScalarGrid) -> [ScalarGrid; 3] {
    let n = u.n();
    let h = u.spec.cell_size();
    let mut out = [
        ScalarGrid::zeros(u.spec),
        ScalarGrid::zeros(u.spec),
        ScalarGrid::zeros(u.spec),
    ];
    let deriv = |get: &dyn Fn(usize) -> f64, a: usize| -> f64 {
        if a == 0 {
            (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h)
        } else if a == n - 1 {
            (3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)) / (2.0 * h)
        } else {
            (get(a + 1) - get(a - 1)) / (2.0 * h)
        }
    };
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let idx = u.index(i, j, k);
                out[0].data[idx] = deriv(&|a| u.at(a, j, k), i);
                out[1].data[idx] = deriv(&|a| u.at(i, a, k), j);
                out[2].data[idx] = deriv(&|a| u.at(i, j, a), k);
            }
        }
    }
    out
}

/// Free-space Poisson solve for a one-off density (builds a fresh solver).
pub fn free_space_poisson(rho: &ScalarGrid) -> Result<PoissonSolution> {
    PoissonSolver::new(rho.spec)?.solve(rho)
}

/// Signed charge density `rho+ - rho-`.
pub fn charge_density(rho_plus: &ScalarGrid, rho_minus: &ScalarGrid) -> ScalarGrid {
    ScalarGrid {
        spec: rho_plus.spec,
        data: rho_plus
            .data
            .iter()
            .zip(&rho_minus.data)
            .map(|(a, b)| a - b)
            .collect(),
    }
}

const GRID_MAGIC: &[u8; 8] = b"VPDGRID\0";

/// Flat little-endian export: 64-byte header (magic, version, n, half width,
/// time) followed by `n^3` f64 values in x-major order.
pub fn write_grid_binary(path: &Path, grid: &ScalarGrid, time: f64) -> Result<()> {
    let mut bytes = Vec::with_capacity(64 + 8 * grid.data.len());
    bytes.extend_from_slice(GRID_MAGIC);
    bytes.extend_from_slice(&1u32.to_le_bytes());
    bytes.extend_from_slice(&0u32.to_le_bytes());
    bytes.extend_from_slice(&(grid.n() as u64).to_le_bytes());
    bytes.extend_from_slice(&grid.spec.box_half_width.to_le_bytes());
    bytes.extend_from_slice(&time.to_le_bytes());
    bytes.resize(64, 0);
    for v in &grid.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_grid_binary(path: &Path) -> Result<(ScalarGrid, f64)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 64 || &bytes[..8] != GRID_MAGIC {
        return Err(bad("missing grid header"));
    }
    let n = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let half = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
    let time = f64::from_le_bytes(bytes[32..40].try_into().unwrap());
    if bytes.len() != 64 + 8 * n * n * n {
        return Err(bad("grid payload length does not match header"));
    }
    let data = bytes[64..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((
        ScalarGrid {
            spec: GridSpec {
                cells_per_axis: n,
                box_half_width: half,
            },
            data,
        },
        time,
    ))
}

/// CSV slice `x,y,value` through the plane `z = center(k)`.
pub fn write_grid_csv_slice(path: &Path, grid: &ScalarGrid, k: usize) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let n = grid.n();
    let write = |out: &mut std::io::BufWriter<std::fs::File>| -> std::io::Result<()> {
        writeln!(out, "x,y,value")?;
        for i in 0..n {
            for j in 0..n {
                writeln!(
                    out,
                    "{:.17e},{:.17e},{:.17e}",
                    grid.spec.center(i),
                    grid.spec.center(j),
                    grid.at(i, j, k.min(n - 1))
                )?;
            }
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}
