//! Run driver: sample, integrate, record diagnostics, write outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};

use super::config::RunConfig;
use super::manifest::{sha256_file, unix_now, RunManifest, RunStatus};
use super::series::{column_names, SeriesWriter, SERIES_SCHEMA_VERSION};
use super::snapshot::{snapshot_file_name, write_snapshot, Snapshot};
use crate::diagnostics::{dissipation_residual, interpolation_check, DiagnosticsRecord};
use crate::dynamics::{Integrator, SimState};
use crate::error::{Error, Result};
use crate::fields::{
    charge_density, grid_deposit, lp_norm, lp_norm_vector, Evaluation, PoissonSolver,
};
use crate::phase_space::{moment, ParticleEnsemble, Species};

pub const CONFIG_NAME: &str = "config.toml";
pub const SERIES_NAME: &str = "series.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub status: RunStatus,
    pub rows: usize,
    pub steps: u64,
    pub last_valid_time: f64,
    pub error: Option<String>,
}

struct Recorder<'a> {
    config: &'a RunConfig,
    solver: Option<PoissonSolver>,
    f_sup: Option<f64>,
    records: usize,
}

impl Recorder<'_> {
    fn record(
        &mut self,
        state: &SimState,
        integrator: &Integrator,
        prev: Option<&DiagnosticsRecord>,
        d2_sq_integral: f64,
    ) -> Result<DiagnosticsRecord> {
        let phys = integrator.physical_ensemble(state);
        let mut rec = DiagnosticsRecord::from_state(state.t, &phys, &state.field);
        let p_lists = &self.config.p_lists;
        rec.rho_lp = p_lists.rho.iter().map(|&p| (p, None)).collect();
        rec.grad_u_lp = p_lists.grad_u.iter().map(|&p| (p, None)).collect();

        let grid_due = self
            .config
            .grid
            .map(|g| (self.records as u64).is_multiple_of(g.every))
            .unwrap_or(false);
        if let (true, Some(solver)) = (grid_due, self.solver.as_ref()) {
            let (rho_plus, rho_minus) = grid_deposit(&phys, solver.spec(), state.t)?;
            let sol = solver.solve(&charge_density(&rho_plus, &rho_minus))?;
            rec.e_pot_grid = Some(sol.field_energy());
            let mut total = rho_plus.clone();
            for (a, b) in total.data.iter_mut().zip(&rho_minus.data) {
                *a += b;
            }
            for entry in rec.rho_lp.iter_mut() {
                entry.1 = Some(lp_norm(&total, entry.0)?);
            }
            for entry in rec.grad_u_lp.iter_mut() {
                entry.1 = Some(lp_norm_vector(&sol.grad, entry.0)?);
            }
            if let Some(f_sup) = self.f_sup {
                let mut worst: Option<f64> = None;
                for (species, rho) in [(Species::Ion, &rho_plus), (Species::Electron, &rho_minus)] {
                    let part: ParticleEnsemble = phys.select(species);
                    if part.is_empty() {
                        continue;
                    }
                    let m_p = moment(&part, p_lists.interp);
                    let rel = interpolation_check(rho, f_sup, m_p, p_lists.interp)?.relative();
                    worst = Some(worst.map_or(rel, |w: f64| w.min(rel)));
                }
                rec.interp_slack = worst;
            }
        }
        if let Some(prev) = prev {
            let mean = d2_sq_integral / (rec.t - prev.t);
            rec.diss_residual = Some(dissipation_residual(
                prev,
                &rec,
                self.config.epsilon,
                Some(mean),
            )?);
        }
        self.records += 1;
        Ok(rec)
    }
}

/// Executes a run into `output_dir`. Numerical failures end the run early
/// with status [`RunStatus::NumericalAbort`]; configuration and I/O failures
/// are returned as errors.
pub fn execute(config: &RunConfig, output_dir: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let started = unix_now();
    std::fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let config_path = output_dir.join(CONFIG_NAME);
    std::fs::write(&config_path, config.to_toml_string()?)
        .map_err(|e| Error::io(&config_path, e))?;
    if config.snapshot_stride > 0 {
        let dir = output_dir.join(SNAPSHOT_DIR);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }

    let ensemble = config.initial_ensemble()?;
    let softening = config.softening_for(&ensemble);
    let evaluation = if config.workers > 1 {
        Evaluation::Rows
    } else {
        Evaluation::Serial
    };
    let mut integrator = Integrator::new(config.integrator, config.push_mode(), softening)?
        .with_evaluation(evaluation);
    let solver = match &config.grid {
        Some(g) => Some(PoissonSolver::new(g.spec())?),
        None => None,
    };
    let mut recorder = Recorder {
        config,
        solver,
        f_sup: config.f_sup(),
        records: 0,
    };
    let columns = column_names(&config.p_lists.rho, &config.p_lists.grad_u);
    let series_path = output_dir.join(SERIES_NAME);
    let mut writer = SeriesWriter::create(&series_path, &columns)?;
    info!(
        "run: {} particles, softening {}, {} steps",
        ensemble.len(),
        softening.delta(),
        config.integrator.n_steps()
    );

    let mut last_valid_time = 0.0;
    let mut steps_done = 0;
    let mut snapshots = Vec::new();
    let body = || -> Result<()> {
        let mut state = integrator.initial_state(ensemble)?;
        let n_steps = config.integrator.n_steps();
        let snap = |state: &SimState, names: &mut Vec<String>| -> Result<()> {
            let name = format!("{SNAPSHOT_DIR}/{}", snapshot_file_name(state.steps));
            write_snapshot(
                &output_dir.join(&name),
                &Snapshot {
                    t: state.t,
                    step: state.steps,
                    epsilon: config.epsilon,
                    gauge: config.push_mode().is_gauge(),
                    ensemble: state.ensemble.clone(),
                },
            )?;
            names.push(name);
            Ok(())
        };
        let mut prev = recorder.record(&state, &integrator, None, 0.0)?;
        writer.write(&prev)?;
        if config.snapshot_stride > 0 {
            snap(&state, &mut snapshots)?;
        }
        let mut d2_sq = 0.0;
        let progress = (n_steps / 10).max(1);
        for step in 1..=n_steps {
            let report = integrator.step(&mut state)?;
            d2_sq += report.d2_sq_integral;
            last_valid_time = state.t;
            steps_done = state.steps;
            if step % config.diag_stride == 0 {
                let rec = recorder.record(&state, &integrator, Some(&prev), d2_sq)?;
                writer.write(&rec)?;
                prev = rec;
                d2_sq = 0.0;
            }
            let stride = config.snapshot_stride;
            if stride > 0 && (step % stride == 0 || step == n_steps) {
                snap(&state, &mut snapshots)?;
            }
            if step % progress == 0 {
                info!("t = {:.4}, E_total = {:.12e}", state.t, prev.e_total);
            }
        }
        Ok(())
    };
    let result = match config.workers {
        1 => body(),
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(body),
    };
    writer.finish()?;

    let (status, error) = match result {
        Ok(()) => (RunStatus::Completed, None),
        Err(e) if e.is_numerical() => {
            warn!("numerical abort after t = {last_valid_time}: {e}");
            (RunStatus::NumericalAbort, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };

    let mut files = BTreeMap::new();
    for name in [CONFIG_NAME, SERIES_NAME]
        .iter()
        .map(|s| s.to_string())
        .chain(snapshots)
    {
        let sum = sha256_file(&output_dir.join(&name))?;
        files.insert(name, sum);
    }
    let rows = std::fs::read_to_string(&series_path)
        .map_err(|e| Error::io(&series_path, e))?
        .lines()
        .count()
        - 1;
    RunManifest {
        config_hash: config.hash()?,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        series_schema: SERIES_SCHEMA_VERSION,
        started_unix: started,
        finished_unix: unix_now(),
        status,
        last_valid_time,
        steps: steps_done,
        error: error.clone(),
        files,
    }
    .write(output_dir)?;
    Ok(RunOutcome {
        output_dir: output_dir.to_path_buf(),
        status,
        rows,
        steps: steps_done,
        last_valid_time,
        error,
    })
}
