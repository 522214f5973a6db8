//! Entry points behind the `run`, `check`, `compare` and `fit` subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use super::config::{ModeName, RunConfig};
use super::manifest::{RunManifest, RunStatus};
use super::run::{execute, RunOutcome, CONFIG_NAME, SERIES_NAME, SNAPSHOT_DIR};
use super::series::SeriesTable;
use super::snapshot::read_snapshot;
use crate::decay::{decay_suite, fit_power_law, DecayFit, SuiteOptions};
use crate::diagnostics::{ddot_d_consistency, i_identity_residual};
use crate::dynamics::shift_velocities;
use crate::error::{Error, Result};
use crate::fields::pairwise_field;
use crate::vec3::Vec3;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Exit code for an error: numerical failures map to 2, everything else to 1.
pub fn exit_code_for(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

/// Command-line overrides for `run`.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub diag_stride: Option<u64>,
}

pub fn cmd_run(config_path: &Path, overrides: &RunOverrides) -> Result<RunOutcome> {
    let mut config = RunConfig::load(config_path)?;
    if let Some(w) = overrides.workers {
        config.workers = w;
    }
    if let Some(s) = overrides.diag_stride {
        config.diag_stride = s;
    }
    if let Some(dir) = &overrides.output_dir {
        config.output_dir = dir.clone();
    }
    let dir = config.output_dir.clone();
    execute(&config, &dir)
}

pub fn run_exit_code(outcome: &RunOutcome) -> i32 {
    match outcome.status {
        RunStatus::Completed => EXIT_OK,
        RunStatus::NumericalAbort => EXIT_NUMERICAL,
    }
}

/// Outcome of one check in a run report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub pass: bool,
    /// Not applicable to this run (e.g. too few records); does not fail.
    pub skipped: bool,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub run_dir: PathBuf,
    pub pass: bool,
    pub checks: Vec<CheckItem>,
}

impl CheckReport {
    pub fn get(&self, name: &str) -> Option<&CheckItem> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<26} {:>7} {:>14} {:>12}",
            "check", "result", "value", "tolerance"
        );
        for c in &self.checks {
            let result = if c.skipped {
                "skip"
            } else if c.pass {
                "pass"
            } else {
                "FAIL"
            };
            let num = |v: Option<f64>| v.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<26} {:>7} {:>14} {:>12}",
                c.name,
                result,
                num(c.value),
                num(c.tolerance)
            );
        }
        let _ = writeln!(out, "overall: {}", if self.pass { "pass" } else { "FAIL" });
        out
    }
}

fn item(name: &str, value: f64, tolerance: f64, detail: serde_json::Value) -> CheckItem {
    CheckItem {
        name: name.into(),
        pass: value <= tolerance,
        skipped: false,
        value: Some(value),
        tolerance: Some(tolerance),
        detail,
    }
}

fn skipped(name: &str, reason: String) -> CheckItem {
    CheckItem {
        name: name.into(),
        pass: true,
        skipped: true,
        value: None,
        tolerance: None,
        detail: json!({ "reason": reason }),
    }
}

fn vectors(series: &SeriesTable, prefix: &str) -> Result<Vec<Vec3>> {
    let x = series.column(&format!("{prefix}x"))?;
    let y = series.column(&format!("{prefix}y"))?;
    let z = series.column(&format!("{prefix}z"))?;
    Ok((0..x.len()).map(|k| Vec3::new(x[k], y[k], z[k])).collect())
}

fn value_at(times: &[f64], values: &[f64], t: f64) -> Option<f64> {
    times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
        .map(|k| values[k])
}

/// Runs every applicable check on a completed run directory and writes
/// `report.json` next to the series.
pub fn cmd_check(run_dir: &Path) -> Result<CheckReport> {
    let config = RunConfig::load(&run_dir.join(CONFIG_NAME))?;
    let manifest = RunManifest::read(run_dir)?;
    if manifest.status != RunStatus::Completed {
        return Err(Error::InvalidArgument(format!(
            "run in {} did not complete (last valid time {})",
            run_dir.display(),
            manifest.last_valid_time
        )));
    }
    let series = SeriesTable::read(&run_dir.join(SERIES_NAME))?;
    let t = series.column("t")?;
    let eps = config.epsilon;
    let tol = &config.checks;
    let mut checks = Vec::new();

    // global dissipation identity, accumulated from the per-interval rates
    let e_total = series.column("E_total")?;
    let diss = series.column("diss_residual")?;
    let mut global = 0.0;
    let mut max_rate = 0.0f64;
    for k in 1..t.len() {
        global += diss[k] * (t[k] - t[k - 1]);
        max_rate = max_rate.max(diss[k].abs());
    }
    let scale = e_total[0].abs().max(f64::MIN_POSITIVE);
    checks.push(item(
        "dissipation",
        global.abs() / scale,
        tol.dissipation_tol,
        json!({ "absolute": global, "max_rate_residual": max_rate, "epsilon": eps }),
    ));

    let m0 = series.column("M0")?[0];
    let d2 = vectors(&series, "d2")?;
    match i_identity_residual(&t, &vectors(&series, "I")?, &d2, m0, eps) {
        Ok(v) => checks.push(item(
            "i_identity",
            v,
            tol.identity_tol,
            json!({ "cadence": t.get(1).map(|s| s - t[0]) }),
        )),
        Err(e @ (Error::TooFewSamples { .. } | Error::NonUniformSpacing { .. })) => {
            checks.push(skipped("i_identity", e.to_string()))
        }
        Err(e) => return Err(e),
    }
    match ddot_d_consistency(&t, &vectors(&series, "D")?, &d2, m0, eps) {
        Ok(v) => checks.push(item(
            "ddot_d",
            v,
            tol.identity_tol,
            json!({ "cadence": t.get(1).map(|s| s - t[0]) }),
        )),
        Err(e @ (Error::TooFewSamples { .. } | Error::NonUniformSpacing { .. })) => {
            checks.push(skipped("ddot_d", e.to_string()))
        }
        Err(e) => return Err(e),
    }

    if let Some(data) = &config.initial_data {
        let degenerate = data.mirror || data.species != super::config::SpeciesSelection::Both;
        if degenerate {
            let max = d2.iter().map(|v| v.norm()).fold(0.0, f64::max);
            checks.push(item("d2_vanishes", max, tol.degenerate_tol, json!({})));
        }
    }

    let window = config.window();
    let t_end = config.integrator.t_end;
    let e_kin = series.column("E_kin")?;
    let plateau_from = 0.8 * t_end;
    match (
        value_at(&t, &e_kin, plateau_from),
        value_at(&t, &e_kin, t_end),
    ) {
        _ if !tol.expect_dispersion => checks.push(skipped(
            "e_kin_plateau",
            "run is not expected to disperse".into(),
        )),
        (Some(a), Some(b)) if t_end > 0.0 && a > 0.0 => checks.push(item(
            "e_kin_plateau",
            (b - a).abs() / a,
            tol.plateau_tol,
            json!({ "from": plateau_from, "to": t_end }),
        )),
        _ => checks.push(skipped(
            "e_kin_plateau",
            "no records at 0.8 t_end and t_end".into(),
        )),
    }

    let slack = series.column("interp_slack")?;
    let finite: Vec<f64> = slack.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        checks.push(skipped(
            "interp_slack",
            "grid diagnostics or analytic sup unavailable".into(),
        ));
    } else {
        let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(CheckItem {
            name: "interp_slack".into(),
            pass: min >= -tol.interp_tol,
            skipped: false,
            value: Some(min),
            tolerance: Some(-tol.interp_tol),
            detail: json!({ "samples": finite.len() }),
        });
    }

    let opts = SuiteOptions {
        window,
        factor: tol.bound_factor,
        rho_p: if config.grid.is_some() {
            config.p_lists.rho.clone()
        } else {
            vec![]
        },
        grad_u_p: if config.grid.is_some() {
            config.p_lists.grad_u.clone()
        } else {
            vec![]
        },
    };
    match decay_suite(&series, &opts) {
        _ if !tol.expect_dispersion => {
            checks.push(skipped("decay", "run is not expected to disperse".into()))
        }
        Ok(suite) => {
            for c in suite {
                checks.push(CheckItem {
                    name: format!("decay:{}", c.name),
                    pass: c.pass || !c.required,
                    skipped: false,
                    value: Some(c.bound.tail_max / c.bound.median),
                    tolerance: Some(tol.bound_factor),
                    detail: serde_json::to_value(&c).expect("serialisable"),
                });
            }
        }
        Err(e @ Error::MissingColumn(_)) => return Err(e),
        Err(e) => checks.push(skipped("decay", e.to_string())),
    }

    let report = CheckReport {
        run_dir: run_dir.to_path_buf(),
        pass: checks.iter().all(|c| c.pass),
        checks,
    };
    let path = run_dir.join("report.json");
    let text = serde_json::to_string_pretty(&report).expect("serialisable");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub snapshots: usize,
    pub max_position_deviation: f64,
    pub max_velocity_deviation: f64,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn ensure_same<T: PartialEq + std::fmt::Debug>(what: &str, a: T, b: T) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Mismatch(format!("{what} differs: {a:?} vs {b:?}")))
    }
}

/// Compares a damped run with its gauge-transformed counterpart, snapshot by
/// snapshot, after mapping the damped velocities to `v + sign eps D2`.
pub fn cmd_compare(dir_a: &Path, dir_b: &Path) -> Result<CompareReport> {
    let ca = RunConfig::load(&dir_a.join(CONFIG_NAME))?;
    let cb = RunConfig::load(&dir_b.join(CONFIG_NAME))?;
    let ((vpd_dir, vpd), (_, gauge)) = match (ca.mode, cb.mode) {
        (ModeName::Gauge, ModeName::Vpd | ModeName::Baseline) => ((dir_b, cb), (dir_a, ca)),
        (ModeName::Vpd | ModeName::Baseline, ModeName::Gauge) => ((dir_a, ca), (dir_b, cb)),
        (a, b) => {
            return Err(Error::Mismatch(format!(
                "need one gauge run and one damped run, got {a:?} and {b:?}"
            )))
        }
    };
    ensure_same("seed", vpd.seed, gauge.seed)?;
    ensure_same("epsilon", vpd.epsilon, gauge.epsilon)?;
    ensure_same("integrator", vpd.integrator, gauge.integrator)?;
    ensure_same("initial data", &vpd.initial_data, &gauge.initial_data)?;
    ensure_same("particles", &vpd.particles, &gauge.particles)?;
    ensure_same("softening", vpd.softening, gauge.softening)?;
    ensure_same(
        "snapshot_stride",
        vpd.snapshot_stride,
        gauge.snapshot_stride,
    )?;
    if vpd.snapshot_stride == 0 {
        return Err(Error::InvalidArgument(
            "runs have no snapshots to compare".into(),
        ));
    }
    let gauge_dir = if vpd_dir == dir_a { dir_b } else { dir_a };
    let list = |dir: &Path| -> Result<Vec<PathBuf>> {
        let snap_dir = dir.join(SNAPSHOT_DIR);
        let mut names: Vec<PathBuf> = std::fs::read_dir(&snap_dir)
            .map_err(|e| Error::io(&snap_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "bin"))
            .collect();
        names.sort();
        Ok(names)
    };
    let (sa, sb) = (list(vpd_dir)?, list(gauge_dir)?);
    ensure_same("snapshot count", sa.len(), sb.len())?;

    let mut max_x = 0.0f64;
    let mut max_v = 0.0f64;
    for (pa, pb) in sa.iter().zip(&sb) {
        let a = read_snapshot(pa)?;
        let b = read_snapshot(pb)?;
        ensure_same("snapshot step", a.step, b.step)?;
        ensure_same("particle count", a.ensemble.len(), b.ensemble.len())?;
        let mut mapped = a.ensemble.clone();
        let softening = vpd.softening_for(&mapped);
        let field = pairwise_field(&mapped, softening)?;
        shift_velocities(&mut mapped, field.d2, vpd.epsilon, 1.0);
        for i in 0..mapped.len() {
            max_x = max_x.max((mapped.x[i] - b.ensemble.x[i]).max_abs());
            max_v = max_v.max((mapped.v[i] - b.ensemble.v[i]).max_abs());
        }
    }
    let max_dev = max_x.max(max_v);
    let tolerance = vpd.checks.gauge_tol;
    Ok(CompareReport {
        snapshots: sa.len(),
        max_position_deviation: max_x,
        max_velocity_deviation: max_v,
        max_deviation: max_dev,
        tolerance,
        pass: max_dev <= tolerance,
    })
}

/// Power-law fit of one series column. Besides stored columns, accepts the
/// derived names `d2_norm` and `E_pot_pair_abs`. The default window is the
/// second half of the recorded time range.
pub fn cmd_fit(series_path: &Path, column: &str, window: Option<(f64, f64)>) -> Result<DecayFit> {
    let series = SeriesTable::read(series_path)?;
    let t = series.column("t")?;
    let values = match column {
        "d2_norm" => vectors(&series, "d2")?.iter().map(|v| v.norm()).collect(),
        "E_pot_pair_abs" => series
            .column("E_pot_pair")?
            .iter()
            .map(|v| v.abs())
            .collect(),
        name => series.column(name)?,
    };
    let window = match window {
        Some(w) => w,
        None => {
            let end = *t.last().ok_or(Error::TooFewSamples { needed: 8, got: 0 })?;
            (0.5 * end, end)
        }
    };
    let (tf, vf): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(&values)
        .filter(|(_, v)| !v.is_nan())
        .map(|(a, b)| (*a, *b))
        .unzip();
    fit_power_law(&tf, &vf, window)
}
