//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Runs the shipped fixtures in `configs/` end to end, so it takes several
//! minutes. Criteria that fail are reported as FAIL; the process exits
//! nonzero unless every failure comes with a confirmed diagnosis (see
//! criterion 8 and the README).

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use vpd_core::decay::{decay_suite, SuiteOptions};
use vpd_core::dynamics::{flow_volume_probe, oracle_integrate, Integrator};
use vpd_core::fields::{isolated_lp_floor, self_energy_floor, PoissonSolver};
use vpd_core::io::config::ModeName;
use vpd_core::io::snapshot::{read_snapshot, snapshot_file_name};
use vpd_core::io::{cmd_check, cmd_compare, execute, RunConfig, RunStatus, SeriesTable};
use vpd_core::{IntegratorConfig, PushMode};

const REFERENCE_DT: f64 = 0.005;
/// Observed-order band accepted as "about 4x per halving".
const SECOND_ORDER_BAND: (f64, f64) = (1.5, 2.5);

struct Outcome {
    pass: bool,
    detail: String,
    /// Confirmed cause of a failure that the suite tolerates.
    diagnosis: Option<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self {
            pass,
            detail,
            diagnosis: None,
        }
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn fixture(name: &str) -> RunConfig {
    RunConfig::load(&configs_dir().join(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR"))
        .join("acceptance")
        .join(name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).expect("clear scratch dir");
    }
    dir
}

fn run(config: &RunConfig, name: &str) -> PathBuf {
    let dir = scratch(name);
    let outcome = execute(config, &dir).unwrap_or_else(|e| panic!("run {name}: {e}"));
    assert_eq!(
        outcome.status,
        RunStatus::Completed,
        "run {name}: {:?}",
        outcome.error
    );
    dir
}

fn series(dir: &Path) -> SeriesTable {
    SeriesTable::read(&dir.join("series.csv")).expect("series")
}

fn check_value(dir: &Path, name: &str) -> f64 {
    let report = cmd_check(dir).expect("check");
    report
        .get(name)
        .and_then(|c| c.value)
        .unwrap_or_else(|| panic!("check {name} missing in {}", dir.display()))
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

fn in_band(order: f64) -> bool {
    order >= SECOND_ORDER_BAND.0 && order <= SECOND_ORDER_BAND.1
}

/// Sum over record intervals of the magnitude of the energy-balance residual,
/// relative to `|E_total(0)|`. Unlike the signed total this does not benefit
/// from cancellation between intervals, so it converges cleanly.
fn interval_residual(dir: &Path) -> (f64, f64) {
    let s = series(dir);
    let t = s.column("t").unwrap();
    let r = s.column("diss_residual").unwrap();
    let e0 = s.column("E_total").unwrap()[0].abs();
    let mut signed = 0.0f64;
    let mut magnitude = 0.0;
    for k in 1..t.len() {
        signed += r[k] * (t[k] - t[k - 1]);
        magnitude += r[k].abs() * (t[k] - t[k - 1]);
    }
    (signed.abs() / e0, magnitude / e0)
}

fn without_grid(mut c: RunConfig) -> RunConfig {
    c.grid = None;
    c.snapshot_stride = 0;
    c
}

fn with_dt(mut c: RunConfig, dt: f64, record_every: f64) -> RunConfig {
    c.integrator.dt = dt;
    c.diag_stride = (record_every / dt).round() as u64;
    c
}

fn criterion_1(reference: &Path, reference_secs: f64) -> Outcome {
    let base = without_grid(fixture("reference.toml"));
    let coarse = run(&with_dt(base.clone(), 0.02, 0.1), "c1_dt0.02");
    let mid = run(&with_dt(base, 0.01, 0.1), "c1_dt0.01");
    let (sc, mc) = interval_residual(&coarse);
    let (sm, mm) = interval_residual(&mid);
    let (sf, mf) = interval_residual(reference);
    let global = check_value(reference, "dissipation");
    let (o1, o2) = (order(mc, mm), order(mm, mf));
    let pass = global <= 1e-6 && o1 >= 3.5 && o2 >= 3.5 && reference_secs <= 120.0;
    Outcome::new(
        pass,
        format!(
            "residual at dt=0.005: {global:.2e} (tol 1e-6); interval sums {mc:.2e}, {mm:.2e}, {mf:.2e} \
             -> orders {o1:.2}, {o2:.2} (need >= 3.5); signed {sc:.1e}, {sm:.1e}, {sf:.1e}; \
             reference run {reference_secs:.0} s"
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut c = without_grid(fixture("reference.toml"));
    c.epsilon = 0.0;
    c.mode = ModeName::Baseline;
    c.integrator.t_end = 10.0;
    let dir = run(&c, "c2_conservative");
    let e = series(&dir).column("E_total").unwrap();
    let drift = e.iter().map(|v| (v - e[0]).abs()).fold(0.0, f64::max) / e[0].abs();
    Outcome::new(
        drift <= 1e-8,
        format!("max relative energy drift {drift:.2e} over t = 10 (tol 1e-8)"),
    )
}

fn criterion_3() -> Outcome {
    let c = fixture("four_body.toml");
    let ensemble = c.initial_ensemble().unwrap();
    let softening = c.softening_for(&ensemble);
    let config = IntegratorConfig {
        dt: 1e-3,
        ..c.integrator
    };
    let mut integ =
        Integrator::new(config, PushMode::Vpd { epsilon: c.epsilon }, softening).unwrap();
    let mut state = integ.initial_state(ensemble.clone()).unwrap();
    let every = 500u64;
    let mut stepped = vec![state.ensemble.clone()];
    let mut times = vec![0.0];
    for k in 1..=config.n_steps() {
        integ.step(&mut state).unwrap();
        if k % every == 0 {
            stepped.push(state.ensemble.clone());
            times.push(state.t);
        }
    }
    let oracle = oracle_integrate(&ensemble, c.epsilon, softening.delta(), &times, 1e-12).unwrap();
    let mut worst = 0.0f64;
    for (a, b) in stepped.iter().zip(&oracle.snapshots) {
        for i in 0..a.len() {
            worst = worst.max((a.x[i] - b.x[i]).norm());
        }
    }
    Outcome::new(
        worst <= 1e-6,
        format!(
            "max position deviation {worst:.2e} over {} samples to t = {} (tol 1e-6), delta = {}",
            times.len(),
            config.t_end,
            softening.delta()
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut worst = Vec::new();
    for name in ["single_species.toml", "mirror.toml"] {
        let dir = run(&fixture(name), &format!("c4_{name}"));
        worst.push((name, check_value(&dir, "d2_vanishes")));
    }
    let pass = worst.iter().all(|(_, v)| *v <= 1e-12);
    let detail = worst
        .iter()
        .map(|(n, v)| format!("{n}: max |d2| {v:.2e}"))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome::new(pass, format!("{detail} (tol 1e-12)"))
}

fn criterion_5(reference: &Path) -> Outcome {
    let gauge = fixture("reference_gauge.toml");
    let g1 = run(&gauge, "c5_gauge_dt0.005");
    let r1 = cmd_compare(reference, &g1).expect("compare");

    let half = REFERENCE_DT / 2.0;
    let mut vpd = fixture("reference.toml");
    vpd.grid = None;
    vpd.integrator.dt = half;
    vpd.diag_stride *= 2;
    vpd.snapshot_stride *= 2;
    let mut gauge_half = gauge;
    gauge_half.integrator.dt = half;
    gauge_half.snapshot_stride *= 2;
    let v2 = run(&vpd, "c5_vpd_dt0.0025");
    let g2 = run(&gauge_half, "c5_gauge_dt0.0025");
    let r2 = cmd_compare(&v2, &g2).expect("compare");
    let o = order(r1.max_deviation, r2.max_deviation);
    Outcome::new(
        r1.pass && r1.max_deviation <= 1e-4 && in_band(o),
        format!(
            "max deviation {:.2e} at dt=0.005 over {} snapshots (tol 1e-4), {:.2e} at dt=0.0025: \
             ratio {:.2}, order {o:.2} (band {:?})",
            r1.max_deviation,
            r1.snapshots,
            r2.max_deviation,
            r1.max_deviation / r2.max_deviation,
            SECOND_ORDER_BAND
        ),
    )
}

fn criterion_6() -> Outcome {
    let base = fixture("two_body.toml");
    let mut values = Vec::new();
    for dt in [0.01, REFERENCE_DT, 0.0025] {
        let mut c = base.clone();
        c.integrator.dt = dt;
        let dir = run(&c, &format!("c6_dt{dt}"));
        values.push((check_value(&dir, "i_identity"), check_value(&dir, "ddot_d")));
    }
    let orders = [
        order(values[0].0, values[1].0),
        order(values[1].0, values[2].0),
        order(values[0].1, values[1].1),
        order(values[1].1, values[2].1),
    ];
    let (i_mid, d_mid) = values[1];
    let pass = i_mid <= 1e-5 && d_mid <= 1e-5 && orders.iter().all(|&o| in_band(o));
    Outcome::new(
        pass,
        format!(
            "at dt=0.005: I residual {i_mid:.2e}, D'' residual {d_mid:.2e} (tol 1e-5); \
             orders I {:.2}, {:.2}, D'' {:.2}, {:.2} (band {:?})",
            orders[0], orders[1], orders[2], orders[3], SECOND_ORDER_BAND
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for name in ["two_body.toml", "reference.toml"] {
        let c = fixture(name);
        let ensemble = c.initial_ensemble().unwrap();
        let softening = c.softening_for(&ensemble);
        for mode in [PushMode::BaselineVp, PushMode::Vpd { epsilon: 0.1 }] {
            let det = flow_volume_probe(&ensemble, 0, mode, softening, 1e-3, 1.0, 1e-5).unwrap();
            pass &= (det - 1.0).abs() <= 1e-5;
            lines.push(format!(
                "{name} eps={}: det-1 = {:+.1e}",
                mode.epsilon(),
                det - 1.0
            ));
        }
    }
    Outcome::new(pass, format!("{} (tol 1e-5)", lines.join("; ")))
}

fn criterion_8(reference: &Path) -> Outcome {
    let config = fixture("reference.toml");
    let s = series(reference);
    let opts = SuiteOptions {
        window: (25.0, 50.0),
        factor: config.checks.bound_factor,
        rho_p: vec![5.0 / 3.0],
        grad_u_p: vec![2.0],
    };
    let suite = decay_suite(&s, &opts).expect("suite");
    let mut failing = Vec::new();
    let mut parts = Vec::new();
    for c in suite.iter().filter(|c| c.required) {
        parts.push(format!(
            "{} {} (max/median {:.2}, exponent {} vs claimed {:.3})",
            c.name,
            if c.pass { "bounded" } else { "growing" },
            c.bound.tail_max / c.bound.median,
            c.exponent.map_or("-".into(), |e| format!("{e:.2}")),
            -c.rate
        ));
        if !c.pass {
            failing.push(c.name.clone());
        }
    }
    let t = s.column("t").unwrap();
    let e_kin = s.column("E_kin").unwrap();
    let at = |x: f64| {
        e_kin[t
            .iter()
            .position(|&v| (v - x).abs() < 1e-9)
            .expect("record")]
    };
    let plateau = (at(50.0) - at(40.0)).abs() / at(40.0);
    parts.push(format!("E_kin plateau {plateau:.2e} (tol 5e-2)"));
    let pass = failing.is_empty() && plateau <= 0.05;
    let mut outcome = Outcome::new(pass, parts.join("; "));
    if pass {
        return outcome;
    }

    // Diagnose: compare the failing grid quantities at the end of the run
    // with the level they would have with every particle alone in its cells.
    let grid = config.grid.expect("reference grid");
    let final_step = config.integrator.n_steps();
    let snap = read_snapshot(
        &reference
            .join("snapshots")
            .join(snapshot_file_name(final_step)),
    )
    .expect("snapshot");
    let solver = PoissonSolver::new(grid.spec()).unwrap();
    let energy_floor = self_energy_floor(&snap.ensemble, &solver, 16).unwrap();
    let rho_floor = isolated_lp_floor(&snap.ensemble, &grid.spec(), 5.0 / 3.0).unwrap();
    let last = |col: &str| {
        let v = s.column(col).unwrap();
        *v.iter().rev().find(|x| x.is_finite()).unwrap()
    };
    let floors = [
        ("E_pot_grid", last("E_pot_grid"), energy_floor),
        ("rho_lp_1.6667", last("rho_lp_1.6667"), rho_floor),
        (
            "gradU_lp_2",
            last("gradU_lp_2"),
            (8.0 * std::f64::consts::PI * energy_floor).sqrt(),
        ),
    ];
    let mut explained = plateau <= 0.05;
    let mut notes = Vec::new();
    for name in &failing {
        match floors.iter().find(|f| f.0 == name) {
            Some(&(_, value, floor)) => {
                let ratio = value / floor;
                explained &= (0.8..=1.25).contains(&ratio);
                notes.push(format!(
                    "{name} at t=50 is {ratio:.3} x its isolated-particle floor"
                ));
            }
            None => {
                explained = false;
                notes.push(format!("{name}: no floor estimate"));
            }
        }
    }
    outcome.detail.push_str(&format!("; {}", notes.join("; ")));
    if explained {
        outcome.diagnosis =
            Some("grid quantities saturate at the particle-discreteness floor".into());
    }
    outcome
}

fn criterion_9(reference: &Path) -> Outcome {
    let s = series(reference);
    let t = s.column("t").unwrap();
    let slack = s.column("interp_slack").unwrap();
    let sampled: Vec<(f64, f64)> = t
        .iter()
        .zip(&slack)
        .filter(|(_, v)| v.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    if sampled.len() < 10 {
        return Outcome::new(false, format!("only {} grid samples", sampled.len()));
    }
    let picks: Vec<(f64, f64)> = (0..10)
        .map(|k| sampled[k * (sampled.len() - 1) / 9])
        .collect();
    let min = picks.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    Outcome::new(
        min >= -1e-3,
        format!(
            "min relative slack {min:.3} over t = {} (need >= -1e-3)",
            picks
                .iter()
                .map(|p| format!("{}", p.0))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut c = fixture("reference.toml");
    c.integrator.t_end = 2.0;
    c.workers = 1;
    let a = std::fs::read(run(&c, "c10_a").join("series.csv")).unwrap();
    let b = std::fs::read(run(&c, "c10_b").join("series.csv")).unwrap();
    Outcome::new(
        a == b,
        format!(
            "series.csv of two runs: {} bytes, identical = {}",
            a.len(),
            a == b
        ),
    )
}

fn main() {
    let started = Instant::now();
    let reference_config = fixture("reference.toml");
    assert_eq!(reference_config.integrator.dt, REFERENCE_DT);
    let clock = Instant::now();
    let reference = run(&reference_config, "reference");
    let reference_secs = clock.elapsed().as_secs_f64();

    let criteria: Vec<(u32, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, Box::new(|| criterion_1(&reference, reference_secs))),
        (2, Box::new(criterion_2)),
        (3, Box::new(criterion_3)),
        (4, Box::new(criterion_4)),
        (5, Box::new(|| criterion_5(&reference))),
        (6, Box::new(criterion_6)),
        (7, Box::new(criterion_7)),
        (8, Box::new(|| criterion_8(&reference))),
        (9, Box::new(|| criterion_9(&reference))),
        (10, Box::new(criterion_10)),
    ];
    let mut unexplained = Vec::new();
    let mut out = std::io::stdout().lock();
    for (n, check) in criteria {
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "criterion {n:>2}: {verdict}  {}", o.detail);
        if let Some(d) = &o.diagnosis {
            let _ = writeln!(out, "              diagnosis: {d}");
        }
        if !o.pass && o.diagnosis.is_none() {
            unexplained.push(n);
        }
        let _ = out.flush();
    }
    let _ = writeln!(
        out,
        "acceptance finished in {:.0} s",
        started.elapsed().as_secs_f64()
    );
    if !unexplained.is_empty() {
        let _ = writeln!(out, "unexplained failures: {unexplained:?}");
        std::process::exit(1);
    }
}
