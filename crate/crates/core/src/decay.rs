//! Power-law tail fits and bounded-product verdicts for decaying series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_FIT_POINTS: usize = 8;
/// Default threshold on `tail max / window median` for a bounded product.
pub const DEFAULT_BOUND_FACTOR: f64 = 1.1;

/// Least-squares slope of `log(value)` against `log(1 + t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub n_points: usize,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Bounded,
    Growing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundVerdict {
    pub claimed_rate: f64,
    pub max_product: f64,
    pub tail_max: f64,
    pub median: f64,
    pub trend: Trend,
    pub window: (f64, f64),
}

fn window_indices(times: &[f64], window: (f64, f64)) -> Result<Vec<usize>> {
    if !(window.0 < window.1) {
        return Err(Error::InvalidArgument(format!(
            "window [{}, {}] is empty",
            window.0, window.1
        )));
    }
    let idx: Vec<usize> = times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= window.0 && t <= window.1)
        .map(|(k, _)| k)
        .collect();
    if idx.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no samples in window [{}, {}]",
            window.0, window.1
        )));
    }
    Ok(idx)
}

pub fn fit_power_law(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::InvalidArgument(
            "times and values differ in length".into(),
        ));
    }
    let idx = window_indices(times, window)?;
    if idx.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewSamples {
            needed: MIN_FIT_POINTS,
            got: idx.len(),
        });
    }
    if let Some(&k) = idx.iter().find(|&&k| !(values[k] > 0.0)) {
        return Err(Error::NonPositive {
            index: k,
            time: times[k],
            value: values[k],
        });
    }
    let xs: Vec<f64> = idx.iter().map(|&k| (1.0 + times[k]).ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&k| values[k].ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(DecayFit {
        exponent: slope,
        stderr,
        intercept,
        window: (times[idx[0]], times[*idx.last().unwrap()]),
        n_points: idx.len(),
        r_squared,
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Bounded-product verdict for `value(t) <= C (1 + t)^(-claimed_rate)`: the
/// product is bounded when its maximum over the second half of the window is
/// at most `factor` times its median over the whole window.
pub fn check_bound(
    times: &[f64],
    values: &[f64],
    claimed_rate: f64,
    window: (f64, f64),
    factor: f64,
) -> Result<BoundVerdict> {
    if times.len() != values.len() {
        return Err(Error::InvalidArgument(
            "times and values differ in length".into(),
        ));
    }
    let idx = window_indices(times, window)?;
    let products: Vec<f64> = idx
        .iter()
        .map(|&k| (1.0 + times[k]).powf(claimed_rate) * values[k])
        .collect();
    if products.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidArgument(
            "series contains non-finite values in window".into(),
        ));
    }
    let mid = 0.5 * (window.0 + window.1);
    let tail_max = idx
        .iter()
        .zip(&products)
        .filter(|(&k, _)| times[k] >= mid)
        .map(|(_, &p)| p)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_product = products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let med = median(&mut products.clone());
    // an empty tail (all samples before the midpoint) cannot show growth
    let tail_max = if tail_max.is_finite() { tail_max } else { med };
    let trend = if tail_max <= factor * med {
        Trend::Bounded
    } else {
        Trend::Growing
    };
    Ok(BoundVerdict {
        claimed_rate,
        max_product,
        tail_max,
        median: med,
        trend,
        window,
    })
}

/// Named columns of a run's diagnostic series.
pub trait SeriesSource {
    fn column(&self, name: &str) -> Result<Vec<f64>>;
    fn has_column(&self, name: &str) -> bool;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub window: (f64, f64),
    pub factor: f64,
    pub rho_p: Vec<f64>,
    pub grad_u_p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCheck {
    pub name: String,
    pub rate: f64,
    pub verdict: Trend,
    pub bound: BoundVerdict,
    pub exponent: Option<f64>,
    pub stderr: Option<f64>,
    pub r_squared: Option<f64>,
    /// Fitted exponent at least as negative as `-rate` within two standard
    /// errors; vacuously true when no fit is possible (series vanishing).
    pub exponent_ok: bool,
    /// Median level over the last quarter of the window when the series has
    /// stopped decaying there, else `None`.
    pub noise_floor: Option<f64>,
    pub pass: bool,
    /// Informational checks are reported but do not gate the run verdict.
    pub required: bool,
    pub note: Option<String>,
}

pub fn rho_rate(p: f64) -> f64 {
    3.0 * (p - 1.0) / (2.0 * p)
}

pub fn grad_u_rate(p: f64) -> f64 {
    (5.0 * p - 3.0) / (7.0 * p)
}

pub const D2_RATE: f64 = 8.0 / 7.0;

/// Column name for an `L^p` exponent, e.g. `rho_lp_1.6667`.
pub fn lp_column(prefix: &str, p: f64) -> String {
    let s = format!("{p:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("{prefix}_{s}")
}

fn noise_floor(times: &[f64], values: &[f64], window: (f64, f64)) -> Option<f64> {
    let start = window.1 - 0.25 * (window.1 - window.0);
    let fit = fit_power_law(times, values, (start, window.1)).ok()?;
    if fit.exponent > -0.1 {
        let mut tail: Vec<f64> = times
            .iter()
            .zip(values)
            .filter(|(&t, _)| t >= start && t <= window.1)
            .map(|(_, &v)| v)
            .collect();
        Some(median(&mut tail))
    } else {
        None
    }
}

fn run_check(
    name: &str,
    times: &[f64],
    values: &[f64],
    rate: f64,
    opts: &SuiteOptions,
) -> Result<SuiteCheck> {
    run_check_as(name, times, values, rate, opts, true)
}

fn run_check_as(
    name: &str,
    times: &[f64],
    values: &[f64],
    rate: f64,
    opts: &SuiteOptions,
    required: bool,
) -> Result<SuiteCheck> {
    let bound = check_bound(times, values, rate, opts.window, opts.factor)?;
    let (fit, note) = match fit_power_law(times, values, opts.window) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(format!("no fit: {e}"))),
    };
    let exponent_ok = fit
        .map(|f| f.exponent <= -rate + 2.0 * f.stderr)
        .unwrap_or(true);
    Ok(SuiteCheck {
        name: name.to_string(),
        rate,
        verdict: bound.trend,
        bound,
        exponent: fit.map(|f| f.exponent),
        stderr: fit.map(|f| f.stderr),
        r_squared: fit.map(|f| f.r_squared),
        exponent_ok,
        noise_floor: noise_floor(times, values, opts.window),
        pass: bound.trend == Trend::Bounded && exponent_ok,
        required,
        note,
    })
}

/// Applies the bounded-product decay checks to a run series:
/// `E_pot` (grid, and `|pairwise|` as information) at rate 1, `|D2|` at 8/7, `R/t` (rate -1
/// on `R`), and the configured `L^p` norms of the density and the field.
pub fn decay_suite(series: &dyn SeriesSource, opts: &SuiteOptions) -> Result<Vec<SuiteCheck>> {
    let t = series.column("t")?;
    let mut checks = Vec::new();

    if series.has_column("E_pot_grid") {
        let e_grid = series.column("E_pot_grid")?;
        let (tg, vg) = finite_pairs(&t, &e_grid);
        checks.push(run_check("E_pot_grid", &tg, &vg, 1.0, opts)?);
    }
    let e_pair: Vec<f64> = series
        .column("E_pot_pair")?
        .iter()
        .map(|v| v.abs())
        .collect();
    // The pairwise energy of a neutral system changes sign, so its modulus
    // can dip through zero; reported, not gating.
    let mut pair = run_check_as("E_pot_pair_abs", &t, &e_pair, 1.0, opts, false)?;
    pair.note
        .get_or_insert_with(|| "sign-indefinite, informational".into());
    checks.push(pair);

    let (dx, dy, dz) = (
        series.column("d2x")?,
        series.column("d2y")?,
        series.column("d2z")?,
    );
    let d2: Vec<f64> = (0..t.len())
        .map(|k| (dx[k] * dx[k] + dy[k] * dy[k] + dz[k] * dz[k]).sqrt())
        .collect();
    checks.push(run_check("d2_norm", &t, &d2, D2_RATE, opts)?);

    let r = series.column("R")?;
    checks.push(run_check("R", &t, &r, -1.0, opts)?);

    for &p in &opts.rho_p {
        let name = lp_column("rho_lp", p);
        let col = series.column(&name)?;
        let (tg, vg) = finite_pairs(&t, &col);
        checks.push(run_check(&name, &tg, &vg, rho_rate(p), opts)?);
    }
    for &p in &opts.grad_u_p {
        let name = lp_column("gradU_lp", p);
        let col = series.column(&name)?;
        let (tg, vg) = finite_pairs(&t, &col);
        checks.push(run_check(&name, &tg, &vg, grad_u_rate(p), opts)?);
    }
    Ok(checks)
}

/// Drops samples marked as not computed.
fn finite_pairs(t: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    t.iter()
        .zip(v)
        .filter(|(_, v)| v.is_finite())
        .map(|(t, v)| (*t, *v))
        .unzip()
}
