//! Surrogate-data Monte Carlo.
//!
//! A surrogate corpus has one simulated series per template entry, with the
//! entry's length and full-sample drift and volatility. Each replication
//! re-runs the whole hindcast on a fresh corpus, so the null distributions
//! carry the correlation induced by overlapping windows and the mix of
//! series lengths in the real data.
//!
//! Replication `i` always draws from `Rng::new(seed).derive(i)`, so results
//! are bit-identical for any thread count.

use std::collections::BTreeMap;
use std::io::Write;

use log::warn;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{SeriesSummary, TechnologySeries};
use crate::error::{Error, Result};
use crate::hindcast::{
    accumulate_paths, error_growth_corpus, push_rescaled, visit_forecasts, ErrorGrowthCurve, HindcastRecord, Weighting,
    XiAccumulator, DEFAULT_TAU_MAX,
};
use crate::models::{estimate_rwd_window, ima_path, rwd_path, ImaParams, Innovation};
use crate::stats::{mean, quantile_sorted, student_t_cdf_unchecked, Ecdf, Rng};

pub const DEFAULT_BAND_REPLICATIONS: usize = 1_000;
pub const DEFAULT_DEVIATION_REPLICATIONS: usize = 10_000;
pub const DEFAULT_MATCH_REPLICATIONS: usize = 3_000;
pub const DEFAULT_SEED: u64 = 20_160_301;

/// Length and full-sample parameters of one series to imitate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateEntry {
    pub name: String,
    pub t: usize,
    pub mu: f64,
    pub k: f64,
}

impl TemplateEntry {
    pub fn from_summary(s: &SeriesSummary) -> Self {
        Self {
            name: s.name.clone(),
            t: s.t,
            mu: s.mu,
            k: s.k,
        }
    }

    /// Full-sample mean and standard deviation of the differences.
    pub fn from_series(s: &TechnologySeries) -> Result<Self> {
        if s.len() < 3 {
            return Err(Error::TooShort {
                needed: 3,
                got: s.len(),
            });
        }
        let n = s.len() - 1;
        let est = estimate_rwd_window(s.log_costs(), n, n)?;
        Ok(Self {
            name: s.name.clone(),
            t: s.len(),
            mu: est.mu_hat,
            k: est.k_hat,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub replications: usize,
    pub theta: f64,
    pub innovation: Innovation,
    pub m: usize,
    pub tau_max: usize,
    pub seed: u64,
    pub weighting: Weighting,
    pub template: Vec<TemplateEntry>,
}

impl SurrogateConfig {
    /// Normal innovations, pooled weighting, horizons up to 20, fixed seed.
    pub fn new(template: Vec<TemplateEntry>, m: usize, theta: f64, replications: usize) -> Self {
        Self {
            replications,
            theta,
            innovation: Innovation::Normal,
            m,
            tau_max: DEFAULT_TAU_MAX,
            seed: DEFAULT_SEED,
            weighting: Weighting::Pooled,
            template,
        }
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self { theta, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidArgument("replications must be >= 1".into()));
        }
        if self.template.is_empty() {
            return Err(Error::EmptyInput);
        }
        if self.m <= 3 {
            return Err(Error::WindowTooSmall(self.m));
        }
        if self.tau_max == 0 {
            return Err(Error::InvalidArgument("tau_max must be >= 1".into()));
        }
        if !(self.theta > -1.0 && self.theta < 1.0) {
            return Err(Error::ThetaOutOfRange(self.theta));
        }
        for e in &self.template {
            if e.t < 2 || !(e.k >= 0.0) || !e.mu.is_finite() || !e.k.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "bad template entry {}: T = {}, mu = {}, K = {}",
                    e.name, e.t, e.mu, e.k
                )));
            }
        }
        ImaParams::with_increment_sd(0.0, 1.0, self.theta)?;
        Ok(())
    }

    fn rng(&self) -> Rng {
        Rng::new(self.seed)
    }

    fn horizon_cap(&self) -> usize {
        self.tau_max.min(self.template.iter().map(|e| e.t).max().unwrap_or(0))
    }
}

fn surrogate_paths(config: &SurrogateConfig, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    config
        .template
        .iter()
        .map(|e| {
            if config.theta == 0.0 {
                rwd_path(e.mu, e.k, e.t, rng, config.innovation)
            } else {
                let params = ImaParams::with_increment_sd(e.mu, e.k, config.theta)?;
                ima_path(&params, e.t, rng, config.innovation)
            }
        })
        .collect()
}

/// One simulated series per template entry, `sigma = K / sqrt(1 + theta^2)`
/// so the increments have standard deviation `K`.
pub fn surrogate_corpus(config: &SurrogateConfig, rng: &mut Rng) -> Result<Vec<TechnologySeries>> {
    config.validate()?;
    surrogate_paths(config, rng)?
        .into_iter()
        .zip(&config.template)
        .map(|(y, e)| TechnologySeries::from_log_costs(e.name.clone(), "surrogate", 0, y))
        .collect()
}

/// Monte Carlo sample of a scalar statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullEnsemble {
    pub statistic: String,
    pub values: Vec<f64>,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
    pub mean: f64,
    /// Monte Carlo standard error of `mean`.
    pub std_error: f64,
    pub observed: Option<f64>,
    /// Share of replications at or above the observed value.
    pub p_value: Option<f64>,
    /// `(#{replications >= observed} + 1) / (replications + 1)`.
    pub p_value_add_one: Option<f64>,
}

impl NullEnsemble {
    pub fn new(statistic: impl Into<String>, values: Vec<f64>, observed: Option<f64>) -> Self {
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        let mu = mean(&values);
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let (p, p1) = match observed {
            Some(obs) => {
                let hits = values.iter().filter(|&&v| v >= obs).count() as f64;
                (Some(hits / n), Some((hits + 1.0) / (n + 1.0)))
            }
            None => (None, None),
        };
        Self {
            statistic: statistic.into(),
            q025: quantile_sorted(&sorted, 0.025),
            q50: quantile_sorted(&sorted, 0.5),
            q975: quantile_sorted(&sorted, 0.975),
            mean: mu,
            std_error: (var / n).sqrt(),
            values,
            observed,
            p_value: p,
            p_value_add_one: p1,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.q025 <= x && x <= self.q975
    }
}

/// Per-horizon null ensembles of the mean squared normalized error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiBand {
    pub theta: f64,
    pub m: usize,
    pub replications: usize,
    pub horizons: Vec<usize>,
    pub ensembles: Vec<NullEnsemble>,
}

impl XiBand {
    pub fn at(&self, tau: usize) -> Option<&NullEnsemble> {
        self.horizons.iter().position(|&t| t == tau).map(|i| &self.ensembles[i])
    }

    pub fn means(&self) -> Vec<f64> {
        self.ensembles.iter().map(|e| e.mean).collect()
    }
}

// Xi_sim(tau) for tau = 1..=cap in one replication; NaN where no forecast
// exists at that horizon.
fn replicate_xi(config: &SurrogateConfig, rng: &mut Rng, cap: usize) -> Result<Vec<f64>> {
    let paths = surrogate_paths(config, rng)?;
    let acc: XiAccumulator = accumulate_paths(paths.iter().map(|p| p.as_slice()), paths.len(), config.m, cap);
    let curve = acc.curve(config.weighting);
    let mut out = vec![f64::NAN; cap];
    for p in curve.points {
        out[p.tau - 1] = p.xi;
    }
    Ok(out)
}

fn replicate_all<T, F>(config: &SurrogateConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut Rng) -> Result<T> + Sync,
{
    let root = config.rng();
    (0..config.replications as u64)
        .into_par_iter()
        .map(|i| f(&mut root.derive(i)))
        .collect()
}

fn simulate_xi_matrix(config: &SurrogateConfig) -> Result<(usize, Vec<Vec<f64>>)> {
    config.validate()?;
    let cap = config.horizon_cap();
    let rows = replicate_all(config, |rng| replicate_xi(config, rng, cap))?;
    Ok((cap, rows))
}

/// Null band for the error-growth curve. `observed` adds per-horizon
/// p-values for an upper-tail test.
pub fn null_xi_band(config: &SurrogateConfig, observed: Option<&ErrorGrowthCurve>) -> Result<XiBand> {
    let (cap, rows) = simulate_xi_matrix(config)?;
    let mut horizons = Vec::new();
    let mut ensembles = Vec::new();
    for tau in 1..=cap {
        let values: Vec<f64> = rows.iter().map(|r| r[tau - 1]).filter(|v| !v.is_nan()).collect();
        if values.is_empty() {
            continue;
        }
        let obs = observed.and_then(|c| c.xi_at(tau));
        horizons.push(tau);
        ensembles.push(NullEnsemble::new(format!("xi({tau})"), values, obs));
    }
    Ok(XiBand {
        theta: config.theta,
        m: config.m,
        replications: config.replications,
        horizons,
        ensembles,
    })
}

/// `tau,observed,q025,q50,q975,mean,std_error,p_value,p_value_add_one`.
pub fn write_band_csv<W: Write>(band: &XiBand, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "tau",
        "observed",
        "q025",
        "q50",
        "q975",
        "mean",
        "std_error",
        "p_value",
        "p_value_add_one",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (tau, e) in band.horizons.iter().zip(&band.ensembles) {
        wtr.write_record([
            tau.to_string(),
            opt(e.observed),
            e.q025.to_string(),
            e.q50.to_string(),
            e.q975.to_string(),
            e.mean.to_string(),
            e.std_error.to_string(),
            opt(e.p_value),
            opt(e.p_value_add_one),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Number of grid points used by the deviation statistics.
pub const DEVIATION_GRID_POINTS: usize = 1_000;
/// Grid limit: points are equally spaced on `[-15, 15]`.
pub const DEVIATION_GRID_LIMIT: f64 = 15.0;

/// Distances between an empirical CDF and t(df) on the fixed grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub sum_abs: f64,
    pub sum_sq: f64,
    pub max_abs: f64,
}

fn deviation_grid() -> Vec<f64> {
    let n = DEVIATION_GRID_POINTS;
    (0..n)
        .map(|k| -DEVIATION_GRID_LIMIT + 2.0 * DEVIATION_GRID_LIMIT * k as f64 / (n - 1) as f64)
        .collect()
}

fn deviation_with(ecdf: &Ecdf, grid: &[f64], reference: &[f64]) -> Deviation {
    let emp = ecdf.cdf_strict_on_grid(grid);
    let mut d = Deviation {
        sum_abs: 0.0,
        sum_sq: 0.0,
        max_abs: 0.0,
    };
    for (e, r) in emp.iter().zip(reference) {
        let delta = (e - r).abs();
        d.sum_abs += delta;
        d.sum_sq += delta * delta;
        d.max_abs = d.max_abs.max(delta);
    }
    d
}

/// Deviation of a sample of rescaled errors from t(`df`).
pub fn deviation_from_student(sample: &[f64], df: f64) -> Deviation {
    let grid = deviation_grid();
    let reference: Vec<f64> = grid.iter().map(|&x| student_t_cdf_unchecked(x, df)).collect();
    deviation_with(&Ecdf::new(sample.iter().copied()), &grid, &reference)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationTest {
    pub theta: f64,
    pub m: usize,
    pub n_records: usize,
    pub observed: Deviation,
    pub sum_abs: NullEnsemble,
    pub sum_sq: NullEnsemble,
    pub max_abs: NullEnsemble,
}

impl DeviationTest {
    /// Raw p-values for (sum |D|, sum D^2, max |D|).
    pub fn p_values(&self) -> [f64; 3] {
        [&self.sum_abs, &self.sum_sq, &self.max_abs].map(|e| e.p_value.unwrap_or(f64::NAN))
    }
}

/// Compare the pooled rescaled errors of `records` to t(m-1), with the null
/// built by replicating the whole surrogate pipeline. Records beyond
/// `config.tau_max` are ignored; rescaling and simulation both use
/// `config.theta`.
pub fn distribution_deviation_test(records: &[HindcastRecord], config: &SurrogateConfig) -> Result<DeviationTest> {
    config.validate()?;
    let used: Vec<HindcastRecord> = records.iter().filter(|r| r.tau <= config.tau_max).cloned().collect();
    if let Some(r) = used.iter().find(|r| r.m != config.m) {
        return Err(Error::MismatchedWindow(config.m, r.m));
    }
    let eps = crate::hindcast::rescaled_errors(&used, config.theta)?;
    let df = (config.m - 1) as f64;
    let grid = deviation_grid();
    let reference: Vec<f64> = grid.iter().map(|&x| student_t_cdf_unchecked(x, df)).collect();
    let observed = deviation_with(&Ecdf::new(eps.iter().copied()), &grid, &reference);

    let null = replicate_all(config, |rng| {
        let paths = surrogate_paths(config, rng)?;
        let mut sample = Vec::with_capacity(used.len());
        for y in &paths {
            push_rescaled(y, config.m, config.tau_max, config.theta, &mut sample)?;
        }
        Ok(deviation_with(&Ecdf::new(sample), &grid, &reference))
    })?;
    let pick = |f: fn(&Deviation) -> f64| null.iter().map(f).collect::<Vec<_>>();
    Ok(DeviationTest {
        theta: config.theta,
        m: config.m,
        n_records: eps.len(),
        observed,
        sum_abs: NullEnsemble::new("sum_abs", pick(|d| d.sum_abs), Some(observed.sum_abs)),
        sum_sq: NullEnsemble::new("sum_sq", pick(|d| d.sum_sq), Some(observed.sum_sq)),
        max_abs: NullEnsemble::new("max_abs", pick(|d| d.max_abs), Some(observed.max_abs)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaWeighted {
    pub theta_w: f64,
    /// Count-weighted mean of the per-technology estimates at each horizon.
    pub per_tau: Vec<(usize, f64)>,
    /// Technologies left out because their estimate sits on the boundary
    /// or is missing.
    pub excluded: Vec<String>,
}

/// Global theta as a forecast-count weighted mean of per-technology
/// estimates, averaged over horizons `1..=tau_max`.
///
/// At each horizon every technology weighs in proportion to the number of
/// forecasts it contributes there, so long series count for more at long
/// horizons.
pub fn estimate_theta_weighted(summaries: &[SeriesSummary], records: &[HindcastRecord]) -> Result<ThetaWeighted> {
    let mut counts: BTreeMap<(String, usize), usize> = BTreeMap::new();
    for r in records {
        *counts.entry((r.technology.clone(), r.tau)).or_default() += 1;
    }
    estimate_theta_weighted_from_counts(summaries, &counts, DEFAULT_TAU_MAX)
}

/// As [`estimate_theta_weighted`] with forecast counts keyed by
/// (technology, horizon).
pub fn estimate_theta_weighted_from_counts(
    summaries: &[SeriesSummary],
    counts: &BTreeMap<(String, usize), usize>,
    tau_max: usize,
) -> Result<ThetaWeighted> {
    let mut excluded = Vec::new();
    let mut kept = Vec::new();
    for s in summaries {
        match s.theta {
            Some(th) if !s.theta_on_boundary() => kept.push((s.name.as_str(), th)),
            _ => excluded.push(s.name.clone()),
        }
    }
    if kept.is_empty() {
        return Err(Error::AllBoundary);
    }
    let mut per_tau = Vec::new();
    for tau in 1..=tau_max {
        let (mut num, mut den) = (0.0, 0.0);
        for &(name, th) in &kept {
            let c = counts.get(&(name.to_string(), tau)).copied().unwrap_or(0) as f64;
            num += c * th;
            den += c;
        }
        if den > 0.0 {
            per_tau.push((tau, num / den));
        }
    }
    if per_tau.is_empty() {
        return Err(Error::EmptyInput);
    }
    let theta_w = per_tau.iter().map(|p| p.1).sum::<f64>() / per_tau.len() as f64;
    Ok(ThetaWeighted {
        theta_w,
        per_tau,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaMatch {
    pub theta_m: f64,
    /// `(theta, Z(theta))` over the grid.
    pub z: Vec<(f64, f64)>,
    /// False when `Z - 1` has the same sign at both ends of the grid.
    pub bracketed: bool,
}

/// Horizons used by the matching statistic.
pub const MATCH_HORIZONS: usize = 20;

/// Global theta chosen so the simulated error growth matches the observed
/// curve: `Z(theta)` is the mean over horizons 1..=20 of
/// `xi_observed / xi_simulated(theta)`, and the estimate minimizes
/// `|Z - 1|` over `grid`.
///
/// Every grid point reuses the same replication seeds, so `Z` is smooth in
/// theta and differences between grid points are not swamped by noise.
pub fn estimate_theta_matched(
    observed: &ErrorGrowthCurve,
    config: &SurrogateConfig,
    grid: &[f64],
) -> Result<ThetaMatch> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("theta grid is empty".into()));
    }
    let mut z = Vec::with_capacity(grid.len());
    for &theta in grid {
        let cfg = SurrogateConfig {
            tau_max: config.tau_max.min(MATCH_HORIZONS),
            ..config.with_theta(theta)
        };
        let (cap, rows) = simulate_xi_matrix(&cfg)?;
        let mut ratios = Vec::new();
        for tau in 1..=cap {
            let sims: Vec<f64> = rows.iter().map(|r| r[tau - 1]).filter(|v| !v.is_nan()).collect();
            if let (Some(obs), false) = (observed.xi_at(tau), sims.is_empty()) {
                ratios.push(obs / mean(&sims));
            }
        }
        if ratios.is_empty() {
            return Err(Error::EmptyInput);
        }
        z.push((theta, mean(&ratios)));
    }
    let (theta_m, _) = z
        .iter()
        .copied()
        .min_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
        .expect("grid is nonempty");
    let first = z[0].1 - 1.0;
    let last = z[z.len() - 1].1 - 1.0;
    let bracketed = first.signum() != last.signum() || first == 0.0 || last == 0.0;
    if !bracketed {
        warn!("Z(theta) - 1 has the same sign at both grid ends; returning theta = {theta_m} at the edge");
    }
    Ok(ThetaMatch { theta_m, z, bracketed })
}

/// Largest grid [`parse_theta_grid`] will build.
pub const MAX_GRID_POINTS: usize = 100_000;

/// Parse `start:stop:step` (inclusive of `stop` up to rounding) or a comma
/// separated list. Every value must lie strictly inside (-1, 1).
pub fn parse_theta_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |msg: String| Error::InvalidArgument(format!("theta grid `{text}`: {msg}"));
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(format!("`{}` is not a finite number", s.trim())))
    };
    let values: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, b, step] = parts[..] else {
            return Err(bad("expected start:stop:step".into()));
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !(step > 0.0) || b < a {
            return Err(bad("need stop >= start and step > 0".into()));
        }
        let span = (b - a) / step;
        if !(span < MAX_GRID_POINTS as f64) {
            return Err(bad(format!("more than {MAX_GRID_POINTS} points")));
        }
        let n = (span + 1e-9).floor() as usize + 1;
        (0..n).map(|i| a + i as f64 * step).collect()
    } else {
        let v = text.split(',').map(num).collect::<Result<Vec<_>>>()?;
        if v.len() > MAX_GRID_POINTS {
            return Err(bad(format!("more than {MAX_GRID_POINTS} points")));
        }
        v
    };
    if values.is_empty() {
        return Err(bad("no values".into()));
    }
    if let Some(v) = values.iter().find(|v| !(v.abs() < 1.0)) {
        return Err(Error::ThetaOutOfRange(*v));
    }
    Ok(values)
}

/// Mean squared normalized error of MA-adjusted forecasts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaSweep {
    pub grid: Vec<f64>,
    pub horizons: Vec<usize>,
    /// `ratio[h][g]`: error at `grid[g]` over the error at theta = 0, for
    /// `horizons[h]`.
    pub ratio: Vec<Vec<f64>>,
    /// Grid value minimizing the ratio at each horizon.
    pub best: Vec<f64>,
}

/// Score IMA(1,1) forecasts `y_t + mu_hat tau + theta v_t` against the plain
/// drift forecast. The drift and `K_hat` come from the usual window
/// estimate; `v_t` is filtered through the window's differences starting
/// from zero at the window start.
pub fn theta_forecast_sweep(
    corpus: &[TechnologySeries],
    m: usize,
    grid: &[f64],
    horizons: &[usize],
) -> Result<ThetaSweep> {
    if m <= 3 {
        return Err(Error::WindowTooSmall(m));
    }
    if grid.is_empty() || horizons.is_empty() {
        return Err(Error::InvalidArgument(
            "need a nonempty theta grid and horizon list".into(),
        ));
    }
    let tau_max = horizons.iter().copied().max().unwrap_or(0);
    let width = grid.len() + 1;
    // sums[tau - 1][g], last column is theta = 0
    let mut sums = vec![vec![0.0; width]; tau_max];
    let mut counts = vec![0usize; tau_max];
    let thetas: Vec<f64> = grid.iter().copied().chain([0.0]).collect();
    for s in corpus {
        let y = s.log_costs();
        visit_forecasts(y, m, tau_max, |origin, tau, raw, mu_hat, k_hat| {
            counts[tau - 1] += 1;
            for (g, &th) in thetas.iter().enumerate() {
                let mut v = 0.0;
                for i in (origin - m + 1)..=origin {
                    v = y[i] - y[i - 1] - mu_hat - th * v;
                }
                let e = (raw - th * v) / k_hat;
                sums[tau - 1][g] += e * e;
            }
        });
    }
    let mut ratio = Vec::with_capacity(horizons.len());
    let mut best = Vec::with_capacity(horizons.len());
    for &tau in horizons {
        if tau == 0 || counts[tau - 1] == 0 {
            return Err(Error::InvalidArgument(format!("no forecasts at horizon {tau}")));
        }
        let row = &sums[tau - 1];
        let base = row[grid.len()];
        let r: Vec<f64> = row[..grid.len()].iter().map(|v| v / base).collect();
        let (g, _) = r
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("grid is nonempty");
        best.push(grid[g]);
        ratio.push(r);
    }
    Ok(ThetaSweep {
        grid: grid.to_vec(),
        horizons: horizons.to_vec(),
        ratio,
        best,
    })
}

/// Settings shared by the robustness experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessOptions {
    pub m: usize,
    pub tau_max: usize,
    pub theta: f64,
    pub replications: usize,
    pub seed: u64,
    pub weighting: Weighting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustnessSpec {
    /// Rerun the hindcast at each window size.
    VaryM(Vec<usize>),
    /// Curves from random subsets of `size` technologies (half when `None`).
    HalfDataset { trials: usize, size: Option<usize> },
    /// Extend the horizon cap.
    TauMax(usize),
    /// RWD surrogates with Student innovations at each df.
    FatTails(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowCurve {
    pub m: usize,
    pub curve: Option<ErrorGrowthCurve>,
    /// Analytic expectation at `theta` for each point of `curve`.
    pub predicted: Vec<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsampleBand {
    pub full: ErrorGrowthCurve,
    pub subset_size: usize,
    pub band: XiBand,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FatTailCurve {
    pub df: f64,
    pub xi: Vec<f64>,
    /// `xi` over the normal-innovation surrogate at each horizon.
    pub ratio_to_normal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustnessReport {
    VaryM(Vec<WindowCurve>),
    HalfDataset(SubsampleBand),
    TauMax(WindowCurve),
    FatTails {
        normal: Vec<f64>,
        curves: Vec<FatTailCurve>,
    },
}

fn window_curve(
    corpus: &[TechnologySeries],
    m: usize,
    tau_max: usize,
    opts: &RobustnessOptions,
) -> Result<WindowCurve> {
    let eligible = corpus.iter().filter(|s| s.len() >= m + 2).count();
    if eligible == 0 {
        return Ok(WindowCurve {
            m,
            curve: None,
            predicted: Vec::new(),
            note: Some(format!("no technology has at least m + 2 = {} points", m + 2)),
        });
    }
    let curve = error_growth_corpus(corpus, m, tau_max, opts.weighting)?;
    let predicted = crate::hindcast::predicted_xi(curve.horizons(), m, opts.theta)?;
    Ok(WindowCurve {
        m,
        curve: Some(curve),
        predicted,
        note: (eligible < corpus.len())
            .then(|| format!("{eligible} of {} technologies have at least m + 2 points", corpus.len())),
    })
}

/// Sensitivity checks on window size, corpus composition, horizon cap and
/// innovation tails.
pub fn robustness_suite(
    corpus: &[TechnologySeries],
    spec: &RobustnessSpec,
    opts: &RobustnessOptions,
) -> Result<RobustnessReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput);
    }
    match spec {
        RobustnessSpec::VaryM(ms) => Ok(RobustnessReport::VaryM(
            ms.iter()
                .map(|&m| window_curve(corpus, m, opts.tau_max, opts))
                .collect::<Result<_>>()?,
        )),
        RobustnessSpec::TauMax(cap) => Ok(RobustnessReport::TauMax(window_curve(corpus, opts.m, *cap, opts)?)),
        RobustnessSpec::HalfDataset { trials, size } => half_dataset(corpus, *trials, *size, opts),
        RobustnessSpec::FatTails(dfs) => fat_tails(corpus, dfs, opts),
    }
}

fn half_dataset(
    corpus: &[TechnologySeries],
    trials: usize,
    size: Option<usize>,
    opts: &RobustnessOptions,
) -> Result<RobustnessReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if opts.m <= 3 {
        return Err(Error::WindowTooSmall(opts.m));
    }
    let n = corpus.len();
    let size = size.unwrap_or(n / 2).clamp(1, n);
    let full = error_growth_corpus(corpus, opts.m, opts.tau_max, opts.weighting)?;
    let cap = full.points.last().map(|p| p.tau).unwrap_or(0);
    // per-technology sums, aggregated per subset
    let acc = accumulate_paths(corpus.iter().map(|s| s.log_costs()), n, opts.m, cap);
    let root = Rng::new(opts.seed);
    let rows: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.derive(i);
            let picked = sample(&mut rng, n, size).into_vec();
            let curve = acc.subset(&picked).curve(opts.weighting);
            let mut out = vec![f64::NAN; cap];
            for p in curve.points {
                out[p.tau - 1] = p.xi;
            }
            out
        })
        .collect();
    let mut horizons = Vec::new();
    let mut ensembles = Vec::new();
    for tau in 1..=cap {
        let values: Vec<f64> = rows.iter().map(|r| r[tau - 1]).filter(|v| !v.is_nan()).collect();
        if values.is_empty() {
            continue;
        }
        horizons.push(tau);
        ensembles.push(NullEnsemble::new(format!("xi({tau})"), values, full.xi_at(tau)));
    }
    Ok(RobustnessReport::HalfDataset(SubsampleBand {
        full,
        subset_size: size,
        band: XiBand {
            theta: opts.theta,
            m: opts.m,
            replications: trials,
            horizons,
            ensembles,
        },
    }))
}

fn fat_tails(corpus: &[TechnologySeries], dfs: &[f64], opts: &RobustnessOptions) -> Result<RobustnessReport> {
    let template: Vec<TemplateEntry> = corpus
        .iter()
        .filter(|s| s.len() >= 3)
        .map(TemplateEntry::from_series)
        .collect::<Result<_>>()?;
    let base = SurrogateConfig {
        replications: opts.replications,
        theta: 0.0,
        innovation: Innovation::Normal,
        m: opts.m,
        tau_max: opts.tau_max,
        seed: opts.seed,
        weighting: opts.weighting,
        template,
    };
    let normal = null_xi_band(&base, None)?.means();
    let mut curves = Vec::new();
    for &df in dfs {
        let cfg = SurrogateConfig {
            innovation: Innovation::Student { df },
            ..base.clone()
        };
        let xi = null_xi_band(&cfg, None)?.means();
        let ratio_to_normal = xi.iter().zip(&normal).map(|(a, b)| a / b).collect();
        curves.push(FatTailCurve {
            df,
            xi,
            ratio_to_normal,
        });
    }
    Ok(RobustnessReport::FatTails { normal, curves })
}
