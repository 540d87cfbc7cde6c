//! Exhaustive rolling-origin hindcasting.
//!
//! For a series with points `0..T` and window `m`, forecasts are rooted at
//! every origin `o` in `m..T-1` (0-based) and scored at every horizon
//! `1..=min(T-1-o, tau_max)`, giving `(T-m-1)(T-m)/2` forecasts when the
//! horizon is unrestricted.

use std::collections::BTreeMap;
use std::io::Write;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::TechnologySeries;
use crate::error::{Error, Result};
use crate::forecasting::{ima_variance_factor, variance_factors};
use crate::models::estimate_rwd_window;
use crate::stats::{two_sided_t_test, Ecdf};

/// Horizon cap used unless a caller asks otherwise.
pub const DEFAULT_TAU_MAX: usize = 20;

/// One scored forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HindcastRecord {
    pub technology: String,
    pub origin_index: usize,
    pub t0_year: i32,
    pub tau: usize,
    pub m: usize,
    /// Realized minus forecast log cost.
    pub raw_error: f64,
    /// `raw_error / k_hat`.
    pub norm_error: f64,
    pub mu_hat: f64,
    pub k_hat: f64,
}

/// Core enumeration shared by the record builder and the streaming
/// accumulators. Calls `visit(origin, tau, raw_error, mu_hat, k_hat)` for
/// every feasible forecast and returns the number of origins skipped because
/// the window volatility is zero.
pub(crate) fn visit_forecasts<F>(log_costs: &[f64], m: usize, tau_max: usize, mut visit: F) -> usize
where
    F: FnMut(usize, usize, f64, f64, f64),
{
    let t = log_costs.len();
    let mut skipped = 0;
    if t < m + 2 {
        return 0;
    }
    for origin in m..t - 1 {
        let est = estimate_rwd_window(log_costs, origin, m).expect("origin within bounds");
        if est.k_hat == 0.0 {
            skipped += 1;
            continue;
        }
        let y0 = log_costs[origin];
        let horizon = (t - 1 - origin).min(tau_max);
        for tau in 1..=horizon {
            let raw = log_costs[origin + tau] - (y0 + est.mu_hat * tau as f64);
            visit(origin, tau, raw, est.mu_hat, est.k_hat);
        }
    }
    skipped
}

/// Hindcast output for one series.
#[derive(Debug, Clone, Default)]
pub struct SeriesHindcast {
    pub records: Vec<HindcastRecord>,
    /// Origins dropped because every difference in the window was equal.
    pub skipped_windows: usize,
    /// Set when the series is too short for even one forecast.
    pub reason: Option<String>,
}

fn check_window(m: usize) -> Result<()> {
    if m <= 3 {
        return Err(Error::WindowTooSmall(m));
    }
    Ok(())
}

/// All feasible forecasts for one series with window `m`, horizons capped
/// at `tau_max` (`usize::MAX` for no cap).
pub fn hindcast_series(series: &TechnologySeries, m: usize, tau_max: usize) -> Result<SeriesHindcast> {
    check_window(m)?;
    let t = series.len();
    if t < m + 2 {
        return Ok(SeriesHindcast {
            reason: Some(format!(
                "{}: {} points, window m = {} needs at least {}",
                series.name,
                t,
                m,
                m + 2
            )),
            ..Default::default()
        });
    }
    let mut records = Vec::new();
    let years = series.years();
    let skipped = visit_forecasts(series.log_costs(), m, tau_max, |origin, tau, raw, mu_hat, k_hat| {
        records.push(HindcastRecord {
            technology: series.name.clone(),
            origin_index: origin,
            t0_year: years[origin],
            tau,
            m,
            raw_error: raw,
            norm_error: raw / k_hat,
            mu_hat,
            k_hat,
        });
    });
    if skipped > 0 {
        warn!("{}: skipped {} windows with zero volatility", series.name, skipped);
    }
    Ok(SeriesHindcast {
        records,
        skipped_windows: skipped,
        reason: None,
    })
}

/// Hindcast output for a corpus, records sorted by (technology, origin, tau).
#[derive(Debug, Clone, Default)]
pub struct CorpusHindcast {
    pub records: Vec<HindcastRecord>,
    pub skipped_windows: usize,
    /// Technologies too short for the window.
    pub too_short: Vec<String>,
}

/// Hindcast every series in parallel. Output does not depend on corpus
/// order or thread count.
pub fn hindcast_corpus(corpus: &[TechnologySeries], m: usize, tau_max: usize) -> Result<CorpusHindcast> {
    check_window(m)?;
    let parts: Vec<SeriesHindcast> = corpus
        .par_iter()
        .map(|s| hindcast_series(s, m, tau_max))
        .collect::<Result<_>>()?;
    let mut out = CorpusHindcast::default();
    for (series, part) in corpus.iter().zip(parts) {
        out.skipped_windows += part.skipped_windows;
        if part.reason.is_some() {
            out.too_short.push(series.name.clone());
        }
        out.records.extend(part.records);
    }
    out.records.sort_by(|a, b| {
        (a.technology.as_str(), a.origin_index, a.tau).cmp(&(b.technology.as_str(), b.origin_index, b.tau))
    });
    out.too_short.sort();
    Ok(out)
}

/// How records from different technologies are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Every forecast counts once.
    #[default]
    Pooled,
    /// Average of per-technology means, so long series do not dominate.
    EqualTech,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthPoint {
    pub tau: usize,
    pub n_forecasts: usize,
    pub n_technologies: usize,
    /// Mean squared normalized error at this horizon.
    pub xi: f64,
}

/// Empirical mean squared normalized forecast error by horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorGrowthCurve {
    pub weighting: Weighting,
    pub points: Vec<GrowthPoint>,
}

impl ErrorGrowthCurve {
    pub fn xi_at(&self, tau: usize) -> Option<f64> {
        self.points.iter().find(|p| p.tau == tau).map(|p| p.xi)
    }

    pub fn horizons(&self) -> impl Iterator<Item = usize> + '_ {
        self.points.iter().map(|p| p.tau)
    }
}

/// Running sums of squared normalized errors per (horizon, technology).
#[derive(Debug, Clone)]
pub(crate) struct XiAccumulator {
    tau_max: usize,
    // [tau - 1][technology] -> (sum of squares, count)
    cells: Vec<Vec<(f64, usize)>>,
}

impl XiAccumulator {
    pub(crate) fn new(n_technologies: usize, tau_max: usize) -> Self {
        Self {
            tau_max,
            cells: vec![vec![(0.0, 0); n_technologies]; tau_max],
        }
    }

    pub(crate) fn add(&mut self, technology: usize, tau: usize, norm_error: f64) {
        if tau == 0 || tau > self.tau_max {
            return;
        }
        let cell = &mut self.cells[tau - 1][technology];
        cell.0 += norm_error * norm_error;
        cell.1 += 1;
    }

    /// Accumulator restricted to the given technologies.
    pub(crate) fn subset(&self, technologies: &[usize]) -> XiAccumulator {
        XiAccumulator {
            tau_max: self.tau_max,
            cells: self
                .cells
                .iter()
                .map(|row| technologies.iter().map(|&j| row[j]).collect())
                .collect(),
        }
    }

    pub(crate) fn curve(&self, weighting: Weighting) -> ErrorGrowthCurve {
        let mut points = Vec::new();
        for (i, row) in self.cells.iter().enumerate() {
            let n_forecasts: usize = row.iter().map(|c| c.1).sum();
            if n_forecasts == 0 {
                continue;
            }
            let active = row.iter().filter(|c| c.1 > 0);
            let n_technologies = active.clone().count();
            let xi = match weighting {
                Weighting::Pooled => row.iter().map(|c| c.0).sum::<f64>() / n_forecasts as f64,
                Weighting::EqualTech => active.map(|c| c.0 / c.1 as f64).sum::<f64>() / n_technologies as f64,
            };
            points.push(GrowthPoint {
                tau: i + 1,
                n_forecasts,
                n_technologies,
                xi,
            });
        }
        ErrorGrowthCurve { weighting, points }
    }
}

fn technology_index(records: &[HindcastRecord]) -> (Vec<usize>, usize) {
    let mut names: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        let next = names.len();
        names.entry(r.technology.as_str()).or_insert(next);
    }
    let idx = records.iter().map(|r| names[r.technology.as_str()]).collect();
    (idx, names.len())
}

/// Mean squared normalized error per horizon `1..=tau_max`. Horizons with
/// no records are left out.
pub fn error_growth(records: &[HindcastRecord], tau_max: usize, weighting: Weighting) -> Result<ErrorGrowthCurve> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let cap = tau_max.min(records.iter().map(|r| r.tau).max().unwrap_or(0));
    let (idx, n_tech) = technology_index(records);
    let mut acc = XiAccumulator::new(n_tech, cap);
    for (r, &j) in records.iter().zip(&idx) {
        acc.add(j, r.tau, r.norm_error);
    }
    Ok(acc.curve(weighting))
}

/// Analytic expected curve `(m-1)/(m-3) A*/(1+theta^2)` at the given horizons.
pub fn predicted_xi(horizons: impl IntoIterator<Item = usize>, m: usize, theta: f64) -> Result<Vec<f64>> {
    horizons
        .into_iter()
        .map(|tau| variance_factors(tau as f64, m, theta).map(|f| f.xi))
        .collect()
}

/// Whether rescaled errors are pooled across horizons or kept apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    All,
    ByHorizon,
}

/// Empirical distribution of rescaled errors, for one horizon or all.
#[derive(Debug, Clone)]
pub struct RescaledDistribution {
    pub horizon: Option<usize>,
    pub ecdf: Ecdf,
}

fn uniform_window(records: &[HindcastRecord]) -> Result<usize> {
    let m = records.first().ok_or(Error::EmptyInput)?.m;
    if let Some(other) = records.iter().find(|r| r.m != m) {
        return Err(Error::MismatchedWindow(m, other.m));
    }
    check_window(m)?;
    Ok(m)
}

/// Rescaled errors `(E/K_hat) / sqrt(A*(tau)/(1+theta^2))` in record order.
pub fn rescaled_errors(records: &[HindcastRecord], theta: f64) -> Result<Vec<f64>> {
    let m = uniform_window(records)?;
    if !(theta > -1.0 && theta < 1.0) {
        return Err(Error::ThetaOutOfRange(theta));
    }
    let scale = |tau: usize| (ima_variance_factor(tau as f64, m, theta) / (1.0 + theta * theta)).sqrt();
    Ok(records.iter().map(|r| r.norm_error / scale(r.tau)).collect())
}

pub fn pooled_rescaled_distribution(
    records: &[HindcastRecord],
    theta: f64,
    split: Split,
) -> Result<Vec<RescaledDistribution>> {
    let eps = rescaled_errors(records, theta)?;
    Ok(match split {
        Split::All => vec![RescaledDistribution {
            horizon: None,
            ecdf: Ecdf::new(eps),
        }],
        Split::ByHorizon => {
            let mut by: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for (r, e) in records.iter().zip(eps) {
                by.entry(r.tau).or_default().push(e);
            }
            by.into_iter()
                .map(|(tau, v)| RescaledDistribution {
                    horizon: Some(tau),
                    ecdf: Ecdf::new(v),
                })
                .collect()
        }
    })
}

/// Nominal two-sided p-value for zero mean rescaled error at horizon `tau`.
///
/// Forecasts from overlapping windows are correlated, so this p-value is
/// nominal and overstates the evidence against unbiasedness.
pub fn bias_test(records: &[HindcastRecord], tau: usize, theta: f64) -> Result<f64> {
    let at: Vec<HindcastRecord> = records.iter().filter(|r| r.tau == tau).cloned().collect();
    if at.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: at.len(),
        });
    }
    two_sided_t_test(&rescaled_errors(&at, theta)?)
}

/// Number of forecasts at horizon `tau` for a series of length `t`.
pub fn feasible_count(t: usize, m: usize, tau: usize) -> usize {
    (t + 1).saturating_sub(m + tau + 1)
}

/// Error growth computed straight from the series without keeping records.
/// Same numbers as [`hindcast_corpus`] followed by [`error_growth`].
pub fn error_growth_corpus(
    corpus: &[TechnologySeries],
    m: usize,
    tau_max: usize,
    weighting: Weighting,
) -> Result<ErrorGrowthCurve> {
    check_window(m)?;
    let cap = tau_max.min(corpus.iter().map(|s| s.len()).max().unwrap_or(0));
    let acc = accumulate_paths(corpus.iter().map(|s| s.log_costs()), corpus.len(), m, cap);
    let curve = acc.curve(weighting);
    if curve.points.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(curve)
}

pub(crate) fn accumulate_paths<'a>(
    paths: impl Iterator<Item = &'a [f64]>,
    n: usize,
    m: usize,
    tau_max: usize,
) -> XiAccumulator {
    let mut acc = XiAccumulator::new(n, tau_max);
    for (j, y) in paths.enumerate() {
        visit_forecasts(y, m, tau_max, |_, tau, raw, _, k| acc.add(j, tau, raw / k));
    }
    acc
}

/// Pooled rescaled errors for every forecast in the corpus, in corpus,
/// origin, horizon order. Streaming counterpart of [`rescaled_errors`].
pub fn rescaled_errors_corpus(corpus: &[TechnologySeries], m: usize, tau_max: usize, theta: f64) -> Result<Vec<f64>> {
    check_window(m)?;
    let mut out = Vec::new();
    for s in corpus {
        push_rescaled(s.log_costs(), m, tau_max, theta, &mut out)?;
    }
    Ok(out)
}

pub(crate) fn push_rescaled(y: &[f64], m: usize, tau_max: usize, theta: f64, out: &mut Vec<f64>) -> Result<()> {
    let cap = tau_max.min(y.len());
    let scales: Vec<f64> = (1..=cap)
        .map(|tau| variance_factors(tau as f64, m, theta).map(|f| f.scale()))
        .collect::<Result<_>>()?;
    visit_forecasts(y, m, tau_max, |_, tau, raw, _, k| out.push(raw / k / scales[tau - 1]));
    Ok(())
}

#[derive(Serialize)]
struct RecordRow<'a> {
    technology: &'a str,
    t0_year: i32,
    tau: usize,
    raw_error: f64,
    norm_error: f64,
    mu_hat: f64,
    #[serde(rename = "K_hat")]
    k_hat: f64,
}

/// `technology,t0_year,tau,raw_error,norm_error,mu_hat,K_hat`.
pub fn write_records_csv<W: Write>(records: &[HindcastRecord], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in records {
        wtr.serialize(RecordRow {
            technology: &r.technology,
            t0_year: r.t0_year,
            tau: r.tau,
            raw_error: r.raw_error,
            norm_error: r.norm_error,
            mu_hat: r.mu_hat,
            k_hat: r.k_hat,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct GrowthRow {
    tau: usize,
    n_forecasts: usize,
    n_technologies: usize,
    xi_empirical: f64,
    xi_pred_theta0: f64,
    xi_pred_theta: Option<f64>,
}

/// `tau,n_forecasts,n_technologies,xi_empirical,xi_pred_theta0,xi_pred_theta`.
///
/// `xi_pred_theta` comes from `theta_curve` when given (e.g. a surrogate
/// mean), else from the analytic formula at `theta`, else is left empty.
pub fn write_growth_csv<W: Write>(
    curve: &ErrorGrowthCurve,
    m: usize,
    theta: Option<f64>,
    theta_curve: Option<&[f64]>,
    writer: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for (i, p) in curve.points.iter().enumerate() {
        let pred_theta = match (theta_curve, theta) {
            (Some(c), _) => c.get(i).copied(),
            (None, Some(th)) => Some(variance_factors(p.tau as f64, m, th)?.xi),
            (None, None) => None,
        };
        wtr.serialize(GrowthRow {
            tau: p.tau,
            n_forecasts: p.n_forecasts,
            n_technologies: p.n_technologies,
            xi_empirical: p.xi,
            xi_pred_theta0: variance_factors(p.tau as f64, m, 0.0)?.xi,
            xi_pred_theta: pred_theta,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn series(name: &str, y: Vec<f64>) -> TechnologySeries {
        TechnologySeries::from_log_costs(name, "", 2000, y).unwrap()
    }

    fn wiggly(name: &str, t: usize) -> TechnologySeries {
        series(
            name,
            (0..t).map(|i| -0.1 * i as f64 + 0.03 * ((i * i) % 7) as f64).collect(),
        )
    }

    #[test]
    fn eight_points_window_five() {
        let h = hindcast_series(&wiggly("a", 8), 5, usize::MAX).unwrap();
        let keys: Vec<(usize, usize)> = h.records.iter().map(|r| (r.origin_index, r.tau)).collect();
        // 1-based origins 6 and 7 are 0-based 5 and 6
        assert_eq!(keys, vec![(5, 1), (5, 2), (6, 1)]);
        assert_eq!(h.records[0].t0_year, 2005);
    }

    #[test]
    fn no_feasible_origin() {
        let h = hindcast_series(&wiggly("a", 6), 5, usize::MAX).unwrap();
        assert!(h.records.is_empty());
        assert!(h.reason.is_some());
        assert!(matches!(
            hindcast_series(&wiggly("a", 9), 3, 20),
            Err(Error::WindowTooSmall(3))
        ));
    }

    #[test]
    fn count_formula() {
        for t in 7..40 {
            for m in 4..(t - 1) {
                let n = hindcast_series(&wiggly("a", t), m, usize::MAX).unwrap().records.len();
                assert_eq!(n, (t - m - 1) * (t - m) / 2, "t = {t}, m = {m}");
            }
        }
    }

    #[test]
    fn zero_volatility_windows_are_skipped() {
        let mut y: Vec<f64> = (0..8).map(|i| -0.05 * i as f64).collect();
        y.extend([-0.2, -0.5, -0.3]);
        let h = hindcast_series(&series("flat", y), 4, usize::MAX).unwrap();
        assert!(h.skipped_windows > 0);
        assert!(h.records.iter().all(|r| r.k_hat > 0.0));
    }

    #[test]
    fn raw_errors_recompute() {
        let s = wiggly("a", 30);
        let h = hindcast_series(&s, 5, 20).unwrap();
        let y = s.log_costs();
        for r in &h.records {
            let expect = y[r.origin_index + r.tau] - (y[r.origin_index] + r.mu_hat * r.tau as f64);
            assert_abs_diff_eq!(r.raw_error, expect, epsilon = 1e-12);
            assert!(r.tau <= 20);
        }
    }

    #[test]
    fn corpus_order_does_not_matter() {
        let a = vec![wiggly("a", 20), wiggly("b", 15), wiggly("c", 11)];
        let b = vec![a[2].clone(), a[0].clone(), a[1].clone()];
        let ha = hindcast_corpus(&a, 5, 20).unwrap();
        let hb = hindcast_corpus(&b, 5, 20).unwrap();
        assert_eq!(ha.records, hb.records);
    }

    fn record(tech: &str, tau: usize, norm: f64) -> HindcastRecord {
        HindcastRecord {
            technology: tech.into(),
            origin_index: 5,
            t0_year: 0,
            tau,
            m: 5,
            raw_error: norm,
            norm_error: norm,
            mu_hat: 0.0,
            k_hat: 1.0,
        }
    }

    #[test]
    fn constant_errors_give_constant_xi() {
        let recs: Vec<_> = (1..=4)
            .flat_map(|tau| [record("a", tau, 1.5), record("b", tau, -1.5)])
            .collect();
        let curve = error_growth(&recs, 20, Weighting::Pooled).unwrap();
        assert_eq!(curve.points.len(), 4);
        for p in &curve.points {
            assert_abs_diff_eq!(p.xi, 2.25, epsilon = 1e-15);
            assert_eq!(p.n_technologies, 2);
        }
        assert!(error_growth(&[], 20, Weighting::Pooled).is_err());
    }

    #[test]
    fn weighting_modes() {
        let recs = vec![
            record("a", 1, 1.0),
            record("a", 1, 1.0),
            record("a", 1, 1.0),
            record("b", 1, 3.0),
        ];
        let pooled = error_growth(&recs, 20, Weighting::Pooled).unwrap();
        let equal = error_growth(&recs, 20, Weighting::EqualTech).unwrap();
        assert_abs_diff_eq!(pooled.xi_at(1).unwrap(), 12.0 / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(equal.xi_at(1).unwrap(), (1.0 + 9.0) / 2.0, epsilon = 1e-15);
        // equal counts: modes agree
        let even = vec![
            record("a", 2, 1.0),
            record("a", 2, 2.0),
            record("b", 2, 3.0),
            record("b", 2, 0.5),
        ];
        let p = error_growth(&even, 20, Weighting::Pooled).unwrap().xi_at(2).unwrap();
        let e = error_growth(&even, 20, Weighting::EqualTech).unwrap().xi_at(2).unwrap();
        assert_abs_diff_eq!(p, e, epsilon = 1e-14);
    }

    #[test]
    fn larger_theta_contracts_rescaled_errors() {
        // A*/(1+theta^2) is increasing on [0, 1) only from tau = 2 on; at
        // tau = 1 its slope at zero is -2/m^2.
        for m in 4..30 {
            for tau in 2..25 {
                let mut prev = f64::NEG_INFINITY;
                for i in 0..100 {
                    let th = i as f64 / 100.0;
                    let v = ima_variance_factor(tau as f64, m, th) / (1.0 + th * th);
                    assert!(v > prev, "tau = {tau}, m = {m}, theta = {th}");
                    prev = v;
                }
            }
            let th = 0.001;
            assert!(ima_variance_factor(1.0, m, th) / (1.0 + th * th) < ima_variance_factor(1.0, m, 0.0));
        }
        let recs: Vec<_> = (2..=6).map(|tau| record("a", tau, 2.0 - tau as f64 * 0.7)).collect();
        let small = rescaled_errors(&recs, 0.1).unwrap();
        let large = rescaled_errors(&recs, 0.7).unwrap();
        for (s, l) in small.iter().zip(&large) {
            assert!(l.abs() < s.abs());
        }
    }

    #[test]
    fn by_horizon_split() {
        let recs: Vec<_> = (1..=3)
            .flat_map(|tau| [record("a", tau, 1.0), record("b", tau, -1.0)])
            .collect();
        let parts = pooled_rescaled_distribution(&recs, 0.0, Split::ByHorizon).unwrap();
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[1].horizon, Some(2));
        assert_eq!(parts[1].ecdf.len(), 2);
        let all = pooled_rescaled_distribution(&recs, 0.0, Split::All).unwrap();
        assert_eq!(all[0].ecdf.len(), 6);
        let mut mixed = recs.clone();
        mixed[0].m = 6;
        assert!(matches!(rescaled_errors(&mixed, 0.0), Err(Error::MismatchedWindow(..))));
    }

    #[test]
    fn bias_examples() {
        let sym = vec![
            record("a", 1, 1.0),
            record("b", 1, -1.0),
            record("c", 1, 2.0),
            record("d", 1, -2.0),
        ];
        assert_abs_diff_eq!(bias_test(&sym, 1, 0.0).unwrap(), 1.0, epsilon = 1e-12);
        let pos: Vec<_> = (0..30).map(|i| record("a", 1, 1.0 + 0.1 * (i % 5) as f64)).collect();
        assert!(bias_test(&pos, 1, 0.0).unwrap() < 1e-6);
        assert!(bias_test(&pos, 2, 0.0).is_err());
    }
}
