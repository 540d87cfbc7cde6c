//! Applied questions: named-technology forecasts, the probability that one
//! technology becomes cheaper than another, and crossing times of
//! deterministic exponential trends.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::TechnologySeries;
use crate::error::{Error, Result};
use crate::forecasting::{distributional_forecast, ima_variance_factor, DistributionalForecast};
use crate::models::estimate_rwd;
use crate::stats::special::erf;

/// Current state and window estimates of one technology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingTech {
    pub current_log_cost: f64,
    pub mu: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub m: usize,
}

/// Two independent technologies sharing one estimation window and theta.
/// The question asked is whether `tech_a` is cheaper than `tech_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingSpec {
    pub tech_a: CrossingTech,
    pub tech_b: CrossingTech,
    pub theta: f64,
}

impl CrossingSpec {
    pub fn validate(&self) -> Result<()> {
        for t in [&self.tech_a, &self.tech_b] {
            if !(t.k >= 0.0) || !t.k.is_finite() || !t.mu.is_finite() || !t.current_log_cost.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "need finite costs and drifts and K >= 0, got {t:?}"
                )));
            }
            if t.m <= 3 {
                return Err(Error::WindowTooSmall(t.m));
            }
        }
        if self.tech_a.m != self.tech_b.m {
            return Err(Error::MismatchedWindow(self.tech_a.m, self.tech_b.m));
        }
        if !(self.theta > -1.0 && self.theta < 1.0) {
            return Err(Error::ThetaOutOfRange(self.theta));
        }
        Ok(())
    }

    /// Mean and standard deviation of `Z = y_b - y_a` at horizon `tau`.
    pub fn z_moments(&self, tau: f64) -> Result<(f64, f64)> {
        self.validate()?;
        if !(tau >= 1.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon must be >= 1, got {tau}")));
        }
        let (a, b) = (&self.tech_a, &self.tech_b);
        let mean = (b.current_log_cost - a.current_log_cost) + tau * (b.mu - a.mu);
        let th2 = 1.0 + self.theta * self.theta;
        let var = ima_variance_factor(tau, a.m, self.theta) / th2 * (a.k * a.k + b.k * b.k);
        Ok((mean, var.sqrt()))
    }
}

/// P(`tech_a` cheaper than `tech_b` at horizon `tau`), treating both
/// forecast distributions as independent normals.
pub fn crossing_probability(spec: &CrossingSpec, tau: f64) -> Result<f64> {
    let (mean, sd) = spec.z_moments(tau)?;
    if sd == 0.0 {
        return Ok(match mean.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => 1.0,
            Some(std::cmp::Ordering::Less) => 0.0,
            _ => 0.5,
        });
    }
    Ok(0.5 * (1.0 + erf(mean / (std::f64::consts::SQRT_2 * sd))))
}

/// Horizon in `[lo, hi]` where the crossing probability is one half,
/// found by bisection on continuous tau.
pub fn crossing_horizon(spec: &CrossingSpec, lo: f64, hi: f64) -> Result<f64> {
    if !(lo >= 1.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("bad bracket [{lo}, {hi}]")));
    }
    let f = |tau: f64| crossing_probability(spec, tau).map(|p| p - 0.5);
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::InvalidArgument(format!(
            "crossing probability does not pass 1/2 between tau = {lo} and {hi}"
        )));
    }
    let lower_sign = fa.signum();
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let fm = f(mid)?;
        if fm == 0.0 || b - a < 1e-12 {
            return Ok(mid);
        }
        if fm.signum() == lower_sign {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// `(tau, p_cross)` at each requested horizon.
pub fn crossing_curve(spec: &CrossingSpec, horizons: &[f64]) -> Result<Vec<(f64, f64)>> {
    horizons
        .iter()
        .map(|&tau| crossing_probability(spec, tau).map(|p| (tau, p)))
        .collect()
}

/// `tau,p_cross`.
pub fn write_crossing_csv<W: Write>(curve: &[(f64, f64)], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["tau", "p_cross"])?;
    for (tau, p) in curve {
        wtr.write_record([tau.to_string(), p.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Estimation window for a named-technology forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// Every first difference, `m = T - 1`.
    All,
    Value(usize),
}

/// Widths of the shaded bands, in standard deviations.
pub const BAND_WIDTHS: [f64; 3] = [1.0, 1.5, 2.0];

/// Cost interval covering the mass of `±n_sd` normal standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBand {
    pub n_sd: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnologyForecast {
    pub technology: String,
    pub year: i32,
    pub forecast: DistributionalForecast,
    pub bands: Vec<CostBand>,
}

/// Forecasts for `tau = 1..=tau_max` from the last observation.
pub fn forecast_technology(
    series: &TechnologySeries,
    tau_max: usize,
    theta: f64,
    window: Window,
) -> Result<Vec<TechnologyForecast>> {
    let t = series.len();
    let m = match window {
        Window::All => t - 1,
        Window::Value(m) => m,
    };
    if m < 2 {
        return Err(Error::InvalidArgument(format!("window m = {m} too small")));
    }
    if t < m + 1 {
        return Err(Error::TooShort { needed: m + 1, got: t });
    }
    let origin = t - 1;
    let est = estimate_rwd(series, origin, m)?;
    let y_t = series.log_costs()[origin];
    let last_year = series.years()[origin];
    (1..=tau_max)
        .map(|tau| {
            let forecast = distributional_forecast(&est, y_t, tau as f64, theta)?;
            let bands = BAND_WIDTHS
                .iter()
                .map(|&n_sd| {
                    forecast.band(n_sd).map(|(lo, hi)| CostBand {
                        n_sd,
                        lower: lo.exp(),
                        upper: hi.exp(),
                    })
                })
                .collect::<Result<_>>()?;
            Ok(TechnologyForecast {
                technology: series.name.clone(),
                year: i32::try_from(tau)
                    .ok()
                    .and_then(|d| last_year.checked_add(d))
                    .ok_or_else(|| Error::InvalidArgument(format!("horizon {tau} overflows the year")))?,
                forecast,
                bands,
            })
        })
        .collect()
}

/// `tau,q05,q16,q50,q84,q95` in cost units.
pub fn write_quantile_csv<W: Write>(forecasts: &[TechnologyForecast], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["tau", "q05", "q16", "q50", "q84", "q95"])?;
    for f in forecasts {
        let mut row = vec![f.forecast.horizon.to_string()];
        for p in [0.05, 0.16, 0.5, 0.84, 0.95] {
            row.push(f.forecast.quantile_cost(p)?.to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `tau,year,median,lower_1,upper_1,lower_1.5,upper_1.5,lower_2,upper_2`.
pub fn write_band_csv<W: Write>(forecasts: &[TechnologyForecast], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["tau".to_string(), "year".to_string(), "median".to_string()];
    for w in BAND_WIDTHS {
        header.push(format!("lower_{w}"));
        header.push(format!("upper_{w}"));
    }
    wtr.write_record(&header)?;
    for f in forecasts {
        let mut row = vec![
            f.forecast.horizon.to_string(),
            f.year.to_string(),
            f.forecast.median_cost.to_string(),
        ];
        for b in &f.bands {
            row.push(b.lower.to_string());
            row.push(b.upper.to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Years until `f g_f^t` reaches `s g_s^t`: `ln(s/f) / ln(g_f/g_s)`.
pub fn deterministic_trend_crossing(f: f64, g_f: f64, s: f64, g_s: f64) -> Result<f64> {
    for (name, v) in [("f", f), ("g_f", g_f), ("s", s), ("g_s", g_s)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    if f > s {
        return Err(Error::InvalidArgument(format!("start {f} already above target {s}")));
    }
    if f == s {
        return Ok(0.0);
    }
    if g_f <= g_s {
        return Err(Error::NoCrossing { fast: g_f, slow: g_s });
    }
    Ok((s / f).ln() / (g_f / g_s).ln())
}
