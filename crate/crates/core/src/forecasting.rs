//! Point forecasts, forecast-error variance factors and distributional
//! forecasts.
//!
//! With drift and volatility estimated on a trailing window of `m`
//! differences, the error of the random-walk point forecast `tau` steps
//! ahead has variance `K^2 A` where `A = tau + tau^2/m`. With IMA(1,1)
//! increments this becomes `sigma^2 A*`. Dividing the normalized error
//! `E / K_hat` by `sqrt(A* / (1 + theta^2))` gives a quantity that is
//! approximately Student t with `m - 1` degrees of freedom, whatever the
//! technology or horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::RwdEstimate;
use crate::stats::{normal_cdf, student_t_cdf_unchecked, student_t_quantile};

/// `A = tau + tau^2 / m`.
pub fn rwd_variance_factor(tau: f64, m: usize) -> f64 {
    tau + tau * tau / m as f64
}

/// `A* = -2 theta + (1 + 2 (m-1) theta / m + theta^2) (tau + tau^2/m)`.
pub fn ima_variance_factor(tau: f64, m: usize, theta: f64) -> f64 {
    let mf = m as f64;
    -2.0 * theta + (1.0 + 2.0 * (mf - 1.0) * theta / mf + theta * theta) * rwd_variance_factor(tau, m)
}

/// `A*` as the unsimplified sum of squared innovation weights.
///
/// Kept as an independent check on [`ima_variance_factor`].
pub fn a_star_expanded(tau: f64, m: usize, theta: f64) -> f64 {
    let mf = m as f64;
    (tau * theta / mf).powi(2)
        + (mf - 1.0) * (tau * (1.0 + theta) / mf).powi(2)
        + (theta - tau / mf).powi(2)
        + (tau - 1.0) * (1.0 + theta).powi(2)
        + 1.0
}

/// Variance factors at one (horizon, window, theta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceFactors {
    pub tau: f64,
    pub m: usize,
    pub theta: f64,
    pub a: f64,
    pub a_star: f64,
    /// Expected mean squared normalized error,
    /// `(m-1)/(m-3) * A* / (1 + theta^2)`.
    pub xi: f64,
}

impl VarianceFactors {
    /// Standard deviation of the normalized error in units of `K_hat`,
    /// `sqrt(A* / (1 + theta^2))`.
    pub fn scale(&self) -> f64 {
        (self.a_star / (1.0 + self.theta * self.theta)).sqrt()
    }
}

pub fn variance_factors(tau: f64, m: usize, theta: f64) -> Result<VarianceFactors> {
    if m <= 3 {
        return Err(Error::WindowTooSmall(m));
    }
    if !(tau >= 1.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be >= 1, got {tau}")));
    }
    if !(theta > -1.0 && theta < 1.0) {
        return Err(Error::ThetaOutOfRange(theta));
    }
    let a = rwd_variance_factor(tau, m);
    let a_star = ima_variance_factor(tau, m, theta);
    let mf = m as f64;
    Ok(VarianceFactors {
        tau,
        m,
        theta,
        a,
        a_star,
        xi: (mf - 1.0) / (mf - 3.0) * a_star / (1.0 + theta * theta),
    })
}

/// `y_t + mu_hat * tau`. `tau = 0` returns `y_t`.
pub fn point_forecast(est: &RwdEstimate, y_t: f64, tau: f64) -> f64 {
    y_t + est.mu_hat * tau
}

/// `E / K_hat`.
pub fn normalize_error(raw_error: f64, est: &RwdEstimate) -> Result<f64> {
    if !(est.k_hat > 0.0) {
        return Err(Error::DegenerateVolatility);
    }
    Ok(raw_error / est.k_hat)
}

/// `(E / K_hat) / sqrt(A* / (1 + theta^2))`, approximately t(m-1).
pub fn rescale_error(norm_error: f64, factors: &VarianceFactors) -> f64 {
    norm_error / factors.scale()
}

/// Forecast distribution of a future log cost.
///
/// Location `y_t + mu_hat tau`, scale `K_hat sqrt(A*/(1+theta^2))`. Quantiles
/// and tail probabilities use Student t with `m - 1` degrees of freedom,
/// which tends to the normal for long windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionalForecast {
    pub origin_log_cost: f64,
    pub horizon: f64,
    pub mean_log: f64,
    pub sd_log: f64,
    pub df: f64,
    pub median_cost: f64,
}

impl DistributionalForecast {
    /// Quantile of the log cost.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidProbability(p));
        }
        if self.sd_log == 0.0 {
            return Ok(self.mean_log);
        }
        Ok(self.mean_log + self.sd_log * student_t_quantile(p, self.df)?)
    }

    pub fn quantile_cost(&self, p: f64) -> Result<f64> {
        self.quantile(p).map(f64::exp)
    }

    /// P(log cost >= level).
    pub fn prob_exceeds(&self, log_level: f64) -> f64 {
        if self.sd_log == 0.0 {
            return if self.mean_log >= log_level { 1.0 } else { 0.0 };
        }
        student_t_cdf_unchecked((self.mean_log - log_level) / self.sd_log, self.df)
    }

    /// Same tail probability under the large-window normal limit.
    pub fn prob_exceeds_normal(&self, log_level: f64) -> f64 {
        if self.sd_log == 0.0 {
            return if self.mean_log >= log_level { 1.0 } else { 0.0 };
        }
        normal_cdf((self.mean_log - log_level) / self.sd_log)
    }

    /// Log-cost interval carrying the probability mass of `±n_sd` normal
    /// standard deviations.
    pub fn band(&self, n_sd: f64) -> Result<(f64, f64)> {
        let lo = normal_cdf(-n_sd.abs());
        if lo <= 0.0 {
            return Err(Error::InvalidArgument(format!("band width {n_sd} too wide")));
        }
        Ok((self.quantile(lo)?, self.quantile(1.0 - lo)?))
    }

    pub fn to_record(&self, technology: &str, origin_year: i32) -> Result<ForecastRecord> {
        let q = |p| self.quantile_cost(p);
        Ok(ForecastRecord {
            technology: technology.to_string(),
            origin_year,
            horizon: self.horizon,
            mean_log: self.mean_log,
            sd_log: self.sd_log,
            quantiles: Quantiles {
                p05: q(0.05)?,
                p16: q(0.16)?,
                p50: q(0.5)?,
                p84: q(0.84)?,
                p95: q(0.95)?,
            },
            median_cost: self.median_cost,
        })
    }
}

/// Forecast of `y_{t+tau}` from the window estimate `est` and global `theta`.
/// Requires `m >= 2` so the t distribution has a degree of freedom.
pub fn distributional_forecast(est: &RwdEstimate, y_t: f64, tau: f64, theta: f64) -> Result<DistributionalForecast> {
    if est.m < 2 {
        return Err(Error::InvalidArgument(format!("window m = {} too small", est.m)));
    }
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be >= 0, got {tau}")));
    }
    if !(est.k_hat >= 0.0) {
        return Err(Error::InvalidArgument("volatility must be >= 0".into()));
    }
    if !(theta > -1.0 && theta < 1.0) {
        return Err(Error::ThetaOutOfRange(theta));
    }
    let mean_log = point_forecast(est, y_t, tau);
    let sd_log = if tau == 0.0 {
        0.0
    } else {
        est.k_hat * (ima_variance_factor(tau, est.m, theta) / (1.0 + theta * theta)).sqrt()
    };
    Ok(DistributionalForecast {
        origin_log_cost: y_t,
        horizon: tau,
        mean_log,
        sd_log,
        df: est.m as f64 - 1.0,
        median_cost: mean_log.exp(),
    })
}

/// Cost-unit quantiles of a serialized forecast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p05: f64,
    pub p16: f64,
    pub p50: f64,
    pub p84: f64,
    pub p95: f64,
}

/// Serialized forecast: one technology, one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastRecord {
    pub technology: String,
    pub origin_year: i32,
    pub horizon: f64,
    pub mean_log: f64,
    pub sd_log: f64,
    pub quantiles: Quantiles,
    pub median_cost: f64,
}

impl ForecastRecord {
    fn validate(&self) -> Result<()> {
        let q = &self.quantiles;
        let values = [
            self.horizon,
            self.mean_log,
            self.sd_log,
            self.median_cost,
            q.p05,
            q.p16,
            q.p50,
            q.p84,
            q.p95,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{}: non-finite forecast field",
                self.technology
            )));
        }
        if self.sd_log < 0.0 || self.horizon < 0.0 || self.median_cost <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "{}: negative horizon/sd or nonpositive median",
                self.technology
            )));
        }
        if !(q.p05 <= q.p16 && q.p16 <= q.p50 && q.p50 <= q.p84 && q.p84 <= q.p95) {
            return Err(Error::InvalidArgument(format!(
                "{}: quantiles not monotone",
                self.technology
            )));
        }
        Ok(())
    }
}

/// Parse a forecast document: a single record or an array of records.
pub fn parse_forecast_json(text: &str) -> Result<Vec<ForecastRecord>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Doc {
        One(ForecastRecord),
        Many(Vec<ForecastRecord>),
    }
    let records = match serde_json::from_str::<Doc>(text)? {
        Doc::One(r) => vec![r],
        Doc::Many(rs) => rs,
    };
    for r in &records {
        r.validate()?;
    }
    Ok(records)
}
