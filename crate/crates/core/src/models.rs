//! Generative models for log-cost series: random walk with drift (RWD) and
//! IMA(1,1), with estimation and simulation.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::dataset::TechnologySeries;
use crate::error::{Error, Result};
use crate::stats::Rng;

/// `|theta|` within this distance of 1 counts as a boundary estimate.
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;

/// Drift and volatility estimated on the `m` first differences ending at
/// `origin_index`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwdEstimate {
    pub mu_hat: f64,
    pub k_hat: f64,
    pub m: usize,
    pub origin_index: usize,
}

/// Rolling-window estimate from a series.
pub fn estimate_rwd(series: &TechnologySeries, origin_index: usize, m: usize) -> Result<RwdEstimate> {
    estimate_rwd_window(series.log_costs(), origin_index, m)
}

/// Rolling-window estimate on raw log costs.
///
/// `mu_hat = (y[o] - y[o-m]) / m` and `k_hat^2` is the Bessel-corrected
/// sample variance of the `m` differences. A spread below 1e-12 relative to
/// the increments is rounding noise and reported as exactly zero.
pub fn estimate_rwd_window(log_costs: &[f64], origin_index: usize, m: usize) -> Result<RwdEstimate> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "window m = {m} leaves the volatility undefined; need m >= 2"
        )));
    }
    if origin_index < m || origin_index >= log_costs.len() {
        return Err(Error::WindowOutOfRange {
            origin: origin_index,
            m,
            len: log_costs.len(),
        });
    }
    let window = &log_costs[origin_index - m..=origin_index];
    let mu_hat = (window[m] - window[0]) / m as f64;
    let mut ss = 0.0;
    let mut scale = 0.0_f64;
    for w in window.windows(2) {
        let d = w[1] - w[0];
        ss += (d - mu_hat) * (d - mu_hat);
        scale = scale.max(d.abs());
    }
    let mut k_hat = (ss / (m as f64 - 1.0)).sqrt();
    if k_hat <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        k_hat = 0.0;
    }
    Ok(RwdEstimate {
        mu_hat,
        k_hat,
        m,
        origin_index,
    })
}

/// IMA(1,1) parameters: `y_t - y_{t-1} = mu + v_t + theta v_{t-1}`,
/// `v_t ~ N(0, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImaParams {
    pub mu: f64,
    pub sigma: f64,
    pub theta: f64,
    /// Standard deviation of the increments, `sigma * sqrt(1 + theta^2)`.
    pub k: f64,
    pub boundary_flag: bool,
}

impl ImaParams {
    pub fn new(mu: f64, sigma: f64, theta: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() || !mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need finite mu and sigma >= 0, got mu = {mu}, sigma = {sigma}"
            )));
        }
        if !(-1.0..=1.0).contains(&theta) {
            return Err(Error::ThetaOutOfRange(theta));
        }
        Ok(Self {
            mu,
            sigma,
            theta,
            k: sigma * (1.0 + theta * theta).sqrt(),
            boundary_flag: theta.abs() >= 1.0 - BOUNDARY_TOLERANCE,
        })
    }

    /// Parameters with a given increment standard deviation `k`.
    pub fn with_increment_sd(mu: f64, k: f64, theta: f64) -> Result<Self> {
        Self::new(mu, k / (1.0 + theta * theta).sqrt(), theta)
    }
}

// Profile the conditional likelihood at a fixed theta. With v_0 = 0 the
// residuals are v_t = a_t - mu b_t, so mu and sigma^2 have closed forms.
fn profile(diffs: &[f64], theta: f64) -> (f64, f64, f64) {
    let (mut a, mut b) = (0.0, 0.0);
    let (mut sab, mut sbb) = (0.0, 0.0);
    let mut avals = Vec::with_capacity(diffs.len());
    let mut bvals = Vec::with_capacity(diffs.len());
    for &d in diffs {
        a = d - theta * a;
        b = 1.0 - theta * b;
        sab += a * b;
        sbb += b * b;
        avals.push(a);
        bvals.push(b);
    }
    let mu = sab / sbb;
    let ssr: f64 = avals.iter().zip(&bvals).map(|(a, b)| (a - mu * b) * (a - mu * b)).sum();
    let n = diffs.len() as f64;
    let sigma2 = ssr / n;
    let ll = -0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    (mu, sigma2, ll)
}

/// Gaussian conditional maximum likelihood for IMA(1,1) with free drift.
///
/// The innovation recursion starts at `v_0 = 0`. For each theta the drift
/// and innovation variance are profiled out analytically; theta itself is
/// located on a 0.01 grid over [-1, 1] and then refined by golden-section
/// search around the best grid point. Solutions at `|theta| = 1` are
/// returned with `boundary_flag` set.
pub fn fit_ima_mle(series: &TechnologySeries) -> Result<ImaParams> {
    fit_ima_mle_diffs(&series.diffs())
}

pub(crate) fn fit_ima_mle_diffs(diffs: &[f64]) -> Result<ImaParams> {
    if diffs.len() < 3 {
        return Err(Error::TooShort {
            needed: 4,
            got: diffs.len() + 1,
        });
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let spread = diffs.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max);
    let scale = diffs.iter().map(|d| d.abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        // deterministic trend: no noise to attribute to an MA term
        return ImaParams::new(mean, 0.0, 0.0);
    }

    let ll_at = |theta: f64| -> Result<f64> {
        let (_, _, ll) = profile(diffs, theta);
        if ll.is_finite() {
            Ok(ll)
        } else {
            Err(Error::NonFiniteLikelihood { theta })
        }
    };

    let mut best_theta = 0.0;
    let mut best_ll = f64::NEG_INFINITY;
    for i in -100..=100 {
        let theta = i as f64 / 100.0;
        let ll = ll_at(theta)?;
        if ll > best_ll {
            best_ll = ll;
            best_theta = theta;
        }
    }

    let (mut lo, mut hi) = ((best_theta - 0.01).max(-1.0), (best_theta + 0.01).min(1.0));
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = ll_at(x1)?;
    let mut f2 = ll_at(x2)?;
    while hi - lo > 1e-10 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = ll_at(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = ll_at(x1)?;
        }
    }
    for candidate in [0.5 * (lo + hi), lo, hi] {
        let ll = ll_at(candidate)?;
        if ll > best_ll {
            best_ll = ll;
            best_theta = candidate;
        }
    }
    let (mu, sigma2, _) = profile(diffs, best_theta);
    ImaParams::new(mu, sigma2.sqrt(), best_theta)
}

/// Distribution of the random-walk increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum Innovation {
    #[default]
    Normal,
    /// Student t rescaled to unit variance; needs `df > 2`.
    Student { df: f64 },
}

impl Innovation {
    fn validate(self) -> Result<()> {
        match self {
            Innovation::Normal => Ok(()),
            Innovation::Student { df } if df > 2.0 && df.is_finite() => Ok(()),
            Innovation::Student { df } => Err(Error::InvalidArgument(format!(
                "Student innovations need df > 2 for a finite variance, got {df}"
            ))),
        }
    }
}

enum UnitNoise {
    Normal,
    Student(StudentT<f64>, f64),
}

impl UnitNoise {
    fn new(innovation: Innovation) -> Result<Self> {
        innovation.validate()?;
        Ok(match innovation {
            Innovation::Normal => UnitNoise::Normal,
            Innovation::Student { df } => UnitNoise::Student(
                StudentT::new(df).map_err(|e| Error::InvalidArgument(e.to_string()))?,
                ((df - 2.0) / df).sqrt(),
            ),
        })
    }

    fn draw(&self, rng: &mut Rng) -> f64 {
        match self {
            UnitNoise::Normal => rng.sample(StandardNormal),
            UnitNoise::Student(dist, scale) => dist.sample(rng) * scale,
        }
    }
}

fn check_length(t: usize) -> Result<()> {
    if t < 2 {
        return Err(Error::TooShort { needed: 2, got: t });
    }
    Ok(())
}

/// Log costs of a random walk with drift starting at `y_0 = 0`.
pub(crate) fn rwd_path(mu: f64, k: f64, t: usize, rng: &mut Rng, innovation: Innovation) -> Result<Vec<f64>> {
    check_length(t)?;
    if !(k >= 0.0) {
        return Err(Error::InvalidArgument(format!("volatility must be >= 0, got {k}")));
    }
    let noise = UnitNoise::new(innovation)?;
    let mut y = Vec::with_capacity(t);
    let mut level = 0.0;
    y.push(level);
    for _ in 1..t {
        level += mu + k * noise.draw(rng);
        y.push(level);
    }
    Ok(y)
}

/// Log costs of an IMA(1,1) path; `v_0` is drawn from the innovation law.
pub(crate) fn ima_path(params: &ImaParams, t: usize, rng: &mut Rng, innovation: Innovation) -> Result<Vec<f64>> {
    check_length(t)?;
    let noise = UnitNoise::new(innovation)?;
    let mut y = Vec::with_capacity(t);
    let mut level = 0.0;
    let mut prev = params.sigma * noise.draw(rng);
    y.push(level);
    for _ in 1..t {
        let v = params.sigma * noise.draw(rng);
        level += params.mu + v + params.theta * prev;
        prev = v;
        y.push(level);
    }
    Ok(y)
}

/// Simulate `t` points of a random walk with drift `mu` and increment
/// standard deviation `k`.
pub fn simulate_rwd(mu: f64, k: f64, t: usize, rng: &mut Rng, innovation: Innovation) -> Result<TechnologySeries> {
    let y = rwd_path(mu, k, t, rng, innovation)?;
    TechnologySeries::from_log_costs("rwd", "simulated", 0, y)
}

/// Simulate `t` points of an IMA(1,1) process.
pub fn simulate_ima(params: &ImaParams, t: usize, rng: &mut Rng) -> Result<TechnologySeries> {
    let y = ima_path(params, t, rng, Innovation::Normal)?;
    TechnologySeries::from_log_costs("ima", "simulated", 0, y)
}

/// Trend-stationary series `y_t = y0 + mu t + e_t`, `e_t ~ N(0, sd^2)`.
/// Shocks do not accumulate; provided for contrast with the random walks.
pub fn simulate_trend_stationary(y0: f64, mu: f64, sd: f64, t: usize, rng: &mut Rng) -> Result<TechnologySeries> {
    check_length(t)?;
    if !(sd >= 0.0) {
        return Err(Error::InvalidArgument(format!("sd must be >= 0, got {sd}")));
    }
    let y = (0..t)
        .map(|i| y0 + mu * i as f64 + sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    TechnologySeries::from_log_costs("trend", "simulated", 0, y)
}
