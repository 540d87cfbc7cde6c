//! Empirical distribution functions and Kolmogorov-Smirnov statistics.

use serde::Serialize;

/// Empirical CDF over a sorted copy of the sample. NaNs are dropped.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(sample: impl IntoIterator<Item = f64>) -> Self {
        let mut sorted: Vec<f64> = sample.into_iter().filter(|v| !v.is_nan()).collect();
        sorted.sort_by(f64::total_cmp);
        Self { sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// Share of observations `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return f64::NAN;
        }
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Share of observations strictly below `x`.
    pub fn cdf_strict(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return f64::NAN;
        }
        self.sorted.partition_point(|&v| v < x) as f64 / self.sorted.len() as f64
    }

    /// Share of observations strictly above `x` (positive-tail curve).
    pub fn upper_tail(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// Share of observations strictly below `-x` (negative-tail curve,
    /// plotted against `-x`).
    pub fn lower_tail(&self, x: f64) -> f64 {
        self.cdf_strict(-x)
    }

    /// Evaluate `cdf_strict` on an ascending grid in one merge pass.
    pub fn cdf_strict_on_grid(&self, grid: &[f64]) -> Vec<f64> {
        let n = self.sorted.len() as f64;
        let mut out = Vec::with_capacity(grid.len());
        let mut idx = 0;
        for &x in grid {
            while idx < self.sorted.len() && self.sorted[idx] < x {
                idx += 1;
            }
            out.push(idx as f64 / n);
        }
        out
    }

    /// One-sample KS distance to a continuous CDF.
    pub fn ks_distance<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.sorted.len() as f64;
        self.sorted.iter().enumerate().fold(0.0_f64, |acc, (i, &x)| {
            let f = cdf(x);
            let above = (i as f64 + 1.0) / n - f;
            let below = f - i as f64 / n;
            acc.max(above).max(below)
        })
    }
}

/// Result of a Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: f64,
}

/// Asymptotic Kolmogorov survival function Q(λ) = 2 Σ (-1)^(k-1) exp(-2 k² λ²).
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d)
}

/// One-sample KS test of `sample` against `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> KsTest {
    let ecdf = Ecdf::new(sample.iter().copied());
    let d = ecdf.ks_distance(cdf);
    let n = ecdf.len() as f64;
    KsTest {
        statistic: d,
        p_value: ks_p_value(d, n),
        n_effective: n,
    }
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsTest {
    let ea = Ecdf::new(a.iter().copied());
    let eb = Ecdf::new(b.iter().copied());
    let (xa, xb) = (ea.values(), eb.values());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    KsTest {
        statistic: d,
        p_value: ks_p_value(d, n_eff),
        n_effective: n_eff,
    }
}
