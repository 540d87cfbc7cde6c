//! One-sample t-tests.

use super::dist::student_t_cdf_unchecked;
use crate::error::{Error, Result};

fn mean_sd(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let ss: f64 = sample.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

// Zero spread, up to rounding of the mean itself.
fn is_degenerate(mean: f64, sd: f64) -> bool {
    sd <= 1e-12 * mean.abs() || sd == 0.0
}

/// One-sided test of H0: mean = 0 against H1: mean < 0.
///
/// With zero sample spread the statistic is undefined; by convention an
/// all-negative sample gives p = 0, all-positive gives p = 1 and an
/// all-zero sample gives p = 0.5.
pub fn one_sided_t_test(diffs: &[f64]) -> Result<f64> {
    if diffs.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: diffs.len(),
        });
    }
    let (mean, sd) = mean_sd(diffs);
    if is_degenerate(mean, sd) {
        return Ok(if mean < 0.0 {
            0.0
        } else if mean > 0.0 {
            1.0
        } else {
            0.5
        });
    }
    let n = diffs.len() as f64;
    let t = mean / (sd / n.sqrt());
    Ok(student_t_cdf_unchecked(t, n - 1.0))
}

/// Two-sided test of H0: mean = 0. Degenerate samples give p = 1 when the
/// mean is zero and p = 0 otherwise.
pub fn two_sided_t_test(sample: &[f64]) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: sample.len(),
        });
    }
    let (mean, sd) = mean_sd(sample);
    if is_degenerate(mean, sd) {
        return Ok(if mean == 0.0 { 1.0 } else { 0.0 });
    }
    let n = sample.len() as f64;
    let t = mean / (sd / n.sqrt());
    Ok((2.0 * student_t_cdf_unchecked(-t.abs(), n - 1.0)).min(1.0))
}
