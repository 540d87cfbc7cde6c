//! Normal and Student t distribution functions.

use super::special::{erfc, inc_beta};
use crate::error::{Error, Result};

/// Standard normal CDF, Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Student t CDF with `df` degrees of freedom (df need not be an integer).
pub fn student_t_cdf(x: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) || !df.is_finite() {
        return Err(Error::InvalidDegreesOfFreedom(df));
    }
    Ok(student_t_cdf_unchecked(x, df))
}

pub(crate) fn student_t_cdf_unchecked(x: f64, df: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.5;
    }
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let x2 = x * x;
    let denom = df + x2;
    // tail = P(T > |x|) = I_{df/(df+x^2)}(df/2, 1/2) / 2
    let tail = 0.5 * inc_beta(0.5 * df, 0.5, df / denom, x2 / denom);
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Inverse of [`student_t_cdf`] by bisection.
pub fn student_t_quantile(p: f64, df: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    if !(df > 0.0) || !df.is_finite() {
        return Err(Error::InvalidDegreesOfFreedom(df));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // solve in the lower half and reflect, keeps the bracket one-sided
    let target = p.min(1.0 - p);
    let mut hi = 0.0_f64;
    let mut lo = -1.0_f64;
    while student_t_cdf_unchecked(lo, df) > target {
        hi = lo;
        lo *= 2.0;
        if lo < -1e300 {
            break;
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if student_t_cdf_unchecked(mid, df) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    Ok(if p < 0.5 { q } else { -q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_cdf_fixed_points() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert_abs_diff_eq!(normal_cdf(8.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(normal_cdf(1.959_963_984_540_054), 0.975, epsilon = 1e-13);
    }

    #[test]
    fn normal_upper_tail_at_1_646() {
        // high-precision value of 1 - Φ(1.646) = erfc(1.646/√2)/2 from mpmath
        assert_abs_diff_eq!(1.0 - normal_cdf(1.646), 0.049_881_879_507_351_16, epsilon = 1e-12);
    }

    #[test]
    fn student_t_closed_forms() {
        // df = 1 is Cauchy, df = 2 has F(x) = 1/2 + x / (2 sqrt(2 + x^2))
        for &x in &[-3.0_f64, -0.4, 0.2, 1.0, 7.5] {
            let cauchy = 0.5 + x.atan() / std::f64::consts::PI;
            assert_abs_diff_eq!(student_t_cdf(x, 1.0).unwrap(), cauchy, epsilon = 1e-13);
            let t2 = 0.5 + x / (2.0 * (2.0 + x * x).sqrt());
            assert_abs_diff_eq!(student_t_cdf(x, 2.0).unwrap(), t2, epsilon = 1e-13);
        }
    }

    #[test]
    fn student_t_symmetry_and_limit() {
        assert_eq!(student_t_cdf(0.0, 3.3).unwrap(), 0.5);
        let big = student_t_cdf(1.96, 1e6).unwrap();
        assert_abs_diff_eq!(big, normal_cdf(1.96), epsilon = 1e-5);
    }

    #[test]
    fn rejects_bad_df() {
        assert!(matches!(
            student_t_cdf(1.0, 0.0),
            Err(Error::InvalidDegreesOfFreedom(_))
        ));
        assert!(student_t_cdf(1.0, -2.0).is_err());
        assert!(student_t_cdf(1.0, f64::NAN).is_err());
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(student_t_quantile(0.5, 7.0).unwrap(), 0.0);
        let p = student_t_cdf(1.3, 5.0).unwrap();
        assert_abs_diff_eq!(student_t_quantile(p, 5.0).unwrap(), 1.3, epsilon = 1e-7);
        assert_abs_diff_eq!(student_t_quantile(0.975, 1e7).unwrap(), 1.96, epsilon = 1e-3);
        assert!(matches!(
            student_t_quantile(1.0, 3.0),
            Err(Error::InvalidProbability(_))
        ));
        assert!(student_t_quantile(0.0, 3.0).is_err());
    }
}
