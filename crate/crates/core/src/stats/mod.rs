//! Statistical kernel shared by the rest of the crate.

mod dist;
mod ecdf;
mod ols;
mod rng;
pub mod special;
mod ttest;

pub use dist::{normal_cdf, student_t_cdf, student_t_quantile};
pub use ecdf::{kolmogorov_survival, ks_one_sample, ks_two_sample, Ecdf, KsTest};
pub use ols::{ols_fit, OlsFit};
pub use rng::Rng;
pub use ttest::{one_sided_t_test, two_sided_t_test};

pub(crate) use dist::student_t_cdf_unchecked;

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Quantile by linear interpolation between order statistics (type 7).
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
