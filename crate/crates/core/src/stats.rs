//! Order statistics.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Nearest-rank percentile of unsorted finite values, `p ∈ [0, 100]`.
///
/// Rank is `⌈p·n/100⌉`, clamped to `[1, n]`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidArgument("percentile must lie in [0, 100]"));
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(nearest_rank(&sorted, p))
}

pub(crate) fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = libm::ceil(p * n as f64 / 100.0) as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// The percentile levels reported for every error series.
pub const LEVELS: [f64; 5] = [50.0, 80.0, 90.0, 95.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Percentiles {
    pub p50: f64,
    pub p80: f64,
    pub p90: f64,
    pub p95: f64,
    pub p100: f64,
}

impl Percentiles {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let [p50, p80, p90, p95, p100] = LEVELS.map(|p| nearest_rank(&sorted, p));
        Ok(Self {
            p50,
            p80,
            p90,
            p95,
            p100,
        })
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.p50, self.p80, self.p90, self.p95, self.p100]
    }
}

/// Median; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}
