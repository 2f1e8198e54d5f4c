// SPDX-License-Identifier: MIT OR Apache-2.0

//! Comparison locators: CUSUM argmin, least-squares at-most-one-change, and
//! the earliest split of standard binary segmentation.
//!
//! Every locator reports the first index of the new regime (1-based).

use serde::{Deserialize, Serialize};

use crate::detect::{centered_cusum_min, estimate_lrv};
use crate::error::{Error, Result};
use crate::numeric::PrefixSums;
use crate::series::{default_block_len, Series};

/// Threshold constant used when none is given (the `wbs` package default).
pub const DEFAULT_SBS_CONSTANT: f64 = 1.3;

/// Normal-consistency factor for the median absolute deviation.
const MAD_SCALE: f64 = 1.482_602_218_505_602;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SbsVariance {
    /// Robust marginal scale from first differences.
    Marginal,
    /// Square root of the blocked long-run variance estimate.
    LongRun,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sbs1Params {
    pub threshold_constant: f64,
    pub variance: SbsVariance,
}

impl Sbs1Params {
    pub fn marginal() -> Self {
        Self {
            threshold_constant: DEFAULT_SBS_CONSTANT,
            variance: SbsVariance::Marginal,
        }
    }

    pub fn long_run() -> Self {
        Self {
            threshold_constant: DEFAULT_SBS_CONSTANT,
            variance: SbsVariance::LongRun,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BaselineKind {
    Cusum,
    Amoc,
    Sbs1(Sbs1Params),
}

impl BaselineKind {
    pub fn locate(&self, series: &Series) -> Result<Option<usize>> {
        match self {
            BaselineKind::Cusum => locate_cusum(series).map(Some),
            BaselineKind::Amoc => locate_amoc(series).map(Some),
            BaselineKind::Sbs1(p) => locate_sbs1(series, p),
        }
    }
}

/// `argmin_{j=2..n+1} sum_{i=1}^{j-1} (X_i - mean)`.
pub fn locate_cusum(series: &Series) -> Result<usize> {
    if series.len() < 2 {
        return Err(Error::invalid("CUSUM location needs n >= 2"));
    }
    let (j, _) = centered_cusum_min(series.values());
    Ok(j + 1)
}

/// `|sqrt(c(n-c)/n) (mean(X_1..c) - mean(X_{c+1}..n))|` for the
/// zero-based half-open segment `start..end` split after `start + c`.
fn split_statistics(
    prefix: &PrefixSums,
    start: usize,
    end: usize,
) -> impl Iterator<Item = (usize, f64)> + '_ {
    let len = end - start;
    let lenf = len as f64;
    (1..len).map(move |c| {
        let left = prefix.shifted_sum(start, start + c);
        let total = prefix.shifted_sum(start, end);
        let cf = c as f64;
        // centered form: (S_c - (c/len) S_len) / sqrt(c (len - c) / len)
        let stat = (left - cf / lenf * total) / (cf * (lenf - cf) / lenf).sqrt();
        (c, stat.abs())
    })
}

fn best_split(prefix: &PrefixSums, start: usize, end: usize) -> Option<(usize, f64)> {
    split_statistics(prefix, start, end).fold(None, |best, (c, v)| match best {
        Some((_, bv)) if bv >= v => best,
        _ => Some((c, v)),
    })
}

/// Least-squares single split `c`, reported as `c + 1`.
pub fn locate_amoc(series: &Series) -> Result<usize> {
    let n = series.len();
    if n < 4 {
        return Err(Error::invalid("AMOC location needs n >= 4"));
    }
    let prefix = PrefixSums::new(series.values());
    let (c, _) = best_split(&prefix, 0, n).expect("n >= 2 has a split");
    Ok(c + 1)
}

/// Median absolute deviation of the first differences, scaled for normal
/// consistency and divided by sqrt(2).
pub fn marginal_scale(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let med = median(&mut diffs);
    let mut dev: Vec<f64> = diffs.iter().map(|d| (d - med).abs()).collect();
    MAD_SCALE * median(&mut dev) / std::f64::consts::SQRT_2
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Split points (1-based, last index of the left segment) found by binary
/// segmentation with threshold `zeta`, in ascending order.
pub fn binary_segmentation(values: &[f64], zeta: f64) -> Vec<usize> {
    let prefix = PrefixSums::new(values);
    let mut found = Vec::new();
    let mut stack = vec![(0usize, values.len())];
    while let Some((start, end)) = stack.pop() {
        if end - start < 2 {
            continue;
        }
        if let Some((c, stat)) = best_split(&prefix, start, end) {
            if stat > zeta {
                found.push(start + c);
                stack.push((start + c, end));
                stack.push((start, start + c));
            }
        }
    }
    found.sort_unstable();
    found
}

/// Earliest change from binary segmentation with threshold
/// `C * sigma * sqrt(2 ln n)`; `None` when no split clears the threshold.
pub fn locate_sbs1(series: &Series, params: &Sbs1Params) -> Result<Option<usize>> {
    let n = series.len();
    if n < 4 {
        return Err(Error::invalid("binary segmentation needs n >= 4"));
    }
    if !(params.threshold_constant > 0.0 && params.threshold_constant.is_finite()) {
        return Err(Error::invalid(format!(
            "threshold constant must be positive; got {}",
            params.threshold_constant
        )));
    }
    let sigma = match params.variance {
        SbsVariance::Marginal => marginal_scale(series.values()),
        SbsVariance::LongRun => {
            let k = default_block_len(n);
            let j = 3.min(n / k);
            estimate_lrv(series, k, j)?.sigma_sq.sqrt()
        }
    };
    let zeta = params.threshold_constant * sigma * (2.0 * (n as f64).ln()).sqrt();
    Ok(binary_segmentation(series.values(), zeta)
        .first()
        .map(|&c| c + 1))
}
