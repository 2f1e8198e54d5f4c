// SPDX-License-Identifier: MIT OR Apache-2.0

//! The observed series and its blocking arithmetic.
//!
//! All indices exposed to callers are 1-based: the first observation is
//! `X_1` and block `j` covers observations `(j-1)k+1 ..= jk`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::PrefixSums;

/// A univariate series `X_1..X_n` with optional opaque time labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    values: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl Series {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("series must hold at least one value"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "series value at index {} is not finite ({})",
                pos + 1,
                values[pos]
            )));
        }
        Ok(Self {
            values,
            labels: None,
        })
    }

    pub fn with_labels(values: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != values.len() {
            return Err(Error::invalid(format!(
                "label count {} does not match value count {}",
                labels.len(),
                values.len()
            )));
        }
        let mut series = Self::new(values)?;
        series.labels = Some(labels);
        Ok(series)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Label of the observation at 1-based `index`, if labels are present.
    pub fn label(&self, index: usize) -> Option<&str> {
        let labels = self.labels.as_ref()?;
        index
            .checked_sub(1)
            .and_then(|i| labels.get(i))
            .map(String::as_str)
    }

    /// Applies `f` to every value, keeping the labels.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        match &self.labels {
            Some(labels) => Self::with_labels(values, labels.clone()),
            None => Self::new(values),
        }
    }
}

/// Non-overlapping blocking of a length-`n` series into `m = floor(n/k)`
/// complete blocks of length `k`. Trailing observations past `m*k` belong
/// to no block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub n: usize,
    pub k: usize,
    pub m: usize,
}

impl BlockLayout {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k < 1 || k > n {
            return Err(Error::invalid(format!(
                "block length must satisfy 1 <= k <= n; got k = {k}, n = {n}"
            )));
        }
        Ok(Self { n, k, m: n / k })
    }

    /// Zero-based half-open range of block `j` (1-based).
    pub fn block_range(&self, j: usize) -> std::ops::Range<usize> {
        debug_assert!(j >= 1 && j <= self.m);
        (j - 1) * self.k..j * self.k
    }
}

/// Default block length `ceil(n^(1/3))`, computed in integers.
pub fn default_block_len(n: usize) -> usize {
    let mut k = (n as f64).cbrt().round() as usize;
    while k > 1 && (k - 1).pow(3) >= n {
        k -= 1;
    }
    while k.pow(3) < n {
        k += 1;
    }
    k.max(1)
}

pub(crate) fn block_means_with(prefix: &PrefixSums, layout: BlockLayout) -> Vec<f64> {
    (1..=layout.m)
        .map(|j| {
            let r = layout.block_range(j);
            prefix.window_mean(r.start, r.end)
        })
        .collect()
}

/// Block means `R_j = (1/k) sum_{i=(j-1)k+1}^{jk} X_i`, `j = 1..m`.
pub fn block_means(series: &Series, k: usize) -> Result<Vec<f64>> {
    let layout = BlockLayout::new(series.len(), k)?;
    let prefix = PrefixSums::new(series.values());
    Ok(block_means_with(&prefix, layout))
}

pub(crate) fn sliding_means_with(
    prefix: &PrefixSums,
    k: usize,
    s_from: usize,
    s_to: usize,
) -> Vec<f64> {
    (s_from..=s_to)
        .map(|s| prefix.window_mean(s - k, s))
        .collect()
}

/// Overlapping window means `R_{s/k} = (1/k) sum_{i=s-k+1}^{s} X_i` for
/// `s = s_from..=s_to` (1-based, `k <= s_from <= s_to <= n`).
pub fn sliding_block_means(
    series: &Series,
    k: usize,
    s_from: usize,
    s_to: usize,
) -> Result<Vec<f64>> {
    let n = series.len();
    if k < 1 || k > s_from || s_from > s_to || s_to > n {
        return Err(Error::invalid(format!(
            "sliding windows need 1 <= k <= s_from <= s_to <= n; \
             got k = {k}, s_from = {s_from}, s_to = {s_to}, n = {n}"
        )));
    }
    let prefix = PrefixSums::new(series.values());
    Ok(sliding_means_with(&prefix, k, s_from, s_to))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(xs: &[f64]) -> Series {
        Series::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(Series::new(vec![]).is_err());
        assert!(Series::new(vec![1.0, f64::NAN]).is_err());
        assert!(Series::new(vec![f64::INFINITY]).is_err());
        assert!(Series::with_labels(vec![1.0, 2.0], vec!["a".into()]).is_err());
    }

    #[test]
    fn labels_are_one_based() {
        let s = Series::with_labels(vec![1.0, 2.0], vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(s.label(1), Some("a"));
        assert_eq!(s.label(2), Some("b"));
        assert_eq!(s.label(0), None);
        assert_eq!(s.label(3), None);
    }

    #[test]
    fn block_means_of_pairs() {
        let r = block_means(&series(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), 2).unwrap();
        assert_eq!(r, vec![1.5, 3.5, 5.5]);
    }

    #[test]
    fn block_means_drop_partial_block() {
        let xs = [1.0, 3.0, 2.0, 4.0, 0.0, 2.0, 9.0];
        // direct summation oracle
        let oracle: Vec<f64> = xs[..6]
            .chunks(2)
            .map(|c| c.iter().sum::<f64>() / 2.0)
            .collect();
        assert_eq!(oracle, vec![2.0, 3.0, 1.0]);
        assert_eq!(block_means(&series(&xs), 2).unwrap(), oracle);
    }

    #[test]
    fn block_means_of_constant() {
        for k in 1..=7 {
            let r = block_means(&series(&[0.1; 20]), k).unwrap();
            assert_eq!(r.len(), 20 / k);
            assert!(r.iter().all(|&v| v == 0.1));
        }
    }

    #[test]
    fn block_len_bounds() {
        let s = series(&[1.0, 2.0, 3.0]);
        assert!(block_means(&s, 0).is_err());
        assert!(block_means(&s, 4).is_err());
        assert_eq!(block_means(&s, 3).unwrap(), vec![2.0]);
    }

    #[test]
    fn sliding_means_small_example() {
        let xs = [1.0, 3.0, 2.0, 4.0, 0.0, 2.0];
        let oracle: Vec<f64> = (2..=6).map(|s| (xs[s - 2] + xs[s - 1]) / 2.0).collect();
        assert_eq!(oracle, vec![2.0, 2.5, 3.0, 2.0, 1.0]);
        assert_eq!(sliding_block_means(&series(&xs), 2, 2, 6).unwrap(), oracle);
    }

    #[test]
    fn sliding_window_of_one_is_identity() {
        let xs = [1.5, -3.25, 2.0, 4.0];
        assert_eq!(
            sliding_block_means(&series(&xs), 1, 1, 4).unwrap(),
            xs.to_vec()
        );
    }

    #[test]
    fn sliding_range_violations() {
        let s = series(&[1.0, 2.0, 3.0, 4.0]);
        assert!(sliding_block_means(&s, 2, 1, 3).is_err());
        assert!(sliding_block_means(&s, 2, 3, 2).is_err());
        assert!(sliding_block_means(&s, 2, 2, 5).is_err());
        assert!(sliding_block_means(&s, 0, 1, 2).is_err());
    }

    #[test]
    fn default_block_len_is_integer_cube_root_ceiling() {
        assert_eq!(default_block_len(1), 1);
        assert_eq!(default_block_len(8), 2);
        assert_eq!(default_block_len(9), 3);
        assert_eq!(default_block_len(50), 4);
        assert_eq!(default_block_len(123), 5);
        assert_eq!(default_block_len(125), 5);
        assert_eq!(default_block_len(126), 6);
        assert_eq!(default_block_len(2000), 13);
        assert_eq!(default_block_len(1_000_000), 100);
    }
}
