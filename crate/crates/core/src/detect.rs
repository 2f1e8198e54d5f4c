// SPDX-License-Identifier: MIT OR Apache-2.0

//! Test for a one-sided upward mean change and the two-step locator.
//!
//! The test statistic is the minimum of the centered, scaled partial-sum
//! process. Localization proceeds in two steps:
//!
//! 1. Block the series into `m = floor(n/k)` means `R_j`, take the last block
//!    whose mean does not exceed the `J`-th smallest one (`L`), and use the
//!    observations up to `k L` for a pre-change level `mu0` and the long-run
//!    variance. Standardized block means are thresholded at `z_{1-1/m}`, a
//!    0/1 step is fitted to the decisions (`eta`), and `mu1` and the gap `d`
//!    are estimated from the fitted split.
//! 2. `tau` minimizes the partial sums of `X_t - mu1 - rho d`.
//!
//! All reported indices are 1-based. Ties resolve to the smallest index,
//! except `L`, which is the largest qualifying block by definition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nulldist::{self, QuantileMethod};
use crate::numeric::{self, normal_quantile, partial_sum_argmin, NeumaierSum, PrefixSums};
use crate::series::{block_means_with, default_block_len, BlockLayout, Series};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum VarianceSource {
    /// Estimate the long-run variance from the observations up to `k L`.
    Estimate,
    /// Use a known long-run variance.
    Known { sigma_inf_sq: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Block length; `None` selects `ceil(n^(1/3))`.
    pub k: Option<usize>,
    /// Order-statistic depth used to pick `L`.
    pub j: usize,
    pub rho: f64,
    pub alpha: f64,
    pub quantile_method: QuantileMethod,
    pub variance_source: VarianceSource,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            k: None,
            j: 3,
            rho: 0.5,
            alpha: 0.05,
            quantile_method: QuantileMethod::Asymptotic,
            variance_source: VarianceSource::Estimate,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == Some(0) {
            return Err(Error::invalid("block length k must be at least 1"));
        }
        if self.j < 1 {
            return Err(Error::invalid("order-statistic depth J must be at least 1"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::invalid(format!(
                "rho must lie in (0, 1); got {}",
                self.rho
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 1); got {}",
                self.alpha
            )));
        }
        if let VarianceSource::Known { sigma_inf_sq } = self.variance_source {
            if !(sigma_inf_sq > 0.0 && sigma_inf_sq.is_finite()) {
                return Err(Error::DegenerateVariance(format!(
                    "known long-run variance must be positive; got {sigma_inf_sq}"
                )));
            }
        }
        self.quantile_method.validate()
    }

    /// Effective block length for a series of length `n`.
    pub fn block_len(&self, n: usize) -> usize {
        self.k.unwrap_or_else(|| default_block_len(n))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub t_hat: f64,
    pub critical_value: f64,
    /// `exp(-2 t^2)` from the bridge-infimum law, whatever the cutoff method.
    pub p_value_asymptotic: f64,
    pub reject: bool,
    pub sigma_used: f64,
    pub method: QuantileMethod,
}

/// Long-run variance estimate from overlapping windows of the segment
/// `X_1..X_{ell}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrvEstimate {
    pub sigma_sq: f64,
    pub mu0: f64,
    pub l_hat: usize,
    pub ell_hat: usize,
    /// Set when the estimate is exactly zero.
    pub degenerate: bool,
}

/// Step-1 estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step1 {
    pub l_hat: usize,
    pub ell_hat: usize,
    pub mu0_hat: f64,
    /// Standardized block means `D_1..D_m`.
    pub d: Vec<f64>,
    /// Block decisions `I_j = 1{D_j >= z_{1-1/m}}`.
    pub indicators: Vec<bool>,
    pub threshold: f64,
    pub eta_hat: usize,
    pub mu1_hat: f64,
    pub d_hat: f64,
}

/// Complete trace of a localization run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocateOutcome {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub j: usize,
    pub l_hat: usize,
    pub ell_hat: usize,
    pub mu0_hat: f64,
    /// The long-run variance used: estimated, or the known value.
    pub sigma_sq_hat: f64,
    pub variance_source: VarianceSource,
    pub d: Vec<f64>,
    pub indicators: Vec<bool>,
    pub threshold: f64,
    pub eta_hat: usize,
    pub mu1_hat: f64,
    pub d_hat: f64,
    pub rho: f64,
    pub tau_hat: usize,
    /// Partial sums of `X_t - mu1 - rho d` through `j - 1`, for `j = 2..=n`.
    pub objective_trace: Vec<f64>,
}

/// Blocked view shared by the estimation steps.
struct Blocked<'a> {
    values: &'a [f64],
    prefix: PrefixSums,
    layout: BlockLayout,
    means: Vec<f64>,
}

impl<'a> Blocked<'a> {
    fn new(series: &'a Series, k: usize) -> Result<Self> {
        let layout = BlockLayout::new(series.len(), k)?;
        let prefix = PrefixSums::new(series.values());
        let means = block_means_with(&prefix, layout);
        Ok(Self {
            values: series.values(),
            prefix,
            layout,
            means,
        })
    }

    fn pre_change_level(&self, j: usize) -> Result<(usize, usize, f64)> {
        let l_hat = select_l_hat(&self.means, j)?;
        let ell_hat = self.layout.k * l_hat;
        Ok((l_hat, ell_hat, self.prefix.window_mean(0, ell_hat)))
    }

    fn lrv(&self, j: usize) -> Result<LrvEstimate> {
        let k = self.layout.k;
        let (l_hat, ell_hat, mu0) = self.pre_change_level(j)?;
        let mut ss = NeumaierSum::new();
        for s in k..=ell_hat {
            let r = self.prefix.window_mean(s - k, s);
            ss.add((r - mu0) * (r - mu0));
        }
        let sigma_sq = k as f64 / (ell_hat - k + 1) as f64 * ss.value();
        Ok(LrvEstimate {
            sigma_sq,
            mu0,
            l_hat,
            ell_hat,
            degenerate: sigma_sq == 0.0,
        })
    }

    fn step1(&self, j: usize, sigma: f64) -> Result<Step1> {
        let BlockLayout { n, k, m } = self.layout;
        if m < 2 {
            return Err(Error::invalid(format!(
                "step 1 needs at least two blocks; n = {n}, k = {k} gives m = {m}"
            )));
        }
        check_sigma(sigma)?;
        let (l_hat, ell_hat, mu0_hat) = self.pre_change_level(j)?;
        let threshold = normal_quantile(1.0 - 1.0 / m as f64)?;
        let scale = (k as f64).sqrt() / sigma;
        let d: Vec<f64> = self.means.iter().map(|r| scale * (r - mu0_hat)).collect();
        let indicators: Vec<bool> = d.iter().map(|&v| v >= threshold).collect();
        let eta_hat = fit_step(&indicators)?;
        let mu1_hat = self.prefix.window_mean(0, k * eta_hat);

        // windows start at 1-based i = k(eta+1)+1 ..= n-k+1
        let first = k * (eta_hat + 1);
        if first + k > n {
            return Err(Error::InsufficientPostChangeData {
                n,
                k,
                eta: eta_hat,
                required: k * (eta_hat + 2),
            });
        }
        let d_hat = (first..=n - k)
            .map(|start| self.prefix.window_mean(start, start + k))
            .fold(f64::INFINITY, f64::min)
            - mu1_hat;
        debug_assert_eq!(self.values.len(), n);
        Ok(Step1 {
            l_hat,
            ell_hat,
            mu0_hat,
            d,
            indicators,
            threshold,
            eta_hat,
            mu1_hat,
            d_hat,
        })
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::DegenerateVariance(format!(
            "standardizing scale must be positive and finite; got {sigma}"
        )))
    }
}

/// `min_{j=1..n} sum_{i<=j} (X_i - mean) / (sqrt(n) sigma)`.
pub fn compute_test_statistic(series: &Series, sigma: f64) -> Result<f64> {
    let n = series.len();
    if n < 2 {
        return Err(Error::invalid("the test statistic needs n >= 2"));
    }
    check_sigma(sigma)?;
    let (_, min) = centered_cusum_min(series.values());
    Ok(min / ((n as f64).sqrt() * sigma))
}

/// First index `j` (1-based) minimizing `sum_{i<=j} (X_i - mean)`, and the
/// minimum value.
pub fn centered_cusum_min(values: &[f64]) -> (usize, f64) {
    let mean = numeric::mean(values);
    let (j, min, _) = partial_sum_argmin(values.iter().map(|x| x - mean));
    (j, min)
}

/// `L = max{i : R_i <= R_(J)}` where `R_(J)` is the `J`-th smallest block
/// mean. For `J = 1` this is the last index attaining the minimum.
pub fn select_l_hat(block_means: &[f64], j: usize) -> Result<usize> {
    let m = block_means.len();
    if j < 1 || j > m {
        return Err(Error::invalid(format!(
            "order-statistic depth must satisfy 1 <= J <= m; got J = {j}, m = {m}"
        )));
    }
    let mut sorted = block_means.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cutoff = sorted[j - 1];
    Ok(block_means.iter().rposition(|&r| r <= cutoff).unwrap() + 1)
}

/// Long-run variance `k/(ell-k+1) sum_{s=k}^{ell} (R_{s/k} - mu0)^2`.
///
/// An exactly zero estimate is flagged as degenerate rather than rejected.
pub fn estimate_lrv(series: &Series, k: usize, j: usize) -> Result<LrvEstimate> {
    Blocked::new(series, k)?.lrv(j)
}

/// Objective `sum_{j<=t} I_j + sum_{j>t} (1 - I_j)` for `t = 1..m-1`.
pub fn eta_objective(indicators: &[bool]) -> Vec<usize> {
    let m = indicators.len();
    let ones_total = indicators.iter().filter(|&&b| b).count();
    let mut ones_before = 0usize;
    let mut out = Vec::with_capacity(m.saturating_sub(1));
    for (t, &b) in indicators.iter().enumerate().take(m.saturating_sub(1)) {
        ones_before += b as usize;
        let after = m - (t + 1);
        let ones_after = ones_total - ones_before;
        out.push(ones_before + (after - ones_after));
    }
    out
}

/// Split `t` (1-based, `1..m-1`) of the best-fitting 0/1 step; smallest `t`
/// on ties.
pub fn fit_step(indicators: &[bool]) -> Result<usize> {
    let objective = eta_objective(indicators);
    let (best, _) = objective
        .iter()
        .enumerate()
        .min_by_key(|&(t, &v)| (v, t))
        .ok_or_else(|| Error::invalid("fitting a step needs at least two blocks"))?;
    Ok(best + 1)
}

/// Step 1 with standardizing scale `sigma` (the long-run standard deviation).
pub fn step1(series: &Series, config: &DetectorConfig, sigma: f64) -> Result<Step1> {
    config.validate()?;
    Blocked::new(series, config.block_len(series.len()))?.step1(config.j, sigma)
}

/// `tau = argmin_{j=2..n} sum_{t=1}^{j-1} (X_t - mu1 - rho d)`, smallest `j`
/// on ties. Also returns the scanned partial sums.
pub fn step2(series: &Series, mu1_hat: f64, d_hat: f64, rho: f64) -> Result<(usize, Vec<f64>)> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("rho must lie in (0, 1); got {rho}")));
    }
    let n = series.len();
    if n < 2 {
        return Err(Error::invalid("localization needs n >= 2"));
    }
    if !mu1_hat.is_finite() || !d_hat.is_finite() {
        return Err(Error::invalid("step-1 estimates must be finite"));
    }
    let shift = rho * d_hat;
    let values = &series.values()[..n - 1];
    let (count, _, trace) = partial_sum_argmin(values.iter().map(|x| x - mu1_hat - shift));
    Ok((count + 1, trace))
}

/// A constant series has zero long-run variance under every blocking.
fn ensure_not_constant(values: &[f64]) -> Result<()> {
    if values.iter().all(|&v| v == values[0]) {
        return Err(Error::DegenerateVariance(
            "input is constant; the long-run variance estimate is zero".into(),
        ));
    }
    Ok(())
}

fn resolve_sigma_sq(blocked: &Blocked<'_>, config: &DetectorConfig) -> Result<f64> {
    match config.variance_source {
        VarianceSource::Known { sigma_inf_sq } => Ok(sigma_inf_sq),
        VarianceSource::Estimate => {
            ensure_not_constant(blocked.values)?;
            let est = blocked.lrv(config.j)?;
            if est.degenerate {
                return Err(Error::DegenerateVariance(format!(
                    "estimated long-run variance is zero on X_1..X_{}",
                    est.ell_hat
                )));
            }
            Ok(est.sigma_sq)
        }
    }
}

/// Runs the test against a precomputed critical value.
pub fn run_test_with_critical(
    series: &Series,
    config: &DetectorConfig,
    critical_value: f64,
) -> Result<TestOutcome> {
    config.validate()?;
    if series.len() < 2 {
        return Err(Error::invalid("the test needs n >= 2"));
    }
    let sigma_sq = match config.variance_source {
        VarianceSource::Known { sigma_inf_sq } => sigma_inf_sq,
        VarianceSource::Estimate => {
            ensure_not_constant(series.values())?;
            resolve_sigma_sq(
                &Blocked::new(series, config.block_len(series.len()))?,
                config,
            )?
        }
    };
    let sigma = sigma_sq.sqrt();
    let t_hat = compute_test_statistic(series, sigma)?;
    Ok(TestOutcome {
        t_hat,
        critical_value,
        p_value_asymptotic: nulldist::asymptotic_cdf(t_hat.min(0.0))?,
        reject: t_hat < critical_value,
        sigma_used: sigma,
        method: config.quantile_method,
    })
}

/// Tests for an upward change. Finite-sample cutoffs are simulated on every
/// call; use [`run_test_with_critical`] with a cached table in loops.
pub fn run_test(series: &Series, config: &DetectorConfig) -> Result<TestOutcome> {
    config.validate()?;
    let critical = nulldist::critical_value(&config.quantile_method, config.alpha)?;
    run_test_with_critical(series, config, critical)
}

/// Runs both localization steps unconditionally.
pub fn locate(series: &Series, config: &DetectorConfig) -> Result<LocateOutcome> {
    config.validate()?;
    let n = series.len();
    let k = config.block_len(n);
    if config.variance_source == VarianceSource::Estimate {
        ensure_not_constant(series.values())?;
    }
    let blocked = Blocked::new(series, k)?;
    let sigma_sq = resolve_sigma_sq(&blocked, config)?;
    let s1 = blocked.step1(config.j, sigma_sq.sqrt())?;
    let (tau_hat, objective_trace) = step2(series, s1.mu1_hat, s1.d_hat, config.rho)?;
    Ok(LocateOutcome {
        n,
        k,
        m: blocked.layout.m,
        j: config.j,
        l_hat: s1.l_hat,
        ell_hat: s1.ell_hat,
        mu0_hat: s1.mu0_hat,
        sigma_sq_hat: sigma_sq,
        variance_source: config.variance_source,
        d: s1.d,
        indicators: s1.indicators,
        threshold: s1.threshold,
        eta_hat: s1.eta_hat,
        mu1_hat: s1.mu1_hat,
        d_hat: s1.d_hat,
        rho: config.rho,
        tau_hat,
        objective_trace,
    })
}

/// `d* = min_{i=k(eta+1)+1..n-k+1} (1/k) sum_{j=i}^{i+k-1} (mu_j - mu_1)`
/// from the true means.
pub fn compute_d_star(mu: &[f64], k: usize, eta: usize) -> Result<f64> {
    let n = mu.len();
    if k < 1 || n < 1 {
        return Err(Error::invalid(
            "d* needs k >= 1 and a non-empty mean sequence",
        ));
    }
    let first = k * (eta + 1);
    if first + k > n {
        return Err(Error::InsufficientPostChangeData {
            n,
            k,
            eta,
            required: k * (eta + 2),
        });
    }
    let base = mu[0];
    let shifted: Vec<f64> = mu.iter().map(|m| m - base).collect();
    let prefix = PrefixSums::new(&shifted);
    Ok((first..=n - k)
        .map(|start| prefix.window_mean(start, start + k))
        .fold(f64::INFINITY, f64::min))
}
