// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic data: threshold-AR noise and the four-regime trend.
//!
//! The noise recursion is `Z'_i = theta (|Z'_{i-1}| + |Z'_{i-2}|) + eps_i`
//! with i.i.d. `eps_i ~ N(0, xi^2)`, started from zero state. The returned
//! process is centered, `Z_i = Z'_i - E Z'_i`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;
use crate::rng;
use crate::series::Series;

pub const DEFAULT_BURN_IN: usize = 1000;
pub const MIN_PRE_RUN: usize = 100_000;
pub const MIN_CALIBRATION_LENGTH: usize = 1_000_000;
const DEFAULT_PRE_RUN: usize = 1_000_000;
const DEFAULT_PRE_RUN_SEED: u64 = 0x7461_726d_6561_6e00;
const AUTOCOV_LAGS: usize = 20;

/// Mean and long-run variance of the uncentered process for unit
/// innovation variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableEntry {
    pub mean_per_unit_sd: f64,
    pub lrv_per_unit_var: f64,
}

const TABLE: [(f64, TableEntry); 4] = [
    (
        0.0,
        TableEntry {
            mean_per_unit_sd: 0.0,
            lrv_per_unit_var: 1.0,
        },
    ),
    (
        0.2,
        TableEntry {
            mean_per_unit_sd: 0.343,
            lrv_per_unit_var: 1.332,
        },
    ),
    (
        0.3,
        TableEntry {
            mean_per_unit_sd: 0.577,
            lrv_per_unit_var: 2.104,
        },
    ),
    (
        0.4,
        TableEntry {
            mean_per_unit_sd: 0.988,
            lrv_per_unit_var: 5.782,
        },
    ),
];

/// Published constants for `theta`, if tabulated. Negative `theta` shares
/// the long-run variance of `|theta|` and flips the sign of the mean.
pub fn table_constants(theta: f64) -> Option<TableEntry> {
    let (_, entry) = TABLE
        .iter()
        .find(|(t, _)| (t - theta.abs()).abs() < 1e-12)?;
    let sign = if theta < 0.0 { -1.0 } else { 1.0 };
    Some(TableEntry {
        mean_per_unit_sd: sign * entry.mean_per_unit_sd,
        lrv_per_unit_var: entry.lrv_per_unit_var,
    })
}

/// How the centering constant `E Z'_i` is obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Centering {
    /// `E Z'_i = innovation_sd * mean_per_unit_sd`.
    TableConstant { mean_per_unit_sd: f64 },
    /// Sample mean of a dedicated pre-run of `pre_run_length` values.
    Calibrated { pre_run_length: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub theta: f64,
    pub innovation_sd: f64,
    pub burn_in: usize,
    pub centering: Centering,
}

impl NoiseSpec {
    /// Spec with the default burn-in; tabulated `theta` values use the
    /// published centering constants, anything else is calibrated.
    pub fn new(theta: f64, innovation_sd: f64) -> Self {
        let centering = match table_constants(theta) {
            Some(e) => Centering::TableConstant {
                mean_per_unit_sd: e.mean_per_unit_sd,
            },
            None => Centering::Calibrated {
                pre_run_length: DEFAULT_PRE_RUN,
                seed: DEFAULT_PRE_RUN_SEED,
            },
        };
        Self {
            theta,
            innovation_sd,
            burn_in: DEFAULT_BURN_IN,
            centering,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.is_nan() || self.theta.abs() >= 0.5 {
            return Err(Error::invalid(format!(
                "threshold-AR parameter must satisfy |theta| < 0.5 for stationarity; got {}",
                self.theta
            )));
        }
        if !(self.innovation_sd > 0.0 && self.innovation_sd.is_finite()) {
            return Err(Error::invalid(format!(
                "innovation standard deviation must be positive; got {}",
                self.innovation_sd
            )));
        }
        match self.centering {
            Centering::TableConstant { mean_per_unit_sd } if !mean_per_unit_sd.is_finite() => {
                Err(Error::invalid("centering constant must be finite"))
            }
            Centering::Calibrated { pre_run_length, .. } if pre_run_length < MIN_PRE_RUN => {
                Err(Error::invalid(format!(
                    "calibration pre-run must have at least {MIN_PRE_RUN} values; got {pre_run_length}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// `E Z'_i` at this spec's innovation scale.
    pub fn centering_constant(&self) -> Result<f64> {
        self.validate()?;
        match self.centering {
            Centering::TableConstant { mean_per_unit_sd } => {
                Ok(self.innovation_sd * mean_per_unit_sd)
            }
            Centering::Calibrated {
                pre_run_length,
                seed,
            } => {
                let mut stream = rng::stream(seed);
                let raw = simulate_raw(
                    self.theta,
                    self.innovation_sd,
                    self.burn_in,
                    pre_run_length,
                    &mut stream,
                );
                let mut acc = NeumaierSum::new();
                acc.extend(raw);
                Ok(acc.value() / pre_run_length as f64)
            }
        }
    }

    /// Replaces a calibrated centering by its computed constant so repeated
    /// generation does not rerun the pre-run.
    pub fn resolved(&self) -> Result<Self> {
        let c = self.centering_constant()?;
        Ok(Self {
            centering: Centering::TableConstant {
                mean_per_unit_sd: c / self.innovation_sd,
            },
            ..self.clone()
        })
    }

    /// Long-run variance of the noise at this innovation scale, when
    /// `theta` is tabulated.
    pub fn tabulated_lrv(&self) -> Option<f64> {
        table_constants(self.theta)
            .map(|e| e.lrv_per_unit_var * self.innovation_sd * self.innovation_sd)
    }
}

fn simulate_raw<R: Rng>(
    theta: f64,
    sd: f64,
    burn_in: usize,
    n: usize,
    rng: &mut R,
) -> impl Iterator<Item = f64> + '_ {
    let (mut prev1, mut prev2) = (0.0f64, 0.0f64);
    std::iter::repeat_with(move || {
        let eps: f64 = rng.sample(StandardNormal);
        let z = theta * (prev1.abs() + prev2.abs()) + sd * eps;
        prev2 = prev1;
        prev1 = z;
        z
    })
    .skip(burn_in)
    .take(n)
}

/// Centered threshold-AR noise of length `n`.
pub fn gen_noise(spec: &NoiseSpec, n: usize, seed: u64) -> Result<Series> {
    if n < 1 {
        return Err(Error::invalid("noise length must be at least 1"));
    }
    let center = spec.centering_constant()?;
    let mut rng = rng::stream(seed);
    let z = simulate_raw(spec.theta, spec.innovation_sd, spec.burn_in, n, &mut rng)
        .map(|v| v - center)
        .collect();
    Series::new(z)
}

/// The four-regime trend: constant `mu1` before `tau`, a linear ramp from
/// `mu1 + s` to `mu1 + 3s` on `tau..=tau1`, exponential growth to
/// `mu1 + s(2 + e^2)` on `tau1+1..=tau2`, and a linear decay after `tau2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub n: usize,
    pub tau: usize,
    pub tau1: usize,
    pub tau2: usize,
    pub s: f64,
    pub mu1: f64,
}

impl SignalSpec {
    /// Change points at `round(ratio * n)`.
    pub fn from_ratios(n: usize, s: f64, ratios: (f64, f64, f64)) -> Result<Self> {
        let at = |r: f64| (r * n as f64).round() as usize;
        let spec = Self {
            n,
            tau: at(ratios.0),
            tau1: at(ratios.1),
            tau2: at(ratios.2),
            s,
            mu1: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            n,
            tau,
            tau1,
            tau2,
            s,
            mu1,
        } = *self;
        if !(2 <= tau && tau < tau1 && tau1 < tau2 && tau2 <= n) {
            return Err(Error::invalid(format!(
                "signal change points need 2 <= tau < tau1 < tau2 <= n; \
                 got tau = {tau}, tau1 = {tau1}, tau2 = {tau2}, n = {n}"
            )));
        }
        if !(s >= 0.0 && s.is_finite()) || !mu1.is_finite() {
            return Err(Error::invalid(format!(
                "gap scale must be finite and non-negative and mu1 finite; got s = {s}, mu1 = {mu1}"
            )));
        }
        Ok(())
    }

    /// `mu_t` for 1-based `t`.
    pub fn mean_at(&self, t: usize) -> f64 {
        let Self {
            n,
            tau,
            tau1,
            tau2,
            s,
            mu1,
        } = *self;
        let (t, tau, tau1, tau2, n) = (t as f64, tau as f64, tau1 as f64, tau2 as f64, n as f64);
        if t < tau {
            mu1
        } else if t <= tau1 {
            mu1 + s * ((2.0 * t - 3.0 * tau + tau1) / (tau1 - tau))
        } else if t <= tau2 {
            mu1 + s * (2.0 + (2.0 * (t - tau1) / (tau2 - tau1)).exp())
        } else {
            mu1 + s * (2.0 + 2f64.exp() * (2.0 * n - tau2 - t) / (2.0 * n - 2.0 * tau2))
        }
    }
}

/// `mu_1..mu_n` for the four-regime trend.
pub fn gen_signal(spec: &SignalSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok((1..=spec.n).map(|t| spec.mean_at(t)).collect())
}

/// Estimated mean and long-run variance of the uncentered process at unit
/// innovation scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseCalibration {
    pub theta: f64,
    pub sim_length: usize,
    pub batch: usize,
    pub mean_per_unit_sd: f64,
    pub mean_se: f64,
    pub lrv_per_unit_var: f64,
    pub lrv_se: f64,
    /// Sample autocovariances `gamma(0..=20)` of the simulated run.
    pub autocov: Vec<f64>,
}

/// Simulates `sim_length` values with `xi = 1` and estimates the mean and,
/// by non-overlapping batch means, the long-run variance.
///
/// The batch length defaults to `ceil(sim_length^(1/3))`.
pub fn calibrate_noise(
    theta: f64,
    sim_length: usize,
    batch: Option<usize>,
    seed: u64,
) -> Result<NoiseCalibration> {
    if sim_length < MIN_CALIBRATION_LENGTH {
        return Err(Error::invalid(format!(
            "calibration needs at least {MIN_CALIBRATION_LENGTH} values; got {sim_length}"
        )));
    }
    let spec = NoiseSpec {
        theta,
        innovation_sd: 1.0,
        burn_in: DEFAULT_BURN_IN,
        centering: Centering::TableConstant {
            mean_per_unit_sd: 0.0,
        },
    };
    spec.validate()?;
    let batch = batch.unwrap_or_else(|| crate::series::default_block_len(sim_length));
    let batches = sim_length / batch;
    if batch < 1 || batches < 2 {
        return Err(Error::invalid(format!(
            "batch length {batch} leaves fewer than two batches"
        )));
    }

    let mut stream = rng::stream(seed);
    let raw: Vec<f64> = simulate_raw(theta, 1.0, spec.burn_in, sim_length, &mut stream).collect();
    let mean = crate::numeric::mean(&raw);

    let batch_means: Vec<f64> = raw[..batches * batch]
        .chunks_exact(batch)
        .map(crate::numeric::mean)
        .collect();
    let bm_mean = crate::numeric::mean(&batch_means);
    let mut ss = NeumaierSum::new();
    ss.extend(batch_means.iter().map(|b| (b - bm_mean).powi(2)));
    let lrv = batch as f64 * ss.value() / (batches - 1) as f64;

    let autocov = (0..=AUTOCOV_LAGS)
        .map(|u| {
            let mut acc = NeumaierSum::new();
            acc.extend(
                raw[u..]
                    .iter()
                    .zip(&raw)
                    .map(|(a, b)| (a - mean) * (b - mean)),
            );
            acc.value() / sim_length as f64
        })
        .collect();

    Ok(NoiseCalibration {
        theta,
        sim_length,
        batch,
        mean_per_unit_sd: mean,
        mean_se: (lrv / sim_length as f64).sqrt(),
        lrv_per_unit_var: lrv,
        lrv_se: lrv * (2.0 / (batches - 1) as f64).sqrt(),
        autocov,
    })
}

/// `X_t = mu_t + Z_t`. An innovation scale of exactly zero yields the
/// noise-free signal.
pub fn make_dataset(noise: &NoiseSpec, signal: &SignalSpec, seed: u64) -> Result<Series> {
    let mu = gen_signal(signal)?;
    if noise.innovation_sd == 0.0 {
        return Series::new(mu);
    }
    let z = gen_noise(noise, signal.n, seed)?;
    add_noise(&mu, &z)
}

/// Adds a noise series to a mean sequence of the same length.
pub fn add_noise(mu: &[f64], noise: &Series) -> Result<Series> {
    if mu.len() != noise.len() {
        return Err(Error::invalid(format!(
            "signal length {} does not match noise length {}",
            mu.len(),
            noise.len()
        )));
    }
    Series::new(mu.iter().zip(noise.values()).map(|(m, z)| m + z).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_lookup_flips_sign_of_mean() {
        let pos = table_constants(0.2).unwrap();
        let neg = table_constants(-0.2).unwrap();
        assert_eq!(pos.mean_per_unit_sd, 0.343);
        assert_eq!(neg.mean_per_unit_sd, -0.343);
        assert_eq!(pos.lrv_per_unit_var, neg.lrv_per_unit_var);
        assert_eq!(table_constants(0.0).unwrap().mean_per_unit_sd, 0.0);
        assert!(table_constants(0.25).is_none());
    }

    #[test]
    fn centering_scales_with_innovation_sd() {
        let spec = NoiseSpec::new(-0.2, 0.5);
        assert_eq!(spec.centering_constant().unwrap(), -0.343 * 0.5);
        assert_eq!(spec.tabulated_lrv().unwrap(), 1.332 * 0.25);
    }

    #[test]
    fn non_stationary_theta_is_rejected() {
        for theta in [0.5, -0.5, 0.7, f64::NAN] {
            assert!(gen_noise(&NoiseSpec::new(theta, 1.0), 10, 1).is_err());
        }
    }

    #[test]
    fn short_pre_run_is_rejected() {
        let mut spec = NoiseSpec::new(0.25, 1.0);
        spec.centering = Centering::Calibrated {
            pre_run_length: 10,
            seed: 0,
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn noise_is_deterministic() {
        let spec = NoiseSpec::new(0.3, 0.5);
        let a = gen_noise(&spec, 500, 9).unwrap();
        let b = gen_noise(&spec, 500, 9).unwrap();
        let c = gen_noise(&spec, 500, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn fig2_signal_values() {
        let spec = SignalSpec {
            n: 800,
            tau: 320,
            tau1: 500,
            tau2: 640,
            s: 0.5,
            mu1: 0.0,
        };
        let mu = gen_signal(&spec).unwrap();
        assert_eq!(mu[318], 0.0);
        assert!((mu[319] - 0.5).abs() < 1e-15);
        assert!((mu[639] - 0.5 * (2.0 + 2f64.exp())).abs() < 1e-12);
        assert!((mu[639] - 4.694528).abs() < 1e-6);
    }

    #[test]
    fn signal_is_continuous_at_tau1() {
        let spec = SignalSpec {
            n: 800,
            tau: 320,
            tau1: 500,
            tau2: 640,
            s: 0.7,
            mu1: 1.0,
        };
        let at_tau1 = spec.mean_at(500);
        assert!((at_tau1 - (3.0 * 0.7 + 1.0)).abs() < 1e-12);
        // limit of the exponential regime as t -> tau1 from above
        let limit = 1.0 + 0.7 * (2.0 + 0f64.exp());
        assert!((at_tau1 - limit).abs() < 1e-12);
    }

    #[test]
    fn null_signal_is_flat() {
        let spec = SignalSpec {
            n: 100,
            tau: 40,
            tau1: 60,
            tau2: 80,
            s: 0.0,
            mu1: 2.5,
        };
        assert!(gen_signal(&spec).unwrap().iter().all(|&m| m == 2.5));
    }

    #[test]
    fn minimum_post_change_gap_is_s() {
        for &(n, s) in &[(50usize, 0.8), (800, 0.5), (2000, 0.045), (123, 3.0)] {
            let spec = SignalSpec::from_ratios(n, s, (0.4, 0.6, 0.8)).unwrap();
            let mu = gen_signal(&spec).unwrap();
            let gap = mu[spec.tau - 1..]
                .iter()
                .map(|m| m - spec.mu1)
                .fold(f64::INFINITY, f64::min);
            assert!((gap - s).abs() <= 1e-15 * s.max(1.0), "n = {n}: gap {gap}");
        }
    }

    #[test]
    fn signal_ordering_is_validated() {
        let bad = [(1, 3, 5), (4, 4, 6), (4, 6, 6), (4, 6, 11)];
        for (tau, tau1, tau2) in bad {
            let spec = SignalSpec {
                n: 10,
                tau,
                tau1,
                tau2,
                s: 1.0,
                mu1: 0.0,
            };
            assert!(gen_signal(&spec).is_err(), "{tau} {tau1} {tau2}");
        }
    }

    #[test]
    fn zero_innovation_gives_the_signal() {
        let signal = SignalSpec::from_ratios(50, 0.8, (0.4, 0.6, 0.8)).unwrap();
        let noise = NoiseSpec::new(0.2, 0.0);
        let x = make_dataset(&noise, &signal, 3).unwrap();
        assert_eq!(x.values(), gen_signal(&signal).unwrap().as_slice());
    }

    #[test]
    fn add_noise_checks_lengths() {
        let z = Series::new(vec![0.0; 3]).unwrap();
        assert!(add_noise(&[1.0, 2.0], &z).is_err());
    }

    #[test]
    fn calibration_length_is_validated() {
        assert!(calibrate_noise(0.2, 1000, None, 1).is_err());
    }
}
