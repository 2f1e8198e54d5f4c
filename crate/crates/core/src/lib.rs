// SPDX-License-Identifier: MIT OR Apache-2.0

//! Offline detection and localization of a one-sided mean change when the
//! post-change signal is irregular and the noise is serially dependent.
//!
//! * [`detect`]: the CUSUM-minimum test, the blocked long-run variance
//!   estimate and the two-step locator.
//! * [`nulldist`]: critical values from the Brownian-bridge infimum.
//! * [`simulate`]: threshold-AR noise and a four-regime trend for
//!   Monte-Carlo studies.
//! * [`baselines`]: CUSUM, AMOC and binary-segmentation locators.

#![forbid(unsafe_code)]

pub mod baselines;
pub mod detect;
pub mod error;
pub mod nulldist;
pub mod numeric;
pub mod rng;
pub mod series;
pub mod simulate;

pub use baselines::{
    locate_amoc, locate_cusum, locate_sbs1, BaselineKind, Sbs1Params, SbsVariance,
};
pub use detect::{
    compute_d_star, compute_test_statistic, estimate_lrv, locate, run_test, select_l_hat, step1,
    step2, DetectorConfig, LocateOutcome, LrvEstimate, Step1, TestOutcome, VarianceSource,
};
pub use error::{Error, Result};
pub use nulldist::{QuantileCache, QuantileMethod, QuantileTable};
pub use series::{block_means, sliding_block_means, BlockLayout, Series};
pub use simulate::{
    calibrate_noise, gen_noise, gen_signal, make_dataset, NoiseCalibration, NoiseSpec, SignalSpec,
};
