// SPDX-License-Identifier: MIT OR Apache-2.0

//! Fixtures shared by the criterion benchmarks.

use irregcp::{make_dataset, NoiseSpec, Series, SignalSpec};

/// A series from the simulation design with change-point ratios
/// (0.4, 0.6, 0.8) and innovation scale 0.5.
pub fn fixture(n: usize, theta: f64, s: f64, seed: u64) -> Series {
    let signal = SignalSpec::from_ratios(n, s, (0.4, 0.6, 0.8)).expect("valid fixture signal");
    make_dataset(&NoiseSpec::new(theta, 0.5), &signal, seed).expect("valid fixture noise")
}
