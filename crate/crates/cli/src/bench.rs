// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte-Carlo benchmark harness.
//!
//! Replicate `r` of the cell `(n, theta, s)` draws its noise from the stream
//! seeded by `derive_seed(master, [n, theta bits, r])`. The seed does not
//! depend on `s`, so power curves and MAE comparisons across `s` share
//! their noise paths. Results are collected in replicate order and merged
//! sequentially, which makes every output independent of the worker count.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use irregcp::detect::run_test_with_critical;
use irregcp::nulldist::{asymptotic_quantile, QuantileCache, QuantileTable};
use irregcp::rng::derive_seed;
use irregcp::{
    locate, make_dataset, NoiseSpec, QuantileMethod, Series, SignalSpec, VarianceSource,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::grid::{Conditioning, ExperimentGrid, Method, QuantileKind, VarianceMode};
use crate::io::fmt_machine;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellKey {
    pub n: usize,
    pub theta: f64,
    pub s: f64,
}

/// Localization tallies for one method in one cell.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MethodTally {
    pub method: Option<Method>,
    /// Replications where the test rejected and the method returned an index.
    pub cond_count: usize,
    pub cond_sum_abs_error: u64,
    pub uncond_count: usize,
    pub uncond_sum_abs_error: u64,
    pub none_count: usize,
    pub error_count: usize,
}

impl MethodTally {
    pub fn cond_mae_n(&self, n: usize) -> f64 {
        mae_n(self.cond_sum_abs_error, self.cond_count, n)
    }

    pub fn uncond_mae_n(&self, n: usize) -> f64 {
        mae_n(self.uncond_sum_abs_error, self.uncond_count, n)
    }
}

fn mae_n(sum: u64, count: usize, n: usize) -> f64 {
    if count == 0 {
        f64::NAN
    } else {
        sum as f64 / count as f64 / n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellResult {
    pub key: CellKey,
    pub critical_value: Option<f64>,
    pub reps: usize,
    pub rejections: usize,
    pub test_errors: usize,
    pub methods: Vec<MethodTally>,
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl CellResult {
    /// Rejection ratio over replications whose test ran.
    pub fn rejection_rate(&self) -> f64 {
        let valid = self.reps - self.test_errors;
        if valid == 0 {
            f64::NAN
        } else {
            self.rejections as f64 / valid as f64
        }
    }

    /// Binomial standard error of [`rejection_rate`](Self::rejection_rate).
    pub fn rejection_se(&self) -> f64 {
        let p = self.rejection_rate();
        (p * (1.0 - p) / (self.reps - self.test_errors) as f64).sqrt()
    }

    pub fn tally(&self, method: Method) -> Option<&MethodTally> {
        self.methods.iter().find(|t| t.method == Some(method))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub grid: ExperimentGrid,
    pub cells: Vec<CellResult>,
}

#[derive(Clone, Copy, Debug)]
enum Outcome {
    Located(usize),
    NoChange,
    Failed,
}

struct Replicate {
    reject: Option<bool>,
    outcomes: Vec<Outcome>,
}

/// Runs every cell of `grid` on a pool of `workers` threads.
pub fn run(
    grid: &ExperimentGrid,
    workers: usize,
    cache: Option<&QuantileCache>,
    mut progress: impl FnMut(&CellResult),
) -> Result<BenchReport> {
    grid.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Input(format!("cannot start worker pool: {e}")))?;

    let mut criticals: BTreeMap<usize, std::result::Result<f64, String>> = BTreeMap::new();
    let mut cells = Vec::new();
    for &n in &grid.n_values {
        let critical = criticals
            .entry(n)
            .or_insert_with(|| {
                pool.install(|| critical_for(grid, n, cache))
                    .map_err(|e| e.to_string())
            })
            .clone();
        for &theta in &grid.theta_values {
            for &s in &grid.s_values {
                let key = CellKey { n, theta, s };
                let start = Instant::now();
                let mut cell = match &critical {
                    Ok(c) => pool
                        .install(|| run_cell(grid, key, *c))
                        .unwrap_or_else(|e| failed_cell(grid, key, Some(*c), e.to_string())),
                    Err(e) => failed_cell(grid, key, None, e.clone()),
                };
                cell.wall_time = start.elapsed();
                progress(&cell);
                cells.push(cell);
            }
        }
    }
    Ok(BenchReport {
        grid: grid.clone(),
        cells,
    })
}

fn critical_for(grid: &ExperimentGrid, n: usize, cache: Option<&QuantileCache>) -> Result<f64> {
    Ok(match grid.quantile {
        QuantileKind::Asymptotic => asymptotic_quantile(grid.alpha)?,
        QuantileKind::Finite => {
            QuantileMethod::FiniteSample {
                n,
                reps: grid.quantile_reps,
                seed: grid.quantile_seed,
            }
            .validate()?;
            let table = match cache {
                Some(c) => {
                    c.load_or_simulate(n, grid.quantile_reps, grid.quantile_seed)?
                        .0
                }
                None => QuantileTable::simulate(n, grid.quantile_reps, grid.quantile_seed)?,
            };
            table.quantile(grid.alpha)?
        }
    })
}

fn failed_cell(
    grid: &ExperimentGrid,
    key: CellKey,
    critical_value: Option<f64>,
    error: String,
) -> CellResult {
    CellResult {
        key,
        critical_value,
        reps: grid.reps,
        rejections: 0,
        test_errors: 0,
        methods: Vec::new(),
        error: Some(error),
        wall_time: Duration::ZERO,
    }
}

fn quantile_method(grid: &ExperimentGrid, n: usize) -> QuantileMethod {
    match grid.quantile {
        QuantileKind::Asymptotic => QuantileMethod::Asymptotic,
        QuantileKind::Finite => QuantileMethod::FiniteSample {
            n,
            reps: grid.quantile_reps,
            seed: grid.quantile_seed,
        },
    }
}

fn run_cell(grid: &ExperimentGrid, key: CellKey, critical: f64) -> Result<CellResult> {
    let CellKey { n, theta, s } = key;
    let noise = NoiseSpec::new(theta, grid.xi).resolved()?;
    let signal = SignalSpec::from_ratios(n, s, grid.ratios)?;
    let variance_source = match grid.variance_mode {
        VarianceMode::Estimate => VarianceSource::Estimate,
        VarianceMode::Known => VarianceSource::Known {
            sigma_inf_sq: noise.tabulated_lrv().ok_or_else(|| {
                CliError::Input(format!(
                    "theta = {theta} has no tabulated long-run variance"
                ))
            })?,
        },
    };
    let test_config = grid.detector(variance_source, quantile_method(grid, n));
    let locate_config = grid.detector(VarianceSource::Estimate, quantile_method(grid, n));
    test_config.validate()?;
    let methods: &[Method] = if s > 0.0 { &grid.methods } else { &[] };

    let replicate = |r: usize| -> Replicate {
        let seed = derive_seed(grid.master_seed, &[n as u64, theta.to_bits(), r as u64]);
        let x = match make_dataset(&noise, &signal, seed) {
            Ok(x) => x,
            Err(_) => {
                return Replicate {
                    reject: None,
                    outcomes: vec![Outcome::Failed; methods.len()],
                }
            }
        };
        let reject = run_test_with_critical(&x, &test_config, critical)
            .ok()
            .map(|t| t.reject);
        let outcomes = methods
            .iter()
            .map(|&m| locate_with(m, &x, &locate_config, grid.sbs_constant, signal.tau))
            .collect();
        Replicate { reject, outcomes }
    };
    let replicates: Vec<Replicate> = (0..grid.reps).into_par_iter().map(replicate).collect();

    let mut cell = CellResult {
        key,
        critical_value: Some(critical),
        reps: grid.reps,
        rejections: 0,
        test_errors: 0,
        methods: methods
            .iter()
            .map(|&m| MethodTally {
                method: Some(m),
                ..MethodTally::default()
            })
            .collect(),
        error: None,
        wall_time: Duration::ZERO,
    };
    for rep in &replicates {
        match rep.reject {
            Some(true) => cell.rejections += 1,
            Some(false) => {}
            None => cell.test_errors += 1,
        }
        for (tally, outcome) in cell.methods.iter_mut().zip(&rep.outcomes) {
            match *outcome {
                Outcome::Located(err) => {
                    tally.uncond_count += 1;
                    tally.uncond_sum_abs_error += err as u64;
                    if rep.reject == Some(true) {
                        tally.cond_count += 1;
                        tally.cond_sum_abs_error += err as u64;
                    }
                }
                Outcome::NoChange => tally.none_count += 1,
                Outcome::Failed => tally.error_count += 1,
            }
        }
    }
    Ok(cell)
}

fn locate_with(
    method: Method,
    x: &Series,
    config: &irregcp::DetectorConfig,
    sbs_constant: f64,
    tau: usize,
) -> Outcome {
    let found = match method.baseline(sbs_constant) {
        None => locate(x, config).map(|o| Some(o.tau_hat)),
        Some(kind) => kind.locate(x),
    };
    match found {
        Ok(Some(t)) => Outcome::Located(t.abs_diff(tau)),
        Ok(None) => Outcome::NoChange,
        Err(_) => Outcome::Failed,
    }
}

impl BenchReport {
    pub fn all_failed(&self) -> bool {
        self.cells.iter().all(|c| c.error.is_some())
    }

    /// Writes `size.csv`, `power.csv`, `mae.csv`, `meta.json` and
    /// `timing.csv` into `dir`. Only `timing.csv` varies between runs.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let g = &self.grid;
        let variance = enum_name(&g.variance_mode);
        let quantile = enum_name(&g.quantile);

        let rate_header = [
            "n",
            "theta",
            "s",
            "variance",
            "quantile",
            "alpha",
            "critical_value",
            "reps",
            "rejections",
            "test_errors",
            "rate",
            "se",
            "error",
        ];
        let rate_row = |c: &CellResult| -> Vec<String> {
            vec![
                c.key.n.to_string(),
                c.key.theta.to_string(),
                c.key.s.to_string(),
                variance.clone(),
                quantile.clone(),
                g.alpha.to_string(),
                c.critical_value.map(fmt_machine).unwrap_or_default(),
                c.reps.to_string(),
                c.rejections.to_string(),
                c.test_errors.to_string(),
                opt_machine(c.error.is_none(), c.rejection_rate()),
                opt_machine(c.error.is_none(), c.rejection_se()),
                c.error.clone().unwrap_or_default(),
            ]
        };
        write_csv(
            &dir.join("size.csv"),
            &rate_header,
            self.cells.iter().filter(|c| c.key.s == 0.0).map(rate_row),
        )?;
        write_csv(
            &dir.join("power.csv"),
            &rate_header,
            self.cells.iter().map(rate_row),
        )?;

        let mae_header = [
            "n",
            "theta",
            "s",
            "method",
            "variance",
            "quantile",
            "conditioning",
            "reps",
            "rejections",
            "cond_count",
            "cond_sum_abs_error",
            "cond_mae_n",
            "uncond_count",
            "uncond_sum_abs_error",
            "uncond_mae_n",
            "none_count",
            "error_count",
            "mae_n",
            "error",
        ];
        let conditioning = enum_name(&g.conditioning);
        let mut mae_rows = Vec::new();
        for c in self.cells.iter().filter(|c| c.key.s > 0.0) {
            for &m in &g.methods {
                let blank = MethodTally::default();
                let t = c.tally(m).unwrap_or(&blank);
                let headline = match g.conditioning {
                    Conditioning::OnRejection => t.cond_mae_n(c.key.n),
                    Conditioning::Unconditional => t.uncond_mae_n(c.key.n),
                };
                mae_rows.push(vec![
                    c.key.n.to_string(),
                    c.key.theta.to_string(),
                    c.key.s.to_string(),
                    m.name().to_string(),
                    variance.clone(),
                    quantile.clone(),
                    conditioning.clone(),
                    c.reps.to_string(),
                    c.rejections.to_string(),
                    t.cond_count.to_string(),
                    t.cond_sum_abs_error.to_string(),
                    fmt_machine(t.cond_mae_n(c.key.n)),
                    t.uncond_count.to_string(),
                    t.uncond_sum_abs_error.to_string(),
                    fmt_machine(t.uncond_mae_n(c.key.n)),
                    t.none_count.to_string(),
                    t.error_count.to_string(),
                    fmt_machine(headline),
                    c.error.clone().unwrap_or_default(),
                ]);
            }
        }
        write_csv(&dir.join("mae.csv"), &mae_header, mae_rows.into_iter())?;

        let meta = serde_json::json!({
            "tool": concat!("irregcp ", env!("CARGO_PKG_VERSION")),
            "master_seed": g.master_seed,
            "seed_derivation": "splitmix64 fold of (master_seed, n, theta bits, replicate)",
            "locator_variance": "estimate",
            "grid": g,
            "cells": self.cells.len(),
            "failed_cells": self.cells.iter().filter(|c| c.error.is_some()).count(),
        });
        fs::write(
            dir.join("meta.json"),
            serde_json::to_string_pretty(&meta)? + "\n",
        )?;

        write_csv(
            &dir.join("timing.csv"),
            &["n", "theta", "s", "wall_time_s"],
            self.cells.iter().map(|c| {
                vec![
                    c.key.n.to_string(),
                    c.key.theta.to_string(),
                    c.key.s.to_string(),
                    format!("{:.3}", c.wall_time.as_secs_f64()),
                ]
            }),
        )?;
        Ok(())
    }
}

fn opt_machine(ok: bool, x: f64) -> String {
    if ok {
        fmt_machine(x)
    } else {
        String::new()
    }
}

fn enum_name(value: &impl Serialize) -> String {
    serde_json::to_value(value)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
