// SPDX-License-Identifier: MIT OR Apache-2.0

//! Experiment manifests.
//!
//! A grid file is flat `key = value` text. List keys take comma-separated
//! values and may repeat; scalar keys appear once. `#` starts a comment.
//!
//! ```text
//! # null-hypothesis size, known variance
//! n = 50, 300, 2000
//! theta = -0.2, 0, 0.2
//! s = 0
//! reps = 10000
//! seed = 20240601
//! variance = known          # known | estimate
//! quantile = asymptotic     # asymptotic | finite
//! methods = irregcp, cusum  # irregcp | cusum | amoc | sbs1 | sbs1-lrv
//! ```

use std::fmt;
use std::str::FromStr;

use irregcp::{
    BaselineKind, DetectorConfig, QuantileMethod, Sbs1Params, SbsVariance, VarianceSource,
};
use serde::Serialize;

use crate::error::{CliError, Result};

/// Localization methods selectable from the CLI and in grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Irregcp,
    Cusum,
    Amoc,
    Sbs1,
    #[value(name = "sbs1-lrv")]
    Sbs1Lrv,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Irregcp => "irregcp",
            Method::Cusum => "cusum",
            Method::Amoc => "amoc",
            Method::Sbs1 => "sbs1",
            Method::Sbs1Lrv => "sbs1-lrv",
        }
    }

    /// The baseline this method names, if it is one.
    pub fn baseline(self, sbs_constant: f64) -> Option<BaselineKind> {
        let sbs = |variance| {
            BaselineKind::Sbs1(Sbs1Params {
                threshold_constant: sbs_constant,
                variance,
            })
        };
        match self {
            Method::Irregcp => None,
            Method::Cusum => Some(BaselineKind::Cusum),
            Method::Amoc => Some(BaselineKind::Amoc),
            Method::Sbs1 => Some(sbs(SbsVariance::Marginal)),
            Method::Sbs1Lrv => Some(sbs(SbsVariance::LongRun)),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <Method as clap::ValueEnum>::from_str(s, true)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMode {
    /// Tabulated long-run variance scaled by `xi^2`.
    Known,
    Estimate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantileKind {
    Asymptotic,
    Finite,
}

/// Which replications the headline `mae_n` column averages over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conditioning {
    OnRejection,
    Unconditional,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentGrid {
    pub n_values: Vec<usize>,
    pub theta_values: Vec<f64>,
    pub s_values: Vec<f64>,
    pub reps: usize,
    pub master_seed: u64,
    pub xi: f64,
    pub ratios: (f64, f64, f64),
    pub variance_mode: VarianceMode,
    pub quantile: QuantileKind,
    pub quantile_reps: usize,
    pub quantile_seed: u64,
    pub alpha: f64,
    pub k: Option<usize>,
    pub j: usize,
    pub rho: f64,
    pub methods: Vec<Method>,
    pub conditioning: Conditioning,
    pub sbs_constant: f64,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        let detector = DetectorConfig::default();
        Self {
            n_values: Vec::new(),
            theta_values: Vec::new(),
            s_values: vec![0.0],
            reps: 10_000,
            master_seed: 1,
            xi: 0.5,
            ratios: (0.4, 0.6, 0.8),
            variance_mode: VarianceMode::Known,
            quantile: QuantileKind::Asymptotic,
            quantile_reps: irregcp::nulldist::DEFAULT_REPS,
            quantile_seed: 1,
            alpha: detector.alpha,
            k: detector.k,
            j: detector.j,
            rho: detector.rho,
            methods: vec![Method::Irregcp],
            conditioning: Conditioning::OnRejection,
            sbs_constant: irregcp::baselines::DEFAULT_SBS_CONSTANT,
        }
    }
}

impl ExperimentGrid {
    pub fn parse(text: &str) -> Result<Self> {
        let mut grid = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        let (mut n, mut theta, mut s, mut methods) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| CliError::Grid {
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let items: Vec<&str> = value
                .split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .collect();
            if items.is_empty() {
                return Err(err(format!("`{key}` has no value")));
            }
            let list_key = matches!(key, "n" | "theta" | "s" | "methods" | "ratios");
            if !list_key {
                if seen.contains(&key) {
                    return Err(err(format!("`{key}` given twice")));
                }
                if items.len() != 1 {
                    return Err(err(format!("`{key}` takes a single value")));
                }
            }
            let one = items[0];
            match key {
                "n" => n.extend(parse_all::<usize>(&items).map_err(err)?),
                "theta" => theta.extend(parse_all::<f64>(&items).map_err(err)?),
                "s" => s.extend(parse_all::<f64>(&items).map_err(err)?),
                "methods" => methods.extend(parse_all::<Method>(&items).map_err(err)?),
                "ratios" => {
                    let r = parse_all::<f64>(&items).map_err(err)?;
                    if r.len() != 3 || seen.contains(&"ratios") {
                        return Err(err("`ratios` takes exactly three values".into()));
                    }
                    grid.ratios = (r[0], r[1], r[2]);
                }
                "reps" => grid.reps = parse_one(one).map_err(err)?,
                "seed" => grid.master_seed = parse_one(one).map_err(err)?,
                "xi" => grid.xi = parse_one(one).map_err(err)?,
                "alpha" => grid.alpha = parse_one(one).map_err(err)?,
                "k" => grid.k = Some(parse_one(one).map_err(err)?),
                "j" => grid.j = parse_one(one).map_err(err)?,
                "rho" => grid.rho = parse_one(one).map_err(err)?,
                "quantile_reps" => grid.quantile_reps = parse_one(one).map_err(err)?,
                "quantile_seed" => grid.quantile_seed = parse_one(one).map_err(err)?,
                "sbs_const" => grid.sbs_constant = parse_one(one).map_err(err)?,
                "variance" => {
                    grid.variance_mode = match one {
                        "known" => VarianceMode::Known,
                        "estimate" => VarianceMode::Estimate,
                        other => return Err(err(format!("unknown variance mode `{other}`"))),
                    }
                }
                "quantile" => {
                    grid.quantile = match one {
                        "asymptotic" => QuantileKind::Asymptotic,
                        "finite" => QuantileKind::Finite,
                        other => return Err(err(format!("unknown quantile method `{other}`"))),
                    }
                }
                "conditioning" => {
                    grid.conditioning = match one {
                        "on-rejection" => Conditioning::OnRejection,
                        "unconditional" => Conditioning::Unconditional,
                        other => return Err(err(format!("unknown conditioning `{other}`"))),
                    }
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
            seen.push(key);
        }

        grid.n_values = n;
        grid.theta_values = theta;
        if !s.is_empty() {
            grid.s_values = s;
        }
        if !methods.is_empty() {
            methods.dedup();
            grid.methods = methods;
        }
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |message: &str| CliError::Grid {
            line: 0,
            message: message.into(),
        };
        if self.n_values.is_empty() || self.theta_values.is_empty() {
            return Err(bad("`n` and `theta` are required"));
        }
        if self.reps < 1 {
            return Err(bad("`reps` must be at least 1"));
        }
        let (a, b, c) = self.ratios;
        if !(0.0 < a && a < b && b < c && c <= 1.0) {
            return Err(bad("`ratios` must be strictly increasing in (0, 1]"));
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(bad("`xi` must be non-negative"));
        }
        if self.sbs_constant.is_nan() || self.sbs_constant <= 0.0 {
            return Err(bad("`sbs_const` must be positive"));
        }
        self.detector(VarianceSource::Estimate, QuantileMethod::Asymptotic)
            .validate()
            .map_err(|e| bad(&e.to_string()))
    }

    pub fn detector(
        &self,
        variance_source: VarianceSource,
        quantile_method: QuantileMethod,
    ) -> DetectorConfig {
        DetectorConfig {
            k: self.k,
            j: self.j,
            rho: self.rho,
            alpha: self.alpha,
            quantile_method,
            variance_source,
        }
    }
}

fn parse_one<T: FromStr>(raw: &str) -> std::result::Result<T, String> {
    raw.parse().map_err(|_| format!("cannot parse `{raw}`"))
}

fn parse_all<T: FromStr>(items: &[&str]) -> std::result::Result<Vec<T>, String> {
    items.iter().map(|raw| parse_one(raw)).collect()
}
