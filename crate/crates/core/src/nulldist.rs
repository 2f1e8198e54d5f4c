// SPDX-License-Identifier: MIT OR Apache-2.0

//! Critical values for the minimum of a Brownian bridge.
//!
//! Under the null the scaled statistic behaves like `inf_u B1(u)`, whose law
//! is `P(inf B1 <= x) = exp(-2 x^2)` for `x <= 0`. For short series the
//! discretized minimum `min_{j=1..n} B1(j/n)` is a better reference; its
//! quantiles are simulated and can be cached on disk.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;
use crate::rng;

pub const DEFAULT_REPS: usize = 100_000;
pub const MIN_REPS: usize = 10_000;
pub const CACHE_FORMAT_VERSION: u32 = 1;
/// Environment variable naming the default cache directory.
pub const CACHE_DIR_ENV: &str = "IRREGCP_CACHE_DIR";

const CACHE_MAGIC: &[u8; 8] = b"IRCPBMIN";
const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 8 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum QuantileMethod {
    Asymptotic,
    FiniteSample { n: usize, reps: usize, seed: u64 },
}

impl QuantileMethod {
    pub fn validate(&self) -> Result<()> {
        match *self {
            QuantileMethod::Asymptotic => Ok(()),
            QuantileMethod::FiniteSample { n, reps, .. } => {
                if n < 1 {
                    return Err(Error::invalid("finite-sample quantiles need n >= 1"));
                }
                if reps < MIN_REPS {
                    return Err(Error::invalid(format!(
                        "finite-sample quantiles need at least {MIN_REPS} replications; got {reps}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            QuantileMethod::Asymptotic => "asymptotic",
            QuantileMethod::FiniteSample { .. } => "finite",
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "level must satisfy 0 < alpha < 1; got {alpha}"
        )))
    }
}

/// `P(inf_u B1(u) <= x) = exp(-2 x^2)` for `x <= 0`.
pub fn asymptotic_cdf(x: f64) -> Result<f64> {
    if x.is_nan() || x > 0.0 {
        return Err(Error::invalid(format!(
            "the bridge-infimum law is stated for x <= 0; got {x}"
        )));
    }
    Ok((-2.0 * x * x).exp())
}

/// The `alpha`-quantile of the bridge infimum, `-sqrt(-ln(alpha) / 2)`.
pub fn asymptotic_quantile(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(-(-0.5 * alpha.ln()).sqrt())
}

/// `min_{j=1..n} B1(j/n)` for the random walk with the given increments,
/// where `B1(j/n) = (S_j - (j/n) S_n) / sqrt(n)`.
pub fn bridge_minimum(increments: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    let partial: Vec<f64> = increments
        .iter()
        .map(|&e| {
            acc.add(e);
            acc.value()
        })
        .collect();
    bridge_minimum_of_walk(&partial)
}

fn bridge_minimum_of_walk(partial: &[f64]) -> f64 {
    let n = partial.len();
    let total = partial[n - 1];
    let nf = n as f64;
    let min = partial
        .iter()
        .enumerate()
        .map(|(i, &s)| s - ((i + 1) as f64 / nf) * total)
        .fold(f64::INFINITY, f64::min);
    min / nf.sqrt()
}

/// Sorted minima of `reps` discretized bridges of length `n`.
///
/// Replicate `r` draws from the stream seeded by `derive_seed(seed, [n, r])`,
/// so the output does not depend on the thread count.
pub fn simulate_bridge_minima(n: usize, reps: usize, seed: u64) -> Result<Vec<f64>> {
    if n < 1 || reps < 1 {
        return Err(Error::invalid(format!(
            "bridge simulation needs n >= 1 and reps >= 1; got n = {n}, reps = {reps}"
        )));
    }
    let mut minima: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0f64; n],
            |walk, r| {
                let mut stream = rng::stream(rng::derive_seed(seed, &[n as u64, r]));
                let mut acc = NeumaierSum::new();
                for slot in walk.iter_mut() {
                    acc.add(stream.sample::<f64, _>(StandardNormal));
                    *slot = acc.value();
                }
                bridge_minimum_of_walk(walk)
            },
        )
        .collect();
    minima.sort_by(f64::total_cmp);
    Ok(minima)
}

/// Reference distribution for the test statistic.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileTable {
    method: QuantileMethod,
    minima: Vec<f64>,
}

impl QuantileTable {
    pub fn asymptotic() -> Self {
        Self {
            method: QuantileMethod::Asymptotic,
            minima: Vec::new(),
        }
    }

    pub fn simulate(n: usize, reps: usize, seed: u64) -> Result<Self> {
        let method = QuantileMethod::FiniteSample { n, reps, seed };
        method.validate()?;
        Ok(Self {
            method,
            minima: simulate_bridge_minima(n, reps, seed)?,
        })
    }

    /// Table for `method`, simulating when needed.
    pub fn for_method(method: &QuantileMethod) -> Result<Self> {
        match *method {
            QuantileMethod::Asymptotic => Ok(Self::asymptotic()),
            QuantileMethod::FiniteSample { n, reps, seed } => Self::simulate(n, reps, seed),
        }
    }

    pub fn method(&self) -> &QuantileMethod {
        &self.method
    }

    /// Sorted simulated minima; empty for the asymptotic law.
    pub fn minima(&self) -> &[f64] {
        &self.minima
    }

    /// The `alpha`-quantile. For simulated tables this is the
    /// `ceil(alpha * reps)`-th smallest minimum.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        if self.minima.is_empty() {
            return asymptotic_quantile(alpha);
        }
        let reps = self.minima.len();
        // the small guard keeps alpha * reps = 5000.000000000001 at rank 5000
        let rank = ((alpha * reps as f64) - 1e-9)
            .ceil()
            .clamp(1.0, reps as f64) as usize;
        Ok(self.minima[rank - 1])
    }

    /// `P(T <= x)` under the table's law (empirical for simulated tables).
    pub fn cdf(&self, x: f64) -> f64 {
        if self.minima.is_empty() {
            return asymptotic_cdf(x.min(0.0)).unwrap_or(1.0);
        }
        let below = self.minima.partition_point(|&m| m <= x);
        below as f64 / self.minima.len() as f64
    }
}

/// Empirical `alpha`-quantile of `min_{j=1..n} B1(j/n)` over `reps` draws.
pub fn finite_sample_quantile(n: usize, alpha: f64, reps: usize, seed: u64) -> Result<f64> {
    check_alpha(alpha)?;
    QuantileTable::simulate(n, reps, seed)?.quantile(alpha)
}

/// Critical value at level `alpha` for `method` (no caching).
pub fn critical_value(method: &QuantileMethod, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    QuantileTable::for_method(method)?.quantile(alpha)
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheSidecar {
    format_version: u32,
    kind: String,
    n: usize,
    reps: usize,
    seed: u64,
    quantile_rule: String,
}

/// On-disk store of simulated tables, one binary file plus a JSON sidecar
/// per `(n, reps, seed, format version)`.
///
/// Binary layout (little endian): 8-byte magic `IRCPBMIN`, `u32` format
/// version, `u32` reserved, `u64` n, `u64` reps, `u64` seed, then `reps`
/// sorted `f64` minima. Files are written to a temporary name and renamed
/// into place.
#[derive(Clone, Debug)]
pub struct QuantileCache {
    dir: PathBuf,
}

impl QuantileCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Cache rooted at `$IRREGCP_CACHE_DIR`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_DIR_ENV).map(Self::new)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn stem(n: usize, reps: usize, seed: u64) -> String {
        format!("bridge-min-n{n}-r{reps}-s{seed}-v{CACHE_FORMAT_VERSION}")
    }

    pub fn table_path(&self, n: usize, reps: usize, seed: u64) -> PathBuf {
        self.dir.join(format!("{}.bin", Self::stem(n, reps, seed)))
    }

    pub fn sidecar_path(&self, n: usize, reps: usize, seed: u64) -> PathBuf {
        self.dir.join(format!("{}.json", Self::stem(n, reps, seed)))
    }

    /// Loads a cached table; `Ok(None)` when absent.
    pub fn load(&self, n: usize, reps: usize, seed: u64) -> Result<Option<QuantileTable>> {
        let path = self.table_path(n, reps, seed);
        let mut file = match fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        decode_table(&bytes, n, reps, seed)
            .map(Some)
            .map_err(|msg| Error::Cache(format!("{}: {msg}", path.display())))
    }

    pub fn store(&self, table: &QuantileTable) -> Result<()> {
        let QuantileMethod::FiniteSample { n, reps, seed } = table.method else {
            return Err(Error::Cache("only simulated tables are cached".into()));
        };
        fs::create_dir_all(&self.dir)?;
        write_atomic(
            &self.table_path(n, reps, seed),
            &encode_table(table, n, reps, seed),
        )?;
        let sidecar = CacheSidecar {
            format_version: CACHE_FORMAT_VERSION,
            kind: "discretized-bridge-minimum".into(),
            n,
            reps,
            seed,
            quantile_rule: "ceil(alpha * reps)-th smallest".into(),
        };
        let json = serde_json::to_vec_pretty(&sidecar)
            .map_err(|e| Error::Cache(format!("sidecar encoding: {e}")))?;
        write_atomic(&self.sidecar_path(n, reps, seed), &json)?;
        Ok(())
    }

    /// Returns the cached table or simulates and stores it. Unreadable
    /// cache entries are replaced. The flag reports a cache hit.
    pub fn load_or_simulate(
        &self,
        n: usize,
        reps: usize,
        seed: u64,
    ) -> Result<(QuantileTable, bool)> {
        QuantileMethod::FiniteSample { n, reps, seed }.validate()?;
        if let Ok(Some(table)) = self.load(n, reps, seed) {
            return Ok((table, true));
        }
        let table = QuantileTable::simulate(n, reps, seed)?;
        self.store(&table)?;
        Ok((table, false))
    }
}

fn encode_table(table: &QuantileTable, n: usize, reps: usize, seed: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * table.minima.len());
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(reps as u64).to_le_bytes());
    out.extend_from_slice(&seed.to_le_bytes());
    for m in &table.minima {
        out.extend_from_slice(&m.to_le_bytes());
    }
    out
}

fn decode_table(
    bytes: &[u8],
    n: usize,
    reps: usize,
    seed: u64,
) -> std::result::Result<QuantileTable, String> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != CACHE_MAGIC {
        return Err("not a quantile table".into());
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != CACHE_FORMAT_VERSION {
        return Err(format!(
            "format version {version}, expected {CACHE_FORMAT_VERSION}"
        ));
    }
    let header = (u64_at(16), u64_at(24), u64_at(32));
    if header != (n as u64, reps as u64, seed) {
        return Err(format!(
            "header {header:?} does not match requested ({n}, {reps}, {seed})"
        ));
    }
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * reps {
        return Err(format!(
            "expected {reps} entries, found {} bytes",
            body.len()
        ));
    }
    let minima: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if minima.windows(2).any(|w| w[0] > w[1]) || minima.iter().any(|m| m.is_nan() || *m > 0.0) {
        return Err("entries are not sorted non-positive values".into());
    }
    Ok(QuantileTable {
        method: QuantileMethod::FiniteSample { n, reps, seed },
        minima,
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("cache"),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
