// SPDX-License-Identifier: MIT OR Apache-2.0

//! Subcommand definitions and handlers. Handlers write their report to the
//! supplied writer so they can be driven in-process.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use irregcp::detect::run_test_with_critical;
use irregcp::nulldist::{asymptotic_quantile, QuantileCache, QuantileTable, DEFAULT_REPS};
use irregcp::simulate::{gen_noise, gen_signal, Centering};
use irregcp::{
    locate, DetectorConfig, LocateOutcome, NoiseSpec, QuantileMethod, Series, SignalSpec,
    TestOutcome, VarianceSource,
};
use serde_json::json;

use crate::bench;
use crate::error::{CliError, Result};
use crate::grid::{ExperimentGrid, Method};
use crate::io::{fmt_human, fmt_machine, read_series};

#[derive(Debug, Parser)]
#[command(
    name = "irregcp",
    version,
    about = "One-sided change point detection with irregular post-change signals"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a series; writes `t,mu,z,x` CSV.
    Simulate(SimulateArgs),
    /// Test for an upward mean change.
    Test(TestArgs),
    /// Test, then locate the change point.
    Locate(LocateArgs),
    /// Print the critical value of the test.
    Quantile(QuantileArgs),
    /// Run a Monte-Carlo experiment grid.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    /// Threshold-AR coefficient of the noise.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta: f64,
    /// Innovation standard deviation.
    #[arg(long, default_value_t = 0.5)]
    pub xi: f64,
    /// Post-change signal scale.
    #[arg(long, default_value_t = 0.0)]
    pub s: f64,
    /// Pre-change level.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub mu1: f64,
    #[arg(long, requires_all = ["tau1", "tau2"])]
    pub tau: Option<usize>,
    #[arg(long)]
    pub tau1: Option<usize>,
    #[arg(long)]
    pub tau2: Option<usize>,
    /// Regime boundaries as fractions of n, used when --tau is absent.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.4, 0.6, 0.8])]
    pub ratios: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = irregcp::simulate::DEFAULT_BURN_IN)]
    pub burn_in: usize,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV file with a header row.
    pub input: PathBuf,
    #[arg(long, default_value = "value")]
    pub column: String,
    #[arg(long, default_value = "label")]
    pub label_column: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum QuantileChoice {
    Asymptotic,
    Finite,
}

#[derive(Debug, Args)]
pub struct DetectorArgs {
    /// Block length; defaults to ceil(n^(1/3)).
    #[arg(long)]
    pub k: Option<usize>,
    /// Order-statistic depth for the pre-change segment.
    #[arg(long, default_value_t = 3)]
    pub j: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = QuantileChoice::Asymptotic)]
    pub quantile: QuantileChoice,
    /// Bridge replications for the finite-sample cutoff.
    #[arg(long, default_value_t = DEFAULT_REPS)]
    pub quantile_reps: usize,
    /// Seed of the finite-sample cutoff simulation.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Known long-run variance; estimated from the data when absent.
    #[arg(long)]
    pub sigma_sq: Option<f64>,
    /// Quantile cache directory (or set IRREGCP_CACHE_DIR).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

impl DetectorArgs {
    fn config(&self, n: usize) -> DetectorConfig {
        DetectorConfig {
            k: self.k,
            j: self.j,
            rho: self.rho,
            alpha: self.alpha,
            quantile_method: match self.quantile {
                QuantileChoice::Asymptotic => QuantileMethod::Asymptotic,
                QuantileChoice::Finite => QuantileMethod::FiniteSample {
                    n,
                    reps: self.quantile_reps,
                    seed: self.seed,
                },
            },
            variance_source: match self.sigma_sq {
                Some(sigma_inf_sq) => VarianceSource::Known { sigma_inf_sq },
                None => VarianceSource::Estimate,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct LocateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long, value_enum, default_value_t = Method::Irregcp)]
    pub method: Method,
    /// 1SBS threshold constant.
    #[arg(long, default_value_t = irregcp::baselines::DEFAULT_SBS_CONSTANT)]
    pub sbs_const: f64,
    /// Locate even when the test does not reject.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct QuantileArgs {
    /// Series length; required for the finite-sample method.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = QuantileChoice::Asymptotic)]
    pub method: QuantileChoice,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Grid file (see the module docs of `grid` for the format).
    #[arg(long)]
    pub grid: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = default_workers())]
    pub workers: usize,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Suppress per-cell progress lines on stderr.
    #[arg(long)]
    pub quiet: bool,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn cache(dir: &Option<PathBuf>) -> Option<QuantileCache> {
    dir.as_ref()
        .map(QuantileCache::new)
        .or_else(QuantileCache::from_env)
}

/// Resolved cutoff and whether it came from the cache.
struct Cutoff {
    value: f64,
    cache: &'static str,
}

fn cutoff(method: &QuantileMethod, alpha: f64, cache_dir: &Option<PathBuf>) -> Result<Cutoff> {
    method.validate()?;
    match *method {
        QuantileMethod::Asymptotic => Ok(Cutoff {
            value: asymptotic_quantile(alpha)?,
            cache: "none",
        }),
        QuantileMethod::FiniteSample { n, reps, seed } => {
            let (table, hit) = match cache(cache_dir) {
                Some(c) => c.load_or_simulate(n, reps, seed)?,
                None => (QuantileTable::simulate(n, reps, seed)?, false),
            };
            let status = match (cache(cache_dir).is_some(), hit) {
                (false, _) => "none",
                (true, true) => "hit",
                (true, false) => "miss",
            };
            Ok(Cutoff {
                value: table.quantile(alpha)?,
                cache: status,
            })
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a, out, err),
        Command::Test(a) => test(&a, out),
        Command::Locate(a) => locate_cmd(&a, out),
        Command::Quantile(a) => quantile(&a, out),
        Command::Bench(a) => bench_cmd(&a, out, err),
    }
}

pub fn simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let signal = match a.tau {
        Some(tau) => SignalSpec {
            n: a.n,
            tau,
            tau1: a.tau1.unwrap_or_default(),
            tau2: a.tau2.unwrap_or_default(),
            s: a.s,
            mu1: a.mu1,
        },
        None => {
            if a.ratios.len() != 3 {
                return Err(CliError::Input("--ratios takes three values".into()));
            }
            SignalSpec {
                mu1: a.mu1,
                ..SignalSpec::from_ratios(a.n, a.s, (a.ratios[0], a.ratios[1], a.ratios[2]))?
            }
        }
    };
    signal.validate()?;
    let mu = gen_signal(&signal)?;
    let noise = NoiseSpec {
        burn_in: a.burn_in,
        ..NoiseSpec::new(a.theta, a.xi)
    };
    let z = if a.xi == 0.0 {
        vec![0.0; a.n]
    } else {
        gen_noise(&noise, a.n, a.seed)?.values().to_vec()
    };
    let centering = match noise.resolved()?.centering {
        Centering::TableConstant { mean_per_unit_sd } => {
            format!("table constant {mean_per_unit_sd}")
        }
        Centering::Calibrated { .. } => format!("calibrated {}", noise.centering_constant()?),
    };
    writeln!(err, "seed = {}; centering = {centering}", a.seed)?;

    let mut file;
    let sink: &mut dyn Write = match &a.out {
        Some(path) => {
            file = std::fs::File::create(path)?;
            &mut file
        }
        None => out,
    };
    let csv_err = |source| CliError::Csv {
        path: a.out.clone().unwrap_or_else(|| "<stdout>".into()),
        source,
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["t", "mu", "z", "x"]).map_err(csv_err)?;
    for (i, (m, e)) in mu.iter().zip(&z).enumerate() {
        w.write_record([
            (i + 1).to_string(),
            fmt_machine(*m),
            fmt_machine(*e),
            fmt_machine(m + e),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn load(input: &InputArgs) -> Result<Series> {
    read_series(&input.input, &input.column, &input.label_column)
}

fn run_test(series: &Series, detector: &DetectorArgs) -> Result<(TestOutcome, Cutoff)> {
    let config = detector.config(series.len());
    config.validate()?;
    let cut = cutoff(&config.quantile_method, config.alpha, &detector.cache_dir)?;
    Ok((run_test_with_critical(series, &config, cut.value)?, cut))
}

fn test_json(
    t: &TestOutcome,
    cut: &Cutoff,
    detector: &DetectorArgs,
    n: usize,
) -> serde_json::Value {
    json!({
        "n": n,
        "t_hat": t.t_hat,
        "sigma": t.sigma_used,
        "variance_source": if detector.sigma_sq.is_some() { "known" } else { "estimate" },
        "critical_value": t.critical_value,
        "quantile_method": t.method,
        "alpha": detector.alpha,
        "p_value_asymptotic": t.p_value_asymptotic,
        "reject": t.reject,
        "cache": cut.cache,
    })
}

fn write_test_human(
    out: &mut dyn Write,
    t: &TestOutcome,
    detector: &DetectorArgs,
    n: usize,
) -> Result<()> {
    let source = if detector.sigma_sq.is_some() {
        "known"
    } else {
        "estimated"
    };
    writeln!(out, "n                 {n}")?;
    writeln!(out, "T_hat             {}", fmt_human(t.t_hat))?;
    writeln!(
        out,
        "sigma             {} ({source})",
        fmt_human(t.sigma_used)
    )?;
    writeln!(
        out,
        "critical value    {} ({}, alpha = {})",
        fmt_human(t.critical_value),
        t.method.name(),
        detector.alpha
    )?;
    writeln!(out, "p-value (asympt.) {}", fmt_human(t.p_value_asymptotic))?;
    writeln!(
        out,
        "decision          {}",
        if t.reject {
            "reject H0"
        } else {
            "do not reject H0"
        }
    )?;
    Ok(())
}

pub fn test(a: &TestArgs, out: &mut dyn Write) -> Result<()> {
    let series = load(&a.input)?;
    let (t, cut) = run_test(&series, &a.detector)?;
    if a.json {
        writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&test_json(&t, &cut, &a.detector, series.len()))?
        )?;
    } else {
        write_test_human(out, &t, &a.detector, series.len())?;
    }
    Ok(())
}

pub fn locate_cmd(a: &LocateArgs, out: &mut dyn Write) -> Result<()> {
    let series = load(&a.input)?;
    let (t, cut) = run_test(&series, &a.detector)?;
    let gate_open = t.reject || a.force;

    let mut trace: Option<LocateOutcome> = None;
    let tau_hat = if !gate_open {
        None
    } else if let Some(kind) = a.method.baseline(a.sbs_const) {
        kind.locate(&series)?
    } else {
        let outcome = locate(&series, &a.detector.config(series.len()))?;
        let tau = outcome.tau_hat;
        trace = Some(outcome);
        Some(tau)
    };
    let label = tau_hat.and_then(|i| series.label(i)).map(str::to_owned);

    if a.json {
        let mut report = json!({
            "method": a.method,
            "test": test_json(&t, &cut, &a.detector, series.len()),
            "forced": a.force && !t.reject,
            "located": gate_open,
            "tau_hat": tau_hat,
            "label": label,
        });
        if let Some(tr) = &trace {
            report["sigma_hat"] = json!(tr.sigma_sq_hat.sqrt());
            report["trace"] = serde_json::to_value(tr)?;
        }
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
        return Ok(());
    }

    write_test_human(out, &t, &a.detector, series.len())?;
    writeln!(out, "method            {}", a.method)?;
    if !gate_open {
        writeln!(
            out,
            "tau_hat           not located: the test does not reject (use --force)"
        )?;
        return Ok(());
    }
    if let Some(tr) = &trace {
        writeln!(out, "k, m, J           {}, {}, {}", tr.k, tr.m, tr.j)?;
        writeln!(out, "L_hat             {}", tr.l_hat)?;
        writeln!(out, "ell_hat           {}", tr.ell_hat)?;
        writeln!(out, "mu0_hat           {}", fmt_human(tr.mu0_hat))?;
        writeln!(
            out,
            "sigma_hat         {}",
            fmt_human(tr.sigma_sq_hat.sqrt())
        )?;
        writeln!(out, "threshold         {}", fmt_human(tr.threshold))?;
        writeln!(out, "eta_hat           {}", tr.eta_hat)?;
        writeln!(out, "mu1_hat           {}", fmt_human(tr.mu1_hat))?;
        writeln!(out, "d_hat             {}", fmt_human(tr.d_hat))?;
        writeln!(out, "rho               {}", tr.rho)?;
    }
    match tau_hat {
        Some(tau) => writeln!(out, "tau_hat           {tau}")?,
        None => writeln!(out, "tau_hat           none (no change found)")?,
    }
    if let Some(l) = &label {
        writeln!(out, "label             {l}")?;
    }
    Ok(())
}

pub fn quantile(a: &QuantileArgs, out: &mut dyn Write) -> Result<()> {
    let method = match a.method {
        QuantileChoice::Asymptotic => QuantileMethod::Asymptotic,
        QuantileChoice::Finite => QuantileMethod::FiniteSample {
            n: a.n.ok_or_else(|| {
                CliError::Input("--n is required for the finite-sample method".into())
            })?,
            reps: a.reps,
            seed: a.seed,
        },
    };
    let cut = cutoff(&method, a.alpha, &a.cache_dir)?;
    if a.json {
        let mut report = json!({
            "alpha": a.alpha,
            "method": method,
            "critical_value": cut.value,
            "cache": cut.cache,
        });
        if let QuantileMethod::FiniteSample { seed, .. } = method {
            report["seed"] = json!(seed);
        }
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        writeln!(out, "{}", cut.value)?;
    }
    Ok(())
}

pub fn bench_cmd(a: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(&a.grid)?;
    let grid = ExperimentGrid::parse(&text)?;
    let cache = cache(&a.cache_dir);
    let total = grid.n_values.len() * grid.theta_values.len() * grid.s_values.len();
    let mut done = 0;
    let report = bench::run(&grid, a.workers, cache.as_ref(), |cell| {
        done += 1;
        if !a.quiet {
            let status = match &cell.error {
                Some(e) => format!("failed: {e}"),
                None => format!("rate {}", fmt_human(cell.rejection_rate())),
            };
            let _ = writeln!(
                err,
                "[{done}/{total}] n = {}, theta = {}, s = {}: {status} ({:.1}s)",
                cell.key.n,
                cell.key.theta,
                cell.key.s,
                cell.wall_time.as_secs_f64()
            );
        }
    })?;
    report.write(&a.out)?;
    writeln!(
        out,
        "wrote {} cells to {}",
        report.cells.len(),
        a.out.display()
    )?;
    if report.all_failed() {
        return Err(CliError::AllCellsFailed);
    }
    Ok(())
}
