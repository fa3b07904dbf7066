//! `smq` command-line front end. Each subcommand prints its primary result to
//! stdout; with `--out DIR` it also writes files there together with a
//! `<command>.manifest.json` describing how they were produced.
//!
//! Exit codes: 0 success, 1 I/O failure or failed comparison, 2 invalid
//! input (model file, flags), 3 solver or heavy-traffic failure.

pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use smq_core::analysis::{self, AnalysisError, CompareOptions, Grid, SweepOptions};
use smq_core::export;
use smq_core::heavy_traffic::HtError;
use smq_core::inversion::{self, InversionError, MeanOptions};
use smq_core::model_json::{ModelSpec, SpecError};
use smq_core::sim::{SimConfig, SimError};
use smq_core::{Epoch, Model, ModelError, Solution, SolverError};
use thiserror::Error;

use crate::manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "smq", version, about = "Batch-arrival semi-Markov queue: exact solution, heavy traffic, simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary solution: roots, boundary probabilities, rho, pi, f_i(1).
    Solve(SolveArgs),
    /// Heavy-traffic rate eta of the scaled queue length.
    Ht(HtArgs),
    /// Mean queue lengths along a load grid.
    Sweep(SweepArgs),
    /// Density of the scaled queue length against its exponential limit.
    Density(DensityArgs),
    /// Solver against simulation, per epoch.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Directory for output files and the run manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct SimArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Departures per replication, warmup included.
    #[arg(long, default_value_t = 1_000_000)]
    pub departures: u64,
    #[arg(long, default_value_t = 1)]
    pub replications: usize,
    #[arg(long, default_value_t = 0.1)]
    pub warmup: f64,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            num_departures: self.departures,
            warmup_fraction: self.warmup,
            replications: self.replications,
            ..SimConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Override the model's arrival rate.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Write pmf CSVs (needs --out).
    #[arg(long)]
    pub pmf: bool,
    /// Epoch for --pmf; all four when omitted.
    #[arg(long)]
    pub epoch: Option<Epoch>,
    /// Fixed pmf truncation; adaptive when omitted.
    #[arg(long)]
    pub max_n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct HtArgs {
    #[command(flatten)]
    pub common: Common,
    /// Report an invalid (non-positive) denominator without failing.
    #[arg(long)]
    pub allow_invalid: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Arrival rates, `a:b:step` or a comma list.
    #[arg(long, conflicts_with = "rho_grid", required_unless_present = "rho_grid")]
    pub lambda_grid: Option<String>,
    /// Traffic intensities, `a:b:step` or a comma list.
    #[arg(long)]
    pub rho_grid: Option<String>,
    /// Add the single-type baseline with the same marginal service law.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long)]
    pub with_simulation: bool,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub rho: f64,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[arg(long, default_value = "departure")]
    pub epoch: Epoch,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value_t = 0.01)]
    pub tv_threshold: f64,
    /// Allowed mean difference in confidence half-widths.
    #[arg(long, default_value_t = 3.0)]
    pub mean_threshold: f64,
    /// Write simulated pmf CSVs (needs --out).
    #[arg(long)]
    pub pmf: bool,
    /// Harness self-test: perturb the analytic p_1 by 10%.
    #[arg(long, hide = true)]
    pub corrupt_p1: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
    #[error("comparison failed for epochs: {0}")]
    CompareFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) | Self::CompareFailed(_) => 1,
            Self::Invalid(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl From<SpecError> for CliError {
    fn from(e: SpecError) -> Self {
        match e {
            SpecError::Io { .. } => Self::Io(e.to_string()),
            _ => Self::Invalid(format!("invalid model: {e}")),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self::Invalid(format!("invalid model: {e}"))
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Model(m) => m.into(),
            e => Self::Numerical(format!("solver: {e}")),
        }
    }
}

impl From<InversionError> for CliError {
    fn from(e: InversionError) -> Self {
        match e {
            InversionError::Solver(s) => s.into(),
            InversionError::BadTruncation => Self::Invalid(e.to_string()),
            e => Self::Numerical(format!("inversion: {e}")),
        }
    }
}

impl From<HtError> for CliError {
    fn from(e: HtError) -> Self {
        match e {
            HtError::Model(m) => m.into(),
            e => Self::Numerical(format!("heavy traffic: {e}")),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Model(m) => m.into(),
            SimError::TooFewDepartures { .. } | SimError::TooFewReplications(_) | SimError::BadWarmup(_) => {
                Self::Invalid(format!("simulation: {e}"))
            }
            e => Self::Numerical(format!("simulation: {e}")),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Model(e) => e.into(),
            AnalysisError::Solver(e) => e.into(),
            AnalysisError::Inversion(e) => e.into(),
            AnalysisError::HeavyTraffic(e) => e.into(),
            AnalysisError::Sim(e) => e.into(),
            e @ (AnalysisError::TooFewBins { .. } | AnalysisError::BadRho(_)) => Self::Invalid(e.to_string()),
        }
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Parses `a:b:step` (inclusive of `b` up to rounding) or `x1,x2,...`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Invalid(format!("grid '{s}': {why}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(&format!("'{t}' is not a number")));
    let values = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts.as_slice() else {
            return Err(bad("expected a:b:step"));
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !(step > 0.0) || b < a {
            return Err(bad("need a <= b and step > 0"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| a + k as f64 * step).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad("no finite values"));
    }
    Ok(values)
}

struct Loaded {
    model: Model,
    /// Canonical JSON of the resolved model, used for hashing.
    canonical: String,
}

fn load(path: &Path) -> Result<Loaded, CliError> {
    let spec = ModelSpec::from_path(path)?;
    let model = spec.to_model()?;
    Ok(Loaded {
        canonical: serde_json::to_string(&spec).expect("spec serialises"),
        model,
    })
}

/// Collects outputs when `--out` was given.
struct Outputs {
    dir: Option<PathBuf>,
    manifest: RunManifest,
}

impl Outputs {
    fn new(out: &Option<PathBuf>, command: &str, config: serde_json::Value, canonical: &str) -> Result<Self, CliError> {
        if let Some(d) = out {
            std::fs::create_dir_all(d).map_err(io_err)?;
        }
        Ok(Self {
            dir: out.clone(),
            manifest: RunManifest::new(command, config, canonical),
        })
    }

    fn require_dir(&self, flag: &str) -> Result<(), CliError> {
        if self.dir.is_none() {
            return Err(CliError::Invalid(format!("{flag} needs --out DIR")));
        }
        Ok(())
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        if let Some(d) = &self.dir {
            self.manifest.write_output(d, name, contents).map_err(io_err)?;
        }
        Ok(())
    }

    fn finish(self) -> Result<(), CliError> {
        if let Some(d) = &self.dir {
            let p = self.manifest.finish(d).map_err(io_err)?;
            log::info!("manifest {}", p.display());
        }
        Ok(())
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json serialises") + "\n"
}

fn cmd_solve(a: &SolveArgs) -> Result<String, CliError> {
    let loaded = load(&a.common.model)?;
    let model = match a.lambda {
        Some(l) => loaded.model.with_lambda(l)?,
        None => loaded.model,
    };
    let config = json!({"lambda": model.lambda(), "pmf": a.pmf, "epoch": a.epoch.map(|e| e.as_str()), "max_n": a.max_n});
    let mut out = Outputs::new(&a.common.out, "solve", config, &loaded.canonical)?;
    if a.pmf {
        out.require_dir("--pmf")?;
    }
    let sol = Solution::new(model)?;
    let epochs: Vec<Epoch> = a.epoch.map(|e| vec![e]).unwrap_or_else(|| Epoch::ALL.to_vec());
    let mut value = export::solution_json(&sol);
    let mut means = serde_json::Map::new();
    let mut pmfs = Vec::new();
    for &e in &epochs {
        // a failed mean does not invalidate the solution itself
        match inversion::mean_queue_length(&sol, e, &MeanOptions::default()) {
            Ok(m) => {
                means.insert(e.as_str().into(), export::num(m.mean));
                pmfs.push(m.pmf);
            }
            Err(err) => {
                log::warn!("{e} mean queue length: {err}");
                means.insert(e.as_str().into(), serde_json::Value::Null);
                if a.pmf && a.max_n.is_none() {
                    return Err(err.into());
                }
            }
        }
    }
    value["mean_queue_length"] = means.into();
    let text = pretty(&value);
    out.write("solution.json", &text)?;
    if a.pmf {
        if let Some(m) = a.max_n {
            pmfs = epochs
                .iter()
                .map(|&e| inversion::invert_pgf(&sol, e, m))
                .collect::<Result<_, _>>()?;
        }
        for pmf in &pmfs {
            out.write(&format!("pmf_{}.csv", pmf.epoch.as_str()), &export::pmf_csv(pmf))?;
        }
    }
    out.finish()?;
    Ok(text)
}

fn cmd_ht(a: &HtArgs) -> Result<String, CliError> {
    let loaded = load(&a.common.model)?;
    let mut out = Outputs::new(&a.common.out, "ht", json!({"allow_invalid": a.allow_invalid}), &loaded.canonical)?;
    let (ht, ind) = analysis::heavy_traffic_report(&loaded.model)?;
    let text = pretty(&export::ht_json(&ht, ind));
    out.write("ht.json", &text)?;
    out.finish()?;
    if !ht.valid && !a.allow_invalid {
        return Err(CliError::Numerical(format!(
            "heavy traffic: denominator {} is not positive, no exponential limit (pass --allow-invalid to report it anyway)\n{text}",
            ht.denominator
        )));
    }
    Ok(text)
}

fn cmd_sweep(a: &SweepArgs) -> Result<String, CliError> {
    let loaded = load(&a.common.model)?;
    let grid = match (&a.lambda_grid, &a.rho_grid) {
        (Some(g), _) => Grid::Lambda(parse_grid(g)?),
        (None, Some(g)) => {
            let rs = parse_grid(g)?;
            if let Some(r) = rs.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
                return Err(CliError::Invalid(format!("rho-grid value {r} is not in (0, 1)")));
            }
            Grid::Rho(rs)
        }
        (None, None) => return Err(CliError::Invalid("one of --lambda-grid or --rho-grid is required".into())),
    };
    let opts = SweepOptions {
        baseline: a.baseline,
        simulation: a.with_simulation.then(|| a.sim.config()),
        means: MeanOptions::default(),
    };
    let config = json!({
        "lambda_grid": a.lambda_grid, "rho_grid": a.rho_grid, "baseline": a.baseline,
        "with_simulation": a.with_simulation, "seed": a.sim.seed, "departures": a.sim.departures,
        "replications": a.sim.replications, "warmup": a.sim.warmup,
    });
    let mut out = Outputs::new(&a.common.out, "sweep", config, &loaded.canonical)?;
    let sweep = analysis::sweep(&loaded.model, &grid, &opts)?;
    for (i, row) in sweep.rows.iter().enumerate() {
        if let Err(e) = &row.analytic {
            log::warn!("grid point {i} (lambda {}): {e}", row.lambda);
        }
    }
    let text = export::sweep_csv(&sweep, a.baseline, a.with_simulation);
    out.write("sweep.csv", &text)?;
    out.finish()?;
    Ok(text)
}

fn cmd_density(a: &DensityArgs) -> Result<String, CliError> {
    if a.bins < analysis::MIN_BINS {
        return Err(CliError::Invalid(format!("--bins must be at least {}, got {}", analysis::MIN_BINS, a.bins)));
    }
    let loaded = load(&a.common.model)?;
    let config = json!({"rho": a.rho, "bins": a.bins, "epoch": a.epoch.as_str()});
    let mut out = Outputs::new(&a.common.out, "density", config, &loaded.canonical)?;
    let d = analysis::scaled_density(&loaded.model, a.rho, a.bins, a.epoch)?;
    let text = export::density_csv(&d);
    out.write("density.csv", &text)?;
    let summary = json!({
        "rho": export::num(d.rho), "eta": export::num(d.eta), "epoch": d.epoch.as_str(),
        "kolmogorov_distance": export::num(d.kolmogorov),
    });
    out.write("density.json", &pretty(&summary))?;
    out.finish()?;
    log::info!("Kolmogorov distance to Exp(eta): {}", d.kolmogorov);
    Ok(text)
}

fn cmd_compare(a: &CompareArgs) -> Result<String, CliError> {
    let loaded = load(&a.common.model)?;
    let config = json!({
        "seed": a.sim.seed, "departures": a.sim.departures, "replications": a.sim.replications,
        "warmup": a.sim.warmup, "tv_threshold": a.tv_threshold, "mean_threshold": a.mean_threshold,
        "corrupt_p1": a.corrupt_p1,
    });
    let mut out = Outputs::new(&a.common.out, "compare", config, &loaded.canonical)?;
    if a.pmf {
        out.require_dir("--pmf")?;
    }
    let opts = CompareOptions {
        sim: a.sim.config(),
        tv_threshold: a.tv_threshold,
        mean_threshold: a.mean_threshold,
        corrupt_p1: a.corrupt_p1,
    };
    let report = analysis::compare(&loaded.model, &opts)?;
    let text = pretty(&export::compare_json(&report));
    out.write("compare.json", &text)?;
    if a.pmf {
        for e in &report.sim.epochs {
            out.write(&format!("sim_pmf_{}.csv", e.epoch.as_str()), &export::sim_pmf_csv(e))?;
        }
    }
    out.finish()?;
    if !report.pass {
        let names: Vec<&str> = report.failing_epochs().iter().map(|e| e.as_str()).collect();
        return Err(CliError::CompareFailed(format!("{}\n{text}", names.join(", "))));
    }
    Ok(text)
}

/// Runs a parsed command and returns what to print on success.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Ht(a) => cmd_ht(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Density(a) => cmd_density(a),
        Command::Compare(a) => cmd_compare(a),
    }
}
