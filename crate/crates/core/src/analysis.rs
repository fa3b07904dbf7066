//! Higher-level studies built on the solver, the heavy-traffic rate and the
//! simulator: load sweeps, the scaled density against its exponential limit,
//! and solver-versus-simulation comparisons.

use rayon::prelude::*;
use thiserror::Error;

use crate::distribution::DurationDistribution;
use crate::heavy_traffic::{self, HeavyTrafficResult, HtError};
use crate::inversion::{self, InversionError, MeanOptions, QueueLengthPmf};
use crate::model::{KernelEntry, KernelKind, ModelError, QueueModel};
use crate::sim::{self, Estimate, SimConfig, SimError, SimResult};
use crate::solver::{Epoch, SolverError, StationarySolution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Inversion(#[from] InversionError),
    #[error(transparent)]
    HeavyTraffic(#[from] HtError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("need at least {min} bins, got {got}")]
    TooFewBins { min: usize, got: usize },
    #[error("traffic intensity {0} is not in (0, 1)")]
    BadRho(f64),
}

/// Single-type model with the same arrivals whose service law is the
/// stationary mixture `sum_ij pi_i P_ij G_ij` of the kernel's durations: the
/// same marginal service law with type dependence removed.
pub fn uncorrelated_baseline(model: &QueueModel<f64>) -> Result<QueueModel<f64>, ModelError> {
    let pi = model.moments()?.pi;
    let parts: Vec<(f64, DurationDistribution<f64>)> = model
        .kernel(KernelKind::Regular)
        .iter()
        .zip(&pi)
        .flat_map(|(row, &p)| {
            row.iter()
                .filter(|e| e.weight > 0.0)
                .map(move |e| (p * e.weight, e.duration.clone()))
        })
        .collect();
    let total: f64 = parts.iter().map(|(w, _)| w).sum();
    let parts = parts.into_iter().map(|(w, d)| (w / total, d)).collect();
    QueueModel::new(
        model.lambda(),
        model.batch().clone(),
        vec![vec![KernelEntry::new(1.0, DurationDistribution::Mixture(parts))]],
        None,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    Lambda(Vec<f64>),
    Rho(Vec<f64>),
}

/// Mean queue lengths at one load, in `Epoch::ALL` order.
#[derive(Clone, Debug, PartialEq)]
pub struct PointMeans {
    pub means: [f64; 4],
    /// `(1 - rho) · mean`.
    pub scaled: [f64; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub rho: f64,
    pub analytic: Result<PointMeans, String>,
    pub baseline: Option<Result<PointMeans, String>>,
    /// Simulated means with half-widths, `Epoch::ALL` order.
    pub simulated: Option<Result<Vec<Estimate>, String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// `1/eta` of the model, or `None` when no exponential limit exists.
    pub ht_scaled_mean: Option<f64>,
    pub baseline_ht_scaled_mean: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    pub baseline: bool,
    /// Simulate each point with this configuration.
    pub simulation: Option<SimConfig>,
    pub means: MeanOptions,
}

pub fn point_means(model: &QueueModel<f64>, opts: &MeanOptions) -> Result<PointMeans, AnalysisError> {
    let sol = StationarySolution::new(model.clone())?;
    let mut means = [0.0; 4];
    let mut scaled = [0.0; 4];
    for (k, &e) in Epoch::ALL.iter().enumerate() {
        let m = inversion::mean_queue_length(&sol, e, opts)?;
        means[k] = m.mean;
        scaled[k] = m.scaled_mean;
    }
    Ok(PointMeans { means, scaled })
}

fn ht_scaled_mean(model: &QueueModel<f64>) -> Option<f64> {
    heavy_traffic::ht_rate(model).ok().and_then(|h| h.mean().ok())
}

/// Means along a load grid. Failing points are recorded in their row; rows
/// keep grid order whatever the completion order.
pub fn sweep(model: &QueueModel<f64>, grid: &Grid, opts: &SweepOptions) -> Result<Sweep, AnalysisError> {
    let lambdas: Vec<f64> = match grid {
        Grid::Lambda(ls) => ls.clone(),
        Grid::Rho(rs) => rs
            .iter()
            .map(|&r| model.lambda_for_rho(r))
            .collect::<Result<_, _>>()?,
    };
    let baseline = if opts.baseline {
        Some(uncorrelated_baseline(model)?)
    } else {
        None
    };
    let rows = lambdas
        .par_iter()
        .map(|&lambda| {
            let at = |m: &QueueModel<f64>| -> Result<PointMeans, String> {
                let m = m.with_lambda(lambda).map_err(|e| e.to_string())?;
                point_means(&m, &opts.means).map_err(|e| e.to_string())
            };
            let rho = model
                .with_lambda(lambda)
                .and_then(|m| m.rho())
                .unwrap_or(f64::NAN);
            let simulated = opts.simulation.as_ref().map(|cfg| {
                let m = model.with_lambda(lambda).map_err(|e| e.to_string())?;
                let r = sim::run(&m, cfg).map_err(|e| e.to_string())?;
                Ok(r.epochs
                    .iter()
                    .map(|e| Estimate {
                        mean: e.mean,
                        half_width: e.half_width,
                    })
                    .collect())
            });
            SweepRow {
                lambda,
                rho,
                analytic: at(model),
                baseline: baseline.as_ref().map(at),
                simulated,
            }
        })
        .collect();
    Ok(Sweep {
        rows,
        ht_scaled_mean: ht_scaled_mean(model),
        baseline_ht_scaled_mean: baseline.as_ref().and_then(ht_scaled_mean),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityBin {
    pub x_left: f64,
    pub x_right: f64,
    /// Mass of `(1 - rho) X` in the bin divided by its width.
    pub density: f64,
    /// `P((1 - rho) X <= x_right)`.
    pub cdf: f64,
    pub exp_density: f64,
    pub exp_cdf: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaledDensity {
    pub rho: f64,
    pub eta: f64,
    pub epoch: Epoch,
    pub bins: Vec<DensityBin>,
    /// `sup_x |P((1 - rho) X <= x) - (1 - exp(-eta x))|` over the full pmf.
    pub kolmogorov: f64,
}

pub const MIN_BINS: usize = 10;

/// Kolmogorov distance between the lattice law with atoms `p_n` at `n·h`
/// and `Exp(eta)`. The supremum is attained at an atom, from either side.
pub fn kolmogorov_to_exponential(pmf: &[f64], h: f64, eta: f64) -> f64 {
    let mut below = 0.0;
    let mut d: f64 = 0.0;
    for (n, &p) in pmf.iter().enumerate() {
        let e = 1.0 - (-eta * h * n as f64).exp();
        let at = below + p;
        d = d.max((below - e).abs()).max((at - e).abs());
        below = at;
    }
    // beyond the last atom the lattice cdf stays at `below`
    d.max(1.0 - below)
}

/// Departure-epoch (or `epoch`) law of `(1 - rho) X` at load `rho`, rebinned
/// onto `bins` equal cells up to the exponential's 99.99% quantile.
pub fn scaled_density(
    model: &QueueModel<f64>,
    rho: f64,
    bins: usize,
    epoch: Epoch,
) -> Result<ScaledDensity, AnalysisError> {
    if bins < MIN_BINS {
        return Err(AnalysisError::TooFewBins { min: MIN_BINS, got: bins });
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(AnalysisError::BadRho(rho));
    }
    let ht = heavy_traffic::ht_rate(model)?;
    let eta = ht.eta;
    ht.mean()?;
    let sol = StationarySolution::new(model.with_lambda(model.lambda_for_rho(rho)?)?)?;
    let scale = 1.0 - sol.rho();
    let pmf = inversion::mean_queue_length(&sol, epoch, &MeanOptions::default())?.pmf;
    let x_max = -(1e-4f64).ln() / eta;
    let width = x_max / bins as f64;
    let mut mass = vec![0.0; bins];
    for (n, &p) in pmf.probabilities.iter().enumerate() {
        let k = ((scale * n as f64) / width).floor() as usize;
        if k < bins {
            mass[k] += p;
        }
    }
    let mut cdf = 0.0;
    let out = mass
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            cdf += m;
            let (l, r) = (k as f64 * width, (k + 1) as f64 * width);
            DensityBin {
                x_left: l,
                x_right: r,
                density: m / width,
                cdf,
                exp_density: eta * (-eta * (l + r) / 2.0).exp(),
                exp_cdf: 1.0 - (-eta * r).exp(),
            }
        })
        .collect();
    Ok(ScaledDensity {
        rho: sol.rho(),
        eta,
        epoch,
        bins: out,
        kolmogorov: kolmogorov_to_exponential(&pmf.probabilities, scale, eta),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareOptions {
    pub sim: SimConfig,
    pub tv_threshold: f64,
    /// Allowed |analytic - simulated| mean difference in half-widths.
    pub mean_threshold: f64,
    /// Harness self-test: inflate the analytic `p_1` by 10% before comparing.
    pub corrupt_p1: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            tv_threshold: 0.01,
            mean_threshold: 3.0,
            corrupt_p1: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochComparison {
    pub epoch: Epoch,
    pub total_variation: f64,
    pub analytic_mean: f64,
    pub simulated_mean: f64,
    pub half_width: f64,
    /// `|analytic - simulated| / half_width`.
    pub mean_delta: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub rho: f64,
    pub epochs: Vec<EpochComparison>,
    pub pass: bool,
    pub sim: SimResult,
}

impl CompareReport {
    pub fn failing_epochs(&self) -> Vec<Epoch> {
        self.epochs.iter().filter(|e| !e.pass).map(|e| e.epoch).collect()
    }
}

fn corrupt(pmf: &mut QueueLengthPmf<f64>) {
    if let Some(p) = pmf.probabilities.get_mut(1) {
        *p *= 1.1;
    }
}

pub fn compare(model: &QueueModel<f64>, opts: &CompareOptions) -> Result<CompareReport, AnalysisError> {
    let sol = StationarySolution::new(model.clone())?;
    let simulated = sim::run(model, &opts.sim)?;
    let epochs = Epoch::ALL
        .iter()
        .map(|&epoch| {
            let s = simulated.epoch(epoch);
            let mut pmf = inversion::mean_queue_length(&sol, epoch, &MeanOptions::default())?.pmf;
            if opts.corrupt_p1 {
                corrupt(&mut pmf);
            }
            let analytic_mean = pmf.mean();
            let tv = inversion::total_variation(&pmf.probabilities, &s.pmf);
            let mean_delta = (analytic_mean - s.mean).abs() / s.half_width;
            Ok(EpochComparison {
                epoch,
                total_variation: tv,
                analytic_mean,
                simulated_mean: s.mean,
                half_width: s.half_width,
                mean_delta,
                pass: tv < opts.tv_threshold && mean_delta <= opts.mean_threshold,
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    Ok(CompareReport {
        rho: sol.rho(),
        pass: epochs.iter().all(|e| e.pass),
        epochs,
        sim: simulated,
    })
}

/// Heavy-traffic result of `model` together with the two-type independence
/// value when it applies.
pub fn heavy_traffic_report(model: &QueueModel<f64>) -> Result<(HeavyTrafficResult<f64>, Option<f64>), AnalysisError> {
    let ht = heavy_traffic::ht_rate(model)?;
    let ind = match heavy_traffic::independence_condition(model) {
        Ok(v) => Some(v),
        Err(HtError::NotN2(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok((ht, ind))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn baseline_keeps_rho_and_alpha_hat() {
        let m = presets::two_type_erlang::<f64>(0.02);
        let b = uncorrelated_baseline(&m).unwrap();
        let (mm, bm) = (m.moments().unwrap(), b.moments().unwrap());
        assert!((mm.rho - bm.rho).abs() < 1e-14);
        assert!((mm.alpha_hat_mean() - bm.alpha_hat_mean()).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_of_matching_geometric_is_small() {
        // geometric with ratio exp(-eta h) is the exponential sampled on a lattice
        let (eta, h) = (1.0f64, 1e-3);
        let q: f64 = (-eta * h).exp();
        let pmf: Vec<f64> = (0..20_000).map(|n| (1.0 - q) * q.powi(n)).collect();
        assert!(kolmogorov_to_exponential(&pmf, h, eta) < 2e-3);
        assert!((kolmogorov_to_exponential(&[1.0], h, eta) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_needs_ten_bins() {
        let m = presets::mm1(0.5, 1.0);
        assert_eq!(
            scaled_density(&m, 0.5, 9, Epoch::Departure).unwrap_err(),
            AnalysisError::TooFewBins { min: 10, got: 9 }
        );
    }

    #[test]
    fn rho_grid_matches_definition() {
        let m = presets::two_type_erlang::<f64>(0.02);
        let s = sweep(&m, &Grid::Rho(vec![0.3]), &SweepOptions::default()).unwrap();
        let row = &s.rows[0];
        assert!((row.rho - 0.3).abs() < 1e-12);
        let a = row.analytic.as_ref().unwrap();
        for k in 0..4 {
            assert!((a.scaled[k] - 0.7 * a.means[k]).abs() < 1e-12);
        }
    }
}
