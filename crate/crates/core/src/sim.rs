//! Discrete-event simulation of the queue, used as an independent check on the
//! transform solution. Always runs in `f64`.
//!
//! A run is strictly sequential. Replications are independent ChaCha8 streams
//! `(seed, replication)`; they run in parallel and are merged in index order,
//! so results are bit-identical across runs and thread counts.

use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Gamma, Geometric};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::distribution::{BatchDistribution, DurationDistribution};
use crate::inversion::{Provenance, QueueLengthPmf};
use crate::model::{Kernel, KernelKind, ModelError, QueueModel};
use crate::solver::Epoch;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("traffic intensity {0} is not below 1")]
    Unstable(f64),
    #[error("queue length reached the ceiling {ceiling} at t = {time} (replication {replication})")]
    UnstableRun {
        ceiling: u64,
        time: f64,
        replication: u64,
    },
    #[error("need at least {min} departures for statistics, got {got}")]
    TooFewDepartures { min: u64, got: u64 },
    #[error("replicate needs at least 2 replications, got {0}")]
    TooFewReplications(usize),
    #[error("warmup fraction must be in [0, 1), got {0}")]
    BadWarmup(f64),
}

pub const MIN_DEPARTURES: u64 = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    /// Total departures per replication, warmup included.
    pub num_departures: u64,
    pub warmup_fraction: f64,
    pub replications: usize,
    pub queue_ceiling: u64,
    /// Batches for within-run half-widths when `replications == 1`.
    pub batches: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_departures: 1_000_000,
            warmup_fraction: 0.1,
            replications: 1,
            queue_ceiling: 10_000_000,
            batches: 20,
        }
    }
}

impl SimConfig {
    fn warmup_departures(&self) -> u64 {
        (self.warmup_fraction * self.num_departures as f64).floor() as u64
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(SimError::BadWarmup(self.warmup_fraction));
        }
        let measured = self.num_departures - self.warmup_departures().min(self.num_departures);
        if measured < MIN_DEPARTURES {
            return Err(SimError::TooFewDepartures {
                min: MIN_DEPARTURES,
                got: measured,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: Epoch,
    pub pmf: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    /// 95% half-width of `mean`.
    pub half_width: f64,
}

impl EpochStats {
    pub fn to_pmf(&self) -> QueueLengthPmf<f64> {
        QueueLengthPmf {
            probabilities: self.pmf.clone(),
            tail: 0.0,
            epoch: self.epoch,
            provenance: Provenance::Simulated,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    pub seed: u64,
    pub replications: usize,
    pub num_departures: u64,
    pub warmup_departures: u64,
    /// In `Epoch::ALL` order.
    pub epochs: Vec<EpochStats>,
    pub utilization: Estimate,
    pub mean_sojourn: Estimate,
    /// Fraction of departures leaving the system empty with next type `i`.
    pub empty_by_next_type: Vec<f64>,
    /// Fraction of services started from the exceptional kernel.
    pub exceptional_fraction: f64,
    /// Type frequencies at regular (non-opening) service starts.
    pub regular_type_frequencies: Vec<f64>,
    pub simulated_time: f64,
}

impl SimResult {
    pub fn epoch(&self, epoch: Epoch) -> &EpochStats {
        self.epochs.iter().find(|e| e.epoch == epoch).expect("all epochs are present")
    }
}

enum DurationSampler {
    Exp(Exp<f64>),
    Gamma(Gamma<f64>),
    Fixed(f64),
    Hyper(f64, Exp<f64>, Exp<f64>),
    Mixture(WeightedIndex<f64>, Vec<DurationSampler>),
}

impl DurationSampler {
    fn new(d: &DurationDistribution<f64>) -> Self {
        match d {
            DurationDistribution::Exponential { rate } => Self::Exp(Exp::new(*rate).expect("validated rate")),
            DurationDistribution::Erlang { shape, rate } => {
                Self::Gamma(Gamma::new(*shape as f64, 1.0 / rate).expect("validated Erlang"))
            }
            DurationDistribution::Deterministic { value } => Self::Fixed(*value),
            DurationDistribution::Hyperexponential2 { p, rate1, rate2 } => Self::Hyper(
                *p,
                Exp::new(*rate1).expect("validated rate"),
                Exp::new(*rate2).expect("validated rate"),
            ),
            DurationDistribution::Mixture(parts) => Self::Mixture(
                WeightedIndex::new(parts.iter().map(|(w, _)| *w)).expect("validated weights"),
                parts.iter().map(|(_, d)| Self::new(d)).collect(),
            ),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Exp(e) => e.sample(rng),
            Self::Gamma(g) => g.sample(rng),
            Self::Fixed(v) => *v,
            Self::Hyper(p, a, b) => {
                if rng.random::<f64>() < *p {
                    a.sample(rng)
                } else {
                    b.sample(rng)
                }
            }
            Self::Mixture(idx, parts) => parts[idx.sample(rng)].sample(rng),
        }
    }
}

/// Row `i` of a kernel: next type first, then that entry's duration.
struct RowSampler {
    next: WeightedIndex<f64>,
    durations: Vec<DurationSampler>,
}

fn kernel_sampler(kernel: &Kernel<f64>) -> Vec<RowSampler> {
    kernel
        .iter()
        .map(|row| RowSampler {
            next: WeightedIndex::new(row.iter().map(|e| e.weight)).expect("validated row"),
            durations: row.iter().map(|e| DurationSampler::new(&e.duration)).collect(),
        })
        .collect()
}

enum BatchSampler {
    One,
    Finite(WeightedIndex<f64>),
    Geometric(Geometric),
}

impl BatchSampler {
    fn new(b: &BatchDistribution<f64>) -> Self {
        match b {
            b if b.is_single() => Self::One,
            BatchDistribution::Finite(pmf) => Self::Finite(WeightedIndex::new(pmf.iter().copied()).expect("validated pmf")),
            BatchDistribution::Geometric { p } => Self::Geometric(Geometric::new(*p).expect("validated p")),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        match self {
            Self::One => 1,
            Self::Finite(idx) => idx.sample(rng) as u64 + 1,
            Self::Geometric(g) => g.sample(rng) + 1,
        }
    }
}

struct Samplers {
    interarrival: Exp<f64>,
    batch: BatchSampler,
    regular: Vec<RowSampler>,
    exceptional: Vec<RowSampler>,
}

impl Samplers {
    fn new(model: &QueueModel<f64>) -> Self {
        Self {
            interarrival: Exp::new(model.lambda()).expect("validated lambda"),
            batch: BatchSampler::new(model.batch()),
            regular: kernel_sampler(model.kernel(KernelKind::Regular)),
            exceptional: kernel_sampler(model.kernel(KernelKind::Exceptional)),
        }
    }
}

/// Integer histogram that grows on demand.
#[derive(Clone, Debug, Default)]
struct Histogram(Vec<u64>);

impl Histogram {
    fn add(&mut self, n: u64) {
        let n = n as usize;
        if n >= self.0.len() {
            self.0.resize(n + 1, 0);
        }
        self.0[n] += 1;
    }
}

#[derive(Clone, Debug, Default)]
struct Area(Vec<f64>);

impl Area {
    fn add(&mut self, n: u64, dt: f64) {
        let n = n as usize;
        if n >= self.0.len() {
            self.0.resize(n + 1, 0.0);
        }
        self.0[n] += dt;
    }
}

/// Sums over one batch of departures.
#[derive(Clone, Copy, Debug, Default)]
struct BatchSums {
    sums: [f64; 4],
    counts: [f64; 3],
    busy: f64,
    time: f64,
    sojourn: f64,
    departures: f64,
}

impl BatchSums {
    fn means(&self) -> ([f64; 4], f64, f64) {
        let mut m = [0.0; 4];
        for k in [DEP, BA, CA] {
            m[k] = if self.counts[k] > 0.0 { self.sums[k] / self.counts[k] } else { 0.0 };
        }
        m[AR] = self.sums[AR] / self.time;
        (m, self.busy / self.time, self.sojourn / self.departures)
    }
}

const DEP: usize = 0;
const BA: usize = 1;
const CA: usize = 2;
const AR: usize = 3;

/// Raw output of one replication.
struct RunOutput {
    hist: [Histogram; 3],
    area: Area,
    batches: Vec<BatchSums>,
    empty_by_next_type: Vec<u64>,
    exceptional_starts: u64,
    starts: u64,
    regular_types: Vec<u64>,
    measured_departures: u64,
    time: f64,
}

fn run_once(model: &QueueModel<f64>, cfg: &SimConfig, replication: u64) -> Result<RunOutput, SimError> {
    let n_types = model.n_types();
    let s = Samplers::new(model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(replication);

    let warmup = cfg.warmup_departures();
    let measured = cfg.num_departures - warmup;
    let per_batch = (measured / cfg.batches.max(1) as u64).max(1);

    let mut out = RunOutput {
        hist: Default::default(),
        area: Area::default(),
        batches: Vec::with_capacity(cfg.batches),
        empty_by_next_type: vec![0; n_types],
        exceptional_starts: 0,
        starts: 0,
        regular_types: vec![0; n_types],
        measured_departures: 0,
        time: 0.0,
    };
    let mut cur = BatchSums::default();

    let mut t = 0.0f64;
    let mut x: u64 = 0;
    let mut next_type = rng.random_range(0..n_types);
    // the empty initial system counts as "left empty"
    let mut left_empty = true;
    let mut next_arrival = s.interarrival.sample(&mut rng);
    let mut next_departure = f64::INFINITY;
    let mut arrivals: VecDeque<f64> = VecDeque::new();
    let mut departures: u64 = 0;
    let mut collecting = warmup == 0;

    let start_service = |rng: &mut ChaCha8Rng, t: f64, left_empty: bool, next_type: &mut usize, out: &mut RunOutput, collecting: bool| {
        let rows = if left_empty { &s.exceptional } else { &s.regular };
        let row = &rows[*next_type];
        if collecting {
            out.starts += 1;
            if left_empty {
                out.exceptional_starts += 1;
            } else {
                out.regular_types[*next_type] += 1;
            }
        }
        let j = row.next.sample(rng);
        let d = row.durations[j].sample(rng);
        *next_type = j;
        t + d
    };

    while departures < cfg.num_departures {
        let t_next = next_arrival.min(next_departure);
        if collecting {
            let dt = t_next - t;
            out.area.add(x, dt);
            cur.sums[AR] += x as f64 * dt;
            cur.time += dt;
            if x > 0 {
                cur.busy += dt;
            }
        }
        t = t_next;
        // ties are measure-zero; departures win
        if next_departure <= next_arrival {
            x -= 1;
            departures += 1;
            let arrived = arrivals.pop_front().expect("a customer is in service");
            left_empty = x == 0;
            if collecting {
                out.hist[DEP].add(x);
                cur.sums[DEP] += x as f64;
                cur.counts[DEP] += 1.0;
                cur.sojourn += t - arrived;
                cur.departures += 1.0;
                out.measured_departures += 1;
                if left_empty {
                    out.empty_by_next_type[next_type] += 1;
                }
                if out.measured_departures.is_multiple_of(per_batch) && out.batches.len() < cfg.batches {
                    out.batches.push(std::mem::take(&mut cur));
                }
            }
            if departures == warmup {
                collecting = true;
            }
            next_departure = if x > 0 {
                start_service(&mut rng, t, false, &mut next_type, &mut out, collecting)
            } else {
                f64::INFINITY
            };
        } else {
            let size = s.batch.sample(&mut rng);
            if collecting {
                out.hist[BA].add(x);
                cur.sums[BA] += x as f64;
                cur.counts[BA] += 1.0;
                for k in 0..size {
                    out.hist[CA].add(x + k);
                    cur.sums[CA] += (x + k) as f64;
                }
                cur.counts[CA] += size as f64;
            }
            let was_empty = x == 0;
            x += size;
            if x > cfg.queue_ceiling {
                return Err(SimError::UnstableRun {
                    ceiling: cfg.queue_ceiling,
                    time: t,
                    replication,
                });
            }
            arrivals.extend(std::iter::repeat_n(t, size as usize));
            if was_empty {
                next_departure = start_service(&mut rng, t, left_empty, &mut next_type, &mut out, collecting);
            }
            next_arrival = t + s.interarrival.sample(&mut rng);
        }
    }
    if out.batches.len() < cfg.batches && cur.departures > 0.0 {
        out.batches.push(cur);
    }
    out.time = out.batches.iter().map(|b| b.time).sum();
    Ok(out)
}

fn normalise_counts(h: &Histogram) -> Vec<f64> {
    let total: u64 = h.0.iter().sum();
    h.0.iter().map(|&c| c as f64 / total as f64).collect()
}

fn normalise_area(a: &Area) -> Vec<f64> {
    let total: f64 = a.0.iter().sum();
    a.0.iter().map(|&c| c / total).collect()
}

fn moments(pmf: &[f64]) -> (f64, f64) {
    let mean: f64 = pmf.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    let second: f64 = pmf.iter().enumerate().map(|(n, p)| (n * n) as f64 * p).sum();
    (mean, second - mean * mean)
}

/// Student-t 95% half-width of the mean of `xs`.
pub fn t_half_width(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    t * (var / n as f64).sqrt()
}

fn mean_of(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn summarise(cfg: &SimConfig, out: &RunOutput) -> SimResult {
    let pmfs = [
        normalise_counts(&out.hist[DEP]),
        normalise_counts(&out.hist[BA]),
        normalise_counts(&out.hist[CA]),
        normalise_area(&out.area),
    ];
    let batch_means: Vec<_> = out.batches.iter().map(BatchSums::means).collect();
    let epochs = Epoch::ALL
        .iter()
        .zip(pmfs)
        .enumerate()
        .map(|(k, (&epoch, pmf))| {
            let (mean, variance) = moments(&pmf);
            let per_batch: Vec<f64> = batch_means.iter().map(|b| b.0[k]).collect();
            EpochStats {
                epoch,
                pmf,
                mean,
                variance,
                half_width: t_half_width(&per_batch),
            }
        })
        .collect();
    let util: Vec<f64> = batch_means.iter().map(|b| b.1).collect();
    let soj: Vec<f64> = batch_means.iter().map(|b| b.2).collect();
    let busy: f64 = out.batches.iter().map(|b| b.busy).sum();
    let sojourn: f64 = out.batches.iter().map(|b| b.sojourn).sum();
    let regular_total: u64 = out.regular_types.iter().sum();
    SimResult {
        seed: cfg.seed,
        replications: 1,
        num_departures: cfg.num_departures,
        warmup_departures: cfg.warmup_departures(),
        epochs,
        utilization: Estimate {
            mean: busy / out.time,
            half_width: t_half_width(&util),
        },
        mean_sojourn: Estimate {
            mean: sojourn / out.measured_departures as f64,
            half_width: t_half_width(&soj),
        },
        empty_by_next_type: out
            .empty_by_next_type
            .iter()
            .map(|&c| c as f64 / out.measured_departures as f64)
            .collect(),
        exceptional_fraction: out.exceptional_starts as f64 / out.starts as f64,
        regular_type_frequencies: out
            .regular_types
            .iter()
            .map(|&c| c as f64 / regular_total as f64)
            .collect(),
        simulated_time: out.time,
    }
}

fn check(model: &QueueModel<f64>, cfg: &SimConfig) -> Result<(), SimError> {
    cfg.validate()?;
    let rho = model.rho()?;
    if !(rho < 1.0) {
        return Err(SimError::Unstable(rho));
    }
    Ok(())
}

/// One replication (stream 0); half-widths come from batch means.
pub fn simulate(model: &QueueModel<f64>, cfg: &SimConfig) -> Result<SimResult, SimError> {
    check(model, cfg)?;
    let out = run_once(model, cfg, 0)?;
    Ok(summarise(cfg, &out))
}

/// Independent replications with Student-t half-widths across them.
pub fn replicate(model: &QueueModel<f64>, cfg: &SimConfig) -> Result<SimResult, SimError> {
    if cfg.replications < 2 {
        return Err(SimError::TooFewReplications(cfg.replications));
    }
    check(model, cfg)?;
    let runs: Vec<SimResult> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| run_once(model, cfg, r).map(|o| summarise(cfg, &o)))
        .collect::<Result<_, _>>()?;
    Ok(merge(cfg, &runs))
}

/// `simulate` for one replication, `replicate` otherwise.
pub fn run(model: &QueueModel<f64>, cfg: &SimConfig) -> Result<SimResult, SimError> {
    if cfg.replications <= 1 {
        simulate(model, cfg)
    } else {
        replicate(model, cfg)
    }
}

fn average_vectors(vs: impl Iterator<Item = Vec<f64>>, count: usize) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    for v in vs {
        if v.len() > acc.len() {
            acc.resize(v.len(), 0.0);
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    acc.iter().map(|a| a / count as f64).collect()
}

fn merge(cfg: &SimConfig, runs: &[SimResult]) -> SimResult {
    let r = runs.len();
    let estimate = |f: &dyn Fn(&SimResult) -> f64| {
        let xs: Vec<f64> = runs.iter().map(f).collect();
        Estimate {
            mean: mean_of(&xs),
            half_width: t_half_width(&xs),
        }
    };
    let epochs = Epoch::ALL
        .iter()
        .enumerate()
        .map(|(k, &epoch)| {
            let mut pmf = average_vectors(runs.iter().map(|s| s.epochs[k].pmf.clone()), r);
            let total: f64 = pmf.iter().sum();
            pmf.iter_mut().for_each(|p| *p /= total);
            let (mean, variance) = moments(&pmf);
            let e = estimate(&|s: &SimResult| s.epochs[k].mean);
            EpochStats {
                epoch,
                pmf,
                mean,
                variance,
                half_width: e.half_width,
            }
        })
        .collect();
    SimResult {
        seed: cfg.seed,
        replications: r,
        num_departures: cfg.num_departures,
        warmup_departures: cfg.warmup_departures(),
        epochs,
        utilization: estimate(&|s: &SimResult| s.utilization.mean),
        mean_sojourn: estimate(&|s: &SimResult| s.mean_sojourn.mean),
        empty_by_next_type: average_vectors(runs.iter().map(|s| s.empty_by_next_type.clone()), r),
        exceptional_fraction: mean_of(&runs.iter().map(|s| s.exceptional_fraction).collect::<Vec<_>>()),
        regular_type_frequencies: average_vectors(runs.iter().map(|s| s.regular_type_frequencies.clone()), r),
        simulated_time: runs.iter().map(|s| s.simulated_time).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn cfg(n: u64) -> SimConfig {
        SimConfig {
            seed: 7,
            num_departures: n,
            ..SimConfig::default()
        }
    }

    #[test]
    fn pmfs_sum_to_one() {
        let r = simulate(&presets::mm1(0.5, 1.0), &cfg(20_000)).unwrap();
        for e in &r.epochs {
            assert!((e.pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{}", e.epoch);
        }
    }

    #[test]
    fn single_arrivals_make_arrival_epochs_identical() {
        let r = simulate(&presets::mm1(0.5, 1.0), &cfg(20_000)).unwrap();
        assert_eq!(r.epoch(Epoch::BatchArrival).pmf, r.epoch(Epoch::CustomerArrival).pmf);
    }

    #[test]
    fn too_few_departures_rejected() {
        assert!(matches!(
            simulate(&presets::mm1(0.5, 1.0), &cfg(500)),
            Err(SimError::TooFewDepartures { .. })
        ));
    }

    #[test]
    fn replicate_needs_two() {
        assert_eq!(
            replicate(&presets::mm1(0.5, 1.0), &cfg(20_000)).unwrap_err(),
            SimError::TooFewReplications(1)
        );
    }

    #[test]
    fn ceiling_trips_on_overload() {
        let m = presets::mm1(0.5, 1.0);
        let c = SimConfig {
            queue_ceiling: 3,
            ..cfg(20_000)
        };
        assert!(matches!(simulate(&m, &c), Err(SimError::UnstableRun { .. })));
    }

    #[test]
    fn half_width_of_constant_is_zero() {
        assert_eq!(t_half_width(&[2.0, 2.0, 2.0]), 0.0);
    }
}
