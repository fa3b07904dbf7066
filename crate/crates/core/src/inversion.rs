//! Queue-length pmfs from PGFs by a discrete Cauchy integral.
//!
//! `p_n = (1 / (K r^n)) sum_k F(r w^{k+1/2}) w^{-(k+1/2)n}` with
//! `w = exp(2πi/K)`. Sampling on a circle of radius `r < 1` aliases `p_{n+K}`
//! into `p_n` with weight `r^K` (up to sign); choosing `r^K = 1e-8` bounds the
//! aliasing error by `1e-8`.

use num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::solver::{Epoch, SolverError, StationarySolution};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InversionError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("inversion unstable: {0}")]
    InversionUnstable(String),
    #[error("mean did not converge below truncation ceiling {0}")]
    TruncationFailure(usize),
    #[error("truncation must be at least 1")]
    BadTruncation,
}

/// Where a pmf came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Simulated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueueLengthPmf<T> {
    /// `p_0 ..= p_M`.
    pub probabilities: Vec<T>,
    /// `1 - sum p_n`.
    pub tail: T,
    pub epoch: Epoch,
    pub provenance: Provenance,
}

impl<T: Scalar> QueueLengthPmf<T> {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn mean(&self) -> T {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(n, &p)| T::from_usize_lossy(n) * p)
            .sum()
    }

    pub fn cdf(&self) -> Vec<T> {
        let mut acc = T::zero();
        self.probabilities
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect()
    }

    pub fn get(&self, n: usize) -> T {
        self.probabilities.get(n).copied().unwrap_or(T::zero())
    }
}

/// Total variation distance `½ sum |p_n - q_n|`, with unmatched tail mass
/// counted in full.
pub fn total_variation<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().max(b.len());
    let get = |v: &[T], i: usize| v.get(i).copied().unwrap_or(T::zero());
    let l1: T = (0..n).map(|i| (get(a, i) - get(b, i)).abs()).sum();
    let sa: T = a.iter().copied().sum();
    let sb: T = b.iter().copied().sum();
    (l1 + ((T::one() - sa) - (T::one() - sb)).abs()) / T::lit(2.0)
}

/// Coefficients `p_0..=p_M` of the PGF `g` sampled on a circle.
pub fn invert_with<T: Scalar>(
    g: impl Fn(Complex<T>) -> Result<Complex<T>, SolverError>,
    max_n: usize,
    epoch: Epoch,
) -> Result<QueueLengthPmf<T>, InversionError> {
    if max_n < 1 {
        return Err(InversionError::BadTruncation);
    }
    let k_points = (2 * max_n).next_power_of_two().max(8);
    let kf = T::from_usize_lossy(k_points);
    let radius = T::lit(10.0).powf(-T::lit(8.0) / kf);
    let two_pi = T::PI() + T::PI();
    let mut samples = vec![Complex::new(T::zero(), T::zero()); k_points];
    // Nodes sit at half-integer angles so that none lands next to z = 1, where
    // both numerator and denominator of F vanish; nodes k and K-1-k are
    // conjugate, so only half of them are evaluated.
    let half = T::lit(0.5);
    for k in 0..k_points / 2 {
        let theta = two_pi * (T::from_usize_lossy(k) + half) / kf;
        let v = g(Complex::from_polar(radius, theta))?;
        samples[k] = v;
        samples[k_points - 1 - k] = v.conj();
    }
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_forward(k_points).process(&mut samples);
    let clamp = T::tol(1e-9, 1e6);
    let mut probabilities = Vec::with_capacity(max_n + 1);
    let mut scale = kf;
    for (n, s) in samples.iter().take(max_n + 1).enumerate() {
        let shift = Complex::from_polar(T::one(), -T::PI() * T::from_usize_lossy(n) / kf);
        let mut p = (s * shift).re / scale;
        if p < T::zero() {
            if p < -clamp {
                return Err(InversionError::InversionUnstable(format!(
                    "p_{n} = {p} is negative beyond the clamp threshold"
                )));
            }
            p = T::zero();
        }
        probabilities.push(p);
        scale *= radius;
    }
    let tail = T::one() - probabilities.iter().copied().sum::<T>();
    if tail < -T::tol(1e-6, 1e8) {
        return Err(InversionError::InversionUnstable(format!(
            "probabilities sum to {} > 1",
            T::one() - tail
        )));
    }
    Ok(QueueLengthPmf {
        probabilities,
        tail: tail.max(T::zero()),
        epoch,
        provenance: Provenance::Analytic,
    })
}

/// `p_0..=p_M` of the queue length at `epoch`.
pub fn invert_pgf<T: Scalar>(
    sol: &StationarySolution<T>,
    epoch: Epoch,
    max_n: usize,
) -> Result<QueueLengthPmf<T>, InversionError> {
    invert_with(|z| sol.epoch_pgf(z, epoch), max_n, epoch)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanQueueLength<T> {
    pub mean: T,
    /// `(1 - rho) · mean`.
    pub scaled_mean: T,
    pub truncation: usize,
    pub pmf: QueueLengthPmf<T>,
}

#[derive(Clone, Debug)]
pub struct MeanOptions {
    pub initial_truncation: usize,
    pub max_truncation: usize,
    /// Stop once the estimated tail contribution is below `rel_tol · mean`.
    pub rel_tol: f64,
}

impl Default for MeanOptions {
    fn default() -> Self {
        Self {
            initial_truncation: 64,
            max_truncation: 1 << 16,
            rel_tol: 1e-8,
        }
    }
}

/// Estimated `sum_{n > M} n p_n` from the geometric decay of the last terms.
///
/// Far enough out the computed coefficients bottom out at round-off level
/// (the `r^{-n}` rescaling amplifies it); once both `p_M` and the missing mass
/// are there, doubling `M` only adds noise, so the tail counts as resolved.
fn tail_contribution<T: Scalar>(pmf: &QueueLengthPmf<T>) -> T {
    let p = &pmf.probabilities;
    let m = p.len() - 1;
    let noise = T::tol(1e-10, 1e3);
    if p[m] <= noise && pmf.tail <= noise {
        return T::zero();
    }
    if m < 2 || p[m - 1] <= T::zero() {
        return T::infinity();
    }
    let q = p[m] / p[m - 1];
    if !(q < T::one()) {
        return T::infinity();
    }
    let mf = T::from_usize_lossy(m);
    let one_q = T::one() - q;
    p[m] * (mf * q / one_q + q / (one_q * one_q))
}

/// Mean queue length at `epoch` with doubling truncation.
pub fn mean_queue_length<T: Scalar>(
    sol: &StationarySolution<T>,
    epoch: Epoch,
    opts: &MeanOptions,
) -> Result<MeanQueueLength<T>, InversionError> {
    let mut m = opts.initial_truncation.max(8);
    loop {
        let pmf = invert_pgf(sol, epoch, m)?;
        let mean = pmf.mean();
        let tail = tail_contribution(&pmf);
        if tail <= T::lit(opts.rel_tol) * mean || mean.is_zero() && tail.is_zero() {
            return Ok(MeanQueueLength {
                mean,
                scaled_mean: (T::one() - sol.rho()) * mean,
                truncation: m,
                pmf,
            });
        }
        if m >= opts.max_truncation {
            return Err(InversionError::TruncationFailure(opts.max_truncation));
        }
        m = (m * 2).min(opts.max_truncation);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn mm1_departure_pmf_is_geometric() {
        let sol = StationarySolution::new(presets::mm1::<f64>(0.5, 1.0)).unwrap();
        let pmf = invert_pgf(&sol, Epoch::Departure, 64).unwrap();
        for n in 0..=40 {
            let want = 0.5f64.powi(n as i32 + 1);
            assert!((pmf.probabilities[n] - want).abs() < 1e-8, "n={n}");
        }
        assert!((pmf.probabilities[0] - sol.boundary().empty_probability()).abs() < 1e-8);
    }

    #[test]
    fn mm1_mean_is_rho_over_one_minus_rho() {
        let sol = StationarySolution::new(presets::mm1::<f64>(0.5, 1.0)).unwrap();
        let m = mean_queue_length(&sol, Epoch::Departure, &MeanOptions::default()).unwrap();
        assert!((m.mean - 1.0).abs() < 1e-8, "{}", m.mean);
        assert!((m.scaled_mean - 0.5).abs() < 1e-8);
    }

    #[test]
    fn truncation_ceiling_is_enforced() {
        let sol = StationarySolution::new(presets::mm1::<f64>(0.99, 1.0)).unwrap();
        let opts = MeanOptions {
            initial_truncation: 16,
            max_truncation: 32,
            rel_tol: 1e-8,
        };
        assert_eq!(
            mean_queue_length(&sol, Epoch::Departure, &opts).unwrap_err(),
            InversionError::TruncationFailure(32)
        );
    }

    #[test]
    fn zero_truncation_is_rejected() {
        let sol = StationarySolution::new(presets::mm1::<f64>(0.5, 1.0)).unwrap();
        assert_eq!(invert_pgf(&sol, Epoch::Departure, 0).unwrap_err(), InversionError::BadTruncation);
    }

    #[test]
    fn total_variation_basics() {
        assert_eq!(total_variation(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert!((total_variation::<f64>(&[1.0], &[0.0, 1.0]) - 1.0).abs() < 1e-15);
    }
}
