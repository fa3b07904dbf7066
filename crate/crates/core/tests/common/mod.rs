#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smq_core::model::Kernel;
use smq_core::{Batch, Duration, KernelEntry, Model};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Service duration from one of the closed-form families, mean in `[0.2, 2]`.
pub fn random_duration(rng: &mut impl Rng) -> Duration {
    let mean: f64 = rng.random_range(0.2..2.0);
    match rng.random_range(0..4) {
        0 => Duration::exponential(1.0 / mean),
        1 => {
            let k = rng.random_range(2..=5);
            Duration::erlang(k, k as f64 / mean)
        }
        2 => Duration::deterministic(mean),
        _ => {
            // two phases, one fast and one slow, with the requested mean
            let p: f64 = rng.random_range(0.1..0.9);
            let m1 = mean * rng.random_range(0.2..0.9);
            let m2 = (mean - p * m1) / (1.0 - p);
            Duration::Hyperexponential2 { p, rate1: 1.0 / m1, rate2: 1.0 / m2 }
        }
    }
}

/// Routing row with every entry at least 0.02, so the chain is irreducible.
fn random_row(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.02..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

pub fn random_kernel(rng: &mut impl Rng, n: usize) -> Kernel<f64> {
    (0..n)
        .map(|_| {
            random_row(rng, n)
                .into_iter()
                .map(|w| KernelEntry::new(w, random_duration(rng)))
                .collect()
        })
        .collect()
}

pub fn random_batch(rng: &mut impl Rng) -> Batch {
    match rng.random_range(0..3) {
        0 => Batch::single(),
        1 => {
            let k = rng.random_range(2..=4);
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            Batch::Finite(raw.iter().map(|x| x / s).collect())
        }
        _ => Batch::Geometric { p: rng.random_range(0.4..1.0) },
    }
}

/// Random model with `n` types at traffic intensity `rho`, with an
/// exceptional kernel half of the time.
pub fn random_model(rng: &mut impl Rng, n: usize, rho: f64) -> Model {
    let batch = random_batch(rng);
    let regular = random_kernel(rng, n);
    let exceptional = rng.random_bool(0.5).then(|| random_kernel(rng, n));
    let m = Model::new(1.0, batch, regular, exceptional).expect("generated model is valid");
    let lambda = m.lambda_for_rho(rho).expect("rho is reachable");
    m.with_lambda(lambda).unwrap()
}

/// Same as [`random_model`] with only single arrivals.
pub fn random_single_arrival_model(rng: &mut impl Rng, n: usize, rho: f64) -> Model {
    let regular = random_kernel(rng, n);
    let exceptional = rng.random_bool(0.5).then(|| random_kernel(rng, n));
    let m = Model::new(1.0, Batch::single(), regular, exceptional).unwrap();
    m.with_lambda(m.lambda_for_rho(rho).unwrap()).unwrap()
}

/// Total-variation distance between two pmfs of possibly different length.
pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    smq_core::inversion::total_variation(a, b)
}
