//! Ready-made models: the classical single-type reductions and the two-type
//! Erlang example whose service correlations vanish in heavy traffic.

use crate::distribution::{BatchDistribution, DurationDistribution};
use crate::model::{KernelEntry, QueueModel};
use crate::Scalar;

/// M/M/1 with arrival rate `lambda` and service rate `mu`.
pub fn mm1<T: Scalar>(lambda: T, mu: T) -> QueueModel<T> {
    mg1(lambda, DurationDistribution::exponential(mu))
}

/// M/G/1: single arrivals, one type, i.i.d. services.
pub fn mg1<T: Scalar>(lambda: T, service: DurationDistribution<T>) -> QueueModel<T> {
    mxg1(lambda, BatchDistribution::single(), service)
}

/// M^X/G/1.
pub fn mxg1<T: Scalar>(
    lambda: T,
    batch: BatchDistribution<T>,
    service: DurationDistribution<T>,
) -> QueueModel<T> {
    QueueModel::new(lambda, batch, vec![vec![KernelEntry::new(T::one(), service)]], None)
        .expect("single-type model is valid")
}

/// `P22` that makes the two-type example's heavy-traffic correction vanish
/// exactly: with `P11 = 0.9` and `alpha = lambda·[[1, 3], [10, 20]]` the
/// condition reduces to `3 x^2 + 1.9 x - 0.1 = 0` for `x = P21`.
/// Rounded to six decimals this is `0.951138`.
pub fn two_type_erlang_p22() -> f64 {
    let x = (-1.9 + (1.9f64 * 1.9 + 1.2).sqrt()) / 6.0;
    1.0 - x
}

/// Two-type example with Erlang kernels of shape `i + j`, `P11 = 0.9`,
/// single arrivals and no exceptional first service. Rates are fixed by
/// `alpha_11 = lambda`, `alpha_12 = 3 lambda`, `alpha_21 = 10 lambda`,
/// `alpha_22 = 20 lambda`.
pub fn two_type_erlang<T: Scalar>(lambda: T) -> QueueModel<T> {
    two_type_erlang_with_p22(lambda, T::lit(two_type_erlang_p22()))
}

pub fn two_type_erlang_with_p22<T: Scalar>(lambda: T, p22: T) -> QueueModel<T> {
    let p11 = T::lit(0.9);
    let p = [[p11, T::one() - p11], [T::one() - p22, p22]];
    let load = [[1.0, 3.0], [10.0, 20.0]];
    let kernel = (0..2)
        .map(|i| {
            (0..2)
                .map(|j| {
                    let shape = (i + j + 2) as u32;
                    // alpha_ij = lambda · P_ij · shape / mu_ij
                    let mu = p[i][j] * T::from_u32(shape).unwrap() / T::lit(load[i][j]);
                    KernelEntry::new(p[i][j], DurationDistribution::erlang(shape, mu))
                })
                .collect()
        })
        .collect();
    QueueModel::new(lambda, BatchDistribution::single(), kernel, None)
        .expect("example model is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p22_rounds_to_six_decimals() {
        assert_eq!((two_type_erlang_p22() * 1e6).round() / 1e6, 0.951138);
    }
}
