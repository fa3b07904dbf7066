//! Heavy-traffic limit of the scaled departure-epoch queue length.
//!
//! As the arrival rate grows to the critical rate `lambda*` (kernels fixed),
//! `(1 - rho) X` converges to an exponential law with rate
//!
//! ```text
//! 1/eta = (alpha_hat - 1)/2 - (1/d_1) sum_{k>=2} pi_k (1 - gamma_k) q_k
//! ```
//!
//! with every quantity evaluated at `lambda*`. The limit is the same at
//! arbitrary epochs, and the exceptional kernel does not enter it.

use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::model::{ModelError, MomentSet, QueueModel};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HtError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("this formula needs exactly two types, model has {0}")]
    NotN2(usize),
    #[error("heavy-traffic denominator {0} is not positive; no exponential limit")]
    InvalidHTDenominator(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeavyTrafficResult<T> {
    pub lambda_critical: T,
    /// `sum_i pi_i alpha_hat_i` at `lambda*`.
    pub alpha_hat_bar: T,
    pub gamma_bar: Vec<T>,
    /// `q_2, ..., q_N`.
    pub q_bar: Vec<T>,
    pub d1: T,
    pub pi: Vec<T>,
    /// `-(1/d_1) sum_k pi_k (1 - gamma_k) q_k`.
    pub correction_term: T,
    /// `(alpha_hat - 1)/2 + correction_term`, the limiting scaled mean.
    pub denominator: T,
    pub eta: T,
    pub valid: bool,
}

impl<T: Scalar> HeavyTrafficResult<T> {
    fn require_valid(&self) -> Result<(), HtError> {
        if self.valid {
            Ok(())
        } else {
            Err(HtError::InvalidHTDenominator(self.denominator.to_f64_lossy()))
        }
    }

    /// `(pdf, cdf)` of the limiting exponential law at `x >= 0`. The same law
    /// holds at departure and arbitrary epochs.
    pub fn distribution(&self, x: T) -> Result<(T, T), HtError> {
        self.require_valid()?;
        let tail = (-self.eta * x).exp();
        Ok((self.eta * tail, T::one() - tail))
    }

    pub fn mean(&self) -> Result<T, HtError> {
        self.require_valid()?;
        Ok(self.eta.recip())
    }

    /// `eta` of the same model with all dependence removed: `2 / (alpha_hat - 1)`.
    pub fn no_dependence_eta(&self) -> T {
        T::lit(2.0) / (self.alpha_hat_bar - T::one())
    }
}

/// `gamma_j = sum_i pi_i alpha_ij / pi_j`.
pub fn gamma_bar<T: Scalar>(moments: &MomentSet<T>) -> Vec<T> {
    moments.gamma()
}

/// `q_k`, `k = 2..N`: cofactor of entry `(1, k)` of the matrix whose rows
/// `2..N` are `(1 - alpha_j, (I - P)_{j2}, ..., (I - P)_{jN})`.
pub fn q_cofactors<T: Scalar>(moments: &MomentSet<T>) -> Vec<T> {
    let n = moments.n_types();
    if n < 2 {
        return Vec::new();
    }
    let m = Matrix::from_fn(n, n, |r, c| {
        if r == 0 {
            T::zero()
        } else if c == 0 {
            T::one() - moments.alpha_row[r]
        } else {
            let id = if r == c { T::one() } else { T::zero() };
            id - moments.p[(r, c)]
        }
    });
    (1..n).map(|k| linalg::cofactor(&m, 0, k)).collect()
}

/// Heavy-traffic rate for any number of types.
pub fn ht_rate<T: Scalar>(model: &QueueModel<T>) -> Result<HeavyTrafficResult<T>, HtError> {
    let lambda_critical = model.lambda_critical()?;
    let ms = model.with_lambda(lambda_critical)?.moments()?;
    let gamma = gamma_bar(&ms);
    let q = q_cofactors(&ms);
    let d1 = ms.cofactors[0];
    let sum: T = (1..ms.n_types())
        .map(|k| ms.pi[k] * (T::one() - gamma[k]) * q[k - 1])
        .sum();
    let correction_term = -sum / d1;
    let alpha_hat_bar = ms.alpha_hat_mean();
    Ok(assemble(lambda_critical, alpha_hat_bar, gamma, q, d1, ms.pi, correction_term))
}

fn assemble<T: Scalar>(
    lambda_critical: T,
    alpha_hat_bar: T,
    gamma_bar: Vec<T>,
    q_bar: Vec<T>,
    d1: T,
    pi: Vec<T>,
    correction_term: T,
) -> HeavyTrafficResult<T> {
    let denominator = (alpha_hat_bar - T::one()) / T::lit(2.0) + correction_term;
    let valid = denominator > T::zero() && denominator.is_finite();
    HeavyTrafficResult {
        lambda_critical,
        alpha_hat_bar,
        gamma_bar,
        q_bar,
        d1,
        pi,
        correction_term,
        denominator,
        eta: denominator.recip(),
        valid,
    }
}

/// `((1 - alpha_2) / (P12 + P21)) · ((P12/P21)(1 - alpha_22) - alpha_12)` at
/// `lambda*`. Zero means service correlations leave no trace in the limit.
pub fn independence_condition<T: Scalar>(model: &QueueModel<T>) -> Result<T, HtError> {
    if model.n_types() != 2 {
        return Err(HtError::NotN2(model.n_types()));
    }
    let ms = model.with_lambda(model.lambda_critical()?)?.moments()?;
    Ok(two_type_correction(&ms))
}

fn two_type_correction<T: Scalar>(ms: &MomentSet<T>) -> T {
    let p12 = ms.p[(0, 1)];
    let p21 = ms.p[(1, 0)];
    (T::one() - ms.alpha_row[1]) / (p12 + p21)
        * (p12 / p21 * (T::one() - ms.alpha[(1, 1)]) - ms.alpha[(0, 1)])
}

/// Two-type rate from the explicit correction term.
pub fn ht_rate_n2<T: Scalar>(model: &QueueModel<T>) -> Result<HeavyTrafficResult<T>, HtError> {
    if model.n_types() != 2 {
        return Err(HtError::NotN2(model.n_types()));
    }
    let lambda_critical = model.lambda_critical()?;
    let ms = model.with_lambda(lambda_critical)?.moments()?;
    let correction_term = two_type_correction(&ms);
    let q = vec![-(T::one() - ms.alpha_row[1])];
    Ok(assemble(
        lambda_critical,
        ms.alpha_hat_mean(),
        gamma_bar(&ms),
        q,
        ms.p[(1, 0)],
        ms.pi.clone(),
        correction_term,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::DurationDistribution;
    use crate::presets;
    use approx::assert_relative_eq;

    #[test]
    fn mm1_rate_is_one() {
        let ht = ht_rate(&presets::mm1::<f64>(0.3, 1.0)).unwrap();
        assert_relative_eq!(ht.alpha_hat_bar, 3.0, epsilon = 1e-14);
        assert_relative_eq!(ht.eta, 1.0, epsilon = 1e-14);
        assert_eq!(ht.gamma_bar, vec![1.0]);
        assert!(ht.q_bar.is_empty());
    }

    #[test]
    fn mg1_rate_is_half_one_plus_scv() {
        let d = DurationDistribution::erlang(2, 3.0);
        let ht = ht_rate(&presets::mg1::<f64>(0.3, d.clone())).unwrap();
        let want = d.moment(2) / (2.0 * d.mean().powi(2));
        assert_relative_eq!(ht.mean().unwrap(), want, epsilon = 1e-12);
        assert_relative_eq!(want, 0.75, epsilon = 1e-14);
    }

    #[test]
    fn gamma_bar_balances_to_one() {
        let ht = ht_rate(&presets::two_type_erlang::<f64>(0.01)).unwrap();
        let s: f64 = ht.pi.iter().zip(&ht.gamma_bar).map(|(p, g)| p * g).sum();
        assert_relative_eq!(s, 1.0, epsilon = 1e-12);
        let ls = ht.lambda_critical;
        let (p1, p2) = (ht.pi[0], ht.pi[1]);
        assert_relative_eq!(ht.gamma_bar[0], (p1 * ls + p2 * 10.0 * ls) / p1, max_relative = 1e-12);
        assert_relative_eq!(ht.gamma_bar[1], (p1 * 3.0 * ls + p2 * 20.0 * ls) / p2, max_relative = 1e-12);
    }

    #[test]
    fn two_type_erlang_independence() {
        let m = presets::two_type_erlang::<f64>(0.01);
        assert!(independence_condition(&m).unwrap().abs() < 1e-6);
        let ht = ht_rate(&m).unwrap();
        assert_relative_eq!(ht.eta, ht.no_dependence_eta(), max_relative = 1e-8);
        let rounded = presets::two_type_erlang_with_p22::<f64>(0.01, 0.951138);
        assert!(independence_condition(&rounded).unwrap().abs() > 1e-6);
    }

    #[test]
    fn invalid_denominator_is_reportable() {
        let ht = assemble(1.0, 1.5, vec![], vec![], 1.0, vec![], -1.0);
        assert!(!ht.valid);
        assert!(matches!(ht.distribution(0.5), Err(HtError::InvalidHTDenominator(_))));
    }

    #[test]
    fn not_n2_errors() {
        assert_eq!(ht_rate_n2(&presets::mm1::<f64>(0.5, 1.0)).unwrap_err(), HtError::NotN2(1));
        assert_eq!(independence_condition(&presets::mm1::<f64>(0.5, 1.0)).unwrap_err(), HtError::NotN2(1));
    }
}
