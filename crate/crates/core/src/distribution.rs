//! Service-duration families and batch-size laws with closed-form transforms.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::Scalar;

/// Nonnegative duration law with a closed-form Laplace–Stieltjes transform.
#[derive(Clone, Debug, PartialEq)]
pub enum DurationDistribution<T> {
    Exponential { rate: T },
    Erlang { shape: u32, rate: T },
    Deterministic { value: T },
    Hyperexponential2 { p: T, rate1: T, rate2: T },
    /// Finite mixture of other families; weights sum to one.
    Mixture(Vec<(T, DurationDistribution<T>)>),
}

/// Reason a distribution's parameters are rejected; the caller adds the path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamError {
    pub field: &'static str,
    pub message: String,
}

fn param_err(field: &'static str, message: impl Into<String>) -> ParamError {
    ParamError {
        field,
        message: message.into(),
    }
}

impl<T: Scalar> DurationDistribution<T> {
    pub fn exponential(rate: T) -> Self {
        Self::Exponential { rate }
    }

    pub fn erlang(shape: u32, rate: T) -> Self {
        Self::Erlang { shape, rate }
    }

    pub fn deterministic(value: T) -> Self {
        Self::Deterministic { value }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = |x: T, field: &'static str| {
            if x.is_finite() && x > T::zero() {
                Ok(())
            } else {
                Err(param_err(field, format!("must be a finite positive number, got {x}")))
            }
        };
        match self {
            Self::Exponential { rate } => positive(*rate, "rate"),
            Self::Erlang { shape, rate } => {
                if *shape == 0 {
                    return Err(param_err("shape", "must be a positive integer"));
                }
                positive(*rate, "rate")
            }
            Self::Deterministic { value } => {
                if value.is_finite() && *value >= T::zero() {
                    Ok(())
                } else {
                    Err(param_err("value", format!("must be finite and nonnegative, got {value}")))
                }
            }
            Self::Hyperexponential2 { p, rate1, rate2 } => {
                if !(*p >= T::zero() && *p <= T::one()) {
                    return Err(param_err("p", format!("must lie in [0, 1], got {p}")));
                }
                positive(*rate1, "rate1")?;
                positive(*rate2, "rate2")
            }
            Self::Mixture(parts) => {
                if parts.is_empty() {
                    return Err(param_err("components", "mixture needs at least one component"));
                }
                let mut total = T::zero();
                for (w, d) in parts {
                    if !(*w >= T::zero() && *w <= T::one()) {
                        return Err(param_err("components", format!("weight {w} outside [0, 1]")));
                    }
                    d.validate()?;
                    total += *w;
                }
                if (total - T::one()).abs() > T::tol(1e-12, 64.0) {
                    return Err(param_err("components", format!("weights sum to {total}, expected 1")));
                }
                Ok(())
            }
        }
    }

    /// `E[exp(-s·G)]` for `Re(s) >= 0`.
    pub fn transform(&self, s: Complex<T>) -> Complex<T> {
        let one = Complex::<T>::one();
        match self {
            Self::Exponential { rate } => Complex::from(*rate) / (s + rate),
            Self::Erlang { shape, rate } => {
                let base = Complex::from(*rate) / (s + rate);
                base.powu(*shape)
            }
            Self::Deterministic { value } => {
                if value.is_zero() {
                    one
                } else {
                    (-s * value).exp()
                }
            }
            Self::Hyperexponential2 { p, rate1, rate2 } => {
                Complex::from(*p * *rate1) / (s + rate1)
                    + Complex::from((T::one() - *p) * *rate2) / (s + rate2)
            }
            Self::Mixture(parts) => parts
                .iter()
                .fold(Complex::<T>::zero(), |acc, (w, d)| acc + d.transform(s) * w),
        }
    }

    /// `d/ds E[exp(-s·G)]`.
    pub fn transform_derivative(&self, s: Complex<T>) -> Complex<T> {
        match self {
            Self::Exponential { rate } => -Complex::from(*rate) / (s + rate).powu(2),
            Self::Erlang { shape, rate } => {
                let k = T::from_u32(*shape).expect("shape fits");
                -Complex::from(k * rate.powi(*shape as i32)) / (s + rate).powu(shape + 1)
            }
            Self::Deterministic { value } => -(-s * value).exp() * value,
            Self::Hyperexponential2 { p, rate1, rate2 } => {
                -Complex::from(*p * *rate1) / (s + rate1).powu(2)
                    - Complex::from((T::one() - *p) * *rate2) / (s + rate2).powu(2)
            }
            Self::Mixture(parts) => parts
                .iter()
                .fold(Complex::<T>::zero(), |acc, (w, d)| acc + d.transform_derivative(s) * w),
        }
    }

    /// Raw moment `E[G^k]` for `k` in `{0, 1, 2}`.
    pub fn moment(&self, k: u32) -> T {
        assert!(k <= 2, "only moments up to order 2 are closed-form here");
        if k == 0 {
            return T::one();
        }
        let two = T::lit(2.0);
        match self {
            Self::Exponential { rate } => {
                if k == 1 {
                    rate.recip()
                } else {
                    two / (*rate * *rate)
                }
            }
            Self::Erlang { shape, rate } => {
                let n = T::from_u32(*shape).expect("shape fits");
                if k == 1 {
                    n / *rate
                } else {
                    n * (n + T::one()) / (*rate * *rate)
                }
            }
            Self::Deterministic { value } => value.powi(k as i32),
            Self::Hyperexponential2 { p, rate1, rate2 } => {
                let q = T::one() - *p;
                if k == 1 {
                    *p / *rate1 + q / *rate2
                } else {
                    two * (*p / (*rate1 * *rate1) + q / (*rate2 * *rate2))
                }
            }
            Self::Mixture(parts) => parts.iter().map(|(w, d)| *w * d.moment(k)).sum(),
        }
    }

    pub fn mean(&self) -> T {
        self.moment(1)
    }
}

/// Batch-size law on `{1, 2, ...}`.
#[derive(Clone, Debug, PartialEq)]
pub enum BatchDistribution<T> {
    /// `pmf[k - 1] = P(B = k)`.
    Finite(Vec<T>),
    /// `P(B = k) = p (1 - p)^(k - 1)`, `p` in `(0, 1]`.
    Geometric { p: T },
}

impl<T: Scalar> BatchDistribution<T> {
    /// Every batch has exactly one customer.
    pub fn single() -> Self {
        Self::Finite(vec![T::one()])
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        match self {
            Self::Finite(pmf) => {
                if pmf.is_empty() {
                    return Err(param_err("pmf", "must list P(B=1), P(B=2), ..."));
                }
                if pmf.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
                    return Err(param_err("pmf", "entries must lie in [0, 1]"));
                }
                let total: T = pmf.iter().copied().sum();
                if (total - T::one()).abs() > T::tol(1e-12, 64.0) {
                    return Err(param_err("pmf", format!("sums to {total}, expected 1")));
                }
                Ok(())
            }
            Self::Geometric { p } => {
                if *p > T::zero() && *p <= T::one() {
                    Ok(())
                } else {
                    Err(param_err("p", format!("success parameter must lie in (0, 1], got {p}")))
                }
            }
        }
    }

    pub fn pgf(&self, z: Complex<T>) -> Complex<T> {
        match self {
            Self::Finite(pmf) => {
                // Horner on z·(p1 + p2 z + ...)
                let inner = pmf
                    .iter()
                    .rev()
                    .fold(Complex::<T>::zero(), |acc, &p| acc * z + p);
                inner * z
            }
            Self::Geometric { p } => z * p / (Complex::<T>::one() - z * (T::one() - *p)),
        }
    }

    pub fn pgf_derivative(&self, z: Complex<T>) -> Complex<T> {
        match self {
            Self::Finite(pmf) => pmf
                .iter()
                .enumerate()
                .rev()
                .fold(Complex::<T>::zero(), |acc, (k, &p)| acc * z + p * T::from_usize_lossy(k + 1)),
            Self::Geometric { p } => {
                let d = Complex::<T>::one() - z * (T::one() - *p);
                Complex::from(*p) / (d * d)
            }
        }
    }

    pub fn mean(&self) -> T {
        match self {
            Self::Finite(pmf) => pmf
                .iter()
                .enumerate()
                .map(|(k, &p)| p * T::from_usize_lossy(k + 1))
                .sum(),
            Self::Geometric { p } => p.recip(),
        }
    }

    /// `E[B^2]`.
    pub fn second_moment(&self) -> T {
        match self {
            Self::Finite(pmf) => pmf
                .iter()
                .enumerate()
                .map(|(k, &p)| p * T::from_usize_lossy((k + 1) * (k + 1)))
                .sum(),
            Self::Geometric { p } => (T::lit(2.0) - *p) / (*p * *p),
        }
    }

    /// `E[B(B-1)]`.
    pub fn factorial_moment2(&self) -> T {
        self.second_moment() - self.mean()
    }

    pub fn is_single(&self) -> bool {
        matches!(self, Self::Finite(pmf) if pmf.len() == 1)
    }
}
