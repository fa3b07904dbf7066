//! The batch-Poisson / semi-Markov service queue and its primitive quantities.
//!
//! A model is a batch arrival process (rate `lambda`, batch law `B`) together
//! with two N×N service kernels: the regular kernel used for customers that
//! find the server busy, and the exceptional kernel used for the customer that
//! opens a busy period. Entry `(i, j)` of a kernel is a routing weight (the
//! probability that the next customer has type `j` given the current one has
//! type `i`) times the law of the current service duration.

use num_complex::Complex;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::distribution::{BatchDistribution, DurationDistribution};
use crate::linalg::{self, Matrix};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("routing matrix is reducible: {0}")]
    Reducible(String),
    #[error("all mean service times are zero; the critical rate is undefined")]
    DegenerateService,
    #[error("stationary vector routes disagree by {0:e}")]
    PiMismatch(f64),
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

/// One component `(i, j)` of a service kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelEntry<T> {
    pub weight: T,
    pub duration: DurationDistribution<T>,
}

impl<T: Scalar> KernelEntry<T> {
    pub fn new(weight: T, duration: DurationDistribution<T>) -> Self {
        Self { weight, duration }
    }

    /// Joint transform `weight · E[exp(-s·G)]`.
    pub fn transform(&self, s: Complex<T>) -> Complex<T> {
        if self.weight.is_zero() {
            return Complex::<T>::zero();
        }
        self.duration.transform(s) * self.weight
    }

    pub fn transform_derivative(&self, s: Complex<T>) -> Complex<T> {
        if self.weight.is_zero() {
            return Complex::<T>::zero();
        }
        self.duration.transform_derivative(s) * self.weight
    }

    /// `weight · E[G^k]`.
    pub fn partial_moment(&self, k: u32) -> T {
        if self.weight.is_zero() {
            return T::zero();
        }
        self.weight * self.duration.moment(k)
    }
}

pub type Kernel<T> = Vec<Vec<KernelEntry<T>>>;

/// Which kernel a quantity refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Regular,
    Exceptional,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueueModel<T> {
    lambda: T,
    batch: BatchDistribution<T>,
    regular: Kernel<T>,
    exceptional: Kernel<T>,
}

impl<T: Scalar> QueueModel<T> {
    /// Validates and builds a model. `exceptional = None` reuses the regular
    /// kernel for busy-period openers.
    pub fn new(
        lambda: T,
        batch: BatchDistribution<T>,
        regular: Kernel<T>,
        exceptional: Option<Kernel<T>>,
    ) -> Result<Self, ModelError> {
        if !(lambda.is_finite() && lambda > T::zero()) {
            return Err(invalid("lambda", format!("must be a finite positive rate, got {lambda}")));
        }
        batch.validate().map_err(|e| invalid(format!("batch.{}", e.field), e.message))?;
        let n = regular.len();
        if n == 0 {
            return Err(invalid("G", "needs at least one type"));
        }
        validate_kernel("G", &regular, n)?;
        let exceptional = match exceptional {
            Some(k) => {
                validate_kernel("Gstar", &k, n)?;
                k
            }
            None => regular.clone(),
        };
        let model = Self {
            lambda,
            batch,
            regular,
            exceptional,
        };
        check_irreducible(&model.routing(KernelKind::Regular))?;
        Ok(model)
    }

    pub fn n_types(&self) -> usize {
        self.regular.len()
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn batch(&self) -> &BatchDistribution<T> {
        &self.batch
    }

    pub fn kernel(&self, kind: KernelKind) -> &Kernel<T> {
        match kind {
            KernelKind::Regular => &self.regular,
            KernelKind::Exceptional => &self.exceptional,
        }
    }

    /// Same kernels and batch law at a different arrival rate.
    pub fn with_lambda(&self, lambda: T) -> Result<Self, ModelError> {
        if !(lambda.is_finite() && lambda > T::zero()) {
            return Err(invalid("lambda", format!("must be a finite positive rate, got {lambda}")));
        }
        Ok(Self {
            lambda,
            ..self.clone()
        })
    }

    /// Same model with the exceptional kernel replaced.
    pub fn with_exceptional(&self, exceptional: Kernel<T>) -> Result<Self, ModelError> {
        validate_kernel("Gstar", &exceptional, self.n_types())?;
        Ok(Self {
            exceptional,
            ..self.clone()
        })
    }

    /// Routing matrix `P` (regular) or `P*` (exceptional).
    pub fn routing(&self, kind: KernelKind) -> Matrix<T> {
        let k = self.kernel(kind);
        let n = k.len();
        Matrix::from_fn(n, n, |i, j| k[i][j].weight)
    }

    /// Laplace argument `lambda (1 - B(z))` at which kernels are evaluated.
    pub fn laplace_argument(&self, z: Complex<T>) -> Complex<T> {
        (Complex::<T>::one() - self.batch.pgf(z)) * self.lambda
    }

    /// `A_ij(z) = G_ij(lambda (1 - B(z)))`: transform of the number of customers
    /// arriving during one service jointly with the next type.
    pub fn arrival_matrix(&self, z: Complex<T>, kind: KernelKind) -> Matrix<Complex<T>> {
        let s = self.laplace_argument(z);
        let k = self.kernel(kind);
        let n = k.len();
        Matrix::from_fn(n, n, |i, j| k[i][j].transform(s))
    }

    /// `d/dz A_ij(z)`.
    pub fn arrival_matrix_derivative(&self, z: Complex<T>, kind: KernelKind) -> Matrix<Complex<T>> {
        let s = self.laplace_argument(z);
        let ds = -self.batch.pgf_derivative(z) * self.lambda;
        let k = self.kernel(kind);
        let n = k.len();
        Matrix::from_fn(n, n, |i, j| k[i][j].transform_derivative(s) * ds)
    }

    /// All first- and second-order arrival moments, the stationary type vector
    /// and the traffic intensity.
    pub fn moments(&self) -> Result<MomentSet<T>, ModelError> {
        let p = self.routing(KernelKind::Regular);
        let pstar = self.routing(KernelKind::Exceptional);
        let stationary = stationary_pi(&p)?;
        let n = self.n_types();
        let mean_b = self.batch.mean();
        let fact_b = self.batch.factorial_moment2();
        let lam = self.lambda;
        let first = |kernel: &Kernel<T>| {
            Matrix::from_fn(n, n, |i, j| lam * mean_b * kernel[i][j].partial_moment(1))
        };
        let second = |kernel: &Kernel<T>, alpha: &Matrix<T>| {
            Matrix::from_fn(n, n, |i, j| {
                let e = &kernel[i][j];
                lam * lam * mean_b * mean_b * e.partial_moment(2)
                    + lam * fact_b * e.partial_moment(1)
                    + alpha[(i, j)]
            })
        };
        let alpha = first(&self.regular);
        let alpha_star = first(&self.exceptional);
        let alpha_hat = second(&self.regular, &alpha);
        let alpha_hat_star = second(&self.exceptional, &alpha_star);
        let row_sums = |m: &Matrix<T>| (0..n).map(|i| m.row(i).iter().copied().sum()).collect::<Vec<T>>();
        let alpha_row = row_sums(&alpha);
        let alpha_star_row = row_sums(&alpha_star);
        let alpha_hat_row = row_sums(&alpha_hat);
        let alpha_hat_star_row = row_sums(&alpha_hat_star);
        let rho = stationary
            .pi
            .iter()
            .zip(&alpha_row)
            .map(|(&pi, &a)| pi * a)
            .sum();
        Ok(MomentSet {
            p,
            pstar,
            pi: stationary.pi,
            cofactors: stationary.cofactors,
            cofactor_sum: stationary.cofactor_sum,
            alpha,
            alpha_star,
            alpha_hat,
            alpha_hat_star,
            alpha_row,
            alpha_star_row,
            alpha_hat_row,
            alpha_hat_star_row,
            rho,
            mean_batch: mean_b,
            batch_second_moment: self.batch.second_moment(),
        })
    }

    pub fn rho(&self) -> Result<T, ModelError> {
        Ok(self.moments()?.rho)
    }

    /// Arrival rate at which the traffic intensity reaches one, kernels fixed.
    /// `rho` is linear in `lambda` because `pi` does not depend on it.
    pub fn lambda_critical(&self) -> Result<T, ModelError> {
        let pi = stationary_pi(&self.routing(KernelKind::Regular))?.pi;
        let work: T = pi
            .iter()
            .zip(&self.regular)
            .map(|(&p, row)| p * row.iter().map(|e| e.partial_moment(1)).sum::<T>())
            .sum();
        let per_rate = self.batch.mean() * work;
        if !(per_rate > T::zero()) {
            return Err(ModelError::DegenerateService);
        }
        Ok(per_rate.recip())
    }

    /// Arrival rate that yields traffic intensity `rho`.
    pub fn lambda_for_rho(&self, rho: T) -> Result<T, ModelError> {
        Ok(rho * self.lambda_critical()?)
    }
}

fn validate_kernel<T: Scalar>(name: &str, kernel: &Kernel<T>, n: usize) -> Result<(), ModelError> {
    if kernel.len() != n {
        return Err(invalid(name, format!("expected {n} rows, found {}", kernel.len())));
    }
    for (i, row) in kernel.iter().enumerate() {
        if row.len() != n {
            return Err(invalid(
                format!("{name}[{i}]"),
                format!("expected {n} entries, found {}", row.len()),
            ));
        }
        let mut total = T::zero();
        for (j, e) in row.iter().enumerate() {
            if !(e.weight >= T::zero() && e.weight <= T::one()) {
                return Err(invalid(
                    format!("{name}[{i}][{j}].weight"),
                    format!("must lie in [0, 1], got {}", e.weight),
                ));
            }
            e.duration
                .validate()
                .map_err(|err| invalid(format!("{name}[{i}][{j}].{}", err.field), err.message))?;
            total += e.weight;
        }
        if (total - T::one()).abs() > T::tol(1e-12, 64.0) {
            return Err(invalid(
                format!("{name}[{i}]"),
                format!("weights sum to {total}, expected 1"),
            ));
        }
    }
    Ok(())
}

/// Strong connectivity of the directed graph `i -> j` whenever `P_ij > 0`.
fn check_irreducible<T: Scalar>(p: &Matrix<T>) -> Result<(), ModelError> {
    let n = p.rows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { p[(i, j)] } else { p[(j, i)] };
                if w > T::zero() && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    for forward in [true, false] {
        if let Some(k) = reach(forward).iter().position(|&s| !s) {
            return Err(ModelError::Reducible(format!(
                "type {} does not communicate with type 1",
                k + 1
            )));
        }
    }
    Ok(())
}

/// Stationary distribution of the routing chain with its cofactor data.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryPi<T> {
    pub pi: Vec<T>,
    /// `d_i`: cofactor of entry `(i, 1)` of `I - P`.
    pub cofactors: Vec<T>,
    /// `d = sum_i d_i`.
    pub cofactor_sum: T,
}

/// `pi P = pi`, `sum pi = 1`. The linear solve is authoritative; the cofactor
/// route is computed alongside and must agree.
pub fn stationary_pi<T: Scalar>(p: &Matrix<T>) -> Result<StationaryPi<T>, ModelError> {
    let n = p.rows();
    for i in 0..n {
        let s: T = p.row(i).iter().copied().sum();
        if (s - T::one()).abs() > T::tol(1e-12, 64.0) {
            return Err(invalid(format!("P[{i}]"), format!("row sums to {s}")));
        }
    }
    let pi = pi_by_linear_solve(p)?;
    let (cofactors, cofactor_sum) = routing_cofactors(p);
    if cofactor_sum.abs() <= T::tol(1e-14, 16.0) {
        return Err(ModelError::Reducible("cofactor sum d vanishes".into()));
    }
    let gap = pi
        .iter()
        .zip(&cofactors)
        .map(|(&a, &d)| (a - d / cofactor_sum).abs())
        .fold(T::zero(), T::max);
    if gap > T::tol(1e-10, 1e4) {
        return Err(ModelError::PiMismatch(gap.to_f64_lossy()));
    }
    Ok(StationaryPi {
        pi,
        cofactors,
        cofactor_sum,
    })
}

/// Solves `(P^T - I) pi = 0` with the last equation replaced by normalisation.
pub fn pi_by_linear_solve<T: Scalar>(p: &Matrix<T>) -> Result<Vec<T>, ModelError> {
    let n = p.rows();
    let a = Matrix::from_fn(n, n, |i, j| {
        if i == n - 1 {
            T::one()
        } else {
            p[(j, i)] - if i == j { T::one() } else { T::zero() }
        }
    });
    let mut rhs = vec![T::zero(); n];
    rhs[n - 1] = T::one();
    let fact = linalg::lu(&a);
    if fact.pivot_ratio() < T::tol(1e-13, 64.0) {
        return Err(ModelError::Reducible("stationary equations are rank-deficient".into()));
    }
    fact.solve(&rhs)
        .ok_or_else(|| ModelError::Reducible("stationary equations are singular".into()))
}

/// `(d_1..d_N, d)` where `d_i` is the cofactor of entry `(i, 1)` of `I - P`.
pub fn routing_cofactors<T: Scalar>(p: &Matrix<T>) -> (Vec<T>, T) {
    let n = p.rows();
    if n == 1 {
        return (vec![T::one()], T::one());
    }
    let i_minus_p = Matrix::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() } - p[(i, j)]);
    let d: Vec<T> = (0..n).map(|i| linalg::cofactor(&i_minus_p, i, 0)).collect();
    let sum = d.iter().copied().sum();
    (d, sum)
}

/// Arrival moments and derived quantities at the model's arrival rate.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSet<T> {
    pub p: Matrix<T>,
    pub pstar: Matrix<T>,
    pub pi: Vec<T>,
    pub cofactors: Vec<T>,
    pub cofactor_sum: T,
    /// `alpha_ij = E[A 1{next = j} | current = i]`, regular kernel.
    pub alpha: Matrix<T>,
    pub alpha_star: Matrix<T>,
    /// `E[A^2 1{next = j} | current = i]`.
    pub alpha_hat: Matrix<T>,
    pub alpha_hat_star: Matrix<T>,
    pub alpha_row: Vec<T>,
    pub alpha_star_row: Vec<T>,
    pub alpha_hat_row: Vec<T>,
    pub alpha_hat_star_row: Vec<T>,
    pub rho: T,
    pub mean_batch: T,
    pub batch_second_moment: T,
}

impl<T: Scalar> MomentSet<T> {
    pub fn n_types(&self) -> usize {
        self.pi.len()
    }

    /// `gamma_j = sum_i pi_i alpha_ij / pi_j`: mean arrivals during a service
    /// that routes to `j`, in the never-empty regime.
    pub fn gamma(&self) -> Vec<T> {
        let n = self.n_types();
        (0..n)
            .map(|j| (0..n).map(|i| self.pi[i] * self.alpha[(i, j)]).sum::<T>() / self.pi[j])
            .collect()
    }

    /// `sum_i pi_i alpha_hat_i`.
    pub fn alpha_hat_mean(&self) -> T {
        self.pi.iter().zip(&self.alpha_hat_row).map(|(&p, &a)| p * a).sum()
    }
}
