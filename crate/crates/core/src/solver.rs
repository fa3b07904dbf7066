//! Stationary joint distribution of (queue length after a departure, type of
//! the next customer), via its vector generating function.
//!
//! With `A(z)` the arrival-count transform matrix and `M(z) = zI - A(z)`, the
//! generating functions `f(z) = (f_1(z), ..., f_N(z))` solve
//! `M(z)^T f(z) = b(z)`, where `b` depends linearly on the unknown boundary
//! probabilities `f_k(0)`. Those are pinned down by the `N - 1` zeros of
//! `det M(z)` inside the unit disk plus the normalisation `F(1) = 1`.

use num_complex::Complex;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::model::{KernelKind, ModelError, MomentSet, QueueModel};
use crate::roots::{self, RootError, RootFinderOptions, RootSet};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("traffic intensity {0} is not below 1 (stability requires rho < 1)")]
    Unstable(f64),
    #[error("det M(z) zeros: {0}")]
    Roots(#[from] RootError),
    #[error("boundary system (root equations + normalisation) is singular, pivot ratio {0:e}")]
    SingularBoundarySystem(f64),
    #[error("boundary probability f_{index}(0) = {value:e} is negative")]
    NegativeBoundaryMass { index: usize, value: f64 },
    #[error("det M(z)^T vanishes at z = {re}{im:+}i, which is not a known removable point")]
    EvalAtPole { re: f64, im: f64 },
}

/// Observation epoch for queue-length distributions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Epoch {
    Departure,
    BatchArrival,
    CustomerArrival,
    Arbitrary,
}

impl Epoch {
    pub const ALL: [Epoch; 4] = [
        Epoch::Departure,
        Epoch::BatchArrival,
        Epoch::CustomerArrival,
        Epoch::Arbitrary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Epoch::Departure => "departure",
            Epoch::BatchArrival => "batch-arrival",
            Epoch::CustomerArrival => "customer-arrival",
            Epoch::Arbitrary => "arbitrary",
        }
    }
}

impl std::str::FromStr for Epoch {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Epoch::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown epoch '{s}'"))
    }
}

impl std::fmt::Display for Epoch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryVector<T> {
    /// `f_k(0)`: a departure leaves the system empty and the next type is `k`.
    pub f0: Vec<T>,
    /// Smallest-to-largest pivot ratio of the boundary system.
    pub pivot_ratio: T,
}

impl<T: Scalar> BoundaryVector<T> {
    /// `P(X = 0)` at departures.
    pub fn empty_probability(&self) -> T {
        self.f0.iter().copied().sum()
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions<T> {
    pub roots: RootFinderOptions<T>,
    /// Below this `|det M^T(z)|` a point counts as singular.
    pub pole_tol: T,
    /// Offset used for limits at removable singularities.
    pub limit_offset: T,
    /// `rho` must stay below `1 - stability_margin`.
    pub stability_margin: T,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            roots: RootFinderOptions::default(),
            pole_tol: T::tol(1e-13, 1e3),
            limit_offset: T::tol(1e-7, 1e6),
            stability_margin: T::lit(1e-6),
        }
    }
}

/// Evaluated matrices at one point `z`.
struct Frame<T> {
    a: Matrix<Complex<T>>,
    a_star: Matrix<Complex<T>>,
    bz: Complex<T>,
}

#[derive(Clone, Debug)]
pub struct StationarySolution<T> {
    model: QueueModel<T>,
    moments: MomentSet<T>,
    roots: RootSet<T>,
    boundary: BoundaryVector<T>,
    options: SolverOptions<T>,
}

impl<T: Scalar> StationarySolution<T> {
    pub fn new(model: QueueModel<T>) -> Result<Self, SolverError> {
        Self::with_options(model, SolverOptions::default())
    }

    pub fn with_options(model: QueueModel<T>, options: SolverOptions<T>) -> Result<Self, SolverError> {
        let moments = model.moments()?;
        if !(moments.rho < T::one() - options.stability_margin) {
            return Err(SolverError::Unstable(moments.rho.to_f64_lossy()));
        }
        let n = model.n_types();
        let roots = roots::find_unit_disk_roots(|z| det_m_with_derivative(&model, z), n - 1, &options.roots)?;
        let mut sol = Self {
            model,
            moments,
            roots,
            boundary: BoundaryVector {
                f0: vec![],
                pivot_ratio: T::zero(),
            },
            options,
        };
        sol.boundary = sol.solve_boundary()?;
        Ok(sol)
    }

    pub fn model(&self) -> &QueueModel<T> {
        &self.model
    }

    pub fn moments(&self) -> &MomentSet<T> {
        &self.moments
    }

    pub fn roots(&self) -> &RootSet<T> {
        &self.roots
    }

    pub fn boundary(&self) -> &BoundaryVector<T> {
        &self.boundary
    }

    pub fn rho(&self) -> T {
        self.moments.rho
    }

    pub fn n_types(&self) -> usize {
        self.model.n_types()
    }

    /// `det M(z)^T = det(zI - A(z))`.
    pub fn det_m(&self, z: Complex<T>) -> Complex<T> {
        det_m(&self.model, z)
    }

    /// `d/dz det M(z)^T` via row-wise differentiation.
    pub fn det_m_derivative(&self, z: Complex<T>) -> Complex<T> {
        det_m_with_derivative(&self.model, z).1
    }

    fn frame(&self, z: Complex<T>) -> Frame<T> {
        Frame {
            a: self.model.arrival_matrix(z, KernelKind::Regular),
            a_star: self.model.arrival_matrix(z, KernelKind::Exceptional),
            bz: self.model.batch().pgf(z),
        }
    }

    /// `D_kj(z) = B(z) A*_kj(z) - A_kj(z)`, so that `b_j = sum_k D_kj f_k(0)`.
    fn boundary_kernel(fr: &Frame<T>) -> Matrix<Complex<T>> {
        let n = fr.a.rows();
        Matrix::from_fn(n, n, |k, j| fr.bz * fr.a_star[(k, j)] - fr.a[(k, j)])
    }

    /// `c_j(z) = sum_i r_ji(z)` with `r_ji` the cofactor of entry `(j, i)`
    /// of `M(z)^T`, and its derivative.
    fn cofactor_row_sums(&self, z: Complex<T>) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let n = self.n_types();
        let mt = m_matrix(&self.model, z).transpose();
        let dmt = m_matrix_derivative(&self.model, z).transpose();
        let c = (0..n)
            .map(|j| (0..n).fold(Complex::<T>::zero(), |acc, i| acc + linalg::cofactor(&mt, j, i)))
            .collect();
        let dc = (0..n)
            .map(|j| (0..n).fold(Complex::<T>::zero(), |acc, i| acc + linalg::cofactor_derivative(&mt, &dmt, j, i)))
            .collect();
        (c, dc)
    }

    /// Root-equation coefficients: `sum_j c_j(z) D_kj(z)` for each `k`.
    pub fn root_equation(&self, z: Complex<T>) -> Vec<Complex<T>> {
        let n = self.n_types();
        let (c, _) = self.cofactor_row_sums(z);
        let d = Self::boundary_kernel(&self.frame(z));
        (0..n)
            .map(|k| (0..n).fold(Complex::<T>::zero(), |acc, j| acc + c[j] * d[(k, j)]))
            .collect()
    }

    /// Normalisation coefficients and right-hand side `d (1 - rho)`.
    pub fn normalisation_equation(&self) -> (Vec<T>, T) {
        let n = self.n_types();
        let ms = &self.moments;
        let (c, dc) = self.cofactor_row_sums(Complex::<T>::one());
        let coef = (0..n)
            .map(|k| {
                (0..n)
                    .map(|j| {
                        let dp = ms.pstar[(k, j)] - ms.p[(k, j)];
                        let db = ms.mean_batch * ms.pstar[(k, j)] + ms.alpha_star[(k, j)] - ms.alpha[(k, j)];
                        dc[j].re * dp + c[j].re * db
                    })
                    .sum()
            })
            .collect();
        (coef, ms.cofactor_sum * (T::one() - ms.rho))
    }

    fn solve_boundary(&self) -> Result<BoundaryVector<T>, SolverError> {
        let n = self.n_types();
        let imag_tol = T::tol(1e-9, 1e4);
        let mut rows: Vec<Vec<T>> = Vec::with_capacity(n);
        let mut used = vec![false; self.roots.len()];
        for (l, &z) in self.roots.roots.iter().enumerate() {
            if used[l] {
                continue;
            }
            used[l] = true;
            let eq = self.root_equation(z);
            rows.push(eq.iter().map(|c| c.re).collect());
            if z.im.abs() > imag_tol {
                // conjugate partner gives the conjugate equation; use Im once
                if let Some(m) = (0..self.roots.len())
                    .find(|&m| !used[m] && (self.roots.roots[m] - z.conj()).norm() < T::tol(1e-7, 1e6))
                {
                    used[m] = true;
                }
                rows.push(eq.iter().map(|c| c.im).collect());
            }
        }
        if rows.len() != n - 1 {
            return Err(SolverError::SingularBoundarySystem(0.0));
        }
        let (norm_row, rhs_norm) = self.normalisation_equation();
        rows.insert(0, norm_row);
        let a = Matrix::from_rows(&rows);
        let mut rhs = vec![T::zero(); n];
        rhs[0] = rhs_norm;
        let fact = linalg::lu(&a);
        let pivot_ratio = fact.pivot_ratio();
        if pivot_ratio < T::tol(1e-14, 64.0) {
            return Err(SolverError::SingularBoundarySystem(pivot_ratio.to_f64_lossy()));
        }
        let mut f0 = fact
            .solve(&rhs)
            .ok_or(SolverError::SingularBoundarySystem(0.0))?;
        for (index, v) in f0.iter_mut().enumerate() {
            if *v < -T::tol(1e-8, 1e8) {
                return Err(SolverError::NegativeBoundaryMass {
                    index: index + 1,
                    value: v.to_f64_lossy(),
                });
            }
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        Ok(BoundaryVector { f0, pivot_ratio })
    }

    /// `b_j(z) = sum_i (B(z) A*_ij(z) - A_ij(z)) f_i(0)`.
    pub fn b_vector(&self, z: Complex<T>) -> Vec<Complex<T>> {
        let fr = self.frame(z);
        b_from_frame(&fr, &self.boundary.f0)
    }

    /// `(det L_1(z), ..., det L_N(z), det M(z)^T)`.
    pub fn cramer_parts(&self, z: Complex<T>) -> (Vec<Complex<T>>, Complex<T>) {
        let fr = self.frame(z);
        let n = self.n_types();
        let mt = Matrix::from_fn(n, n, |r, c| {
            // (M^T)_{rc} = M_{cr} = z δ - A_{cr}
            let diag = if r == c { z } else { Complex::<T>::zero() };
            diag - fr.a[(c, r)]
        });
        let b = b_from_frame(&fr, &self.boundary.f0);
        let dets = (0..n).map(|i| linalg::det(&mt.with_col(i, &b))).collect();
        (dets, linalg::det(&mt))
    }

    /// `f_i(z)` by Cramer's rule, with limits at `z = 1` and at the zeros of
    /// `det M^T` inside the disk.
    pub fn evaluate_f(&self, z: Complex<T>) -> Result<Vec<Complex<T>>, SolverError> {
        if z == Complex::<T>::one() {
            return Ok(self.f_at_one().into_iter().map(Complex::from).collect());
        }
        let h = self.options.limit_offset;
        let near_removable = (z - Complex::<T>::one()).norm() < h
            || self.roots.roots.iter().any(|r| (z - r).norm() < h);
        if near_removable {
            return self.removable_limit(z);
        }
        let (num, den) = self.cramer_parts(z);
        if den.norm() < self.options.pole_tol {
            return Err(SolverError::EvalAtPole {
                re: z.re.to_f64_lossy(),
                im: z.im.to_f64_lossy(),
            });
        }
        Ok(num.into_iter().map(|x| x / den).collect())
    }

    /// Linear extrapolation from two points offset towards the origin.
    fn removable_limit(&self, z: Complex<T>) -> Result<Vec<Complex<T>>, SolverError> {
        let h = self.options.limit_offset;
        let dir = if z.norm() > T::lit(1e-3) { -z / z.norm() } else { Complex::from(-T::one()) };
        let eval = |w: Complex<T>| -> Result<Vec<Complex<T>>, SolverError> {
            let (num, den) = self.cramer_parts(w);
            if den.is_zero() {
                return Err(SolverError::EvalAtPole {
                    re: w.re.to_f64_lossy(),
                    im: w.im.to_f64_lossy(),
                });
            }
            Ok(num.into_iter().map(|x| x / den).collect())
        };
        let two = T::lit(2.0);
        let f1 = eval(z + dir * (h * two))?;
        let f2 = eval(z + dir * (h * T::lit(4.0)))?;
        Ok(f1.iter().zip(&f2).map(|(a, b)| *a * two - *b).collect())
    }

    /// `F(z) = sum_i f_i(z)`: PGF of the queue length left behind by a departure.
    pub fn evaluate_pgf(&self, z: Complex<T>) -> Result<Complex<T>, SolverError> {
        Ok(self.evaluate_f(z)?.into_iter().fold(Complex::<T>::zero(), |a, b| a + b))
    }

    /// `f_i(1)` from L'Hôpital: the derivative of `det L_i` at `z = 1` over
    /// `d (1 - rho)`. At `z = 1` the summed first row of `L_i` vanishes, so
    /// the derivative is the determinant with that row differentiated.
    pub fn f_at_one(&self) -> Vec<T> {
        let n = self.n_types();
        let ms = &self.moments;
        let f0 = &self.boundary.f0;
        let top_b: T = (0..n)
            .map(|k| (ms.mean_batch + ms.alpha_star_row[k] - ms.alpha_row[k]) * f0[k])
            .sum();
        let denom = ms.cofactor_sum * (T::one() - ms.rho);
        (0..n)
            .map(|i| {
                let m = Matrix::from_fn(n, n, |r, c| {
                    if r == 0 {
                        if c == i {
                            top_b
                        } else {
                            T::one() - ms.alpha_row[c]
                        }
                    } else if c == i {
                        (0..n).map(|k| (ms.pstar[(k, r)] - ms.p[(k, r)]) * f0[k]).sum()
                    } else {
                        let id = if r == c { T::one() } else { T::zero() };
                        id - ms.p[(c, r)]
                    }
                });
                linalg::det(&m) / denom
            })
            .collect()
    }

    /// PGF of the queue length seen at the given epoch.
    pub fn epoch_pgf(&self, z: Complex<T>, epoch: Epoch) -> Result<Complex<T>, SolverError> {
        let f = self.evaluate_pgf(z)?;
        Ok(match epoch {
            Epoch::Departure | Epoch::CustomerArrival => f,
            Epoch::BatchArrival | Epoch::Arbitrary => f * self.arrival_correction(z),
        })
    }

    /// `E[B] (1 - z) / (1 - B(z))`, with its limit `1` at `z = 1`.
    pub fn arrival_correction(&self, z: Complex<T>) -> Complex<T> {
        let batch = self.model.batch();
        let eb = batch.mean();
        let w = Complex::<T>::one() - z;
        if w.norm() < T::lit(1e-6) {
            // 1 - B(z) = E[B] w - E[B(B-1)]/2 w^2 + O(w^3)
            let half_fact = batch.factorial_moment2() / T::lit(2.0);
            return Complex::from(eb) / (Complex::from(eb) - w * half_fact);
        }
        w * eb / (Complex::<T>::one() - batch.pgf(z))
    }

    /// Numerator of `F` at each polished zero: `sum_i det L_i(z_l)`.
    pub fn numerator_at_roots(&self) -> Vec<Complex<T>> {
        self.roots
            .roots
            .iter()
            .map(|&z| self.cramer_parts(z).0.into_iter().fold(Complex::<T>::zero(), |a, b| a + b))
            .collect()
    }
}

fn b_from_frame<T: Scalar>(fr: &Frame<T>, f0: &[T]) -> Vec<Complex<T>> {
    let n = fr.a.rows();
    (0..n)
        .map(|j| {
            (0..n).fold(Complex::<T>::zero(), |acc, i| {
                acc + (fr.bz * fr.a_star[(i, j)] - fr.a[(i, j)]) * f0[i]
            })
        })
        .collect()
}

/// `M(z) = zI - A(z)`.
pub fn m_matrix<T: Scalar>(model: &QueueModel<T>, z: Complex<T>) -> Matrix<Complex<T>> {
    let a = model.arrival_matrix(z, KernelKind::Regular);
    let n = a.rows();
    Matrix::from_fn(n, n, |i, j| if i == j { z - a[(i, j)] } else { -a[(i, j)] })
}

/// `M'(z) = I - A'(z)`.
pub fn m_matrix_derivative<T: Scalar>(model: &QueueModel<T>, z: Complex<T>) -> Matrix<Complex<T>> {
    let da = model.arrival_matrix_derivative(z, KernelKind::Regular);
    let n = da.rows();
    Matrix::from_fn(n, n, |i, j| if i == j { Complex::<T>::one() - da[(i, j)] } else { -da[(i, j)] })
}

pub fn det_m<T: Scalar>(model: &QueueModel<T>, z: Complex<T>) -> Complex<T> {
    linalg::det(&m_matrix(model, z))
}

pub fn det_m_with_derivative<T: Scalar>(model: &QueueModel<T>, z: Complex<T>) -> (Complex<T>, Complex<T>) {
    let m = m_matrix(model, z);
    let dm = m_matrix_derivative(model, z);
    (linalg::det(&m), linalg::det_derivative(&m, &dm))
}
