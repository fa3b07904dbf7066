//! Explicit two-type solution, written out entry by entry. Used to cross-check
//! the general determinant route.

use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

use crate::model::{KernelKind, ModelError, MomentSet, QueueModel};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClosedFormError {
    #[error("closed form needs exactly two types, model has {0}")]
    NotN2(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("traffic intensity {0} is not below 1")]
    Unstable(f64),
    #[error("no sign change of the denominator on the real segment")]
    NoRealRoot,
}

#[derive(Clone, Debug)]
pub struct TwoTypeSolution<T> {
    model: QueueModel<T>,
    moments: MomentSet<T>,
    root: T,
    f0: [T; 2],
}

impl<T: Scalar> TwoTypeSolution<T> {
    pub fn new(model: QueueModel<T>) -> Result<Self, ClosedFormError> {
        if model.n_types() != 2 {
            return Err(ClosedFormError::NotN2(model.n_types()));
        }
        let moments = model.moments()?;
        let rho = moments.rho;
        if !(rho < T::one()) {
            return Err(ClosedFormError::Unstable(rho.to_f64_lossy()));
        }
        let root = real_root(&model)?;
        let mut sol = Self {
            model,
            moments,
            root,
            f0: [T::zero(); 2],
        };
        sol.f0 = sol.boundary();
        Ok(sol)
    }

    /// The zero of `(z - A11)(z - A22) - A12 A21` inside the unit disk.
    pub fn root(&self) -> T {
        self.root
    }

    pub fn f0(&self) -> [T; 2] {
        self.f0
    }

    fn parts(&self, z: Complex<T>) -> ([[Complex<T>; 2]; 2], [[Complex<T>; 2]; 2], Complex<T>) {
        let a = self.model.arrival_matrix(z, KernelKind::Regular);
        let s = self.model.arrival_matrix(z, KernelKind::Exceptional);
        let b = self.model.batch().pgf(z);
        (
            [[a[(0, 0)], a[(0, 1)]], [a[(1, 0)], a[(1, 1)]]],
            [[s[(0, 0)], s[(0, 1)]], [s[(1, 0)], s[(1, 1)]]],
            b,
        )
    }

    /// `R` matrix of the two boundary equations; row 0 from the root, row 1
    /// from normalisation.
    pub fn r_matrix(&self) -> [[T; 2]; 2] {
        let z = Complex::from(self.root);
        let (a, s, b) = self.parts(z);
        let ms = &self.moments;
        let p12 = ms.p[(0, 1)];
        let p21 = ms.p[(1, 0)];
        let mut r = [[T::zero(); 2]; 2];
        for j in 0..2 {
            let d1 = b * s[j][0] - a[j][0];
            let d2 = b * s[j][1] - a[j][1];
            r[0][j] = ((z + a[0][1] - a[1][1]) * d1 + (z + a[1][0] - a[0][0]) * d2).re;
            r[1][j] = (p12 + p21) * (ms.mean_batch + ms.alpha_star_row[j] - ms.alpha_row[j])
                + (ms.alpha_row[0] - ms.alpha_row[1]) * (ms.pstar[(j, 0)] - ms.p[(j, 0)]);
        }
        r
    }

    fn boundary(&self) -> [T; 2] {
        let r = self.r_matrix();
        let ms = &self.moments;
        let scale = (ms.p[(0, 1)] + ms.p[(1, 0)]) * (T::one() - ms.rho);
        let det_r = r[0][0] * r[1][1] - r[0][1] * r[1][0];
        [-scale * r[0][1] / det_r, scale * r[0][0] / det_r]
    }

    /// `(f_1(z), f_2(z))`.
    pub fn f(&self, z: Complex<T>) -> [Complex<T>; 2] {
        let (a, s, b) = self.parts(z);
        let den = (z - a[0][0]) * (z - a[1][1]) - a[0][1] * a[1][0];
        let mut n1 = Complex::<T>::zero();
        let mut n2 = Complex::<T>::zero();
        for i in 0..2 {
            let d1 = b * s[i][0] - a[i][0];
            let d2 = b * s[i][1] - a[i][1];
            n1 += ((z - a[1][1]) * d1 + a[1][0] * d2) * self.f0[i];
            n2 += ((z - a[0][0]) * d2 + a[0][1] * d1) * self.f0[i];
        }
        [n1 / den, n2 / den]
    }

    /// `F(z)` from its own combined numerator.
    pub fn pgf(&self, z: Complex<T>) -> Complex<T> {
        let (a, s, b) = self.parts(z);
        let den = (z - a[0][0]) * (z - a[1][1]) - a[0][1] * a[1][0];
        let mut num = Complex::<T>::zero();
        for i in 0..2 {
            let d1 = b * s[i][0] - a[i][0];
            let d2 = b * s[i][1] - a[i][1];
            num += ((z + a[0][1] - a[1][1]) * d1 + (z + a[1][0] - a[0][0]) * d2) * self.f0[i];
        }
        num / den
    }

    /// `(f_1(1), f_2(1))`.
    pub fn f_at_one(&self) -> [T; 2] {
        let ms = &self.moments;
        let p12 = ms.p[(0, 1)];
        let p21 = ms.p[(1, 0)];
        let den = (p12 + p21) * (T::one() - ms.rho);
        let mut f1 = T::zero();
        let mut f2 = T::zero();
        for i in 0..2 {
            let extra = ms.mean_batch + ms.alpha_star_row[i] - ms.alpha_row[i];
            f1 += (p21 * extra + (T::one() - ms.alpha_row[1]) * (ms.pstar[(i, 0)] - ms.p[(i, 0)])) * self.f0[i];
            f2 += (p12 * extra + (T::one() - ms.alpha_row[0]) * (ms.pstar[(i, 1)] - ms.p[(i, 1)])) * self.f0[i];
        }
        [f1 / den, f2 / den]
    }
}

/// Bisection for the zero of the real-valued `det M(x)` on `(-1, 1)`.
fn real_root<T: Scalar>(model: &QueueModel<T>) -> Result<T, ClosedFormError> {
    let g = |x: T| {
        let z = Complex::from(x);
        let a = model.arrival_matrix(z, KernelKind::Regular);
        ((z - a[(0, 0)]) * (z - a[(1, 1)]) - a[(0, 1)] * a[(1, 0)]).re
    };
    let edge = T::one() - T::lit(1e-6);
    let (mut lo, mut hi) = (-edge, edge);
    let (glo, ghi) = (g(lo), g(hi));
    if glo.is_zero() {
        return Ok(lo);
    }
    if glo.signum() == ghi.signum() {
        return Err(ClosedFormError::NoRealRoot);
    }
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid == lo || mid == hi {
            break;
        }
        let gm = g(mid);
        if gm.is_zero() {
            return Ok(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}

impl<T: Scalar> TwoTypeSolution<T> {
    /// Convenience: `F(1) = f_1(1) + f_2(1)`.
    pub fn total_at_one(&self) -> T {
        let [a, b] = self.f_at_one();
        a + b
    }
}
