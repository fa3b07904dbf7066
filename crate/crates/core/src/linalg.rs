//! Small dense linear algebra over real or complex entries.
//!
//! The matrices in this crate are N×N with N the number of customer types,
//! so everything here is plain row-major storage with partial-pivot LU.
//! Determinants, minors and cofactors are first-class because the stationary
//! solution is written in terms of them.

use std::fmt::Debug;
use std::ops::{Add, Div, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::Scalar;

/// Field element usable as a matrix entry: a real scalar or a complex number.
pub trait Entry<T: Scalar>:
    Copy
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    /// Absolute value, used for pivoting.
    fn modulus(&self) -> T;
    fn from_real(x: T) -> Self;
}

impl<T: Scalar> Entry<T> for T {
    #[inline]
    fn modulus(&self) -> T {
        self.abs()
    }
    #[inline]
    fn from_real(x: T) -> Self {
        x
    }
}

impl<T: Scalar> Entry<T> for Complex<T> {
    #[inline]
    fn modulus(&self) -> T {
        self.norm()
    }
    #[inline]
    fn from_real(x: T) -> Self {
        Complex::new(x, T::zero())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<E> {
    rows: usize,
    cols: usize,
    data: Vec<E>,
}

impl<E: Copy + Zero> Matrix<E> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![E::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> E) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<E>]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == m), "ragged rows");
        Self::from_fn(n, m, |i, j| rows[i][j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn row(&self, i: usize) -> &[E] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Copy of `self` with row `i` replaced.
    pub fn with_row(&self, i: usize, row: &[E]) -> Self {
        assert_eq!(row.len(), self.cols);
        let mut out = self.clone();
        out.data[i * self.cols..(i + 1) * self.cols].copy_from_slice(row);
        out
    }

    /// Copy of `self` with column `j` replaced.
    pub fn with_col(&self, j: usize, col: &[E]) -> Self {
        assert_eq!(col.len(), self.rows);
        let mut out = self.clone();
        for (i, &c) in col.iter().enumerate() {
            out[(i, j)] = c;
        }
        out
    }

    /// Submatrix obtained by deleting row `r` and column `c`.
    pub fn minor_matrix(&self, r: usize, c: usize) -> Self {
        Self::from_fn(self.rows - 1, self.cols - 1, |i, j| {
            let ii = if i < r { i } else { i + 1 };
            let jj = if j < c { j } else { j + 1 };
            self[(ii, jj)]
        })
    }

    pub fn map<F: Copy + Zero>(&self, f: impl Fn(E) -> F) -> Matrix<F> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }
}

impl<E> Index<(usize, usize)> for Matrix<E> {
    type Output = E;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &E {
        &self.data[i * self.cols + j]
    }
}

impl<E> IndexMut<(usize, usize)> for Matrix<E> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut E {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorisation with partial pivoting, `P·A = L·U` packed in one matrix.
#[derive(Clone, Debug)]
pub struct Lu<E> {
    lu: Matrix<E>,
    perm: Vec<usize>,
    sign_flips: usize,
    singular: bool,
}

impl<E> Lu<E> {
    pub fn is_singular(&self) -> bool {
        self.singular
    }
}

pub fn lu<T: Scalar, E: Entry<T>>(a: &Matrix<E>) -> Lu<E> {
    assert!(a.is_square(), "LU of a non-square matrix");
    let n = a.rows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign_flips = 0;
    let mut singular = false;
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, lu[(i, k)].modulus()))
            .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax == T::zero() {
            singular = true;
            continue;
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            perm.swap(k, p);
            sign_flips += 1;
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            for j in k + 1..n {
                let upd = factor * lu[(k, j)];
                lu[(i, j)] = lu[(i, j)] - upd;
            }
        }
    }
    Lu {
        lu,
        perm,
        sign_flips,
        singular,
    }
}

impl<E: Copy + Zero + One + Neg<Output = E> + Mul<Output = E>> Lu<E> {
    pub fn det(&self) -> E {
        if self.singular {
            return E::zero();
        }
        let n = self.lu.rows();
        let mut d = E::one();
        for k in 0..n {
            d = d * self.lu[(k, k)];
        }
        if self.sign_flips % 2 == 1 {
            -d
        } else {
            d
        }
    }
}

impl<E> Lu<E> {
    /// Solves `A x = b`; `None` when the factorisation hit an exact zero pivot.
    pub fn solve<T: Scalar>(&self, b: &[E]) -> Option<Vec<E>>
    where
        E: Entry<T>,
    {
        if self.singular {
            return None;
        }
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        let mut x: Vec<E> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let upd = self.lu[(i, j)] * x[j];
                x[i] = x[i] - upd;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let upd = self.lu[(i, j)] * x[j];
                x[i] = x[i] - upd;
            }
            x[i] = x[i] / self.lu[(i, i)];
        }
        Some(x)
    }

    /// Ratio of the smallest to the largest pivot modulus; a cheap
    /// conditioning indicator (0 for singular systems).
    pub fn pivot_ratio<T: Scalar>(&self) -> T
    where
        E: Entry<T>,
    {
        if self.singular {
            return T::zero();
        }
        let n = self.lu.rows();
        let mods: Vec<T> = (0..n).map(|k| self.lu[(k, k)].modulus()).collect();
        let max = mods.iter().copied().fold(T::zero(), T::max);
        let min = mods.iter().copied().fold(T::infinity(), T::min);
        if max == T::zero() {
            T::zero()
        } else {
            min / max
        }
    }
}

pub fn det<T: Scalar, E: Entry<T>>(a: &Matrix<E>) -> E {
    match a.rows() {
        0 => E::one(),
        1 => a[(0, 0)],
        2 => a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)],
        _ => lu(a).det(),
    }
}

/// Signed cofactor `(-1)^{r+c} · det(minor(r, c))`.
pub fn cofactor<T: Scalar, E: Entry<T>>(a: &Matrix<E>, r: usize, c: usize) -> E {
    let m = det(&a.minor_matrix(r, c));
    if (r + c) % 2 == 1 {
        -m
    } else {
        m
    }
}

/// Matrix of all signed cofactors, `C[r][c] = cofactor(a, r, c)`.
pub fn cofactor_matrix<T: Scalar, E: Entry<T>>(a: &Matrix<E>) -> Matrix<E> {
    let n = a.rows();
    if n == 1 {
        return Matrix::from_fn(1, 1, |_, _| E::one());
    }
    Matrix::from_fn(n, n, |r, c| cofactor(a, r, c))
}

/// Derivative of `det A(z)` given `A(z)` and `A'(z)`: the sum over rows of the
/// determinant with that row differentiated. Exact at singular `A`.
pub fn det_derivative<T: Scalar, E: Entry<T>>(a: &Matrix<E>, da: &Matrix<E>) -> E {
    assert_eq!(a.rows(), da.rows());
    (0..a.rows())
        .map(|k| det(&a.with_row(k, da.row(k))))
        .fold(E::zero(), |acc, x| acc + x)
}

/// Derivative of the signed cofactor `(r, c)` of `A(z)`.
pub fn cofactor_derivative<T: Scalar, E: Entry<T>>(
    a: &Matrix<E>,
    da: &Matrix<E>,
    r: usize,
    c: usize,
) -> E {
    if a.rows() == 1 {
        return E::zero();
    }
    let m = det_derivative(&a.minor_matrix(r, c), &da.minor_matrix(r, c));
    if (r + c) % 2 == 1 {
        -m
    } else {
        m
    }
}

pub fn solve<T: Scalar, E: Entry<T>>(a: &Matrix<E>, b: &[E]) -> Option<Vec<E>> {
    lu(a).solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn det_matches_cofactor_expansion() {
        let a = m(&[&[2.0, -1.0, 0.5], &[0.3, 4.0, 1.0], &[-2.0, 0.0, 1.5]]);
        let expansion: f64 = (0..3).map(|j| a[(0, j)] * cofactor(&a, 0, j)).sum();
        assert_relative_eq!(det(&a), expansion, epsilon = 1e-12);
        let big = Matrix::from_fn(4, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.5 + (i == j) as u8 as f64);
        let exp4: f64 = (0..4).map(|j| big[(1, j)] * cofactor(&big, 1, j)).sum();
        assert_relative_eq!(det(&big), exp4, epsilon = 1e-10);
    }

    #[test]
    fn singular_matrix_has_zero_det_and_no_solution() {
        let a = m(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[0.0, 1.0, 1.0]]);
        assert!(det(&a).abs() < 1e-14);
        let z = m(&[&[0.0, 0.0], &[0.0, 1.0]]);
        assert!(solve(&z, &[1.0, 1.0]).is_none());
    }

    #[test]
    fn complex_solve_roundtrip() {
        let i = Complex::new(0.0, 1.0);
        let one = Complex::new(1.0, 0.0);
        let a = Matrix::from_rows(&[vec![one + i, one * 2.0], vec![-i, one * 3.0 - i]]);
        let x = vec![Complex::new(0.5, -0.25), Complex::new(-1.0, 2.0)];
        let b: Vec<_> = (0..2).map(|r| a[(r, 0)] * x[0] + a[(r, 1)] * x[1]).collect();
        let got = solve(&a, &b).unwrap();
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).norm() < 1e-14);
        }
    }

    #[test]
    fn det_derivative_matches_finite_difference() {
        let at = |z: f64| {
            Matrix::from_fn(3, 3, |i, j| ((i + 1) as f64 * z).sin() + (j as f64) * z * z + (i == j) as u8 as f64)
        };
        let dat = |z: f64| {
            Matrix::from_fn(3, 3, |i, j| (i + 1) as f64 * ((i + 1) as f64 * z).cos() + 2.0 * (j as f64) * z)
        };
        let z = 0.37;
        let h = 1e-5;
        let fd = (det(&at(z + h)) - det(&at(z - h))) / (2.0 * h);
        assert_relative_eq!(det_derivative(&at(z), &dat(z)), fd, epsilon = 1e-8);
        let fdc = (cofactor(&at(z + h), 1, 2) - cofactor(&at(z - h), 1, 2)) / (2.0 * h);
        assert_relative_eq!(cofactor_derivative(&at(z), &dat(z), 1, 2), fdc, epsilon = 1e-8);
    }
}
