//! Zeros of an analytic function inside the unit disk.
//!
//! The total count comes from the winding number of `f` along a circle just
//! inside the unit circle. The disk is then split into polar cells (ranges of
//! radius × angle), each cell's own winding number decides whether to drop it,
//! polish a root inside it with Newton's method, or subdivide it further.

use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("expected {expected} zeros inside the unit disk, found {found}")]
    RootCountMismatch { expected: usize, found: usize },
    #[error("zero at modulus {0} is too close to the unit circle")]
    NearUnitRoot(f64),
    #[error("cell around {re}{im:+}i still winds {winding} times at the resolution floor; multiple zero")]
    MultipleRoot { re: f64, im: f64, winding: i64 },
    #[error("polished zero has residual {0:e}")]
    Residual(f64),
    #[error("contour winding did not settle to an integer")]
    WindingUnresolved,
}

#[derive(Clone, Debug)]
pub struct RootFinderOptions<T> {
    /// Radius of the counting contour.
    pub contour_radius: T,
    /// Required `|f(root)|` after polishing.
    pub residual_tol: T,
    /// Roots must satisfy `|z| < 1 - unit_margin`.
    pub unit_margin: T,
    /// Smallest cell diameter before a winding > 1 is reported as a multiple root.
    pub min_cell: T,
    pub newton_iterations: usize,
}

impl<T: Scalar> Default for RootFinderOptions<T> {
    fn default() -> Self {
        Self {
            contour_radius: T::one() - T::lit(1e-6),
            residual_tol: T::tol(1e-10, 1e3),
            unit_margin: T::lit(1e-9),
            min_cell: T::tol(1e-7, 1e3),
            newton_iterations: 80,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RootSet<T> {
    /// Zeros in subdivision order; conjugate pairs appear as separate entries.
    pub roots: Vec<Complex<T>>,
    /// `max |f(root)|`.
    pub residual: T,
    /// Winding number of `f` along the counting contour.
    pub winding: usize,
    /// Multiplicity of each root. Always 1: higher multiplicities are errors.
    pub multiplicity: Vec<u32>,
}

impl<T: Scalar> RootSet<T> {
    pub fn empty() -> Self {
        Self {
            roots: Vec::new(),
            residual: T::zero(),
            winding: 0,
            multiplicity: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

/// Signals that a contour passed (numerically) through a zero.
struct BoundaryHit;

/// `(f(z), f'(z))`.
type Pair<T> = (Complex<T>, Complex<T>);

/// Winding number of `f` along the piecewise path `pieces`, each a map
/// `t in [0, 1] -> z`.
///
/// A step is accepted only when the argument moves by at most π/4 and
/// `|f'/f| · |Δz| <= 1` at both ends. The second test catches a pair of zeros
/// just off the path, whose combined full turn is invisible to the argument
/// alone when the step straddles them.
fn winding<T: Scalar>(
    fdf: &impl Fn(Complex<T>) -> Pair<T>,
    pieces: &[&dyn Fn(T) -> Complex<T>],
    lengths: &[T],
) -> Result<i64, BoundaryHit> {
    let two_pi = T::PI() + T::PI();
    let mut total = T::zero();
    for (path, &len) in pieces.iter().zip(lengths) {
        let segments = (len * T::lit(96.0)).ceil().to_usize().unwrap_or(16).clamp(16, 4096);
        let mut t0 = T::zero();
        let mut v0 = eval_checked(fdf, path(t0))?;
        for k in 1..=segments {
            let t1 = T::from_usize_lossy(k) / T::from_usize_lossy(segments);
            let v1 = eval_checked(fdf, path(t1))?;
            total += arg_change(fdf, *path, t0, v0, t1, v1, 0)?;
            t0 = t1;
            v0 = v1;
        }
    }
    let turns = total / two_pi;
    let rounded = turns.round();
    if (turns - rounded).abs() > T::lit(0.05) {
        return Err(BoundaryHit);
    }
    Ok(rounded.to_i64().unwrap_or(0))
}

fn eval_checked<T: Scalar>(fdf: &impl Fn(Complex<T>) -> Pair<T>, z: Complex<T>) -> Result<Pair<T>, BoundaryHit> {
    let (v, dv) = fdf(z);
    if !(v.re.is_finite() && v.im.is_finite()) || v.norm() <= T::min_positive_value() {
        return Err(BoundaryHit);
    }
    Ok((v, dv))
}

fn arg_change<T: Scalar>(
    fdf: &impl Fn(Complex<T>) -> Pair<T>,
    path: &dyn Fn(T) -> Complex<T>,
    t0: T,
    v0: Pair<T>,
    t1: T,
    v1: Pair<T>,
    depth: u32,
) -> Result<T, BoundaryHit> {
    let delta = (v1.0 / v0.0).arg();
    let step = (path(t1) - path(t0)).norm();
    let log_rate = |v: Pair<T>| {
        let r = (v.1 / v.0).norm();
        if r.is_finite() { r } else { T::zero() }
    };
    let smooth = log_rate(v0).max(log_rate(v1)) * step <= T::one();
    if delta.abs() <= T::FRAC_PI_4() && smooth {
        return Ok(delta);
    }
    if depth > 60 {
        return Err(BoundaryHit);
    }
    let tm = (t0 + t1) / T::lit(2.0);
    let vm = eval_checked(fdf, path(tm))?;
    Ok(arg_change(fdf, path, t0, v0, tm, vm, depth + 1)? + arg_change(fdf, path, tm, vm, t1, v1, depth + 1)?)
}

/// Polar cell `[r0, r1] × [th0, th1]`.
#[derive(Clone, Copy, Debug)]
struct Cell<T> {
    r0: T,
    r1: T,
    th0: T,
    th1: T,
}

impl<T: Scalar> Cell<T> {
    fn diameter(&self) -> T {
        let dr = self.r1 - self.r0;
        let arc = self.r1 * (self.th1 - self.th0);
        dr.max(arc.min(self.r1 + self.r1))
    }

    fn center(&self) -> Complex<T> {
        let two = T::lit(2.0);
        Complex::from_polar((self.r0 + self.r1) / two, (self.th0 + self.th1) / two)
    }

    fn contains(&self, z: Complex<T>, margin: T) -> bool {
        let r = z.norm();
        if r < self.r0 - margin || r > self.r1 + margin {
            return false;
        }
        if r <= margin {
            return self.r0 <= margin;
        }
        let two_pi = T::PI() + T::PI();
        let mut th = z.arg();
        while th < self.th0 {
            th += two_pi;
        }
        while th > self.th0 + two_pi {
            th -= two_pi;
        }
        let ang_margin = margin / r;
        th <= self.th1 + ang_margin || th - two_pi >= self.th0 - ang_margin
    }

    fn winding(&self, f: &impl Fn(Complex<T>) -> Pair<T>) -> Result<i64, BoundaryHit> {
        let c = *self;
        let radial_out = move |t: T| Complex::from_polar(c.r0 + (c.r1 - c.r0) * t, c.th0);
        let outer = move |t: T| Complex::from_polar(c.r1, c.th0 + (c.th1 - c.th0) * t);
        let radial_in = move |t: T| Complex::from_polar(c.r1 - (c.r1 - c.r0) * t, c.th1);
        let inner = move |t: T| Complex::from_polar(c.r0, c.th1 - (c.th1 - c.th0) * t);
        let dr = c.r1 - c.r0;
        let mut pieces: Vec<&dyn Fn(T) -> Complex<T>> = vec![&radial_out, &outer, &radial_in];
        let mut lengths = vec![dr, c.r1 * (c.th1 - c.th0), dr];
        if c.r0 > T::zero() {
            pieces.push(&inner);
            lengths.push(c.r0 * (c.th1 - c.th0));
        }
        winding(f, &pieces, &lengths)
    }

    /// Four children, splitting at `frac` of each range.
    fn split(&self, frac: T) -> [Cell<T>; 4] {
        let rm = self.r0 + (self.r1 - self.r0) * frac;
        let tm = self.th0 + (self.th1 - self.th0) * frac;
        [
            Cell { r0: self.r0, r1: rm, th0: self.th0, th1: tm },
            Cell { r0: rm, r1: self.r1, th0: self.th0, th1: tm },
            Cell { r0: self.r0, r1: rm, th0: tm, th1: self.th1 },
            Cell { r0: rm, r1: self.r1, th0: tm, th1: self.th1 },
        ]
    }
}

fn newton<T: Scalar>(
    fdf: &impl Fn(Complex<T>) -> (Complex<T>, Complex<T>),
    start: Complex<T>,
    iterations: usize,
) -> Option<Complex<T>> {
    let mut z = start;
    for _ in 0..iterations {
        let (v, dv) = fdf(z);
        if v.is_zero() {
            return Some(z);
        }
        if dv.is_zero() || !(dv.re.is_finite() && dv.im.is_finite()) {
            return None;
        }
        let step = v / dv;
        // keep iterates inside the disk where f is analytic
        let mut next = z - step;
        if next.norm() >= T::one() {
            next = (z + next / next.norm() * T::lit(0.999)) / T::lit(2.0);
        }
        let moved = (next - z).norm();
        z = next;
        if moved <= T::epsilon() * T::lit(4.0) * z.norm().max(T::one()) {
            return Some(z);
        }
    }
    Some(z)
}

/// Winding number of `f` along `|z| = radius`; `fdf` returns `(f(z), f'(z))`.
pub fn winding_on_circle<T: Scalar>(f: impl Fn(Complex<T>) -> Pair<T>, radius: T) -> Option<i64> {
    let two_pi = T::PI() + T::PI();
    let circle = move |t: T| Complex::from_polar(radius, two_pi * t);
    winding(&f, &[&circle], &[two_pi * radius]).ok()
}

/// Finds all zeros of `f` in the disk `|z| < contour_radius` and checks that
/// there are exactly `expected` of them, all simple.
///
/// `fdf` returns `(f(z), f'(z))`.
pub fn find_unit_disk_roots<T: Scalar>(
    fdf: impl Fn(Complex<T>) -> (Complex<T>, Complex<T>),
    expected: usize,
    opts: &RootFinderOptions<T>,
) -> Result<RootSet<T>, RootError> {
    let f = &fdf;
    let total = winding_on_circle(f, opts.contour_radius).ok_or(RootError::WindingUnresolved)?;
    if total < 0 || total as usize != expected {
        return Err(RootError::RootCountMismatch {
            expected,
            found: total.max(0) as usize,
        });
    }
    if expected == 0 {
        return Ok(RootSet::empty());
    }

    let two_pi = T::PI() + T::PI();
    // Rotated so that the real axis is not a cell edge.
    let offset = T::lit(0.3);
    let quarter = two_pi / T::lit(4.0);
    let mut stack: Vec<Cell<T>> = (0..4)
        .rev()
        .map(|k| {
            let th0 = offset + quarter * T::from_usize_lossy(k);
            Cell { r0: T::zero(), r1: opts.contour_radius, th0, th1: th0 + quarter }
        })
        .collect();
    let mut windings: Vec<Option<i64>> = vec![None; stack.len()];
    let mut roots: Vec<Complex<T>> = Vec::new();
    let fracs = [0.5, 0.4625, 0.5375, 0.425, 0.575, 0.3875];

    while let Some(cell) = stack.pop() {
        let w = match windings.pop().flatten() {
            Some(w) => w,
            None => cell.winding(f).map_err(|_| RootError::WindingUnresolved)?,
        };
        if w <= 0 {
            continue;
        }
        let diam = cell.diameter();
        if w == 1 && diam < T::lit(0.25) {
            if let Some(z) = newton(&fdf, cell.center(), opts.newton_iterations) {
                if cell.contains(z, T::tol(1e-9, 1e4) * diam.max(T::lit(1e-3))) && fdf(z).0.norm() <= opts.residual_tol {
                    roots.push(z);
                    continue;
                }
            }
        }
        if diam < opts.min_cell {
            let c = cell.center();
            if w == 1 {
                // Newton could not settle; the cell is tiny, accept its centre
                roots.push(c);
                continue;
            }
            return Err(RootError::MultipleRoot {
                re: c.re.to_f64_lossy(),
                im: c.im.to_f64_lossy(),
                winding: w,
            });
        }
        let mut split_done = false;
        for &frac in &fracs {
            let children = cell.split(T::lit(frac));
            let ws: Result<Vec<i64>, BoundaryHit> = children.iter().map(|ch| ch.winding(f)).collect();
            if let Ok(ws) = ws {
                if ws.iter().sum::<i64>() != w {
                    continue;
                }
                // pushed in reverse so children are processed in fixed order
                for (ch, cw) in children.iter().zip(ws).rev() {
                    stack.push(*ch);
                    windings.push(Some(cw));
                }
                split_done = true;
                break;
            }
        }
        if !split_done {
            return Err(RootError::WindingUnresolved);
        }
    }

    // duplicates indicate Newton jumping between cells
    for i in 0..roots.len() {
        for j in 0..i {
            if (roots[i] - roots[j]).norm() < T::tol(1e-9, 1e4) {
                return Err(RootError::RootCountMismatch {
                    expected,
                    found: roots.len() - 1,
                });
            }
        }
    }
    if roots.len() != expected {
        return Err(RootError::RootCountMismatch {
            expected,
            found: roots.len(),
        });
    }
    let mut residual = T::zero();
    for z in &roots {
        let r = z.norm();
        if r >= T::one() - opts.unit_margin {
            return Err(RootError::NearUnitRoot(r.to_f64_lossy()));
        }
        residual = residual.max(fdf(*z).0.norm());
    }
    if residual > opts.residual_tol {
        return Err(RootError::Residual(residual.to_f64_lossy()));
    }
    let multiplicity = vec![1; roots.len()];
    Ok(RootSet {
        roots,
        residual,
        winding: total as usize,
        multiplicity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(roots: Vec<Complex<f64>>) -> impl Fn(Complex<f64>) -> (Complex<f64>, Complex<f64>) {
        move |z| {
            let mut v = Complex::new(1.0, 0.0);
            let mut dv = Complex::new(0.0, 0.0);
            for r in &roots {
                dv = dv * (z - r) + v;
                v *= z - r;
            }
            (v, dv)
        }
    }

    #[test]
    fn finds_polynomial_zeros_inside_disk() {
        let inside = vec![
            Complex::new(0.3, 0.4),
            Complex::new(0.3, -0.4),
            Complex::new(-0.7, 0.0),
            Complex::new(0.05, 0.02),
        ];
        let mut all = inside.clone();
        all.push(Complex::new(1.0, 0.0));
        all.push(Complex::new(2.0, 1.0));
        let set = find_unit_disk_roots(poly(all), 4, &RootFinderOptions::default()).unwrap();
        assert_eq!(set.len(), 4);
        for r in &inside {
            assert!(set.roots.iter().any(|z| (z - r).norm() < 1e-12), "missing {r}");
        }
        assert!(set.residual < 1e-12);
    }

    #[test]
    fn wrong_expected_count_is_reported() {
        let f = poly(vec![Complex::new(0.5, 0.0), Complex::new(-0.5, 0.1)]);
        let err = find_unit_disk_roots(f, 1, &RootFinderOptions::default()).unwrap_err();
        assert_eq!(err, RootError::RootCountMismatch { expected: 1, found: 2 });
    }

    #[test]
    fn double_root_is_rejected() {
        let f = poly(vec![Complex::new(0.2, 0.1), Complex::new(0.2, 0.1)]);
        let err = find_unit_disk_roots(f, 2, &RootFinderOptions::default()).unwrap_err();
        assert!(matches!(err, RootError::MultipleRoot { winding: 2, .. }), "{err:?}");
    }

    #[test]
    fn zero_count_returns_empty() {
        let f = |z: Complex<f64>| (z - 3.0, Complex::new(1.0, 0.0));
        assert!(find_unit_disk_roots(f, 0, &RootFinderOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn circle_winding_counts_enclosed_zeros() {
        let f = poly(vec![Complex::new(0.5, 0.0), Complex::new(-0.5, 0.0), Complex::new(2.0, 0.0)]);
        assert_eq!(winding_on_circle(f, 1.0), Some(2));
    }

    #[test]
    fn close_pair_just_outside_the_contour_is_not_counted() {
        // two zeros within 1e-3 of each other, both just beyond the contour
        let zs = vec![Complex::new(0.74, 0.0), Complex::new(1.0, 0.0), Complex::new(1.001, 0.0)];
        let set = find_unit_disk_roots(poly(zs), 1, &RootFinderOptions::default()).unwrap();
        assert!((set.roots[0] - Complex::new(0.74, 0.0)).norm() < 1e-12);
    }
}
