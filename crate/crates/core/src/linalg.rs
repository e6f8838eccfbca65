//! Small dense linear-algebra helpers and interpolation on uniform grids.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Values that can be linearly combined with real weights.
pub trait Blend: Clone {
    fn add_scaled(&mut self, w: f64, other: &Self);
    fn scaled(&self, w: f64) -> Self;
}

impl Blend for f64 {
    fn add_scaled(&mut self, w: f64, other: &Self) {
        *self += w * other;
    }
    fn scaled(&self, w: f64) -> Self {
        w * self
    }
}

impl Blend for C64 {
    fn add_scaled(&mut self, w: f64, other: &Self) {
        *self += other * w;
    }
    fn scaled(&self, w: f64) -> Self {
        self * w
    }
}

macro_rules! blend_matrix {
    ($t:ty) => {
        impl Blend for DMatrix<$t> {
            fn add_scaled(&mut self, w: f64, other: &Self) {
                for (a, b) in self.iter_mut().zip(other.iter()) {
                    *a += *b * w;
                }
            }
            fn scaled(&self, w: f64) -> Self {
                self.map(|v| v * w)
            }
        }
        impl Blend for DVector<$t> {
            fn add_scaled(&mut self, w: f64, other: &Self) {
                for (a, b) in self.iter_mut().zip(other.iter()) {
                    *a += *b * w;
                }
            }
            fn scaled(&self, w: f64) -> Self {
                self.map(|v| v * w)
            }
        }
    };
}
blend_matrix!(f64);
blend_matrix!(C64);

/// Weighted sum `Σ w_k v_k`; `terms` must be non-empty.
pub fn combine<T: Blend>(terms: &[(f64, &T)]) -> T {
    let mut acc = terms[0].1.scaled(terms[0].0);
    for (w, v) in &terms[1..] {
        acc.add_scaled(*w, v);
    }
    acc
}

/// Uniform time grid `t_k = k·dt`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Self {
        assert!(steps > 0 && t_final > 0.0);
        Self {
            dt: t_final / steps as f64,
            steps,
        }
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Interval index and local coordinate in `[0,1]` (extrapolates linearly past the ends).
    fn locate(&self, t: f64) -> (usize, f64) {
        let pos = t / self.dt;
        let k = (pos.floor().max(0.0) as usize).min(self.steps - 1);
        (k, pos - k as f64)
    }
}

/// Cubic Hermite interpolant of a trajectory sampled with values and time derivatives.
#[derive(Debug, Clone)]
pub struct HermiteSeries<T> {
    pub grid: TimeGrid,
    pub values: Vec<T>,
    pub derivs: Vec<T>,
}

impl<T: Blend> HermiteSeries<T> {
    pub fn new(grid: TimeGrid, values: Vec<T>, derivs: Vec<T>) -> Self {
        assert_eq!(values.len(), grid.len());
        assert_eq!(derivs.len(), grid.len());
        Self {
            grid,
            values,
            derivs,
        }
    }

    pub fn at_node(&self, k: usize) -> &T {
        &self.values[k]
    }

    pub fn eval(&self, t: f64) -> T {
        let (k, u) = self.grid.locate(t);
        let h = self.grid.dt;
        let (u2, u3) = (u * u, u * u * u);
        combine(&[
            (2.0 * u3 - 3.0 * u2 + 1.0, &self.values[k]),
            (h * (u3 - 2.0 * u2 + u), &self.derivs[k]),
            (-2.0 * u3 + 3.0 * u2, &self.values[k + 1]),
            (h * (u3 - u2), &self.derivs[k + 1]),
        ])
    }

    pub fn deriv(&self, t: f64) -> T {
        let (k, u) = self.grid.locate(t);
        let h = self.grid.dt;
        let u2 = u * u;
        combine(&[
            ((6.0 * u2 - 6.0 * u) / h, &self.values[k]),
            (3.0 * u2 - 4.0 * u + 1.0, &self.derivs[k]),
            ((-6.0 * u2 + 6.0 * u) / h, &self.values[k + 1]),
            (3.0 * u2 - 2.0 * u, &self.derivs[k + 1]),
        ])
    }
}

/// Catmull-Rom weights on a uniform grid `r_j = r0 + j·dr` with `n` samples.
///
/// Returns `(index, value weight, derivative weight)` triples; the interpolant is
/// `Σ w_j p_j` and its `r`-derivative `Σ w'_j p_j`.  Tangents are centered
/// differences, one-sided at the ends.  A single sample is treated as constant.
pub fn catmull_rom_weights(n: usize, r0: f64, dr: f64, r: f64) -> Vec<(usize, f64, f64)> {
    if n == 1 {
        return vec![(0, 1.0, 0.0)];
    }
    let pos = (r - r0) / dr;
    let j = (pos.floor().max(0.0) as usize).min(n - 2);
    let u = pos - j as f64;
    let (u2, u3) = (u * u, u * u * u);
    // Hermite basis (value, derivative) for p_j, m_j, p_{j+1}, m_{j+1}.
    let basis = [
        (2.0 * u3 - 3.0 * u2 + 1.0, (6.0 * u2 - 6.0 * u) / dr),
        (dr * (u3 - 2.0 * u2 + u), 3.0 * u2 - 4.0 * u + 1.0),
        (-2.0 * u3 + 3.0 * u2, (-6.0 * u2 + 6.0 * u) / dr),
        (dr * (u3 - u2), 3.0 * u2 - 2.0 * u),
    ];
    let tangent = |i: usize| -> [(usize, f64); 2] {
        if i == 0 {
            [(1, 1.0 / dr), (0, -1.0 / dr)]
        } else if i == n - 1 {
            [(n - 1, 1.0 / dr), (n - 2, -1.0 / dr)]
        } else {
            [(i + 1, 0.5 / dr), (i - 1, -0.5 / dr)]
        }
    };
    let mut out: Vec<(usize, f64, f64)> = Vec::with_capacity(4);
    let mut add = |idx: usize, wv: f64, wd: f64| {
        if let Some(e) = out.iter_mut().find(|e| e.0 == idx) {
            e.1 += wv;
            e.2 += wd;
        } else {
            out.push((idx, wv, wd));
        }
    };
    add(j, basis[0].0, basis[0].1);
    add(j + 1, basis[2].0, basis[2].1);
    for (node, b) in [(j, basis[1]), (j + 1, basis[3])] {
        for (idx, w) in tangent(node) {
            add(idx, b.0 * w, b.1 * w);
        }
    }
    out
}

/// Catmull-Rom value and `r`-derivative of uniformly sampled data.
pub fn catmull_rom<T: Blend>(samples: &[T], r0: f64, dr: f64, r: f64) -> (T, T) {
    let w = catmull_rom_weights(samples.len(), r0, dr, r);
    let value: Vec<(f64, &T)> = w.iter().map(|&(i, v, _)| (v, &samples[i])).collect();
    let deriv: Vec<(f64, &T)> = w.iter().map(|&(i, _, d)| (d, &samples[i])).collect();
    (combine(&value), combine(&deriv))
}

/// Second-order accurate derivative in `t`, one-sided at the ends of `[0, t_final]`.
pub fn time_derivative<T: Blend, F: Fn(f64) -> crate::Result<T>>(f: F, t: f64, h: f64, t_final: f64) -> crate::Result<T> {
    if t - h < 0.0 {
        let (f0, f1, f2) = (f(t)?, f(t + h)?, f(t + 2.0 * h)?);
        Ok(combine(&[(-1.5 / h, &f0), (2.0 / h, &f1), (-0.5 / h, &f2)]))
    } else if t + h > t_final {
        let (f0, f1, f2) = (f(t)?, f(t - h)?, f(t - 2.0 * h)?);
        Ok(combine(&[(1.5 / h, &f0), (-2.0 / h, &f1), (0.5 / h, &f2)]))
    } else {
        let (fp, fm) = (f(t + h)?, f(t - h)?);
        Ok(combine(&[(0.5 / h, &fp), (-0.5 / h, &fm)]))
    }
}

/// Relative deviation of `m` from being Hermitian.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let scale = m.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev / scale
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(C64::from)
}

pub fn real_vec(v: &[f64]) -> RVector {
    RVector::from_column_slice(v)
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_sym_eigenvalue(m: &RMatrix) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.min()
}

/// Orthonormal basis of the orthogonal complement of the column span of `tangents`.
pub fn normal_complement(tangents: &RMatrix) -> RMatrix {
    let d = tangents.nrows();
    let k = tangents.ncols();
    let mut basis: Vec<RVector> = Vec::with_capacity(d);
    let push = |v: RVector, basis: &mut Vec<RVector>| -> bool {
        let mut w = v;
        for _ in 0..2 {
            for b in basis.iter() {
                let c = b.dot(&w);
                w -= b * c;
            }
        }
        let n = w.norm();
        if n > 1e-8 {
            basis.push(w / n);
            true
        } else {
            false
        }
    };
    for c in 0..k {
        push(tangents.column(c).into_owned(), &mut basis);
    }
    let n_tan = basis.len();
    if d == 2 && k == 1 {
        // Keep the rotated tangent orientation so neighbouring samples agree.
        let t = &basis[0];
        return RMatrix::from_column_slice(2, 1, &[-t[1], t[0]]);
    }
    for i in 0..d {
        let mut e = RVector::zeros(d);
        e[i] = 1.0;
        push(e, &mut basis);
        if basis.len() == d {
            break;
        }
    }
    let cols: Vec<RVector> = basis[n_tan..].to_vec();
    RMatrix::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hermite_reproduces_cubic() {
        let grid = TimeGrid::new(1.0, 10);
        let f = |t: f64| t * t * t - 2.0 * t + 0.5;
        let df = |t: f64| 3.0 * t * t - 2.0;
        let vals = (0..grid.len()).map(|k| f(grid.time(k))).collect();
        let ders = (0..grid.len()).map(|k| df(grid.time(k))).collect();
        let s = HermiteSeries::new(grid, vals, ders);
        for &t in &[0.0, 0.033, 0.5, 0.77, 1.0] {
            assert_abs_diff_eq!(s.eval(t), f(t), epsilon = 1e-13);
            assert_abs_diff_eq!(s.deriv(t), df(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn catmull_rom_exact_on_linear_data() {
        let samples: Vec<f64> = (0..6).map(|j| 2.0 + 0.5 * j as f64 * 0.1).collect();
        let (v, d) = catmull_rom(&samples, 0.0, 0.1, 0.234);
        assert_abs_diff_eq!(v, 2.0 + 0.5 * 0.234, epsilon = 1e-14);
        assert_abs_diff_eq!(d, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn catmull_rom_interpolates_nodes_with_centered_tangents() {
        let samples: Vec<f64> = (0..7).map(|j| (0.3 * j as f64).sin()).collect();
        for j in 0..7 {
            let (v, d) = catmull_rom(&samples, 1.0, 0.3, 1.0 + 0.3 * j as f64);
            assert_abs_diff_eq!(v, samples[j], epsilon = 1e-14);
            let expect = if j == 0 {
                (samples[1] - samples[0]) / 0.3
            } else if j == 6 {
                (samples[6] - samples[5]) / 0.3
            } else {
                (samples[j + 1] - samples[j - 1]) / 0.6
            };
            assert_abs_diff_eq!(d, expect, epsilon = 1e-12);
        }
        let (v, _) = catmull_rom(&samples, 1.0, 0.3, 1.0 + 0.3 * 2.5);
        assert_abs_diff_eq!(v, 0.75f64.sin(), epsilon = 2e-3);
    }

    #[test]
    fn normal_complement_is_orthonormal() {
        let t = RMatrix::from_column_slice(3, 1, &[1.0, 2.0, -0.5]);
        let n = normal_complement(&t);
        assert_eq!(n.ncols(), 2);
        let g = n.transpose() * &n;
        assert_abs_diff_eq!((g - RMatrix::identity(2, 2)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((t.transpose() * n).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn hermitian_deviation_detects_asymmetry() {
        let m = CMatrix::from_row_slice(2, 2, &[C64::from(0.0), C64::from(1.0), C64::from(0.5), C64::from(0.0)]);
        assert!(hermitian_deviation(&m) > 0.4);
    }
}
