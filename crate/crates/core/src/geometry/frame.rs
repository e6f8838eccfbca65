//! Orthonormal normal frames transported by `ė = [Γ̇, Γ] e`, `Γ = I − P_tan`.
//!
//! The generator `[Γ̇, Γ]` is antisymmetric, so `eᵀe` is conserved, and it maps
//! the normal space onto itself along the motion of the tangent space.

use crate::error::{CgoError, Result};
use crate::linalg::{HermiteSeries, RMatrix, TimeGrid};

/// Largest orthonormality deviation tolerated before the frame is rejected.
pub const FRAME_DRIFT_TOL: f64 = 1e-6;

/// `Γ = I − T(TᵀT)⁻¹Tᵀ` and its time derivative, given tangents `T` and `Ṫ` (columns).
pub fn normal_projector(t: &RMatrix, t_dot: &RMatrix) -> (RMatrix, RMatrix) {
    let d = t.nrows();
    if t.ncols() == 0 {
        return (RMatrix::identity(d, d), RMatrix::zeros(d, d));
    }
    let g = t.transpose() * t;
    let g_inv = g.try_inverse().expect("reference tangents are linearly independent");
    let g_dot = t_dot.transpose() * t + t.transpose() * t_dot;
    let p = t * &g_inv * t.transpose();
    let p_dot = t_dot * &g_inv * t.transpose() + t * &g_inv * t_dot.transpose() - t * &g_inv * g_dot * &g_inv * t.transpose();
    (RMatrix::identity(d, d) - p, -p_dot)
}

/// `max_ij |(EᵀE − I)_ij|`.
pub fn orthonormality_deviation(e: &RMatrix) -> f64 {
    let g = e.transpose() * e;
    let n = g.nrows();
    (g - RMatrix::identity(n, n)).iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Integrates the frame ODE with RK4; `gamma(t)` returns `(Γ, Γ̇)`.
///
/// Returns the frame path (values and derivatives) and the largest orthonormality deviation.
pub fn evolve_frame<F>(grid: TimeGrid, e0: &RMatrix, gamma: F) -> Result<(HermiteSeries<RMatrix>, f64)>
where
    F: Fn(f64) -> (RMatrix, RMatrix),
{
    let rhs = |t: f64, e: &RMatrix| {
        let (g, g_dot) = gamma(t);
        (&g_dot * &g - &g * &g_dot) * e
    };
    let h = grid.dt;
    let mut e = e0.clone();
    let mut values = Vec::with_capacity(grid.len());
    let mut derivs = Vec::with_capacity(grid.len());
    let mut worst: f64 = 0.0;
    for k in 0..grid.len() {
        let t = grid.time(k);
        let dev = orthonormality_deviation(&e);
        worst = worst.max(dev);
        if dev > FRAME_DRIFT_TOL {
            return Err(CgoError::FrameDrift { deviation: dev });
        }
        let k1 = rhs(t, &e);
        values.push(e.clone());
        derivs.push(k1.clone());
        if k + 1 == grid.len() {
            break;
        }
        let k2 = rhs(t + 0.5 * h, &(&e + &k1 * (0.5 * h)));
        let k3 = rhs(t + 0.5 * h, &(&e + &k2 * (0.5 * h)));
        let k4 = rhs(t + h, &(&e + &k3 * h));
        e += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok((HermiteSeries::new(grid, values, derivs), worst))
}

/// Constant frame for point reference sets: `e_i(t) = e_i(0)`.
pub fn constant_frame(grid: TimeGrid, e0: &RMatrix) -> HermiteSeries<RMatrix> {
    let zero = RMatrix::zeros(e0.nrows(), e0.ncols());
    HermiteSeries::new(grid, vec![e0.clone(); grid.len()], vec![zero; grid.len()])
}
