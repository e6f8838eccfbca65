//! Bicharacteristics `dx/dt = ∂_ξλ`, `dξ/dt = −∂_xλ` integrated with classical RK4.

use crate::error::{CgoError, Result};
use crate::linalg::{CMatrix, HermiteSeries, RVector, TimeGrid, C64};
use crate::system::{dist, Order, SymbolAt, SystemSpec};

/// Admissible region for a ray.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayBounds {
    /// The shrinking cone `|x − x̄| <= ρ − ct`.
    Cone,
    Unbounded,
}

/// Hamiltonian trajectory of one mode sampled on a uniform time grid.
#[derive(Debug, Clone)]
pub struct RayPath {
    pub mode: usize,
    pub x: HermiteSeries<RVector>,
    pub xi: HermiteSeries<RVector>,
}

impl RayPath {
    pub fn grid(&self) -> TimeGrid {
        self.x.grid
    }

    pub fn position(&self, t: f64) -> RVector {
        self.x.eval(t)
    }

    pub fn covector(&self, t: f64) -> RVector {
        self.xi.eval(t)
    }

    /// Group velocity `∂_ξλ` (exact at nodes, interpolated between).
    pub fn velocity(&self, t: f64) -> RVector {
        self.x.deriv(t)
    }

    /// Largest relative change of `|ξ|` along the path.
    pub fn covector_variation(&self) -> f64 {
        let n0 = self.xi.values[0].norm();
        self.xi.values.iter().map(|v| (v.norm() - n0).abs() / n0).fold(0.0, f64::max)
    }
}

/// `∂_xλ_l` by Hellmann–Feynman: `tr(π Σ_j ξ_j ∂_k A_j)/m`.
pub fn spatial_gradient(spec: &SystemSpec, t: f64, x: &[f64], xi: &[f64], projector: &CMatrix, mult: usize) -> Vec<f64> {
    (0..spec.dim)
        .map(|k| {
            let mut acc = C64::from(0.0);
            for (j, &xj) in xi.iter().enumerate() {
                if xj != 0.0 {
                    acc += (projector * spec.dx_a(t, x, j, k)).trace() * xj;
                }
            }
            acc.re / mult as f64
        })
        .collect()
}

/// Right-hand side of Hamilton's equations for mode `l`.
pub fn hamilton_rhs(spec: &SystemSpec, l: usize, t: f64, x: &[f64], xi: &[f64]) -> Result<(RVector, RVector)> {
    let sym = SymbolAt::new(spec, t, x)?;
    let (modes, _) = sym.decompose(xi, Order::One)?;
    let count = modes.len();
    let mode = modes.get(l).ok_or(CgoError::ModeIndex { mode: l, count })?;
    let dx = RVector::from_column_slice(&mode.grad);
    let dxi = -RVector::from_vec(spatial_gradient(spec, t, x, xi, &mode.projector, mode.multiplicity));
    Ok((dx, dxi))
}

pub fn trace_ray(spec: &SystemSpec, l: usize, x0: &[f64], xi0: &[f64], grid: TimeGrid, bounds: RayBounds) -> Result<RayPath> {
    if xi0.iter().all(|v| *v == 0.0) {
        return Err(CgoError::Config("initial covector must be nonzero".into()));
    }
    let check = |t: f64, x: &RVector| -> Result<()> {
        if bounds == RayBounds::Cone && dist(x.as_slice(), &spec.domain.center) > spec.domain.radius_at(t) + 1e-12 {
            return Err(CgoError::DomainExit {
                t,
                x: x.iter().copied().collect(),
            });
        }
        Ok(())
    };
    let rhs = |t: f64, x: &RVector, xi: &RVector| hamilton_rhs(spec, l, t, x.as_slice(), xi.as_slice());

    let mut xs = Vec::with_capacity(grid.len());
    let mut xis = Vec::with_capacity(grid.len());
    let mut dxs = Vec::with_capacity(grid.len());
    let mut dxis = Vec::with_capacity(grid.len());
    let mut x = RVector::from_column_slice(x0);
    let mut xi = RVector::from_column_slice(xi0);
    let h = grid.dt;
    for k in 0..grid.len() {
        let t = grid.time(k);
        check(t, &x)?;
        let (k1x, k1p) = rhs(t, &x, &xi)?;
        xs.push(x.clone());
        xis.push(xi.clone());
        dxs.push(k1x.clone());
        dxis.push(k1p.clone());
        if k + 1 == grid.len() {
            break;
        }
        let (k2x, k2p) = rhs(t + 0.5 * h, &(&x + &k1x * (0.5 * h)), &(&xi + &k1p * (0.5 * h)))?;
        let (k3x, k3p) = rhs(t + 0.5 * h, &(&x + &k2x * (0.5 * h)), &(&xi + &k2p * (0.5 * h)))?;
        let (k4x, k4p) = rhs(t + h, &(&x + &k3x * h), &(&xi + &k3p * h))?;
        x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        xi += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
        if xi.norm() == 0.0 || !xi.iter().all(|v| v.is_finite()) {
            return Err(CgoError::BlowUp { t: t + h });
        }
    }
    Ok(RayPath {
        mode: l,
        x: HermiteSeries::new(grid, xs, dxs),
        xi: HermiteSeries::new(grid, xis, dxis),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Domain;
    use approx::assert_abs_diff_eq;

    fn domain(d: usize, radius: f64) -> Domain {
        Domain {
            center: vec![0.0; d],
            radius,
            t_final: 1.0,
            speed: 1.3,
        }
    }

    #[test]
    fn advection_ray_is_straight() {
        let spec = SystemSpec::builtin("advection", domain(1, 3.0)).unwrap();
        let ray = trace_ray(&spec, 0, &[0.0], &[1.0], TimeGrid::new(1.0, 100), RayBounds::Cone).unwrap();
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            assert_abs_diff_eq!(ray.x.values[k][0], t, epsilon = 1e-13);
            assert_abs_diff_eq!(ray.xi.values[k][0], 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn acoustics_outgoing_ray() {
        let spec = SystemSpec::builtin("acoustics3", domain(2, 3.0)).unwrap();
        let ray = trace_ray(&spec, 2, &[0.0, 0.0], &[1.0, 0.0], TimeGrid::new(1.0, 50), RayBounds::Cone).unwrap();
        let end = ray.position(1.0);
        assert_abs_diff_eq!(end[0], 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(end[1], 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(ray.covector(0.5)[0], 1.0, epsilon = 1e-13);
    }

    #[test]
    fn variable_advection_matches_refined_oracle() {
        let spec = SystemSpec::builtin("variable_advection", domain(1, 4.0)).unwrap();
        let coarse = trace_ray(&spec, 0, &[0.3], &[1.0], TimeGrid::new(1.0, 200), RayBounds::Cone).unwrap();
        let fine = trace_ray(&spec, 0, &[0.3], &[1.0], TimeGrid::new(1.0, 3200), RayBounds::Cone).unwrap();
        assert!((coarse.position(1.0)[0] - fine.position(1.0)[0]).abs() <= 1e-8);
        assert!((coarse.covector(1.0)[0] - fine.covector(1.0)[0]).abs() <= 1e-8);
        // The Hamiltonian c(x)ξ is conserved along the ray.
        let c = |x: f64| 1.0 + 0.3 * x.sin();
        let inv0 = c(0.3);
        let inv1 = c(fine.position(1.0)[0]) * fine.covector(1.0)[0];
        assert_abs_diff_eq!(inv0, inv1, epsilon = 1e-10);
    }

    #[test]
    fn leaving_the_cone_is_an_error() {
        let spec = SystemSpec::builtin("advection", Domain { center: vec![0.0], radius: 1.5, t_final: 1.0, speed: 1.0 }).unwrap();
        let err = trace_ray(&spec, 0, &[1.0], &[1.0], TimeGrid::new(1.0, 100), RayBounds::Cone).unwrap_err();
        assert!(matches!(err, CgoError::DomainExit { .. }));
        assert!(trace_ray(&spec, 0, &[1.0], &[1.0], TimeGrid::new(1.0, 100), RayBounds::Unbounded).is_ok());
    }
}
