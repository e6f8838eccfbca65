//! Taylor extension of real covector symbols to complex covectors `ζ = ξ + iη`.
//!
//! For a smooth `f(ξ)` the order-2 extension is
//! `f̃(ξ+iη) = f(ξ) + i⟨∂f, η⟩ − ½⟨η, ∂²f η⟩`.  It is applied to eigenvalues and,
//! entrywise, to spectral projectors.  The extension is linear in `f`, so the
//! extended projectors still resolve the identity exactly.

use serde::{Deserialize, Serialize};

use crate::error::{CgoError, Result};
use crate::linalg::{CMatrix, RMatrix, C64, I};
use crate::system::{Order, SymbolAt, SystemSpec};

/// `ζ = ξ + iη` with `ξ ≠ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexCovector {
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
}

impl ComplexCovector {
    pub fn new(xi: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        if xi.len() != eta.len() {
            return Err(CgoError::Config("real and imaginary covector parts differ in length".into()));
        }
        if xi.iter().all(|v| *v == 0.0) {
            return Err(CgoError::Config("real covector part must be nonzero".into()));
        }
        Ok(Self { xi, eta })
    }

    pub fn real(xi: Vec<f64>) -> Result<Self> {
        let eta = vec![0.0; xi.len()];
        Self::new(xi, eta)
    }

    pub fn from_complex(z: &[C64]) -> Result<Self> {
        Self::new(z.iter().map(|c| c.re).collect(), z.iter().map(|c| c.im).collect())
    }

    pub fn zeta(&self) -> Vec<C64> {
        self.xi.iter().zip(&self.eta).map(|(&a, &b)| C64::new(a, b)).collect()
    }

    pub fn is_real(&self) -> bool {
        self.eta.iter().all(|v| *v == 0.0)
    }
}

/// Extension of a scalar jet; `order` is 1 or 2.
pub fn extend_scalar_order(order: usize, value: f64, grad: &[f64], hess: &RMatrix, eta: &[f64]) -> C64 {
    let mut out = C64::from(value);
    let first: f64 = grad.iter().zip(eta).map(|(g, e)| g * e).sum();
    out += I * first;
    if order >= 2 {
        let mut second = 0.0;
        for (j, ej) in eta.iter().enumerate() {
            for (k, ek) in eta.iter().enumerate() {
                second += hess[(j, k)] * ej * ek;
            }
        }
        out -= C64::from(0.5 * second);
    }
    out
}

/// `f + i⟨∂f,η⟩ − ½⟨η,∂²f η⟩`.
pub fn extend_scalar(value: f64, grad: &[f64], hess: &RMatrix, eta: &[f64]) -> C64 {
    extend_scalar_order(2, value, grad, hess, eta)
}

/// Entrywise extension of a matrix-valued jet; `order` is 1 or 2.
pub fn extend_matrix(order: usize, value: &CMatrix, grad: &[CMatrix], hess: &[Vec<CMatrix>], eta: &[f64]) -> CMatrix {
    let mut out = value.clone();
    for (g, &e) in grad.iter().zip(eta) {
        if e != 0.0 {
            out += g * (I * e);
        }
    }
    if order >= 2 {
        for (j, &ej) in eta.iter().enumerate() {
            for (k, &ek) in eta.iter().enumerate() {
                let w = ej * ek;
                if w != 0.0 {
                    out -= &hess[j][k] * C64::from(0.5 * w);
                }
            }
        }
    }
    out
}

/// Extended eigenvalue and projector of one mode.
#[derive(Debug, Clone)]
pub struct ExtendedMode {
    pub lambda: C64,
    pub projector: CMatrix,
}

/// Extended eigenvalues and projectors of all modes at a frozen `(t, x)`.
pub fn extended_modes_at(sym: &SymbolAt, zeta: &ComplexCovector) -> Result<Vec<ExtendedMode>> {
    if zeta.is_real() {
        let (modes, _) = sym.decompose(&zeta.xi, Order::Zero)?;
        return Ok(modes
            .into_iter()
            .map(|m| ExtendedMode {
                lambda: C64::from(m.lambda),
                projector: m.projector,
            })
            .collect());
    }
    let (modes, _) = sym.decompose(&zeta.xi, Order::Two)?;
    Ok(modes
        .iter()
        .map(|m| ExtendedMode {
            lambda: extend_scalar(m.lambda, &m.grad, &m.hess, &zeta.eta),
            projector: extend_matrix(2, &m.projector, &m.dproj, &m.d2proj, &zeta.eta),
        })
        .collect())
}

pub fn extended_mode(spec: &SystemSpec, t: f64, x: &[f64], zeta: &ComplexCovector, l: usize) -> Result<ExtendedMode> {
    let sym = SymbolAt::new(spec, t, x)?;
    let mut modes = extended_modes_at(&sym, zeta)?;
    let count = modes.len();
    if l >= count {
        return Err(CgoError::ModeIndex { mode: l, count });
    }
    Ok(modes.swap_remove(l))
}

/// `∂_t φ + λ̃_l(t, x, d_x φ)`.
pub fn eikonal_defect(spec: &SystemSpec, l: usize, dt_phi: C64, dx_phi: &ComplexCovector, t: f64, x: &[f64]) -> Result<C64> {
    Ok(dt_phi + extended_mode(spec, t, x, dx_phi, l)?.lambda)
}

/// Phase data at one point of a beam tube.
#[derive(Debug, Clone)]
pub struct TubeSample {
    pub s_norm: f64,
    pub t: f64,
    pub x: Vec<f64>,
    pub dt_phi: C64,
    pub dx_phi: ComplexCovector,
}

/// Lower bound `c` of `|∂_t φ + λ̃_{mode}|` over the tube `|s| <= radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub mode: usize,
    pub bound: f64,
    pub radius: f64,
}

/// Smallest bound accepted as a separation.
pub const SEPARATION_FLOOR: f64 = 1e-6;

/// Sampled separation bounds of every competitor `l' ≠ l`, shrinking the tube radius
/// from `s_max` until the bound is positive.
pub fn mode_separation(spec: &SystemSpec, samples: &[TubeSample], l: usize, s_max: f64) -> Result<Vec<Separation>> {
    // defects[i][l'] = |∂_t φ + λ̃_{l'}| at sample i
    let mut defects: Vec<(f64, Vec<f64>)> = Vec::with_capacity(samples.len());
    for s in samples {
        let sym = SymbolAt::new(spec, s.t, &s.x)?;
        let modes = extended_modes_at(&sym, &s.dx_phi)?;
        defects.push((s.s_norm, modes.iter().map(|m| (s.dt_phi + m.lambda).norm()).collect()));
    }
    let count = defects.first().map(|d| d.1.len()).unwrap_or(0);
    if count > 0 && l >= count {
        return Err(CgoError::ModeIndex { mode: l, count });
    }
    let mut out = Vec::new();
    for competitor in (0..count).filter(|&m| m != l) {
        let mut radius = s_max;
        let mut found = None;
        for _ in 0..30 {
            let bound = defects
                .iter()
                .filter(|d| d.0 <= radius)
                .map(|d| d.1[competitor])
                .fold(f64::INFINITY, f64::min);
            if bound.is_finite() && bound > SEPARATION_FLOOR {
                found = Some(bound);
                break;
            }
            radius *= 0.5;
        }
        match found {
            Some(bound) => out.push(Separation {
                mode: competitor,
                bound,
                radius,
            }),
            None => return Err(CgoError::SeparationFailure { mode: competitor }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::system::Domain;
    use crate::verify::rate::fit_rate;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn domain(d: usize) -> Domain {
        Domain {
            center: vec![0.0; d],
            radius: 3.0,
            t_final: 1.0,
            speed: 1.0,
        }
    }

    #[test]
    fn scalar_extension_examples() {
        // |ξ| at ξ = (1,0): gradient (1,0), Hessian diag(0,1).
        let h = RMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let transverse = extend_scalar(1.0, &[1.0, 0.0], &h, &[0.0, 0.1]);
        assert_abs_diff_eq!(transverse.re, 0.995, epsilon = 1e-15);
        assert_abs_diff_eq!(transverse.im, 0.0, epsilon = 1e-15);
        let longitudinal = extend_scalar(1.0, &[1.0, 0.0], &h, &[0.1, 0.0]);
        assert_abs_diff_eq!(longitudinal.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(longitudinal.im, 0.1, epsilon = 1e-15);
        assert_eq!(extend_scalar(2.5, &[1.0, 3.0], &h, &[0.0, 0.0]), C64::from(2.5));
    }

    #[test]
    fn linear_symbol_extends_exactly() {
        let spec = SystemSpec::builtin("advection", domain(1)).unwrap();
        let zeta = ComplexCovector::new(vec![2.0], vec![0.3]).unwrap();
        let m = extended_mode(&spec, 0.0, &[0.0], &zeta, 0).unwrap();
        assert_abs_diff_eq!(m.lambda.re, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.lambda.im, 0.3, epsilon = 1e-14);
    }

    #[test]
    fn real_covector_reproduces_decomposition_bitwise() {
        let spec = SystemSpec::builtin("acoustics3", domain(2)).unwrap();
        let xi = vec![0.3, -1.2];
        let dec = crate::system::eigen_decompose(&spec, 0.0, &[0.1, 0.2], &xi, Order::Two).unwrap();
        for l in 0..3 {
            let m = extended_mode(&spec, 0.0, &[0.1, 0.2], &ComplexCovector::real(xi.clone()).unwrap(), l).unwrap();
            assert_eq!(m.lambda, C64::from(dec.modes[l].lambda));
            assert_eq!(m.projector, dec.modes[l].projector);
        }
    }

    #[test]
    fn plane_wave_and_advected_gaussian_have_zero_defect() {
        let spec = SystemSpec::builtin("wave2x2", domain(1)).unwrap();
        let d = eikonal_defect(&spec, 1, C64::from(-1.0), &ComplexCovector::real(vec![1.0]).unwrap(), 0.2, &[0.3]).unwrap();
        assert_eq!(d, C64::from(0.0));

        let adv = SystemSpec::builtin("advection", domain(1)).unwrap();
        for &(t, x) in &[(0.0, 0.4), (0.5, 1.3), (0.9, -0.2)] {
            let y: f64 = x - t;
            let dx = ComplexCovector::new(vec![1.0], vec![y]).unwrap();
            let dt = -C64::new(1.0, y);
            assert!(eikonal_defect(&adv, 0, dt, &dx, t, &[x]).unwrap().norm() < 1e-15);
        }
    }

    #[test]
    fn product_remainder_orders() {
        // f1 = |ξ|, f2 = ξ_0² + ξ_0 ξ_1, product jet by the Leibniz rule.
        let xi = [0.8, 0.6];
        let n = 1.0f64;
        let f1 = n;
        let g1 = [xi[0] / n, xi[1] / n];
        let h1 = RMatrix::from_fn(2, 2, |j, k| ((j == k) as u8 as f64 - xi[j] * xi[k]) / n);
        let f2 = xi[0] * xi[0] + xi[0] * xi[1];
        let g2 = [2.0 * xi[0] + xi[1], xi[0]];
        let h2 = RMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 0.0]);
        let f3 = f1 * f2;
        let g3 = [f1 * g2[0] + f2 * g1[0], f1 * g2[1] + f2 * g1[1]];
        let h3 = RMatrix::from_fn(2, 2, |j, k| f1 * h2[(j, k)] + g1[j] * g2[k] + g2[j] * g1[k] + f2 * h1[(j, k)]);
        for (order, expect) in [(1usize, 2.0), (2, 3.0)] {
            let scales = [1e-1, 1e-1 / 4.0, 1e-2, 1e-2 / 4.0, 1e-3];
            let errs: Vec<f64> = scales
                .iter()
                .map(|&s| {
                    let eta = [0.28 * s, 0.96 * s];
                    let lhs = extend_scalar_order(order, f1, &g1, &h1, &eta) * extend_scalar_order(order, f2, &g2, &h2, &eta);
                    (lhs - extend_scalar_order(order, f3, &g3, &h3, &eta)).norm()
                })
                .collect();
            let fit = fit_rate(&scales, &errs).unwrap();
            assert!((fit.slope - expect).abs() < 0.1, "order {order}: slope {}", fit.slope);
        }
    }

    #[test]
    fn wave2x2_separation_from_opposite_mode() {
        let spec = SystemSpec::builtin("wave2x2", domain(1)).unwrap();
        // Beam on λ = +1 with φ = (x − t) + i(x − t)²/2 at t = 0.
        let samples: Vec<TubeSample> = (-10..=10)
            .map(|k| {
                let s = 0.01 * k as f64;
                TubeSample {
                    s_norm: s.abs(),
                    t: 0.0,
                    x: vec![s],
                    dt_phi: -C64::new(1.0, s),
                    dx_phi: ComplexCovector::new(vec![1.0], vec![s]).unwrap(),
                }
            })
            .collect();
        let sep = mode_separation(&spec, &samples, 1, 0.1).unwrap();
        assert_eq!(sep.len(), 1);
        assert_eq!(sep[0].mode, 0);
        assert!(sep[0].bound >= 1.9);

        let adv = SystemSpec::builtin("advection", domain(1)).unwrap();
        assert!(mode_separation(&adv, &samples, 0, 0.1).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn extended_projectors_resolve_identity(
            x0 in -1.0f64..1.0, x1 in -1.0f64..1.0,
            a in 0.0f64..std::f64::consts::TAU,
            e0 in -0.5f64..0.5, e1 in -0.5f64..0.5,
        ) {
            let spec = SystemSpec::builtin("acoustics3", domain(2)).unwrap();
            let zeta = ComplexCovector::new(vec![a.cos(), a.sin()], vec![e0, e1]).unwrap();
            let sym = SymbolAt::new(&spec, 0.0, &[x0, x1]).unwrap();
            let modes = extended_modes_at(&sym, &zeta).unwrap();
            let mut sum = CMatrix::zeros(3, 3);
            for m in &modes {
                sum += &m.projector;
            }
            prop_assert!(max_abs(&(sum - CMatrix::identity(3, 3))) < 1e-12);
        }
    }
}
