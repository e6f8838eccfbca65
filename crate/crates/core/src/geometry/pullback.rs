//! Symbol pulled back to beam coordinates.
//!
//! With `ξ = J⁻ᵀη` and `η = (ρ, σ)` dual to `(r, s)`:
//! `Λ(t,r,s,η) = λ(t, x(s), ξ) − ⟨ξ, ∂_t x(s)⟩`.
//! First derivatives are exact; `Λ_ss` and `Λ_sη` are central differences in `s`.

use super::chart::{BasePoint, Tube};
use super::ray::spatial_gradient;
use crate::error::{CgoError, Result};
use crate::linalg::{RMatrix, RVector};
use crate::system::{Order, SymbolAt, SystemSpec};

/// Step of the `s` differences.
pub const PULLBACK_STEP: f64 = 1e-4;

/// `Λ` with first derivatives and its exact `η` Hessian at one point.
#[derive(Debug, Clone)]
pub struct PullbackFirst {
    pub value: f64,
    pub d_s: RVector,
    pub d_eta: RVector,
    pub eta_eta: RMatrix,
}

/// Second-order jet of `Λ` at `s = 0` and the ray covector.
#[derive(Debug, Clone)]
pub struct PullbackJet {
    pub eta: RVector,
    pub first: PullbackFirst,
    /// `Λ_{s_i s_j}`.
    pub ss: RMatrix,
    /// `Λ_{s_i η_k}`.
    pub s_eta: RMatrix,
}

/// `Λ` itself.
pub fn pullback_value(spec: &SystemSpec, tube: &Tube, t: f64, r: f64, s: &RVector, eta: &RVector) -> Result<f64> {
    let cp = tube.chart_point(t, r, s);
    let jinv = cp.jac.clone().try_inverse().ok_or(CgoError::SingularJacobian { cond: f64::INFINITY })?;
    let xi = jinv.transpose() * eta;
    let sym = SymbolAt::new(spec, t, cp.x.as_slice())?;
    let (modes, _) = sym.decompose(xi.as_slice(), Order::Zero)?;
    let count = modes.len();
    let mode = modes.get(tube.mode).ok_or(CgoError::ModeIndex { mode: tube.mode, count })?;
    Ok(mode.lambda - xi.dot(&cp.dt_x))
}

pub fn pullback_first(spec: &SystemSpec, tube: &Tube, b: &BasePoint, t: f64, s: &RVector, eta: &RVector) -> Result<PullbackFirst> {
    let d = tube.dim;
    let d1 = tube.d1;
    let cp = tube.chart_point_from(b, s);
    let jinv = cp.jac.clone().try_inverse().ok_or(CgoError::SingularJacobian { cond: f64::INFINITY })?;
    let k = jinv.transpose();
    let xi = &k * eta;
    let sym = SymbolAt::new(spec, t, cp.x.as_slice())?;
    let (modes, _) = sym.decompose(xi.as_slice(), Order::One)?;
    let count = modes.len();
    let mode = modes.get(tube.mode).ok_or(CgoError::ModeIndex { mode: tube.mode, count })?;
    let dxi_lambda = RVector::from_column_slice(&mode.grad);
    let dx_lambda = RVector::from_vec(spatial_gradient(spec, t, cp.x.as_slice(), xi.as_slice(), &mode.projector, mode.multiplicity));
    let rel_velocity = &dxi_lambda - &cp.dt_x;

    let mut d_s = RVector::zeros(tube.d2());
    for i in 0..tube.d2() {
        let mut dxi = RVector::zeros(d);
        if let Some(dr_e) = &b.dr_e {
            // ∂_{s_i} J has the single column ∂_r e_i in the r slot.
            let mut dj = RMatrix::zeros(d, d);
            dj.set_column(0, &dr_e.column(i));
            dxi = -(&k * dj.transpose() * &k) * eta;
        }
        d_s[i] = dx_lambda.dot(&b.e.column(i)) + rel_velocity.dot(&dxi) - xi.dot(&b.dt_e.column(i));
    }
    debug_assert!(d1 <= 1);
    Ok(PullbackFirst {
        value: mode.lambda - xi.dot(&cp.dt_x),
        d_s,
        d_eta: &jinv * rel_velocity,
        eta_eta: &jinv * &mode.hess * jinv.transpose(),
    })
}

/// Jet of `Λ` at `(t, r, s = 0)` with `η = Jᵀξ` for the interpolated ray covector.
pub fn pullback_jet(spec: &SystemSpec, tube: &Tube, t: f64, r: f64) -> Result<PullbackJet> {
    let b = tube.base(t, r);
    let d2 = tube.d2();
    let zero = RVector::zeros(d2);
    let jac = tube.chart_point_from(&b, &zero).jac;
    let eta = jac.transpose() * &b.xi;
    let first = pullback_first(spec, tube, &b, t, &zero, &eta)?;
    let h = PULLBACK_STEP;
    let mut ss = RMatrix::zeros(d2, d2);
    let mut s_eta = RMatrix::zeros(d2, tube.dim);
    for i in 0..d2 {
        let mut sp = zero.clone();
        sp[i] = h;
        let plus = pullback_first(spec, tube, &b, t, &sp, &eta)?;
        let minus = pullback_first(spec, tube, &b, t, &(-sp), &eta)?;
        let dds = (plus.d_s - minus.d_s) / (2.0 * h);
        ss.set_column(i, &dds);
        let dde = (plus.d_eta - minus.d_eta) / (2.0 * h);
        s_eta.set_row(i, &dde.transpose());
    }
    let ss = (&ss + ss.transpose()) * 0.5;
    Ok(PullbackJet { eta, first, ss, s_eta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::chart::flow_out;
    use crate::geometry::initial::{Component, ConstantAmplitude, InitialPhase, PolynomialPhase, ReferenceSet};
    use crate::linalg::{CMatrix, CVector, TimeGrid, C64};
    use crate::system::Domain;
    use std::sync::Arc;

    fn domain(d: usize, t_final: f64) -> Domain {
        Domain {
            center: vec![0.0; d],
            radius: 4.0,
            t_final,
            speed: 1.3,
        }
    }

    fn sheet_tube() -> (SystemSpec, Tube) {
        let spec = SystemSpec::builtin("acoustics3", domain(2, 1.0)).unwrap();
        let c = Component {
            mode: 2,
            reference: ReferenceSet::segment(&[0.0, 0.0], &[1.0, 0.0], 1.0, 11).unwrap(),
            phase: Arc::new(PolynomialPhase {
                x0: vec![0.0, 0.0],
                value: 0.0,
                k: vec![1.0, 0.0],
                hessian: CMatrix::from_row_slice(2, 2, &[C64::from(0.0), C64::from(0.0), C64::from(0.0), C64::new(0.0, 1.0)]),
                cubic: vec![0.0, 0.0],
            }),
            amplitude: Arc::new(ConstantAmplitude(CVector::zeros(3))),
        };
        let tube = flow_out(&spec, &c, TimeGrid::new(1.0, 100), 0.5).unwrap();
        (spec, tube)
    }

    struct Inward;
    impl InitialPhase for Inward {
        fn value(&self, x: &[f64]) -> C64 {
            C64::from(-(x[0] * x[0] + x[1] * x[1]).sqrt())
        }
        fn gradient(&self, x: &[f64]) -> Vec<C64> {
            let n = (x[0] * x[0] + x[1] * x[1]).sqrt();
            vec![C64::from(-x[0] / n), C64::from(-x[1] / n)]
        }
        fn hessian(&self, _x: &[f64]) -> CMatrix {
            CMatrix::identity(2, 2) * C64::new(0.0, 1.0)
        }
    }

    fn arc_tube() -> (SystemSpec, Tube) {
        let spec = SystemSpec::builtin("acoustics3", domain(2, 0.5)).unwrap();
        let n = 21;
        let (r0, dr) = (-0.5, 0.05);
        let points = (0..n).map(|j| vec![(r0 + j as f64 * dr).cos(), (r0 + j as f64 * dr).sin()]).collect();
        let c = Component {
            mode: 2,
            reference: ReferenceSet::Curve { r0, dr, points },
            phase: Arc::new(Inward),
            amplitude: Arc::new(ConstantAmplitude(CVector::zeros(3))),
        };
        let tube = flow_out(&spec, &c, TimeGrid::new(0.5, 500), 0.2).unwrap();
        (spec, tube)
    }

    /// Full second differences of `Λ` in `(s, η)`, independent of the semi-analytic route.
    fn fd_hessian(spec: &SystemSpec, tube: &Tube, t: f64, r: f64, eta: &RVector) -> RMatrix {
        let d2 = tube.d2();
        let n = d2 + tube.dim;
        let f = |v: &RVector| {
            let s = v.rows(0, d2).into_owned();
            let e = v.rows(d2, tube.dim).into_owned();
            pullback_value(spec, tube, t, r, &s, &e).unwrap()
        };
        let mut base = RVector::zeros(n);
        base.rows_mut(d2, tube.dim).copy_from(eta);
        let h = 1e-3;
        let mut hess = RMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut v = base.clone();
                let mut g = |di: f64, dj: f64| {
                    v.copy_from(&base);
                    v[i] += di;
                    v[j] += dj;
                    f(&v)
                };
                hess[(i, j)] = (g(h, h) - g(h, -h) - g(-h, h) + g(-h, -h)) / (4.0 * h * h);
            }
        }
        hess
    }

    #[test]
    fn sheet_beam_coefficients() {
        let (spec, tube) = sheet_tube();
        for &(t, r) in &[(0.0, 0.0), (0.5, 0.3), (1.0, -0.2)] {
            let jet = pullback_jet(&spec, &tube, t, r).unwrap();
            assert!(jet.first.d_eta.norm() < 1e-12);
            assert!(jet.ss.norm() < 1e-9);
            assert!(jet.s_eta.norm() < 1e-9);
            assert!((jet.first.eta_eta[(1, 1)] - 1.0).abs() < 1e-12);
            assert!(jet.first.eta_eta[(0, 0)].abs() < 1e-12);
        }
    }

    #[test]
    fn constant_advection_pullback_vanishes() {
        let spec = SystemSpec::builtin("advection", domain(1, 1.0)).unwrap();
        let c = Component {
            mode: 0,
            reference: ReferenceSet::Point(vec![0.0]),
            phase: Arc::new(PolynomialPhase {
                x0: vec![0.0],
                value: 0.0,
                k: vec![1.0],
                hessian: CMatrix::from_element(1, 1, C64::new(0.0, 1.0)),
                cubic: vec![0.0],
            }),
            amplitude: Arc::new(ConstantAmplitude(CVector::from_element(1, C64::from(1.0)))),
        };
        let tube = flow_out(&spec, &c, TimeGrid::new(1.0, 50), 1.0).unwrap();
        let jet = pullback_jet(&spec, &tube, 0.4, 0.0).unwrap();
        assert_eq!(jet.first.value, 0.0);
        assert_eq!(jet.first.d_eta.norm(), 0.0);
        assert_eq!(jet.ss.norm(), 0.0);
        assert_eq!(jet.s_eta.norm(), 0.0);
        assert_eq!(jet.first.eta_eta.norm(), 0.0);
    }

    #[test]
    fn variable_advection_matches_full_differences() {
        let spec = SystemSpec::builtin("variable_advection", domain(1, 1.0)).unwrap();
        let c = Component {
            mode: 0,
            reference: ReferenceSet::Point(vec![0.2]),
            phase: Arc::new(PolynomialPhase {
                x0: vec![0.2],
                value: 0.0,
                k: vec![1.0],
                hessian: CMatrix::from_element(1, 1, C64::new(0.0, 1.0)),
                cubic: vec![0.0],
            }),
            amplitude: Arc::new(ConstantAmplitude(CVector::from_element(1, C64::from(1.0)))),
        };
        let tube = flow_out(&spec, &c, TimeGrid::new(1.0, 200), 1.0).unwrap();
        let jet = pullback_jet(&spec, &tube, 0.6, 0.0).unwrap();
        let fd = fd_hessian(&spec, &tube, 0.6, 0.0, &jet.eta);
        assert!((jet.ss[(0, 0)] - fd[(0, 0)]).abs() < 1e-6, "{} vs {}", jet.ss, fd);
        assert!((jet.s_eta[(0, 0)] - fd[(0, 1)]).abs() < 1e-6);
        assert!((jet.first.eta_eta[(0, 0)] - fd[(1, 1)]).abs() < 1e-6);
        assert!(jet.ss[(0, 0)].abs() > 1e-3);
    }

    #[test]
    fn curved_tube_matches_full_differences() {
        let (spec, tube) = arc_tube();
        for &(t, j) in &[(0.1, 4usize), (0.35, 12)] {
            let r = tube.r_node(j);
            let jet = pullback_jet(&spec, &tube, t, r).unwrap();
            // Rays are characteristics of the pulled-back symbol.
            assert!(jet.first.d_eta.norm() < 1e-5);
            let fd = fd_hessian(&spec, &tube, t, r, &jet.eta);
            assert!((jet.ss[(0, 0)] - fd[(0, 0)]).abs() < 1e-5, "ss {} vs {}", jet.ss, fd);
            for k in 0..2 {
                assert!((jet.s_eta[(0, k)] - fd[(0, 1 + k)]).abs() < 1e-5, "s_eta {} vs {}", jet.s_eta, fd);
                for m in 0..2 {
                    assert!((jet.first.eta_eta[(k, m)] - fd[(1 + k, 1 + m)]).abs() < 1e-5);
                }
            }
        }
    }
}
