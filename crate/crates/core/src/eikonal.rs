//! Second-order complex phase along the reference manifold.
//!
//! In beam coordinates `φ(t,r,s) = φ₀(r) + Σ σ_i(t,r) s_i + ½ Σ Φ_ij(t,r) s_i s_j`
//! where `σ = Eᵀξ` and `Φ` solves the matrix Riccati equation
//! `Φ̇ = −(A + ΦB + BᵀΦ + ΦCΦ)`.

use rayon::prelude::*;

use crate::error::{CgoError, Result};
use crate::geometry::{pullback_jet, Component, PullbackJet, Tube};
use crate::linalg::{catmull_rom_weights, min_sym_eigenvalue, to_complex, CMatrix, CVector, HermiteSeries, RMatrix, RVector, TimeGrid, C64};
use crate::system::SystemSpec;

/// `min eig Im Φ` at or below this is a loss of positivity.
pub const POSITIVITY_FLOOR: f64 = 1e-12;
/// `‖Φ‖` above this is a blow-up.
pub const BLOWUP_NORM: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiCoefficients {
    pub a: RMatrix,
    pub b: RMatrix,
    pub c: RMatrix,
}

/// Riccati coefficients from the pulled-back jet.
///
/// `dr_sigma[(k, j)] = ∂_{r_k} σ_j`; the `η` layout is `(ρ, σ)`.
pub fn coefficients_from_jet(jet: &PullbackJet, d1: usize, dr_sigma: &RMatrix) -> RiccatiCoefficients {
    let d2 = jet.ss.nrows();
    let l_sr = jet.s_eta.columns(0, d1);
    let l_ss_sigma = jet.s_eta.columns(d1, d2);
    let l_rr = jet.first.eta_eta.view((0, 0), (d1, d1));
    let l_sigma_r = jet.first.eta_eta.view((d1, 0), (d2, d1));
    let l_sigma_sigma = jet.first.eta_eta.view((d1, d1), (d2, d2));
    let dphi = dr_sigma;
    let a = &jet.ss + l_sr * dphi + dphi.transpose() * l_sr.transpose() + dphi.transpose() * l_rr * dphi;
    let b = l_ss_sigma.transpose() + l_sigma_r * dphi;
    let c = l_sigma_sigma.into_owned();
    RiccatiCoefficients {
        a: (&a + a.transpose()) * 0.5,
        b,
        c: (&c + c.transpose()) * 0.5,
    }
}

/// `∂_r σ = (∂_r E)ᵀξ + Eᵀ∂_r ξ` as a `d₁ × d₂` matrix.
fn sigma_r_derivative(tube: &Tube, t: f64, r: f64) -> RMatrix {
    let b = tube.base(t, r);
    match &b.dr_e {
        Some(dr_e) => {
            let col = dr_e.transpose() * &b.xi + b.e.transpose() * b.dr_xi.column(0);
            RMatrix::from_row_slice(1, col.len(), col.as_slice())
        }
        None => RMatrix::zeros(0, tube.d2()),
    }
}

pub fn riccati_coefficients(spec: &SystemSpec, tube: &Tube, t: f64, r: f64) -> Result<RiccatiCoefficients> {
    let jet = pullback_jet(spec, tube, t, r)?;
    Ok(coefficients_from_jet(&jet, tube.d1, &sigma_r_derivative(tube, t, r)))
}

fn riccati_rhs(c: &RiccatiCoefficients, phi: &CMatrix) -> CMatrix {
    let a = to_complex(&c.a);
    let b = to_complex(&c.b);
    let cc = to_complex(&c.c);
    -(a + phi * &b + b.transpose() * phi + phi * cc * phi)
}

fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.transpose()) * C64::from(0.5)
}

fn min_im_eig(phi: &CMatrix) -> f64 {
    min_sym_eigenvalue(&phi.map(|v| v.im))
}

/// Riccati solution with the smallest `min eig Im Φ` seen.
#[derive(Debug, Clone)]
pub struct RiccatiPath {
    pub phi: HermiteSeries<CMatrix>,
    pub min_im_eig: f64,
}

/// RK4 for the Riccati equation; `coeffs(t)` is sampled at nodes and half steps.
pub fn solve_riccati<F>(grid: TimeGrid, phi0: &CMatrix, coeffs: F) -> Result<RiccatiPath>
where
    F: Fn(f64) -> Result<RiccatiCoefficients>,
{
    let h = grid.dt;
    let mut phi = symmetrize(phi0);
    let mut values = Vec::with_capacity(grid.len());
    let mut derivs = Vec::with_capacity(grid.len());
    let mut worst = f64::INFINITY;
    let mut c_start = coeffs(0.0)?;
    for k in 0..grid.len() {
        let t = grid.time(k);
        let m = min_im_eig(&phi);
        worst = worst.min(m);
        if m <= POSITIVITY_FLOOR {
            return Err(CgoError::PositivityLoss { t, min_eig: m });
        }
        if phi.norm() > BLOWUP_NORM || phi.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(CgoError::BlowUp { t });
        }
        let k1 = riccati_rhs(&c_start, &phi);
        values.push(phi.clone());
        derivs.push(symmetrize(&k1));
        if k + 1 == grid.len() {
            break;
        }
        let c_half = coeffs(t + 0.5 * h)?;
        let c_end = coeffs(grid.time(k + 1))?;
        let k2 = riccati_rhs(&c_half, &(&phi + &k1 * C64::from(0.5 * h)));
        let k3 = riccati_rhs(&c_half, &(&phi + &k2 * C64::from(0.5 * h)));
        let k4 = riccati_rhs(&c_end, &(&phi + &k3 * C64::from(h)));
        phi += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h / 6.0);
        phi = symmetrize(&phi);
        c_start = c_end;
    }
    Ok(RiccatiPath {
        phi: HermiteSeries::new(grid, values, derivs),
        min_im_eig: worst,
    })
}

/// Phase jet of one component on every ray of its tube.
#[derive(Debug, Clone)]
pub struct PhaseJet {
    /// `φ₀ = ψ(x⁰(r))` per ray.
    pub phi0: Vec<f64>,
    /// `Φ(t)` per ray.
    pub hessian: Vec<HermiteSeries<CMatrix>>,
    /// Smallest `min eig Im Φ` over all rays and times.
    pub min_im_eig: f64,
}

/// Phase and its gradient at one point of the tube.
#[derive(Debug, Clone)]
pub struct PhaseValue {
    pub r: f64,
    pub s: RVector,
    pub phi: C64,
    pub dt_phi: C64,
    pub dx_phi: CVector,
    /// `J⁻¹`; its last `d₂` rows are `∂s/∂x`.
    pub jac_inv: RMatrix,
    pub x: RVector,
    /// `∂_t x` at fixed `(r, s)`.
    pub chart_velocity: RVector,
}

/// Solves the Riccati equation on every ray of `tube`.
pub fn build_phase_jet(spec: &SystemSpec, tube: &Tube, component: &Component) -> Result<PhaseJet> {
    let points = component.reference.points();
    let results: Vec<(f64, RiccatiPath)> = (0..tube.n_rays())
        .into_par_iter()
        .map(|j| {
            let x0 = &points[j];
            let e0 = to_complex(&tube.frames[j].values[0]);
            let phi0 = e0.transpose() * component.phase.hessian(x0) * &e0;
            let r = tube.r_node(j);
            let path = solve_riccati(tube.grid, &phi0, |t| riccati_coefficients(spec, tube, t, r))?;
            Ok((component.phase.value(x0).re, path))
        })
        .collect::<Result<_>>()?;
    let min_im_eig = results.iter().map(|r| r.1.min_im_eig).fold(f64::INFINITY, f64::min);
    let (phi0, hessian) = results.into_iter().map(|(p, path)| (p, path.phi)).unzip();
    Ok(PhaseJet {
        phi0,
        hessian,
        min_im_eig,
    })
}

impl PhaseJet {
    /// `Φ`, `∂_tΦ` and `∂_rΦ` (only for `d₁ = 1`, else zero) at `(t, r)`.
    pub fn hessian_at(&self, tube: &Tube, t: f64, r: f64) -> (CMatrix, CMatrix, CMatrix) {
        let d2 = tube.d2();
        let mut v = CMatrix::zeros(d2, d2);
        let mut dt = CMatrix::zeros(d2, d2);
        let mut dr = CMatrix::zeros(d2, d2);
        for (i, wv, wd) in tube.weights(r) {
            let val = self.hessian[i].eval(t);
            v += &val * C64::from(wv);
            dt += self.hessian[i].deriv(t) * C64::from(wv);
            dr += val * C64::from(wd);
        }
        (v, dt, dr)
    }

    /// `φ₀(r)` and `∂_rφ₀`.
    pub fn phi0_at(&self, tube: &Tube, r: f64) -> (f64, f64) {
        tube.weights(r)
            .into_iter()
            .fold((0.0, 0.0), |(v, d), (i, wv, wd)| (v + wv * self.phi0[i], d + wd * self.phi0[i]))
    }

    /// Phase at chart coordinates `(t, r, s)`.
    pub fn eval_chart(&self, tube: &Tube, t: f64, r: f64, s: &RVector) -> Result<PhaseValue> {
        let b = tube.base(t, r);
        let cp = tube.chart_point_from(&b, s);
        let jac_inv = cp
            .jac
            .clone()
            .try_inverse()
            .ok_or(CgoError::SingularJacobian { cond: f64::INFINITY })?;
        let sigma = b.e.transpose() * &b.xi;
        let dt_sigma = b.dt_e.transpose() * &b.xi + b.e.transpose() * &b.dt_xi;
        let (phi_m, dt_phi_m, dr_phi_m) = self.hessian_at(tube, t, r);
        let (p0, dr_p0) = self.phi0_at(tube, r);
        let sc = s.map(C64::from);
        let phi_s = &phi_m * &sc;
        let phi = C64::from(p0 + sigma.dot(s)) + sc.dot(&phi_s) * 0.5;
        // Gradient in (r, s).
        let mut grad = CVector::zeros(tube.dim);
        if let Some(dr_e) = &b.dr_e {
            let dr_sigma = dr_e.transpose() * &b.xi + b.e.transpose() * b.dr_xi.column(0);
            grad[0] = C64::from(dr_p0 + dr_sigma.dot(s)) + sc.dot(&(&dr_phi_m * &sc)) * 0.5;
        }
        for i in 0..tube.d2() {
            grad[tube.d1 + i] = C64::from(sigma[i]) + phi_s[i];
        }
        let dx_phi = jac_inv.transpose().map(C64::from) * grad;
        let dt_chart = C64::from(dt_sigma.dot(s)) + sc.dot(&(&dt_phi_m * &sc)) * 0.5;
        let dt_phi = dt_chart - dx_phi.dot(&cp.dt_x.map(C64::from));
        Ok(PhaseValue {
            r,
            s: s.clone(),
            phi,
            dt_phi,
            dx_phi,
            jac_inv,
            x: cp.x,
            chart_velocity: cp.dt_x,
        })
    }

    /// Phase at `(t, x)`; errors with `OutOfChart` outside the tube.
    pub fn eval(&self, tube: &Tube, t: f64, x: &[f64]) -> Result<PhaseValue> {
        let (r, s) = tube.chart_invert(t, x)?;
        self.eval_chart(tube, t, r, &s)
    }

    /// Largest `|ρ − ∂_rφ₀|` over the ray nodes, with `ρ = ⟨∂_r X, ξ⟩`.
    pub fn r_consistency(&self, tube: &Tube) -> f64 {
        if tube.d1 == 0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for k in 0..tube.grid.len() {
            let t = tube.grid.time(k);
            for j in 0..tube.n_rays() {
                let r = tube.r_node(j);
                let b = tube.base(t, r);
                let rho = b.dr_x.column(0).dot(&b.xi);
                worst = worst.max((rho - self.phi0_at(tube, r).1).abs());
            }
        }
        worst
    }
}

/// `Φ⁰(1 + tCΦ⁰)⁻¹`, the Riccati solution for `A = B = 0` and constant `C`.
pub fn riccati_closed_form(phi0: &CMatrix, c: &RMatrix, t: f64) -> Option<CMatrix> {
    let n = phi0.nrows();
    let m = CMatrix::identity(n, n) + to_complex(c) * phi0 * C64::from(t);
    m.try_inverse().map(|inv| phi0 * inv)
}

/// Weights exposed for callers interpolating per-ray data the same way as the phase.
pub fn ray_weights(tube: &Tube, r: f64) -> Vec<(usize, f64, f64)> {
    catmull_rom_weights(tube.n_rays(), tube.r0, tube.dr, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{flow_out, ConstantAmplitude, PolynomialPhase, ReferenceSet};
    use crate::system::Domain;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn i() -> C64 {
        C64::new(0.0, 1.0)
    }

    fn constant(a: f64, b: f64, c: f64) -> impl Fn(f64) -> Result<RiccatiCoefficients> {
        move |_| {
            Ok(RiccatiCoefficients {
                a: RMatrix::from_element(1, 1, a),
                b: RMatrix::from_element(1, 1, b),
                c: RMatrix::from_element(1, 1, c),
            })
        }
    }

    #[test]
    fn zero_coefficients_keep_phi() {
        let p = solve_riccati(TimeGrid::new(1.0, 10), &CMatrix::from_element(1, 1, i()), constant(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(p.phi.eval(0.63)[(0, 0)], i());
    }

    #[test]
    fn scalar_closed_form() {
        let p = solve_riccati(TimeGrid::new(1.0, 2000), &CMatrix::from_element(1, 1, i()), constant(0.0, 0.0, 1.0)).unwrap();
        let end = p.phi.eval(1.0)[(0, 0)];
        assert_abs_diff_eq!(end.re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(end.im, 0.5, epsilon = 1e-12);
        for &t in &[0.137, 0.5, 0.9] {
            let exact = i() / (C64::from(1.0) + i() * t);
            assert!((p.phi.eval(t)[(0, 0)] - exact).norm() < 1e-10);
        }
        assert!((p.min_im_eig - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matrix_case_decouples() {
        let phi0 = CMatrix::identity(2, 2) * i();
        let coeffs = |_| {
            Ok(RiccatiCoefficients {
                a: RMatrix::zeros(2, 2),
                b: RMatrix::zeros(2, 2),
                c: RMatrix::identity(2, 2),
            })
        };
        let p = solve_riccati(TimeGrid::new(1.0, 1000), &phi0, coeffs).unwrap();
        let exact = riccati_closed_form(&phi0, &RMatrix::identity(2, 2), 0.7).unwrap();
        assert!((p.phi.eval(0.7) - &exact).norm() < 1e-10);
        assert!(exact[(0, 1)].norm() == 0.0);
        assert!((exact[(0, 0)] - i() / (C64::from(1.0) + i() * 0.7)).norm() < 1e-14);
    }

    #[test]
    fn general_coefficients_match_fine_steps() {
        let coeffs = |t: f64| {
            Ok(RiccatiCoefficients {
                a: RMatrix::from_row_slice(2, 2, &[0.3 * t, 0.1, 0.1, -0.2]),
                b: RMatrix::from_row_slice(2, 2, &[0.2, -0.1 * t, 0.4, 0.0]),
                c: RMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5 + t]),
            })
        };
        let phi0 = CMatrix::from_row_slice(2, 2, &[C64::new(0.1, 1.0), C64::new(0.0, 0.2), C64::new(0.0, 0.2), C64::new(-0.3, 0.8)]);
        let coarse = solve_riccati(TimeGrid::new(1.0, 200), &phi0, coeffs).unwrap();
        let fine = solve_riccati(TimeGrid::new(1.0, 3200), &phi0, coeffs).unwrap();
        assert!((coarse.phi.eval(1.0) - fine.phi.eval(1.0)).norm() < 1e-8);
        let end = coarse.phi.eval(1.0);
        assert!((&end - end.transpose()).norm() <= 1e-12);
    }

    #[test]
    fn negative_imaginary_part_is_rejected() {
        let err = solve_riccati(TimeGrid::new(1.0, 10), &CMatrix::from_element(1, 1, -i()), constant(0.0, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, CgoError::PositivityLoss { .. }));
    }

    #[test]
    fn real_focus_blows_up() {
        // Φ = Φ⁰/(1 + tΦ⁰) with Φ⁰ = −2 + 1e-9 i focuses at t = 1/2.
        let err = solve_riccati(TimeGrid::new(1.0, 4000), &CMatrix::from_element(1, 1, C64::new(-2.0, 1e-9)), constant(0.0, 0.0, 1.0))
            .unwrap_err();
        assert!(matches!(err, CgoError::BlowUp { .. } | CgoError::PositivityLoss { .. }), "{err:?}");
    }

    fn advection_component(x0: f64) -> Component {
        Component {
            mode: 0,
            reference: ReferenceSet::Point(vec![x0]),
            phase: Arc::new(PolynomialPhase {
                x0: vec![x0],
                value: x0,
                k: vec![1.0],
                hessian: CMatrix::from_element(1, 1, i()),
                cubic: vec![0.0],
            }),
            amplitude: Arc::new(ConstantAmplitude(CVector::from_element(1, C64::from(1.0)))),
        }
    }

    fn domain(d: usize) -> Domain {
        Domain {
            center: vec![0.0; d],
            radius: 3.0,
            t_final: 1.0,
            speed: 1.3,
        }
    }

    #[test]
    fn advection_gaussian_phase() {
        let spec = SystemSpec::builtin("advection", domain(1)).unwrap();
        let c = advection_component(0.0);
        let tube = flow_out(&spec, &c, TimeGrid::new(1.0, 100), 1.0).unwrap();
        let jet = build_phase_jet(&spec, &tube, &c).unwrap();
        let p = jet.eval(&tube, 0.5, &[0.7]).unwrap();
        assert_abs_diff_eq!(p.phi.re, 0.2, epsilon = 1e-14);
        assert_abs_diff_eq!(p.phi.im, 0.02, epsilon = 1e-14);
        // φ = (x − t) + i(x − t)²/2.
        assert!((p.dx_phi[0] - C64::new(1.0, 0.2)).norm() < 1e-14);
        assert!((p.dt_phi + C64::new(1.0, 0.2)).norm() < 1e-14);
    }

    #[test]
    fn phase_is_real_on_the_ray() {
        let spec = SystemSpec::builtin("variable_advection", domain(1)).unwrap();
        let c = advection_component(0.2);
        let tube = flow_out(&spec, &c, TimeGrid::new(1.0, 400), 1.0).unwrap();
        let jet = build_phase_jet(&spec, &tube, &c).unwrap();
        let on = jet.eval_chart(&tube, 0.6, 0.0, &RVector::zeros(1)).unwrap();
        assert_eq!(on.phi.im, 0.0);
        assert!((on.dx_phi[0] - C64::from(tube.rays[0].covector(0.6)[0])).norm() < 1e-14);
    }

    #[test]
    fn variable_advection_imaginary_part_decays() {
        // Λ = (c(X+s) − Ẋ)σ gives Im Φ̇ = −2c'(X) Im Φ.
        let spec = SystemSpec::builtin("variable_advection", domain(1)).unwrap();
        let c = advection_component(0.2);
        let tube = flow_out(&spec, &c, TimeGrid::new(1.0, 400), 1.0).unwrap();
        let jet = build_phase_jet(&spec, &tube, &c).unwrap();
        let n = 4000;
        let h = 1.0 / n as f64;
        let dc = |t: f64| 0.3 * tube.rays[0].position(t)[0].cos();
        let integral: f64 = (0..n)
            .map(|k| {
                let t = k as f64 * h;
                h / 6.0 * (dc(t) + 4.0 * dc(t + 0.5 * h) + dc(t + h))
            })
            .sum();
        let im = jet.hessian[0].eval(1.0)[(0, 0)].im;
        assert!((im - (-2.0 * integral).exp()).abs() < 1e-8, "{im}");
    }

    #[test]
    fn gradient_matches_differences_of_values() {
        let spec = SystemSpec::builtin("variable_advection", domain(1)).unwrap();
        let c = advection_component(0.2);
        let tube = flow_out(&spec, &c, TimeGrid::new(1.0, 400), 1.0).unwrap();
        let jet = build_phase_jet(&spec, &tube, &c).unwrap();
        let (t, x) = (0.55, 0.9);
        let p = jet.eval(&tube, t, &[x]).unwrap();
        let h = 1e-5;
        let fx = (jet.eval(&tube, t, &[x + h]).unwrap().phi - jet.eval(&tube, t, &[x - h]).unwrap().phi) / (2.0 * h);
        let ft = (jet.eval(&tube, t + h, &[x]).unwrap().phi - jet.eval(&tube, t - h, &[x]).unwrap().phi) / (2.0 * h);
        assert!((p.dx_phi[0] - fx).norm() < 1e-6);
        assert!((p.dt_phi - ft).norm() < 1e-6, "{} vs {}", p.dt_phi, ft);
    }

    fn sheet() -> (SystemSpec, Tube, Component) {
        let spec = SystemSpec::builtin("acoustics3", domain(2)).unwrap();
        let c = Component {
            mode: 2,
            reference: ReferenceSet::segment(&[0.0, 0.0], &[1.0, 0.0], 1.0, 11).unwrap(),
            phase: Arc::new(PolynomialPhase {
                x0: vec![0.0, 0.0],
                value: 0.0,
                k: vec![1.0, 0.0],
                hessian: CMatrix::from_row_slice(2, 2, &[C64::from(0.0), C64::from(0.0), C64::from(0.0), i()]),
                cubic: vec![0.0, 0.0],
            }),
            amplitude: Arc::new(ConstantAmplitude(CVector::zeros(3))),
        };
        let tube = flow_out(&spec, &c, TimeGrid::new(1.0, 200), 0.5).unwrap();
        (spec, tube, c)
    }

    #[test]
    fn acoustics_sheet_beam_hessian() {
        let (spec, tube, c) = sheet();
        let co = riccati_coefficients(&spec, &tube, 0.3, 0.1).unwrap();
        assert!(co.a.norm() < 1e-9 && co.b.norm() < 1e-9);
        assert_abs_diff_eq!(co.c[(0, 0)], 1.0, epsilon = 1e-12);
        let jet = build_phase_jet(&spec, &tube, &c).unwrap();
        for &t in &[0.0, 0.4, 1.0] {
            let phi = jet.hessian_at(&tube, t, 0.25).0[(0, 0)];
            // Frame orientation may flip the sign of s, not Φ.
            assert!((phi - C64::new(t, 1.0) / (1.0 + t * t)).norm() < 1e-9, "t = {t}: {phi}");
        }
        assert!(jet.r_consistency(&tube) < 1e-12);
        let p = jet.eval(&tube, 0.5, &[0.8, 0.1]).unwrap();
        assert_abs_diff_eq!(p.r, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(p.s[0].abs(), 0.1, epsilon = 1e-12);
        let expected = C64::new(0.3, 0.0) + C64::new(0.5, 1.0) / 1.25 * 0.01 * 0.5;
        assert!((p.phi - expected).norm() < 1e-9);
    }

    #[test]
    fn initial_jet_matches_phase_taylor_coefficients() {
        let (spec, tube, c) = sheet();
        let jet = build_phase_jet(&spec, &tube, &c).unwrap();
        let p = jet.eval(&tube, 0.0, &[0.4, -0.2]).unwrap();
        assert!((p.phi - c.phase.value(&[0.4, -0.2])).norm() < 1e-13);
    }
}
