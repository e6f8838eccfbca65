//! One wave component carried through the whole construction: rays, phase, amplitude and cutoff.

use serde::{Deserialize, Serialize};

use crate::amplitude::{build_amplitude, AmplitudeField};
use crate::assembly::{Cutoff, CutoffProfile};
use crate::complex_symbol::{mode_separation, ComplexCovector, Separation, TubeSample};
use crate::eikonal::{build_phase_jet, PhaseJet};
use crate::error::{CgoError, Result};
use crate::geometry::{flow_out, Component, Tube};
use crate::linalg::{time_derivative, CVector, RVector, TimeGrid, C64};
use crate::system::SystemSpec;

/// Numerical parameters of one beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamParams {
    /// Time steps on `[0, T]`.
    pub steps: usize,
    /// Chart radius; defaults to `2ρ` for point reference sets and `ρ/2` for curves.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chart_radius: Option<f64>,
    /// Time levels of the projector-jet and corrector lattice.
    pub lattice_steps: usize,
    pub profile: CutoffProfile,
}

impl Default for BeamParams {
    fn default() -> Self {
        Self {
            steps: 2000,
            chart_radius: None,
            lattice_steps: 200,
            profile: CutoffProfile::Plateau,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BeamSolution {
    pub component: Component,
    pub tube: Tube,
    pub jet: PhaseJet,
    pub amplitude: AmplitudeField,
    pub separation: Vec<Separation>,
    pub cutoff: Cutoff,
    /// System size `N`.
    pub size: usize,
}

/// Chart coordinates of a point inside the cutoff support.
#[derive(Debug, Clone)]
pub struct LocalPoint {
    pub r: f64,
    pub s: RVector,
}

fn separation_samples(tube: &Tube, jet: &PhaseJet) -> Result<Vec<TubeSample>> {
    let d2 = tube.d2();
    let mut dirs: Vec<RVector> = Vec::new();
    if d2 == 1 {
        dirs.push(RVector::from_element(1, 1.0));
        dirs.push(RVector::from_element(1, -1.0));
    } else {
        for v in crate::system::check::unit_directions(d2, 8) {
            dirs.push(RVector::from_vec(v));
        }
    }
    let n_r = tube.n_rays();
    let ray_stride = (n_r / 8).max(1);
    let mut out = Vec::new();
    for k in 0..=10 {
        let t = tube.grid.t_final() * k as f64 / 10.0;
        for j in (0..n_r).step_by(ray_stride) {
            let r = tube.r_node(j);
            for m in 0..=10 {
                let radius = tube.chart_radius * m as f64 / 10.0;
                for dir in &dirs {
                    let s = dir * radius;
                    let pv = jet.eval_chart(tube, t, r, &s)?;
                    out.push(TubeSample {
                        s_norm: radius,
                        t,
                        x: pv.x.iter().copied().collect(),
                        dt_phi: pv.dt_phi,
                        dx_phi: ComplexCovector::from_complex(pv.dx_phi.as_slice())?,
                    });
                    if radius == 0.0 {
                        break;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Runs flow-out, Riccati, mode separation and transport for one component.
/// Rays and normal frames of one component.
pub fn trace_tube(spec: &SystemSpec, component: &Component, params: &BeamParams) -> Result<Tube> {
    component.validate(spec)?;
    let rho = spec.domain.radius;
    let chart_radius = params
        .chart_radius
        .unwrap_or(if component.reference.dim() == 0 { 2.0 * rho } else { 0.5 * rho });
    if chart_radius <= 0.0 {
        return Err(CgoError::Config("chart radius must be positive".into()));
    }
    if params.steps == 0 {
        return Err(CgoError::Config("beam.steps must be positive".into()));
    }
    flow_out(spec, component, TimeGrid::new(spec.domain.t_final, params.steps), chart_radius)
}

pub fn build_beam(spec: &SystemSpec, component: &Component, params: &BeamParams) -> Result<BeamSolution> {
    let tube = trace_tube(spec, component, params)?;
    let chart_radius = tube.chart_radius;
    let jet = build_phase_jet(spec, &tube, component)?;
    let separation = mode_separation(spec, &separation_samples(&tube, &jet)?, component.mode, chart_radius)?;
    let s_l = separation.iter().map(|s| s.radius).fold(f64::INFINITY, f64::min);
    let amplitude = build_amplitude(spec, &tube, &jet, component, params.lattice_steps)?;
    Ok(BeamSolution {
        component: component.clone(),
        cutoff: Cutoff {
            radius: 0.9 * chart_radius.min(s_l),
            profile: params.profile,
        },
        tube,
        jet,
        amplitude,
        separation,
        size: spec.size,
    })
}

impl BeamSolution {
    /// Chart coordinates of `x` if it lies in the open cutoff support.
    pub fn locate(&self, t: f64, x: &[f64]) -> Result<Option<LocalPoint>> {
        match self.tube.chart_invert(t, x) {
            Ok((r, s)) if s.norm() < self.cutoff.radius => Ok(Some(LocalPoint { r, s })),
            Ok(_) | Err(CgoError::OutOfChart { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// `ω(s)(a₀ + εa¹)` at chart coordinates.
    pub fn amplitude_at(&self, eps: f64, t: f64, r: f64, s: &RVector) -> CVector {
        let w = self.cutoff.value(s.norm());
        if w == 0.0 {
            return CVector::zeros(self.size);
        }
        let (a0, a1) = self.amplitude.eval(&self.tube, t, r, s);
        (a0 + a1 * C64::from(eps)) * C64::from(w)
    }

    /// `ω(a₀ + εa¹) e^{iφ/ε}` at `(t, x)`; zero outside the cutoff support.
    pub fn field(&self, eps: f64, t: f64, x: &[f64]) -> Result<CVector> {
        match self.locate(t, x)? {
            None => Ok(CVector::zeros(self.size)),
            Some(p) => {
                let pv = self.jet.eval_chart(&self.tube, t, p.r, &p.s)?;
                Ok(self.amplitude_at(eps, t, p.r, &p.s) * (C64::new(0.0, 1.0) * pv.phi / eps).exp())
            }
        }
    }

    /// `L v^ε` for this component at `(t, x)`, with the oscillation handled analytically:
    /// `[ε⁻¹ i(∂_tφ + A(d_xφ)) a^ε + L a^ε] e^{iφ/ε}`.
    pub fn residual(&self, spec: &SystemSpec, eps: f64, t: f64, x: &[f64]) -> Result<CVector> {
        let n = spec.size;
        let Some(p) = self.locate(t, x)? else {
            return Ok(CVector::zeros(n));
        };
        let tube = &self.tube;
        let pv = self.jet.eval_chart(tube, t, p.r, &p.s)?;
        let a = self.amplitude_at(eps, t, p.r, &p.s);
        let h = crate::amplitude::FIELD_STEP;
        // Derivatives of the smooth amplitude in chart coordinates q = (r, s).
        let mut dq = Vec::with_capacity(tube.dim);
        for q in 0..tube.dim {
            let (mut rp, mut rm, mut sp, mut sm) = (p.r, p.r, p.s.clone(), p.s.clone());
            if q < tube.d1 {
                rp += h;
                rm -= h;
            } else {
                sp[q - tube.d1] += h;
                sm[q - tube.d1] -= h;
            }
            dq.push((self.amplitude_at(eps, t, rp, &sp) - self.amplitude_at(eps, t, rm, &sm)) / C64::from(2.0 * h));
        }
        let dt_a = time_derivative(|tau| Ok(self.amplitude_at(eps, tau, p.r, &p.s)), t, h, tube.grid.t_final())?;
        let mut la = dt_a + spec.b(t, x) * &a;
        let mut symbol = &a * pv.dt_phi;
        for j in 0..tube.dim {
            let mut dj = CVector::zeros(n);
            for (q, v) in dq.iter().enumerate() {
                dj += v * C64::from(pv.jac_inv[(q, j)]);
            }
            let aj = spec.a(t, x, j);
            // ∂_t at fixed x is ∂_t at fixed (r, s) minus the chart velocity term.
            la += &aj * &dj - dj * C64::from(pv.chart_velocity[j]);
            symbol += &aj * &a * pv.dx_phi[j];
        }
        let osc = (C64::new(0.0, 1.0) * pv.phi / eps).exp();
        Ok((symbol * (C64::new(0.0, 1.0) / eps) + la) * osc)
    }
}
