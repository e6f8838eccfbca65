//! Polarized transport on the reference manifold, the quadratic amplitude
//! extension `a₀ = M a` and the first corrector `a¹`.
//!
//! The constrained transport system `(I − π)a = 0`, `π ȧ + π(L₀π + B)a + i g a = 0`
//! is integrated as `ȧ = K a` with `K = −π(L₀π + B) − i g + (I − π)π̇`; the last
//! term is the derivative of the constraint, so `π` stays an invariant subspace.

use rayon::prelude::*;

use crate::complex_symbol::{extended_mode, ComplexCovector};
use crate::eikonal::{PhaseJet, PhaseValue};
use crate::error::{CgoError, Result};
use crate::geometry::{Component, Tube};
use crate::linalg::{catmull_rom_weights, combine, time_derivative, Blend, CMatrix, CVector, HermiteSeries, RVector, TimeGrid, C64};
use crate::system::{Order, SymbolAt, SystemSpec};

/// Largest relative `|(I − π)a|` tolerated along the transport.
pub const POLARIZATION_DRIFT_TOL: f64 = 1e-6;
/// Initial amplitudes closer than this to the mode are projected silently.
pub const INITIAL_PROJECTION_TOL: f64 = 1e-6;
/// Step of the chart differences used for `L₀π` and `π̇`.
pub const FIELD_STEP: f64 = 1e-4;
/// Step of the `s` differences of `π̃`, relative to the chart radius.
pub const JET_STEP: f64 = 1e-4;

fn i() -> C64 {
    C64::new(0.0, 1.0)
}

fn mode_of(modes: Vec<crate::system::Mode>, l: usize) -> Result<crate::system::Mode> {
    let count = modes.len();
    modes.into_iter().nth(l).ok_or(CgoError::ModeIndex { mode: l, count })
}

/// `π_l(t, x, d_x Re φ)` at chart coordinates.
pub fn real_projector(spec: &SystemSpec, tube: &Tube, jet: &PhaseJet, t: f64, r: f64, s: &RVector) -> Result<CMatrix> {
    let pv = jet.eval_chart(tube, t, r, s)?;
    let xi: Vec<f64> = pv.dx_phi.iter().map(|z| z.re).collect();
    let sym = SymbolAt::new(spec, t, pv.x.as_slice())?;
    let (modes, _) = sym.decompose(&xi, Order::Zero)?;
    Ok(mode_of(modes, tube.mode)?.projector)
}

/// `π̃_l(t, x, d_x φ)` at chart coordinates.
pub fn extended_projector(spec: &SystemSpec, tube: &Tube, jet: &PhaseJet, t: f64, r: f64, s: &RVector) -> Result<CMatrix> {
    let pv = jet.eval_chart(tube, t, r, s)?;
    let zeta = ComplexCovector::from_complex(pv.dx_phi.as_slice())?;
    Ok(extended_mode(spec, t, pv.x.as_slice(), &zeta, tube.mode)?.projector)
}

/// `π`, `π_i = ∂_{s_i}π̃` and `π_ij = ∂_{s_i}∂_{s_j}π̃` at `s = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorJet {
    pub pi: CMatrix,
    pub d: Vec<CMatrix>,
    pub dd: Vec<Vec<CMatrix>>,
}

impl ProjectorJet {
    pub fn trivial(n: usize, d2: usize) -> Self {
        let z = CMatrix::zeros(n, n);
        Self {
            pi: CMatrix::identity(n, n),
            d: vec![z.clone(); d2],
            dd: vec![vec![z; d2]; d2],
        }
    }

    /// `M(s) = I + Σ π_i s_i + ½ Σ (π_iπ_j + π_jπ_i + π_ij) s_i s_j`.
    pub fn m_matrix(&self, s: &RVector) -> CMatrix {
        let n = self.pi.nrows();
        let mut m = CMatrix::identity(n, n);
        for (a, pa) in self.d.iter().enumerate() {
            m += pa * C64::from(s[a]);
            for (b, pb) in self.d.iter().enumerate() {
                let mab = pa * pb + pb * pa + &self.dd[a][b];
                m += mab * C64::from(0.5 * s[a] * s[b]);
            }
        }
        m
    }

    /// `max |π π_i π|` and `max |π(π_iπ_j + π_jπ_i + π_ij)π|`.
    pub fn identity_defects(&self) -> (f64, f64) {
        let p = &self.pi;
        let mut first: f64 = 0.0;
        let mut second: f64 = 0.0;
        for (a, pa) in self.d.iter().enumerate() {
            first = first.max((p * pa * p).norm());
            for (b, pb) in self.d.iter().enumerate() {
                second = second.max((p * (pa * pb + pb * pa + &self.dd[a][b]) * p).norm());
            }
        }
        (first, second)
    }

    fn pack(&self) -> Vec<CMatrix> {
        let mut v = vec![self.pi.clone()];
        v.extend(self.d.iter().cloned());
        for row in &self.dd {
            v.extend(row.iter().cloned());
        }
        v
    }

    fn unpack(v: Vec<CMatrix>, d2: usize) -> Self {
        let mut it = v.into_iter();
        let pi = it.next().expect("packed projector jet");
        let d: Vec<CMatrix> = (0..d2).map(|_| it.next().expect("packed projector jet")).collect();
        let dd = (0..d2).map(|_| (0..d2).map(|_| it.next().expect("packed projector jet")).collect()).collect();
        Self { pi, d, dd }
    }
}

pub fn projector_jet(spec: &SystemSpec, tube: &Tube, jet: &PhaseJet, t: f64, r: f64) -> Result<ProjectorJet> {
    let d2 = tube.d2();
    let h = JET_STEP * tube.chart_radius;
    let f = |s: &[f64]| extended_projector(spec, tube, jet, t, r, &RVector::from_column_slice(s));
    let pi = f(&vec![0.0; d2])?;
    let shifted = |pairs: &[(usize, f64)]| {
        let mut s = vec![0.0; d2];
        for &(k, v) in pairs {
            s[k] += v;
        }
        f(&s)
    };
    let mut d = Vec::with_capacity(d2);
    let mut dd = vec![vec![CMatrix::zeros(spec.size, spec.size); d2]; d2];
    for a in 0..d2 {
        let (p, m) = (shifted(&[(a, h)])?, shifted(&[(a, -h)])?);
        d.push((&p - &m) / C64::from(2.0 * h));
        dd[a][a] = (p - &pi * C64::from(2.0) + m) / C64::from(h * h);
    }
    for a in 0..d2 {
        for b in a + 1..d2 {
            let v = (shifted(&[(a, h), (b, h)])? - shifted(&[(a, h), (b, -h)])? - shifted(&[(a, -h), (b, h)])?
                + shifted(&[(a, -h), (b, -h)])?)
                / C64::from(4.0 * h * h);
            dd[a][b] = v.clone();
            dd[b][a] = v;
        }
    }
    Ok(ProjectorJet { pi, d, dd })
}

/// `g = ½ Σ ∂²_{x_i x_j}χ ∂²_{ξ_i ξ_j}λ` on the ray, with `∂²_xχ = (∂s/∂x)ᵀ Im Φ (∂s/∂x)`.
pub fn gouy_shift(spec: &SystemSpec, tube: &Tube, jet: &PhaseJet, t: f64, r: f64) -> Result<f64> {
    let pv = jet.eval_chart(tube, t, r, &RVector::zeros(tube.d2()))?;
    gouy_from(spec, tube, jet, t, r, &pv)
}

fn gouy_from(spec: &SystemSpec, tube: &Tube, jet: &PhaseJet, t: f64, r: f64, pv: &PhaseValue) -> Result<f64> {
    let ds_dx = pv.jac_inv.rows(tube.d1, tube.d2()).into_owned();
    let im_phi = jet.hessian_at(tube, t, r).0.map(|z| z.im);
    let chi_xx = ds_dx.transpose() * im_phi * &ds_dx;
    let xi: Vec<f64> = pv.dx_phi.iter().map(|z| z.re).collect();
    let (modes, _) = SymbolAt::new(spec, t, pv.x.as_slice())?.decompose(&xi, Order::One)?;
    let mode = mode_of(modes, tube.mode)?;
    Ok(0.5 * chi_xx.component_mul(&mode.hess).sum())
}

/// Transport generator at one point of a ray.
#[derive(Debug, Clone)]
pub struct Generator {
    pub k: CMatrix,
    pub pi: CMatrix,
    pub gouy: f64,
}

pub fn transport_generator(spec: &SystemSpec, tube: &Tube, jet: &PhaseJet, t: f64, r: f64) -> Result<Generator> {
    let d = tube.dim;
    let n = spec.size;
    let zero = RVector::zeros(tube.d2());
    let pv = jet.eval_chart(tube, t, r, &zero)?;
    let pi = real_projector(spec, tube, jet, t, r, &zero)?;
    let h = FIELD_STEP;
    // Derivatives in chart coordinates q = (r, s).
    let mut dq = Vec::with_capacity(d);
    for a in 0..d {
        let (p, m) = if a < tube.d1 {
            (real_projector(spec, tube, jet, t, r + h, &zero)?, real_projector(spec, tube, jet, t, r - h, &zero)?)
        } else {
            let mut sp = zero.clone();
            sp[a - tube.d1] = h;
            (real_projector(spec, tube, jet, t, r, &sp)?, real_projector(spec, tube, jet, t, r, &(-sp))?)
        };
        dq.push((p - m) / C64::from(2.0 * h));
    }
    let pi_dot = time_derivative(|tau| real_projector(spec, tube, jet, tau, r, &zero), t, h, tube.grid.t_final())?;
    let mut l0_pi = pi_dot.clone();
    for j in 0..d {
        let mut dj = CMatrix::zeros(n, n);
        for (a, m) in dq.iter().enumerate() {
            dj += m * C64::from(pv.jac_inv[(a, j)]);
        }
        l0_pi += (spec.a(t, pv.x.as_slice(), j) - CMatrix::identity(n, n) * C64::from(pv.chart_velocity[j])) * dj;
    }
    let gouy = gouy_from(spec, tube, jet, t, r, &pv)?;
    let id = CMatrix::identity(n, n);
    let k = -(&pi * (l0_pi + spec.b(t, pv.x.as_slice()))) - &id * (i() * gouy) + (&id - &pi) * pi_dot;
    Ok(Generator { k, pi, gouy })
}

/// Leading amplitude along one ray.
#[derive(Debug, Clone)]
pub struct AmplitudePath {
    pub a: HermiteSeries<CVector>,
    /// `g` at the time nodes.
    pub gouy: Vec<f64>,
    /// Largest relative `|(I − π)a|` before each projection.
    pub max_violation: f64,
}

fn violation(pi: &CMatrix, a: &CVector) -> f64 {
    let n = a.norm();
    if n == 0.0 {
        0.0
    } else {
        (a - pi * a).norm() / n
    }
}

/// RK4 for `ȧ = K a` along ray `j`, projecting onto the mode after every step.
pub fn solve_transport(spec: &SystemSpec, tube: &Tube, jet: &PhaseJet, j: usize, a0: &CVector) -> Result<AmplitudePath> {
    let grid = tube.grid;
    let r = tube.r_node(j);
    let h = grid.dt;
    let mut gen = transport_generator(spec, tube, jet, 0.0, r)?;
    let v0 = violation(&gen.pi, a0);
    if v0 > INITIAL_PROJECTION_TOL {
        return Err(CgoError::PolarizationDrift { violation: v0 });
    }
    let mut a = a0.clone();
    if v0 > 0.0 {
        let projected = &gen.pi * a0;
        a = &projected * C64::from(a0.norm() / projected.norm());
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut derivs = Vec::with_capacity(grid.len());
    let mut gouy = Vec::with_capacity(grid.len());
    let mut worst: f64 = 0.0;
    for k in 0..grid.len() {
        let t = grid.time(k);
        let k1 = &gen.k * &a;
        values.push(a.clone());
        derivs.push(k1.clone());
        gouy.push(gen.gouy);
        if k + 1 == grid.len() {
            break;
        }
        let half = transport_generator(spec, tube, jet, t + 0.5 * h, r)?;
        let end = transport_generator(spec, tube, jet, grid.time(k + 1), r)?;
        let k2 = &half.k * (&a + &k1 * C64::from(0.5 * h));
        let k3 = &half.k * (&a + &k2 * C64::from(0.5 * h));
        let k4 = &end.k * (&a + &k3 * C64::from(h));
        a += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h / 6.0);
        let v = violation(&end.pi, &a);
        worst = worst.max(v);
        if v > POLARIZATION_DRIFT_TOL {
            return Err(CgoError::PolarizationDrift { violation: v });
        }
        a = &end.pi * a;
        gen = end;
    }
    Ok(AmplitudePath {
        a: HermiteSeries::new(grid, values, derivs),
        gouy,
        max_violation: worst,
    })
}

/// `a₀(t,r,s) = M(t,r,s) a(t,r)`.
pub fn extend_amplitude(pj: &ProjectorJet, a: &CVector, s: &RVector) -> CVector {
    pj.m_matrix(s) * a
}

/// Values on a uniform `(t, r)` lattice interpolated with Catmull-Rom in both variables.
#[derive(Debug, Clone)]
pub struct Lattice<T> {
    pub times: TimeGrid,
    pub r0: f64,
    pub dr: f64,
    pub n_r: usize,
    pub values: Vec<T>,
}

impl<T: Blend> Lattice<T> {
    pub fn at(&self, k: usize, j: usize) -> &T {
        &self.values[k * self.n_r + j]
    }

    pub fn eval(&self, t: f64, r: f64) -> T {
        let wt = catmull_rom_weights(self.times.len(), 0.0, self.times.dt, t);
        let wr = catmull_rom_weights(self.n_r, self.r0, self.dr, r);
        let mut terms = Vec::with_capacity(wt.len() * wr.len());
        for &(k, a, _) in &wt {
            for &(j, b, _) in &wr {
                terms.push((a * b, &self.values[k * self.n_r + j]));
            }
        }
        combine(&terms)
    }
}

/// Corrector at one ray point with the quantities used to build it.
#[derive(Debug, Clone)]
pub struct CorrectorValue {
    pub a1: CVector,
    /// `(I − π)(L₀a₀ + Ba₀)`.
    pub w: CVector,
    /// `|π(L₀a₀ + Ba₀)|`, which vanishes when the transport equation holds.
    pub necessary: f64,
    /// `|S a¹ + w|`.
    pub solve_residual: f64,
}

/// `a`, `∂_t a` and `∂_r a` at `(t, r)` from the per-ray transport solutions.
pub fn amplitude_on_ray(paths: &[AmplitudePath], tube: &Tube, t: f64, r: f64) -> (CVector, CVector, CVector) {
    let n = paths[0].a.values[0].len();
    let mut a = CVector::zeros(n);
    let mut da_t = CVector::zeros(n);
    let mut da_r = CVector::zeros(n);
    for (j, wv, wd) in tube.weights(r) {
        let v = paths[j].a.eval(t);
        a += &v * C64::from(wv);
        da_t += paths[j].a.deriv(t) * C64::from(wv);
        da_r += v * C64::from(wd);
    }
    (a, da_t, da_r)
}

/// `a¹ = −S⁺w` with `S = Σ_{l'≠l} i(∂_tφ + λ_{l'})π_{l'}` on the ray.
///
/// Singular values of `S` below a tenth of the smallest `|∂_tφ + λ_{l'}|` are dropped.
pub fn compute_corrector(
    spec: &SystemSpec,
    tube: &Tube,
    jet: &PhaseJet,
    paths: &[AmplitudePath],
    pj: &ProjectorJet,
    t: f64,
    r: f64,
) -> Result<CorrectorValue> {
    let n = spec.size;
    let d = tube.dim;
    let pv = jet.eval_chart(tube, t, r, &RVector::zeros(tube.d2()))?;
    let (a, da_t, da_r) = amplitude_on_ray(paths, tube, t, r);
    let x = pv.x.as_slice();
    let dq: Vec<CVector> = (0..d)
        .map(|q| if q < tube.d1 { da_r.clone() } else { &pj.d[q - tube.d1] * &a })
        .collect();
    let mut l0 = da_t;
    for j in 0..d {
        let mut dj = CVector::zeros(n);
        for (q, v) in dq.iter().enumerate() {
            dj += v * C64::from(pv.jac_inv[(q, j)]);
        }
        l0 += (spec.a(t, x, j) - CMatrix::identity(n, n) * C64::from(pv.chart_velocity[j])) * dj;
    }
    let full = l0 + spec.b(t, x) * &a;
    let id = CMatrix::identity(n, n);
    let w = (&id - &pj.pi) * &full;
    let necessary = (&pj.pi * &full).norm();

    let xi: Vec<f64> = pv.dx_phi.iter().map(|z| z.re).collect();
    let (modes, _) = SymbolAt::new(spec, t, x)?.decompose(&xi, Order::Zero)?;
    let mut s_mat = CMatrix::zeros(n, n);
    let mut sep = f64::INFINITY;
    for (l2, m) in modes.iter().enumerate() {
        if l2 != tube.mode {
            let factor = pv.dt_phi + m.lambda;
            sep = sep.min(factor.norm());
            s_mat += &m.projector * (i() * factor);
        }
    }
    let a1 = if sep.is_finite() {
        let svd = s_mat.clone().svd(true, true);
        let threshold = 0.1 * sep;
        let (u, vt) = (svd.u.expect("left singular vectors"), svd.v_t.expect("right singular vectors"));
        let mut inv = CMatrix::zeros(n, n);
        for (k, &sv) in svd.singular_values.iter().enumerate() {
            if sv > threshold {
                inv += vt.row(k).adjoint() * u.column(k).adjoint() / C64::from(sv);
            }
        }
        (&id - &pj.pi) * -(inv * &w)
    } else {
        CVector::zeros(n)
    };
    let solve_residual = (&s_mat * &a1 + &w).norm();
    Ok(CorrectorValue {
        a1,
        w,
        necessary,
        solve_residual,
    })
}

/// Leading amplitude, projector jets and corrector of one component.
#[derive(Debug, Clone)]
pub struct AmplitudeField {
    pub paths: Vec<AmplitudePath>,
    pub jets: Lattice<Vec<CMatrix>>,
    pub corrector: Lattice<CVector>,
    pub d2: usize,
    /// Largest `|π(L₀a₀ + Ba₀)|` over the lattice.
    pub max_necessary: f64,
    /// Largest `|S a¹ + w|` over the lattice.
    pub max_solve_residual: f64,
    /// Largest projector-identity defect over the lattice.
    pub max_identity_defect: f64,
}

impl Blend for Vec<CMatrix> {
    fn scaled(&self, w: f64) -> Self {
        self.iter().map(|m| m * C64::from(w)).collect()
    }
    fn add_scaled(&mut self, w: f64, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += b * C64::from(w);
        }
    }
}

impl AmplitudeField {
    pub fn projector_jet_at(&self, t: f64, r: f64) -> ProjectorJet {
        ProjectorJet::unpack(self.jets.eval(t, r), self.d2)
    }

    /// `(a₀, a¹)` at chart coordinates.
    pub fn eval(&self, tube: &Tube, t: f64, r: f64, s: &RVector) -> (CVector, CVector) {
        let (a, _, _) = amplitude_on_ray(&self.paths, tube, t, r);
        let pj = self.projector_jet_at(t, r);
        (extend_amplitude(&pj, &a, s), self.corrector.eval(t, r))
    }
}

/// Solves the transport on every ray and fills the projector-jet and corrector lattice.
pub fn build_amplitude(
    spec: &SystemSpec,
    tube: &Tube,
    jet: &PhaseJet,
    component: &Component,
    lattice_steps: usize,
) -> Result<AmplitudeField> {
    let points = component.reference.points();
    let paths: Vec<AmplitudePath> = (0..tube.n_rays())
        .into_par_iter()
        .map(|j| solve_transport(spec, tube, jet, j, &component.amplitude.value(&points[j])))
        .collect::<Result<_>>()?;
    let times = TimeGrid::new(tube.grid.t_final(), lattice_steps.max(1));
    let n_r = tube.n_rays();
    let d2 = tube.d2();
    let single = SymbolAt::new(spec, 0.0, &points[0])?.decompose(tube.rays[0].xi.values[0].as_slice(), Order::Zero)?.0.len() == 1;
    let cells: Vec<(ProjectorJet, CorrectorValue)> = (0..times.len() * n_r)
        .into_par_iter()
        .map(|idx| {
            let (k, j) = (idx / n_r, idx % n_r);
            let (t, r) = (times.time(k), tube.r_node(j));
            let pj = if single {
                ProjectorJet::trivial(spec.size, d2)
            } else {
                projector_jet(spec, tube, jet, t, r)?
            };
            let cv = compute_corrector(spec, tube, jet, &paths, &pj, t, r)?;
            Ok((pj, cv))
        })
        .collect::<Result<_>>()?;
    let max_necessary = cells.iter().map(|c| c.1.necessary).fold(0.0, f64::max);
    let max_solve_residual = cells.iter().map(|c| c.1.solve_residual).fold(0.0, f64::max);
    let max_identity_defect = cells
        .iter()
        .map(|c| {
            let (a, b) = c.0.identity_defects();
            a.max(b)
        })
        .fold(0.0, f64::max);
    let (pjs, cvs): (Vec<_>, Vec<_>) = cells.into_iter().unzip();
    let lattice = |values| Lattice {
        times,
        r0: tube.r0,
        dr: tube.dr,
        n_r,
        values,
    };
    Ok(AmplitudeField {
        paths,
        jets: lattice(pjs.iter().map(ProjectorJet::pack).collect()),
        corrector: Lattice {
            times,
            r0: tube.r0,
            dr: tube.dr,
            n_r,
            values: cvs.into_iter().map(|c| c.a1).collect(),
        },
        d2,
        max_necessary,
        max_solve_residual,
        max_identity_defect,
    })
}

/// Amplitude built directly from `π(t, x, d_x Re φ)` and `χ_i = ∂_{x_i} Im φ`:
/// `πā + i Σ ∂_iπ πā χ_i − ½ Σ (∂_iπ∂_jπ + ∂_jπ∂_iπ + ∂_{ij}π) πā χ_iχ_j`, with `ā(t,x) = a(t, r(x))`.
pub fn natural_extension(spec: &SystemSpec, tube: &Tube, jet: &PhaseJet, field: &AmplitudeField, t: f64, x: &[f64]) -> Result<CVector> {
    let pv = jet.eval(tube, t, x)?;
    let (abar, _, _) = amplitude_on_ray(&field.paths, tube, t, pv.r);
    let xi: Vec<f64> = pv.dx_phi.iter().map(|z| z.re).collect();
    let chi: Vec<f64> = pv.dx_phi.iter().map(|z| z.im).collect();
    let (modes, _) = SymbolAt::new(spec, t, x)?.decompose(&xi, Order::Two)?;
    let m = mode_of(modes, tube.mode)?;
    let pa = &m.projector * &abar;
    let mut out = pa.clone();
    for a in 0..tube.dim {
        out += &m.dproj[a] * &pa * (i() * chi[a]);
        for b in 0..tube.dim {
            let q = &m.dproj[a] * &m.dproj[b] + &m.dproj[b] * &m.dproj[a] + &m.d2proj[a][b];
            out -= q * &pa * C64::from(0.5 * chi[a] * chi[b]);
        }
    }
    Ok(out)
}
