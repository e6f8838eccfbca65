//! Lax–Wendroff reference solutions of one-dimensional Cauchy problems.
//!
//! Two-step (Richtmyer) form for `u_t + A(t,x) u_x + B(t,x) u = 0` with
//! zeroth-order outflow extrapolation at both ends.  The interval is wide
//! enough that the boundary cannot influence the domain of determinacy.

use serde::{Deserialize, Serialize};

use crate::assembly::{eval_initial_data, Axis, FieldGrid};
use crate::error::{CgoError, Result};
use crate::geometry::InitialData;
use crate::linalg::{CMatrix, CVector, C64};
use crate::system::SystemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceParams {
    pub cfl: f64,
    /// `Δx = ε / dx_per_eps`.
    pub dx_per_eps: f64,
    /// Extra width beyond the region of influence on each side.
    pub margin: f64,
    /// Requested time step; defaults to the CFL limit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl Default for ReferenceParams {
    fn default() -> Self {
        Self {
            cfl: 0.95,
            dx_per_eps: 40.0,
            margin: 0.2,
            dt: None,
        }
    }
}

fn spectral_radius(m: &CMatrix) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
}

/// `max |λ|` of `A` over the axis nodes at `t = 0` and `t = T`.
pub fn max_speed(spec: &SystemSpec, axis: &Axis) -> f64 {
    let mut c: f64 = 0.0;
    for t in [0.0, spec.domain.t_final] {
        for i in 0..axis.n {
            c = c.max(spectral_radius(&spec.a(t, &[axis.node(i)], 0)));
        }
    }
    c
}

/// Interval `x̄ ± (ρ + T·c + margin)` with `Δx <= ε/dx_per_eps`.
pub fn reference_axis(spec: &SystemSpec, eps: f64, p: &ReferenceParams) -> Result<Axis> {
    if spec.dim != 1 {
        return Err(CgoError::Unsupported(format!(
            "the reference solver is one-dimensional, got d = {}",
            spec.dim
        )));
    }
    let d = &spec.domain;
    let half = d.radius + d.t_final * d.speed + p.margin;
    let dx = eps / p.dx_per_eps;
    let cells = (2.0 * half / dx).ceil() as usize;
    Axis::new(d.center[0] - half, d.center[0] + half, cells + 1)
}

/// Rejects grids with `Δx > 2πε / (10 k)`, `k` the largest `|Re ψ'|` where the data are visible.
pub fn check_resolution(initial: &InitialData, eps: f64, axis: &Axis) -> Result<()> {
    let mut k_max: f64 = 0.0;
    for c in &initial.components {
        let env: Vec<f64> = (0..axis.n)
            .map(|i| {
                let x = [axis.node(i)];
                c.amplitude.value(&x).norm() * (-c.phase.value(&x).im / eps).exp()
            })
            .collect();
        let peak = env.iter().fold(0.0f64, |a, b| a.max(*b));
        for (i, e) in env.iter().enumerate() {
            if *e >= 1e-12 * peak {
                k_max = k_max.max(c.phase.gradient(&[axis.node(i)])[0].re.abs());
            }
        }
    }
    let required = eps * std::f64::consts::TAU / (10.0 * k_max.max(1e-300));
    if axis.step > required {
        return Err(CgoError::ResolutionError {
            dx: axis.step,
            required,
        });
    }
    Ok(())
}

struct Coeffs {
    n: usize,
    /// Row-major `N×N` blocks per node.
    a: Vec<C64>,
    b: Vec<C64>,
}

impl Coeffs {
    fn sample(spec: &SystemSpec, t: f64, xs: impl Iterator<Item = f64>) -> Self {
        let n = spec.size;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for x in xs {
            let am = spec.a(t, &[x], 0);
            let bm = spec.b(t, &[x]);
            for i in 0..n {
                for j in 0..n {
                    a.push(am[(i, j)]);
                    b.push(bm[(i, j)]);
                }
            }
        }
        Self { n, a, b }
    }

    /// `out = A_k p + B_k q` at sample `k`.
    fn apply(&self, k: usize, p: &[C64], q: &[C64], out: &mut [C64]) {
        let n = self.n;
        let base = k * n * n;
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                acc += self.a[base + i * n + j] * p[j] + self.b[base + i * n + j] * q[j];
            }
            out[i] = acc;
        }
    }
}

fn nodes(axis: &Axis) -> impl Iterator<Item = f64> + '_ {
    (0..axis.n).map(|i| axis.node(i))
}

fn midpoints(axis: &Axis) -> impl Iterator<Item = f64> + '_ {
    (0..axis.n - 1).map(|i| axis.node(i) + 0.5 * axis.step)
}

/// Advances `u` (flattened, `N` per node) by one step of size `dt` from time `t`.
fn lw_step(spec: &SystemSpec, axis: &Axis, cache: &mut Option<(Coeffs, Coeffs)>, u: &mut [C64], w: &mut [C64], t: f64, dt: f64) {
    let n = spec.size;
    let m = axis.n;
    let dx = axis.step;
    let fresh;
    let (mid, node) = match cache {
        Some((mid, node)) => (&*mid, &*node),
        None => {
            fresh = (
                Coeffs::sample(spec, t, midpoints(axis)),
                Coeffs::sample(spec, t + 0.5 * dt, nodes(axis)),
            );
            (&fresh.0, &fresh.1)
        }
    };
    let mut avg = vec![C64::new(0.0, 0.0); n];
    let mut diff = vec![C64::new(0.0, 0.0); n];
    let mut tmp = vec![C64::new(0.0, 0.0); n];
    for i in 0..m - 1 {
        for c in 0..n {
            let (l, r) = (u[i * n + c], u[(i + 1) * n + c]);
            avg[c] = 0.5 * (l + r);
            diff[c] = (r - l) / dx;
        }
        mid.apply(i, &diff, &avg, &mut tmp);
        for c in 0..n {
            w[i * n + c] = avg[c] - 0.5 * dt * tmp[c];
        }
    }
    for i in 1..m - 1 {
        for c in 0..n {
            let (l, r) = (w[(i - 1) * n + c], w[i * n + c]);
            avg[c] = 0.5 * (l + r);
            diff[c] = (r - l) / dx;
        }
        node.apply(i, &diff, &avg, &mut tmp);
        for c in 0..n {
            u[i * n + c] -= dt * tmp[c];
        }
    }
    for c in 0..n {
        u[c] = u[n + c];
        u[(m - 1) * n + c] = u[(m - 2) * n + c];
    }
}

/// Solves from `h` (at `t = 0`) and returns the solution at each requested time.
pub fn reference_solve(spec: &SystemSpec, h: &FieldGrid, times: &[f64], p: &ReferenceParams) -> Result<Vec<FieldGrid>> {
    if h.axes.len() != 1 || spec.dim != 1 {
        return Err(CgoError::Unsupported("the reference solver is one-dimensional".into()));
    }
    let axis = h.axes[0];
    let n = spec.size;
    let limit = p.cfl * axis.step / max_speed(spec, &axis).max(1e-300);
    let dt_max = match p.dt {
        Some(dt) if dt > limit => return Err(CgoError::CflViolation { dt, limit }),
        Some(dt) => dt,
        None => limit,
    };
    let mut u: Vec<C64> = h.values.iter().flat_map(|v| v.iter().copied()).collect();
    let mut w = vec![C64::new(0.0, 0.0); (axis.n - 1) * n];
    let time_independent = spec.coefficients().time_independent();
    let mut cache = if time_independent {
        Some((
            Coeffs::sample(spec, 0.0, midpoints(&axis)),
            Coeffs::sample(spec, 0.0, nodes(&axis)),
        ))
    } else {
        None
    };
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    for &target in times {
        if target < t - 1e-14 {
            return Err(CgoError::Config("output times must be nondecreasing and nonnegative".into()));
        }
        let span = target - t;
        if span > 1e-14 {
            let steps = (span / dt_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            let dt = span / steps as f64;
            for k in 0..steps {
                lw_step(spec, &axis, &mut cache, &mut u, &mut w, t + k as f64 * dt, dt);
            }
        }
        t = target;
        out.push(FieldGrid {
            axes: vec![axis],
            t: target,
            eps: h.eps,
            values: u.chunks(n).map(CVector::from_column_slice).collect(),
        });
    }
    Ok(out)
}

/// Exact data on the reference axis, resolution checked, then solved.
pub fn solve_initial_value_problem(
    spec: &SystemSpec,
    initial: &InitialData,
    eps: f64,
    times: &[f64],
    p: &ReferenceParams,
) -> Result<Vec<FieldGrid>> {
    let axis = reference_axis(spec, eps, p)?;
    check_resolution(initial, eps, &axis)?;
    let h = eval_initial_data(initial, eps, &[axis]);
    reference_solve(spec, &h, times, p)
}

/// Trapezoidal `L²` norm over the whole axis.
pub fn l2_norm(g: &FieldGrid) -> f64 {
    let step = g.axes[0].step;
    let m = g.values.len();
    let sum: f64 = g
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| if i == 0 || i + 1 == m { 0.5 } else { 1.0 } * v.norm_squared())
        .sum();
    (sum * step).sqrt()
}

/// Growth rate `K = sup‖B‖ + sup‖∂_x A‖` over the axis at `t = 0` and `t = T`.
pub fn energy_rate(spec: &SystemSpec, axis: &Axis) -> f64 {
    let (mut kb, mut ka): (f64, f64) = (0.0, 0.0);
    for t in [0.0, spec.domain.t_final] {
        for i in 0..axis.n {
            let x = [axis.node(i)];
            kb = kb.max(spec.b(t, &x).norm());
            ka = ka.max(spec.dx_a(t, &x, 0, 0).norm());
        }
    }
    kb + ka
}

/// Largest `‖u(t)‖ / (e^{tK} ‖u(0)‖)` over the snapshots; at most `1.05` for a sane run.
pub fn energy_ratio(spec: &SystemSpec, u0: &FieldGrid, snapshots: &[FieldGrid]) -> f64 {
    let k = energy_rate(spec, &u0.axes[0]);
    let n0 = l2_norm(u0).max(1e-300);
    snapshots
        .iter()
        .map(|g| l2_norm(g) / ((g.t * k).exp() * n0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Component, ConstantAmplitude, PolynomialPhase, ReferenceSet};
    use crate::system::Domain;
    use std::sync::Arc;

    fn gaussian(n: usize, a: CVector) -> InitialData {
        InitialData {
            components: vec![Component {
                mode: if n == 1 { 0 } else { 1 },
                reference: ReferenceSet::Point(vec![0.0]),
                phase: Arc::new(PolynomialPhase {
                    x0: vec![0.0],
                    value: 0.0,
                    k: vec![1.0],
                    hessian: CMatrix::from_element(1, 1, C64::new(0.0, 1.0)),
                    cubic: vec![0.0],
                }),
                amplitude: Arc::new(ConstantAmplitude(a)),
            }],
        }
    }

    fn spec(name: &str) -> SystemSpec {
        let domain = Domain {
            center: vec![0.0],
            radius: 2.0,
            t_final: 1.0,
            speed: 1.0,
        };
        SystemSpec::builtin(name, domain).unwrap()
    }

    fn translation_error(s: &SystemSpec, data: &InitialData, eps: f64, dx_per_eps: f64) -> f64 {
        let p = ReferenceParams {
            dx_per_eps,
            ..ReferenceParams::default()
        };
        let g = solve_initial_value_problem(s, data, eps, &[1.0], &p).unwrap().remove(0);
        let mut err: f64 = 0.0;
        for (i, v) in g.values.iter().enumerate() {
            let x = g.axes[0].node(i);
            if x.abs() <= s.domain.radius_at(g.t) {
                err = err.max((v - data.eval(eps, &[x - g.t])).norm());
            }
        }
        err
    }

    #[test]
    fn advection_translates_the_data() {
        let s = spec("advection");
        let data = gaussian(1, CVector::from_element(1, C64::from(1.0)));
        let eps = 0.05;
        // Phase error (1 − ν²)(kΔx)² k T / 6 with k = 1/ε, ν = 0.95, Δx = ε/40.
        let dispersion = (1.0 - 0.95f64.powi(2)) / 1600.0 / eps / 6.0;
        let coarse = translation_error(&s, &data, eps, 40.0);
        assert!(coarse <= 1.25 * dispersion, "{coarse:.3e} vs {dispersion:.3e}");
        let fine = translation_error(&s, &data, eps, 80.0);
        assert!(fine <= 1e-4);
        assert!((3.6..=4.4).contains(&(coarse / fine)));
    }

    #[test]
    fn polarized_wave_moves_right_only() {
        let s = spec("wave2x2");
        let r = 0.5f64.sqrt();
        let data = gaussian(2, CVector::from_vec(vec![C64::from(r), C64::from(r)]));
        let out = solve_initial_value_problem(&s, &data, 0.05, &[1.0], &ReferenceParams::default()).unwrap();
        let (mut right, mut total) = (0.0, 0.0);
        for v in &out[0].values {
            right += 0.5 * (v[0] + v[1]).norm_sqr();
            total += v.norm_squared();
        }
        assert!((right / total - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn second_order_self_convergence() {
        let s = spec("variable_advection");
        let data = gaussian(1, CVector::from_element(1, C64::from(1.0)));
        let eps = 0.1;
        let base = reference_axis(&s, eps, &ReferenceParams::default()).unwrap();
        let cells = 400;
        let solve = |refine: usize| {
            let axis = Axis::new(base.min, base.node(base.n - 1), cells * refine + 1).unwrap();
            let h = eval_initial_data(&data, eps, &[axis]);
            reference_solve(&s, &h, &[1.0], &ReferenceParams::default()).unwrap().remove(0)
        };
        let (u1, u2, u4) = (solve(1), solve(2), solve(4));
        let diff = |a: &FieldGrid, b: &FieldGrid, stride: usize| {
            let mut acc: f64 = 0.0;
            for (i, v) in a.values.iter().enumerate() {
                acc = acc.max((v - &b.values[i * stride]).norm());
            }
            acc
        };
        let e1 = diff(&u1, &u2, 2);
        let e2 = diff(&u2, &u4, 2);
        let order = (e1 / e2).log2();
        assert!((1.8..=2.2).contains(&order), "{order}");
    }

    #[test]
    fn cfl_and_resolution_guards() {
        let s = spec("advection");
        let data = gaussian(1, CVector::from_element(1, C64::from(1.0)));
        let p = ReferenceParams {
            dt: Some(0.1),
            ..ReferenceParams::default()
        };
        assert!(matches!(
            solve_initial_value_problem(&s, &data, 0.05, &[1.0], &p),
            Err(CgoError::CflViolation { .. })
        ));
        let coarse = ReferenceParams {
            dx_per_eps: 1.0,
            ..ReferenceParams::default()
        };
        assert!(matches!(
            solve_initial_value_problem(&s, &data, 0.05, &[1.0], &coarse),
            Err(CgoError::ResolutionError { .. })
        ));
    }

    #[test]
    fn energy_stays_bounded() {
        let s = spec("variable_advection");
        let data = gaussian(1, CVector::from_element(1, C64::from(1.0)));
        let axis = reference_axis(&s, 0.1, &ReferenceParams::default()).unwrap();
        let h = eval_initial_data(&data, 0.1, &[axis]);
        let out = reference_solve(&s, &h, &[0.25, 0.5, 0.75, 1.0], &ReferenceParams::default()).unwrap();
        assert!(energy_ratio(&s, &h, &out) <= 1.05);
    }
}
