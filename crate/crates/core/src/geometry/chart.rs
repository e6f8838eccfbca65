//! Flow-out of the reference set and the beam chart `x = X(t,r) + Σ_j e_j(t,r) s_j`.
//!
//! Rays are sampled on a uniform `r` grid and interpolated across it with
//! Catmull-Rom splines; along each ray values are cubic Hermite in `t`.

use rayon::prelude::*;

use super::frame::{constant_frame, evolve_frame, normal_projector};
use super::initial::{Component, ReferenceSet};
use super::ray::{trace_ray, RayBounds, RayPath};
use crate::error::{CgoError, Result};
use crate::linalg::{catmull_rom_weights, normal_complement, HermiteSeries, RMatrix, RVector, TimeGrid};
use crate::system::SystemSpec;

/// Condition number of the chart Jacobian beyond which the chart is rejected.
pub const MAX_CHART_CONDITION: f64 = 1e8;
/// Rays may approach each other to this fraction of their initial spacing.
pub const EMBEDDING_FRACTION: f64 = 1e-3;

/// Rays of one component with their normal frames.
#[derive(Debug, Clone)]
pub struct Tube {
    pub mode: usize,
    pub dim: usize,
    /// Dimension `d₁` of the reference set (0 or 1).
    pub d1: usize,
    pub grid: TimeGrid,
    pub r0: f64,
    pub dr: f64,
    pub rays: Vec<RayPath>,
    /// Frames `[e_1 … e_{d₂}]` (d × d₂) along each ray.
    pub frames: Vec<HermiteSeries<RMatrix>>,
    pub chart_radius: f64,
    /// Largest `|EᵀE − I|` seen while integrating the frames.
    pub frame_deviation: f64,
}

/// Reference data interpolated at `(t, r)`; `r`-derivatives have `d₁` columns.
#[derive(Debug, Clone)]
pub struct BasePoint {
    pub x: RVector,
    pub dr_x: RMatrix,
    pub dt_x: RVector,
    pub e: RMatrix,
    pub dr_e: Option<RMatrix>,
    pub dt_e: RMatrix,
    pub xi: RVector,
    pub dr_xi: RMatrix,
    pub dt_xi: RVector,
}

/// Chart image with Jacobian `J = [∂_r x | e]` and time velocity `∂_t x` at fixed `(r, s)`.
#[derive(Debug, Clone)]
pub struct ChartPoint {
    pub x: RVector,
    pub jac: RMatrix,
    pub dt_x: RVector,
}

impl Tube {
    pub fn d2(&self) -> usize {
        self.dim - self.d1
    }

    pub fn n_rays(&self) -> usize {
        self.rays.len()
    }

    pub fn r_node(&self, j: usize) -> f64 {
        self.r0 + j as f64 * self.dr
    }

    pub fn r_range(&self) -> (f64, f64) {
        (self.r0, self.r_node(self.n_rays() - 1))
    }

    pub fn weights(&self, r: f64) -> Vec<(usize, f64, f64)> {
        catmull_rom_weights(self.n_rays(), self.r0, self.dr, r)
    }

    pub fn base(&self, t: f64, r: f64) -> BasePoint {
        let d = self.dim;
        let d2 = self.d2();
        let mut b = BasePoint {
            x: RVector::zeros(d),
            dr_x: RMatrix::zeros(d, self.d1),
            dt_x: RVector::zeros(d),
            e: RMatrix::zeros(d, d2),
            dr_e: (self.d1 == 1).then(|| RMatrix::zeros(d, d2)),
            dt_e: RMatrix::zeros(d, d2),
            xi: RVector::zeros(d),
            dr_xi: RMatrix::zeros(d, self.d1),
            dt_xi: RVector::zeros(d),
        };
        for (i, wv, wd) in self.weights(r) {
            let ray = &self.rays[i];
            let x = ray.x.eval(t);
            let xi = ray.xi.eval(t);
            let e = self.frames[i].eval(t);
            b.x += &x * wv;
            b.dt_x += ray.x.deriv(t) * wv;
            b.xi += &xi * wv;
            b.dt_xi += ray.xi.deriv(t) * wv;
            b.e += &e * wv;
            b.dt_e += self.frames[i].deriv(t) * wv;
            if self.d1 == 1 {
                b.dr_x.column_mut(0).axpy(wd, &x, 1.0);
                b.dr_xi.column_mut(0).axpy(wd, &xi, 1.0);
                if let Some(m) = b.dr_e.as_mut() {
                    *m += &e * wd;
                }
            }
        }
        b
    }

    pub fn chart_point_from(&self, b: &BasePoint, s: &RVector) -> ChartPoint {
        let d = self.dim;
        let x = &b.x + &b.e * s;
        let dt_x = &b.dt_x + &b.dt_e * s;
        let mut jac = RMatrix::zeros(d, d);
        if let Some(dr_e) = &b.dr_e {
            let col = b.dr_x.column(0) + dr_e * s;
            jac.set_column(0, &col);
        }
        jac.view_mut((0, self.d1), (d, self.d2())).copy_from(&b.e);
        ChartPoint { x, jac, dt_x }
    }

    pub fn chart_point(&self, t: f64, r: f64, s: &RVector) -> ChartPoint {
        self.chart_point_from(&self.base(t, r), s)
    }

    pub fn chart_map(&self, t: f64, r: f64, s: &RVector) -> RVector {
        let b = self.base(t, r);
        &b.x + &b.e * s
    }

    /// Chart coordinates `(r, s)` of `x` at time `t`.
    pub fn chart_invert(&self, t: f64, x: &[f64]) -> Result<(f64, RVector)> {
        let xv = RVector::from_column_slice(x);
        if self.d1 == 0 {
            let b = self.base(t, 0.0);
            let s = b.e.transpose() * (&xv - &b.x);
            return self.within_radius(0.0, s);
        }
        // Nearest ray as the initial guess.
        let (mut best, mut best_d) = (0, f64::INFINITY);
        for (j, ray) in self.rays.iter().enumerate() {
            let dd = (ray.position(t) - &xv).norm();
            if dd < best_d {
                best = j;
                best_d = dd;
            }
        }
        let mut r = self.r_node(best);
        let b = self.base(t, r);
        let mut s = b.e.transpose() * (&xv - &b.x);
        let scale = 1.0 + xv.norm();
        for _ in 0..50 {
            let cp = self.chart_point(t, r, &s);
            let f = &cp.x - &xv;
            if f.norm() <= 1e-13 * scale {
                let (lo, hi) = self.r_range();
                let tol = 1e-9 * self.dr;
                if r < lo - tol || r > hi + tol {
                    return Err(CgoError::OutOfChart {
                        detail: format!("r = {r:.6} outside the reference grid [{lo:.6}, {hi:.6}]"),
                    });
                }
                return self.within_radius(r, s);
            }
            let step = cp.jac.clone().lu().solve(&f).ok_or(CgoError::SingularJacobian { cond: f64::INFINITY })?;
            r -= step[0];
            for i in 0..self.d2() {
                s[i] -= step[1 + i];
            }
        }
        Err(CgoError::OutOfChart {
            detail: format!("chart inversion did not converge at t = {t:.4}, x = {x:?}"),
        })
    }

    fn within_radius(&self, r: f64, s: RVector) -> Result<(f64, RVector)> {
        if s.norm() > self.chart_radius {
            return Err(CgoError::OutOfChart {
                detail: format!("|s| = {:.4} exceeds the chart radius {:.4}", s.norm(), self.chart_radius),
            });
        }
        Ok((r, s))
    }

    /// Largest condition number of the chart Jacobian at `s = 0` over all nodes.
    pub fn max_condition(&self) -> f64 {
        let mut worst: f64 = 1.0;
        for k in 0..self.grid.len() {
            let t = self.grid.time(k);
            for j in 0..self.n_rays() {
                let cp = self.chart_point(t, self.r_node(j), &RVector::zeros(self.d2()));
                worst = worst.max(condition(&cp.jac));
            }
        }
        worst
    }
}

pub fn condition(m: &RMatrix) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Traces one ray per reference sample, evolves the normal frames and checks the embedding.
pub fn flow_out(spec: &SystemSpec, component: &Component, grid: TimeGrid, chart_radius: f64) -> Result<Tube> {
    let points = component.reference.points();
    let d = spec.dim;
    let d1 = component.reference.dim();
    if d1 >= d {
        return Err(CgoError::Unsupported("reference set must have positive codimension".into()));
    }
    let rays: Vec<RayPath> = points
        .par_iter()
        .map(|x0| {
            let xi0: Vec<f64> = component.phase.gradient(x0).iter().map(|g| g.re).collect();
            trace_ray(spec, component.mode, x0, &xi0, grid, RayBounds::Unbounded)
        })
        .collect::<Result<_>>()?;
    check_rays_apart(&rays, grid)?;
    let (r0, dr) = component.reference.parameter_grid();

    let (frames, frame_deviation) = match &component.reference {
        ReferenceSet::Point(_) => (vec![constant_frame(grid, &RMatrix::identity(d, d))], 0.0),
        ReferenceSet::Curve { .. } => {
            let n = rays.len();
            let stencil = move |j: usize| -> [(usize, f64); 2] {
                if j == 0 {
                    [(1, 1.0 / dr), (0, -1.0 / dr)]
                } else if j == n - 1 {
                    [(n - 1, 1.0 / dr), (n - 2, -1.0 / dr)]
                } else {
                    [(j + 1, 0.5 / dr), (j - 1, -0.5 / dr)]
                }
            };
            let tangent = |j: usize, t: f64| -> (RMatrix, RMatrix) {
                let mut tan = RVector::zeros(d);
                let mut tan_dot = RVector::zeros(d);
                for (i, w) in stencil(j) {
                    tan += rays[i].position(t) * w;
                    tan_dot += rays[i].velocity(t) * w;
                }
                (RMatrix::from_columns(&[tan]), RMatrix::from_columns(&[tan_dot]))
            };
            let results: Vec<(HermiteSeries<RMatrix>, f64)> = (0..n)
                .into_par_iter()
                .map(|j| {
                    let e0 = normal_complement(&tangent(j, 0.0).0);
                    evolve_frame(grid, &e0, |t| {
                        let (tan, tan_dot) = tangent(j, t);
                        normal_projector(&tan, &tan_dot)
                    })
                })
                .collect::<Result<_>>()?;
            let dev = results.iter().map(|r| r.1).fold(0.0, f64::max);
            (results.into_iter().map(|r| r.0).collect(), dev)
        }
    };

    let tube = Tube {
        mode: component.mode,
        dim: d,
        d1,
        grid,
        r0,
        dr,
        rays,
        frames,
        chart_radius,
        frame_deviation,
    };
    check_jacobian(&tube)?;
    Ok(tube)
}

/// Rays must stay apart by a fixed fraction of their initial spacing.
fn check_rays_apart(rays: &[RayPath], grid: TimeGrid) -> Result<()> {
    let n = rays.len();
    if n < 2 {
        return Ok(());
    }
    let spacing0 = (1..n)
        .map(|j| (&rays[j].x.values[0] - &rays[j - 1].x.values[0]).norm())
        .fold(f64::INFINITY, f64::min);
    for k in 0..grid.len() {
        for a in 0..n {
            for b in a + 1..n {
                if (&rays[a].x.values[k] - &rays[b].x.values[k]).norm() < EMBEDDING_FRACTION * spacing0 {
                    return Err(CgoError::EmbeddingFailure {
                        t: grid.time(k),
                        detail: format!("rays {a} and {b} meet"),
                    });
                }
            }
        }
    }
    Ok(())
}

/// The chart Jacobian at `s = 0` keeps its orientation and stays well conditioned.
fn check_jacobian(tube: &Tube) -> Result<()> {
    let zero = RVector::zeros(tube.d2());
    for j in 0..tube.n_rays() {
        let sign0 = tube.chart_point(0.0, tube.r_node(j), &zero).jac.determinant().signum();
        for k in 0..tube.grid.len() {
            let t = tube.grid.time(k);
            let jac = tube.chart_point(t, tube.r_node(j), &zero).jac;
            let cond = condition(&jac);
            if jac.determinant().signum() != sign0 || cond > MAX_CHART_CONDITION {
                return Err(CgoError::EmbeddingFailure {
                    t,
                    detail: format!("chart Jacobian degenerates on ray {j} (condition {cond:.3e})"),
                });
            }
        }
    }
    Ok(())
}
