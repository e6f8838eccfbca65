//! Sampled validation of hermiticity, spectral separation and the boundary speed condition.

use serde::{Deserialize, Serialize};

use super::spectral::{Order, SymbolAt};
use super::SystemSpec;
use crate::error::CgoError;
use crate::linalg::{hermitian_deviation, CMatrix, C64};
use nalgebra::SymmetricEigen;

/// Sample counts: time levels, spatial points per axis (or radial shells), covector directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleGrid {
    pub n_t: usize,
    pub n_x: usize,
    pub n_dir: usize,
}

impl Default for SampleGrid {
    fn default() -> Self {
        Self {
            n_t: 5,
            n_x: 9,
            n_dir: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub max_hermitian_deviation: f64,
    pub min_gap: f64,
    pub min_boundary_speed_eigenvalue: f64,
    pub hermitian_ok: bool,
    pub gap_ok: bool,
    pub boundary_speed_ok: bool,
    pub samples: usize,
    pub passed: bool,
}

/// Unit covector directions: `±1` in 1D, equispaced angles in 2D, a Fibonacci sphere in 3D,
/// and normalized low-discrepancy points otherwise.
pub fn unit_directions(d: usize, n: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|k| {
                let a = std::f64::consts::TAU * (k as f64 + 0.5) / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => {
            const PRIMES: [f64; 8] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];
            (1..=n)
                .map(|k| {
                    let v: Vec<f64> = (0..d)
                        .map(|j| 2.0 * radical_inverse(k, PRIMES[j % PRIMES.len()]) - 1.0)
                        .collect();
                    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-12);
                    v.iter().map(|c| c / norm).collect()
                })
                .collect()
        }
    }
}

fn radical_inverse(mut k: usize, base: f64) -> f64 {
    let b = base as usize;
    let mut f = 1.0 / base;
    let mut out = 0.0;
    while k > 0 {
        out += f * (k % b) as f64;
        k /= b;
        f /= base;
    }
    out
}

/// Interior points of the ball `|x - center| <= radius` plus boundary points with outward normals.
fn ball_samples(center: &[f64], radius: f64, n_x: usize, n_dir: usize) -> (Vec<Vec<f64>>, Vec<(Vec<f64>, Vec<f64>)>) {
    let d = center.len();
    let dirs = unit_directions(d, n_dir.max(2));
    let mut interior = vec![center.to_vec()];
    for shell in 1..=n_x.max(1) {
        let r = radius * shell as f64 / n_x.max(1) as f64;
        for dir in &dirs {
            interior.push(center.iter().zip(dir).map(|(c, u)| c + r * u).collect());
        }
    }
    let boundary = dirs
        .iter()
        .map(|u| (center.iter().zip(u).map(|(c, v)| c + radius * v).collect(), u.clone()))
        .collect();
    (interior, boundary)
}

/// Checks hermiticity, the spectral gap and `cI + Σ n_j A_j >= 0` on the lateral boundary.
pub fn check_assumptions(spec: &SystemSpec, grid: SampleGrid) -> AssumptionReport {
    let dom = &spec.domain;
    let dirs = unit_directions(spec.dim, grid.n_dir);
    let mut max_dev: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    let mut min_speed = f64::INFINITY;
    let mut samples = 0;
    let mut gap_failed = false;
    for it in 0..grid.n_t.max(1) {
        let t = if grid.n_t <= 1 {
            0.0
        } else {
            dom.t_final * it as f64 / (grid.n_t - 1) as f64
        };
        let radius = dom.radius_at(t);
        let (interior, boundary) = ball_samples(&dom.center, radius, grid.n_x, grid.n_dir);
        for x in &interior {
            samples += 1;
            let a = spec.a_all(t, x);
            for m in &a {
                max_dev = max_dev.max(hermitian_deviation(m));
            }
            let sym = SymbolAt::from_matrices(a, spec.tol);
            for xi in &dirs {
                match sym.decompose(xi, Order::Zero) {
                    Ok((_, gap)) => min_gap = min_gap.min(gap),
                    Err(CgoError::GapCollapse { gap, .. }) => {
                        gap_failed = true;
                        min_gap = min_gap.min(gap);
                    }
                    Err(_) => gap_failed = true,
                }
            }
        }
        for (x, normal) in &boundary {
            let n = spec.size;
            let mut m = CMatrix::identity(n, n) * C64::from(dom.speed);
            for (j, &nj) in normal.iter().enumerate() {
                m += spec.a(t, x, j) * C64::from(nj);
            }
            let h = (&m + m.adjoint()) * C64::from(0.5);
            let e = if n == 1 {
                h[(0, 0)].re
            } else {
                SymmetricEigen::new(h).eigenvalues.min()
            };
            min_speed = min_speed.min(e);
        }
    }
    let hermitian_ok = max_dev <= spec.tol.hermitian;
    let gap_ok = !gap_failed && min_gap >= spec.tol.gap_min;
    let boundary_speed_ok = min_speed >= -1e-12;
    AssumptionReport {
        max_hermitian_deviation: max_dev,
        min_gap,
        min_boundary_speed_eigenvalue: min_speed,
        hermitian_ok,
        gap_ok,
        boundary_speed_ok,
        samples,
        passed: hermitian_ok && gap_ok && boundary_speed_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{ConstantCoefficients, Domain};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn domain(d: usize, speed: f64) -> Domain {
        Domain {
            center: vec![0.0; d],
            radius: 3.0,
            t_final: 1.0,
            speed,
        }
    }

    #[test]
    fn advection_passes_with_fast_enough_cone() {
        let spec = SystemSpec::builtin("advection", domain(1, 1.0)).unwrap();
        let r = check_assumptions(&spec, SampleGrid::default());
        assert!(r.passed);
        assert!(r.min_gap.is_infinite());
    }

    #[test]
    fn advection_fails_with_slow_cone() {
        let spec = SystemSpec::builtin("advection", domain(1, 0.5)).unwrap();
        let r = check_assumptions(&spec, SampleGrid::default());
        assert!(!r.boundary_speed_ok);
        assert!(!r.passed);
    }

    #[test]
    fn acoustics3_unit_gap() {
        let spec = SystemSpec::builtin("acoustics3", domain(2, 1.0)).unwrap();
        let r = check_assumptions(&spec, SampleGrid::default());
        assert!(r.passed);
        assert_abs_diff_eq!(r.min_gap, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn non_hermitian_flagged() {
        let a = CMatrix::from_row_slice(2, 2, &[C64::from(0.0), C64::from(1.0), C64::from(0.0), C64::from(0.0)]);
        let spec = SystemSpec::new(
            "bad",
            1,
            2,
            Arc::new(ConstantCoefficients { a: vec![a], b: CMatrix::zeros(2, 2) }),
            domain(1, 1.0),
        )
        .unwrap();
        let r = check_assumptions(&spec, SampleGrid::default());
        assert!(!r.hermitian_ok);
        assert!(!r.passed);
    }

    #[test]
    fn directions_are_unit() {
        for d in 1..6 {
            for u in unit_directions(d, 20) {
                assert_abs_diff_eq!(u.iter().map(|v| v * v).sum::<f64>(), 1.0, epsilon = 1e-12);
            }
        }
    }
}
