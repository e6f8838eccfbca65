//! Sup norm of `L v^ε` over sample sets inside the tubes and a ring around them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::BeamSolution;
use crate::error::{CgoError, Result};
use crate::linalg::{CVector, RVector};
use crate::system::check::unit_directions;
use crate::system::SystemSpec;

/// Space-time sample point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
}

/// Where the tube samples are taken, in units of the cutoff radius `s₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleParams {
    pub n_t: usize,
    /// Samples per unit length along each `s` ray.
    pub density: f64,
    /// Radial extent `|s| <= ring·s₀`.
    pub ring: f64,
    /// Radial sample lines for `d₂ >= 2`.
    pub n_dir: usize,
    /// Upper bound on sampled rays per tube.
    pub max_rays: usize,
}

impl Default for SampleParams {
    fn default() -> Self {
        Self {
            n_t: 21,
            density: 200.0,
            ring: 1.1,
            n_dir: 8,
            max_rays: 9,
        }
    }
}

/// Chart samples `|s| <= ring·s₀` of every beam, restricted to `X^t`.
/// `inner` drops samples with `|s| < inner·s₀`.
pub fn tube_samples(spec: &SystemSpec, beams: &[BeamSolution], p: &SampleParams, inner: f64) -> Vec<Sample> {
    let mut out = Vec::new();
    let t_final = spec.domain.t_final;
    for beam in beams {
        let tube = &beam.tube;
        let d2 = tube.d2();
        let dirs: Vec<RVector> = if d2 == 1 {
            vec![RVector::from_element(1, 1.0), RVector::from_element(1, -1.0)]
        } else {
            unit_directions(d2, p.n_dir).into_iter().map(RVector::from_vec).collect()
        };
        let extent = p.ring * beam.cutoff.radius;
        let n_s = ((extent * p.density).ceil() as usize).max(2);
        let n_r = tube.n_rays();
        let ray_idx: Vec<usize> = if n_r <= p.max_rays {
            (0..n_r).collect()
        } else {
            (0..p.max_rays).map(|k| k * (n_r - 1) / (p.max_rays - 1)).collect()
        };
        for it in 0..p.n_t {
            let t = t_final * it as f64 / (p.n_t - 1).max(1) as f64;
            for &j in &ray_idx {
                let r = tube.r_node(j);
                let base = tube.base(t, r);
                for m in 0..=n_s {
                    let rad = extent * m as f64 / n_s as f64;
                    if rad < inner * beam.cutoff.radius {
                        continue;
                    }
                    for dir in &dirs {
                        let x = tube.chart_point_from(&base, &(dir * rad)).x;
                        let x: Vec<f64> = x.iter().copied().collect();
                        if spec.domain.contains(t, &x) {
                            out.push(Sample { t, x });
                        }
                        if m == 0 {
                            break;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Uniform samples of `X^t` for one-dimensional problems.
pub fn domain_samples_1d(spec: &SystemSpec, n_t: usize, n_x: usize) -> Vec<Sample> {
    let c = spec.domain.center[0];
    let mut out = Vec::with_capacity(n_t * (n_x + 1));
    for it in 0..n_t {
        let t = spec.domain.t_final * it as f64 / (n_t - 1).max(1) as f64;
        let rad = spec.domain.radius_at(t);
        for i in 0..=n_x {
            out.push(Sample {
                t,
                x: vec![c - rad + 2.0 * rad * i as f64 / n_x as f64],
            });
        }
    }
    out
}

/// `Σ_μ L(a^ε_μ e^{iφ_μ/ε})` at one point.
pub fn residual_at(spec: &SystemSpec, beams: &[BeamSolution], eps: f64, t: f64, x: &[f64]) -> Result<CVector> {
    let mut out = CVector::zeros(spec.size);
    for beam in beams {
        out += beam.residual(spec, eps, t, x)?;
    }
    Ok(out)
}

/// `sup |L v^ε|` over the samples; samples outside the domain of determinacy are rejected.
pub fn residual_sup(spec: &SystemSpec, beams: &[BeamSolution], eps: f64, samples: &[Sample]) -> Result<f64> {
    if let Some(bad) = samples.iter().find(|s| s.x.len() != spec.dim || !spec.domain.contains(s.t, &s.x)) {
        return Err(CgoError::OutOfChart {
            detail: format!("sample t = {}, x = {:?} lies outside the domain of determinacy", bad.t, bad.x),
        });
    }
    let norms = samples
        .par_iter()
        .map(|s| residual_at(spec, beams, eps, s.t, &s.x).map(|v| v.norm()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(norms.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{build_beam, BeamParams};
    use crate::geometry::{Component, ConstantAmplitude, PolynomialPhase, ReferenceSet};
    use crate::linalg::{CMatrix, C64};
    use crate::system::Domain;
    use crate::verify::rate::fit_rate;
    use std::sync::Arc;

    fn gaussian() -> Component {
        Component {
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
        }
    }

    fn spec(name: &str) -> SystemSpec {
        let domain = Domain {
            center: vec![0.0],
            radius: 4.0,
            t_final: 1.0,
            speed: 1.3,
        };
        SystemSpec::builtin(name, domain).unwrap()
    }

    const EPS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

    #[test]
    fn advection_residual_vanishes() {
        let s = spec("advection");
        let beam = build_beam(&s, &gaussian(), &BeamParams::default()).unwrap();
        let samples = domain_samples_1d(&s, 11, 400);
        for eps in EPS {
            assert!(residual_sup(&s, &[beam.clone()], eps, &samples).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn variable_advection_residual_rate() {
        let s = spec("variable_advection");
        let beam = build_beam(&s, &gaussian(), &BeamParams::default()).unwrap();
        let samples = domain_samples_1d(&s, 11, 800);
        let res: Vec<f64> = EPS
            .iter()
            .map(|&e| residual_sup(&s, &[beam.clone()], e, &samples).unwrap())
            .collect();
        let fit = fit_rate(&EPS, &res).unwrap();
        assert!(fit.slope >= 0.45 && fit.stderr <= 0.1, "{fit:?}");
    }

    #[test]
    fn cutoff_ring_contributions_decay_fast() {
        let s = spec("variable_advection");
        let params = BeamParams {
            chart_radius: Some(2.0),
            ..BeamParams::default()
        };
        let beam = build_beam(&s, &gaussian(), &params).unwrap();
        let ring = tube_samples(&s, &[beam.clone()], &SampleParams::default(), 0.5);
        assert!(!ring.is_empty());
        let res: Vec<f64> = EPS
            .iter()
            .map(|&e| residual_sup(&s, &[beam.clone()], e, &ring).unwrap())
            .collect();
        let fit = fit_rate(&EPS, &res).unwrap();
        assert!(fit.slope >= 3.0, "{fit:?}");
    }

    #[test]
    fn samples_outside_the_domain_are_rejected() {
        let s = spec("advection");
        let beam = build_beam(&s, &gaussian(), &BeamParams::default()).unwrap();
        let bad = [Sample { t: 1.0, x: vec![3.0] }];
        assert!(matches!(
            residual_sup(&s, &[beam], 0.1, &bad),
            Err(CgoError::OutOfChart { .. })
        ));
    }
}
