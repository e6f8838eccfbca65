//! Field assembly `v^ε = Σ_μ ω_μ (a⁰_μ + εa¹_μ) e^{iφ_μ/ε}` on grids, and the exact Cauchy data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::BeamSolution;
use crate::error::{CgoError, Result};
use crate::geometry::InitialData;
use crate::linalg::CVector;

/// Cutoff profile in `u = |s|/s₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffProfile {
    /// `exp(1 − 1/(1 − u²))`.
    Bump,
    /// Identically 1 for `u <= 1/2`, smooth step to 0 at `u = 1`.
    Plateau,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub radius: f64,
    pub profile: CutoffProfile,
}

fn flat(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

impl Cutoff {
    pub fn value(&self, s_norm: f64) -> f64 {
        let u = s_norm / self.radius;
        if u >= 1.0 {
            return 0.0;
        }
        match self.profile {
            CutoffProfile::Bump => (1.0 - 1.0 / (1.0 - u * u)).exp(),
            CutoffProfile::Plateau => {
                if u <= 0.5 {
                    1.0
                } else {
                    let v = 2.0 * u - 1.0;
                    let (a, b) = (flat(1.0 - v), flat(v));
                    a / (a + b)
                }
            }
        }
    }
}

/// Uniform axis `min + k·step`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub step: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if n < 2 || max <= min {
            return Err(CgoError::Config("an axis needs at least two nodes and max > min".into()));
        }
        Ok(Self {
            min,
            step: (max - min) / (n - 1) as f64,
            n,
        })
    }

    pub fn node(&self, k: usize) -> f64 {
        self.min + k as f64 * self.step
    }
}

/// Field values on a tensor grid at one time, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub axes: Vec<Axis>,
    pub t: f64,
    pub eps: f64,
    pub values: Vec<CVector>,
}

impl FieldGrid {
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        grid_point(&self.axes, idx)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

pub fn grid_point(axes: &[Axis], mut idx: usize) -> Vec<f64> {
    let mut x = vec![0.0; axes.len()];
    for (a, axis) in axes.iter().enumerate().rev() {
        x[a] = axis.node(idx % axis.n);
        idx /= axis.n;
    }
    x
}

fn grid_len(axes: &[Axis]) -> usize {
    axes.iter().map(|a| a.n).product()
}

/// `v^ε` at one point; errors if two components have nonzero cutoff there.
pub fn field_at(beams: &[BeamSolution], eps: f64, t: f64, x: &[f64]) -> Result<CVector> {
    let n = beams.first().map(|b| b.size).unwrap_or(0);
    let mut out = CVector::zeros(n);
    let mut owner: Option<usize> = None;
    for (mu, beam) in beams.iter().enumerate() {
        if beam.locate(t, x)?.is_some() {
            if let Some(first) = owner {
                return Err(CgoError::TubeOverlap {
                    x: x.to_vec(),
                    first,
                    second: mu,
                });
            }
            owner = Some(mu);
            out += beam.field(eps, t, x)?;
        }
    }
    Ok(out)
}

pub fn assemble_field(beams: &[BeamSolution], eps: f64, axes: &[Axis], t: f64) -> Result<FieldGrid> {
    let values = (0..grid_len(axes))
        .into_par_iter()
        .map(|idx| field_at(beams, eps, t, &grid_point(axes, idx)))
        .collect::<Result<_>>()?;
    Ok(FieldGrid {
        axes: axes.to_vec(),
        t,
        eps,
        values,
    })
}

/// Exact `h^ε` on the grid.
pub fn eval_initial_data(initial: &InitialData, eps: f64, axes: &[Axis]) -> FieldGrid {
    let values = (0..grid_len(axes))
        .into_par_iter()
        .map(|idx| initial.eval(eps, &grid_point(axes, idx)))
        .collect();
    FieldGrid {
        axes: axes.to_vec(),
        t: 0.0,
        eps,
        values,
    }
}

/// `sup |h^ε − v^ε(0)|` over the grid.
pub fn initial_mismatch(initial: &InitialData, beams: &[BeamSolution], eps: f64, axes: &[Axis]) -> Result<f64> {
    let h = eval_initial_data(initial, eps, axes);
    let v = assemble_field(beams, eps, axes, 0.0)?;
    Ok(h.values.iter().zip(&v.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}
