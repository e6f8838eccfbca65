//! ε-sweeps: residual, initial mismatch and `L²` error against the reference solver.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::l2::l2_error_curve;
use super::rate::{fit_rate, RateFit, EXACT_THRESHOLD};
use super::reference::{check_resolution, reference_axis, reference_solve, ReferenceParams};
use super::residual::{residual_sup, tube_samples, Sample, SampleParams};
use crate::assembly::{assemble_field, eval_initial_data, field_at, Axis, FieldGrid};
use crate::beam::BeamSolution;
use crate::error::{CgoError, Result};
use crate::geometry::InitialData;
use crate::system::SystemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepParams {
    /// Snapshot times `k T / (n_times − 1)` for the `L²` curves.
    pub n_times: usize,
    pub samples: SampleParams,
    /// Nodes of the `t = 0` mismatch grid in one dimension.
    pub mismatch_points: usize,
    pub reference: ReferenceParams,
    /// Compare against the reference solver (one dimension only).
    pub l2: bool,
    /// Also solve at `Δx/2` to estimate the reference discretization error.
    pub richardson: bool,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            n_times: 11,
            samples: SampleParams::default(),
            mismatch_points: 4001,
            reference: ReferenceParams::default(),
            l2: true,
            richardson: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub eps: f64,
    pub residual: f64,
    pub mismatch: f64,
    /// `(t, ‖u − v‖_{L²(X^t)})`.
    pub l2: Vec<(f64, f64)>,
    /// `(t, estimated ‖u_Δx − u‖_{L²(X^t)})` from the `Δx/2` solve.
    pub reference_error: Vec<(f64, f64)>,
    /// Wall-clock time; kept out of serialized reports so they stay reproducible.
    #[serde(skip)]
    pub runtime_s: f64,
}

impl SweepEntry {
    pub fn l2_sup(&self) -> Option<f64> {
        sup(&self.l2)
    }

    pub fn reference_error_sup(&self) -> Option<f64> {
        sup(&self.reference_error)
    }
}

fn sup(v: &[(f64, f64)]) -> Option<f64> {
    v.iter().map(|p| p.1).reduce(f64::max)
}

/// Outcome of a log-log fit over the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rate {
    /// Every error is at the exactness level.
    Exact { max_error: f64 },
    Fit(RateFit),
    Unavailable { reason: String },
}

impl Rate {
    fn from_errors(eps: &[f64], err: &[f64], exact_level: f64) -> Self {
        if err.is_empty() {
            return Rate::Unavailable {
                reason: "not computed".into(),
            };
        }
        let max_error = err.iter().copied().fold(0.0, f64::max);
        if max_error <= exact_level {
            return Rate::Exact { max_error };
        }
        match fit_rate(eps, err) {
            Ok(fit) => Rate::Fit(fit),
            Err(e) => Rate::Unavailable { reason: e.to_string() },
        }
    }

    pub fn slope(&self) -> Option<f64> {
        match self {
            Rate::Fit(f) => Some(f.slope),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub eps: Vec<f64>,
    pub entries: Vec<SweepEntry>,
    pub residual_rate: Rate,
    pub mismatch_rate: Rate,
    pub l2_rate: Rate,
    /// Whether every `sup_t` `L²` error is within twice the estimated reference error.
    pub l2_within_reference: Option<bool>,
}

/// Residual threshold below which the construction counts as exact.
pub const RESIDUAL_EXACT: f64 = 1e-8;
/// Mismatch threshold below which the initial trace counts as exact.
pub const MISMATCH_EXACT: f64 = 1e-10;

fn mismatch_points(spec: &SystemSpec, beams: &[BeamSolution], p: &SweepParams) -> Vec<Vec<f64>> {
    if spec.dim == 1 {
        let c = spec.domain.center[0];
        let rho = spec.domain.radius;
        let n = p.mismatch_points.max(2);
        (0..n)
            .map(|i| vec![c - rho + 2.0 * rho * i as f64 / (n - 1) as f64])
            .collect()
    } else {
        let at_zero = SampleParams { n_t: 1, ..p.samples };
        tube_samples(spec, beams, &at_zero, 0.0).into_iter().map(|s| s.x).collect()
    }
}

fn mismatch(initial: &InitialData, beams: &[BeamSolution], eps: f64, points: &[Vec<f64>]) -> Result<f64> {
    let diffs = points
        .par_iter()
        .map(|x| Ok((initial.eval(eps, x) - field_at(beams, eps, 0.0, x)?).norm()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(diffs.into_iter().fold(0.0, f64::max))
}

fn subsample(fine: &FieldGrid, coarse: &Axis) -> FieldGrid {
    FieldGrid {
        axes: vec![*coarse],
        t: fine.t,
        eps: fine.eps,
        values: (0..coarse.n).map(|i| fine.values[2 * i].clone()).collect(),
    }
}

/// `L²` curves of `v^ε` against the reference solution, plus the Richardson estimate of the
/// reference error when requested.
fn l2_curves(
    spec: &SystemSpec,
    initial: &InitialData,
    beams: &[BeamSolution],
    eps: f64,
    p: &SweepParams,
) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    let t_final = spec.domain.t_final;
    let times: Vec<f64> = (0..p.n_times.max(2))
        .map(|k| t_final * k as f64 / (p.n_times.max(2) - 1) as f64)
        .collect();
    let axis = reference_axis(spec, eps, &p.reference)?;
    check_resolution(initial, eps, &axis)?;
    let solve = |ax: Axis| {
        let h = eval_initial_data(initial, eps, &[ax]);
        reference_solve(spec, &h, &times, &p.reference)
    };
    let u = solve(axis)?;
    let v = times
        .iter()
        .map(|&t| assemble_field(beams, eps, &[axis], t))
        .collect::<Result<Vec<_>>>()?;
    let l2 = l2_error_curve(&u, &v, &spec.domain)?;
    let mut reference_error = Vec::new();
    if p.richardson {
        let fine_axis = Axis::new(axis.min, axis.node(axis.n - 1), 2 * (axis.n - 1) + 1)?;
        let fine: Vec<FieldGrid> = solve(fine_axis)?.iter().map(|g| subsample(g, &axis)).collect();
        reference_error = l2_error_curve(&u, &fine, &spec.domain)?
            .into_iter()
            .map(|(t, e)| (t, e * 4.0 / 3.0))
            .collect();
    }
    Ok((l2, reference_error))
}

fn run_entry(
    spec: &SystemSpec,
    initial: &InitialData,
    beams: &[BeamSolution],
    eps: f64,
    samples: &[Sample],
    points: &[Vec<f64>],
    p: &SweepParams,
) -> Result<SweepEntry> {
    let start = Instant::now();
    let residual = residual_sup(spec, beams, eps, samples)?;
    let mismatch = mismatch(initial, beams, eps, points)?;
    let (l2, reference_error) = if p.l2 && spec.dim == 1 {
        l2_curves(spec, initial, beams, eps, p)?
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(SweepEntry {
        eps,
        residual,
        mismatch,
        l2,
        reference_error,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs every `ε` (in parallel) and fits the three rates.
pub fn run_sweep(
    spec: &SystemSpec,
    initial: &InitialData,
    beams: &[BeamSolution],
    eps: &[f64],
    p: &SweepParams,
) -> Result<SweepResult> {
    if eps.len() < 4 || eps.windows(2).any(|w| w[1] >= w[0]) || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(CgoError::Config(
            "the ε list must be strictly decreasing, positive and have at least 4 entries".into(),
        ));
    }
    let samples = tube_samples(spec, beams, &p.samples, 0.0);
    let points = mismatch_points(spec, beams, p);
    let entries = eps
        .par_iter()
        .map(|&e| run_entry(spec, initial, beams, e, &samples, &points, p))
        .collect::<Result<Vec<_>>>()?;
    let residuals: Vec<f64> = entries.iter().map(|e| e.residual).collect();
    let mismatches: Vec<f64> = entries.iter().map(|e| e.mismatch).collect();
    let l2: Vec<f64> = entries.iter().filter_map(SweepEntry::l2_sup).collect();
    let l2_within_reference = if p.richardson && l2.len() == entries.len() {
        Some(entries.iter().all(|e| match (e.l2_sup(), e.reference_error_sup()) {
            (Some(err), Some(reference)) => err <= 2.0 * reference,
            _ => false,
        }))
    } else {
        None
    };
    let l2_rate = if l2_within_reference == Some(true) {
        Rate::Exact {
            max_error: l2.iter().copied().fold(0.0, f64::max),
        }
    } else if l2.len() == entries.len() {
        Rate::from_errors(eps, &l2, EXACT_THRESHOLD)
    } else {
        Rate::Unavailable {
            reason: "no reference solution for this dimension".into(),
        }
    };
    Ok(SweepResult {
        eps: eps.to_vec(),
        residual_rate: Rate::from_errors(eps, &residuals, RESIDUAL_EXACT),
        mismatch_rate: Rate::from_errors(eps, &mismatches, MISMATCH_EXACT),
        l2_rate,
        l2_within_reference,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_classification() {
        let eps = [0.1, 0.05, 0.025, 0.0125];
        assert!(matches!(Rate::from_errors(&eps, &[1e-12; 4], 1e-8), Rate::Exact { .. }));
        let sq: Vec<f64> = eps.iter().map(|e: &f64| 3.0 * e.sqrt()).collect();
        let slope = Rate::from_errors(&eps, &sq, 1e-8).slope().unwrap();
        assert!((slope - 0.5).abs() < 1e-12);
        assert!(matches!(Rate::from_errors(&eps, &[], 1e-8), Rate::Unavailable { .. }));
    }
}
