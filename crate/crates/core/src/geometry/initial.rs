//! Oscillatory Cauchy data `h^ε(x) = Σ_μ h_μ(x) e^{iψ_μ(x)/ε}`.

use std::fmt;
use std::sync::Arc;

use crate::error::{CgoError, Result};
use crate::linalg::{CMatrix, CVector, RMatrix, C64};
use crate::system::{eigen_decompose, Order, SystemSpec};

/// Complex initial phase `ψ` with `Im ψ >= 0`.
pub trait InitialPhase: Send + Sync {
    fn value(&self, x: &[f64]) -> C64;
    fn gradient(&self, x: &[f64]) -> Vec<C64>;
    fn hessian(&self, x: &[f64]) -> CMatrix;
}

/// Initial amplitude `h_μ(x)`.
pub trait InitialAmplitude: Send + Sync {
    fn value(&self, x: &[f64]) -> CVector;
}

/// `ψ(x) = v + ⟨k, y⟩ + ½ yᵀ H y + Σ_j c_j y_j³` with `y = x − x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialPhase {
    pub x0: Vec<f64>,
    pub value: f64,
    pub k: Vec<f64>,
    pub hessian: CMatrix,
    pub cubic: Vec<f64>,
}

impl PolynomialPhase {
    fn offset(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.x0).map(|(a, b)| a - b).collect()
    }

    /// Zero set of `Im ψ`: the point `x0` if `Im H` is definite, else the line
    /// through `x0` along the one-dimensional kernel of `Im H`.
    pub fn reference_direction(&self) -> Result<Option<Vec<f64>>> {
        let d = self.x0.len();
        let im = RMatrix::from_fn(d, d, |i, j| self.hessian[(i, j)].im);
        if d == 1 {
            return if im[(0, 0)] > 0.0 {
                Ok(None)
            } else {
                Err(CgoError::Config("Im of the phase Hessian must be positive".into()))
            };
        }
        let eig = im.clone().symmetric_eigen();
        let scale = eig.eigenvalues.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
        let mut kernel = Vec::new();
        for (i, &ev) in eig.eigenvalues.iter().enumerate() {
            if ev < -1e-12 * scale {
                return Err(CgoError::Config("Im of the phase Hessian must be nonnegative".into()));
            }
            if ev.abs() <= 1e-12 * scale {
                kernel.push(i);
            }
        }
        match kernel.len() {
            0 => Ok(None),
            1 => Ok(Some(eig.eigenvectors.column(kernel[0]).iter().copied().collect())),
            n => Err(CgoError::Unsupported(format!(
                "reference manifolds of dimension {n} are not supported (at most 1)"
            ))),
        }
    }
}

impl InitialPhase for PolynomialPhase {
    fn value(&self, x: &[f64]) -> C64 {
        let y = self.offset(x);
        let mut v = C64::from(self.value);
        for (i, yi) in y.iter().enumerate() {
            v += self.k[i] * yi + self.cubic.get(i).copied().unwrap_or(0.0) * yi * yi * yi;
            for (j, yj) in y.iter().enumerate() {
                v += self.hessian[(i, j)] * (0.5 * yi * yj);
            }
        }
        v
    }

    fn gradient(&self, x: &[f64]) -> Vec<C64> {
        let y = self.offset(x);
        (0..y.len())
            .map(|i| {
                let mut g = C64::from(self.k[i] + 3.0 * self.cubic.get(i).copied().unwrap_or(0.0) * y[i] * y[i]);
                for (j, yj) in y.iter().enumerate() {
                    g += self.hessian[(i, j)] * *yj;
                }
                g
            })
            .collect()
    }

    fn hessian(&self, x: &[f64]) -> CMatrix {
        let y = self.offset(x);
        let mut h = self.hessian.clone();
        for (i, yi) in y.iter().enumerate() {
            h[(i, i)] += 6.0 * self.cubic.get(i).copied().unwrap_or(0.0) * yi;
        }
        h
    }
}

/// Constant polarization vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantAmplitude(pub CVector);

impl InitialAmplitude for ConstantAmplitude {
    fn value(&self, _x: &[f64]) -> CVector {
        self.0.clone()
    }
}

/// Zero set of `Im ψ` at `t = 0`: a point, or a curve sampled on a uniform `r` grid.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSet {
    Point(Vec<f64>),
    Curve { r0: f64, dr: f64, points: Vec<Vec<f64>> },
}

impl ReferenceSet {
    /// Straight segment `x0 + r·v`, `|r| <= half_length`, with `n` samples.
    pub fn segment(x0: &[f64], direction: &[f64], half_length: f64, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(CgoError::Config("a reference curve needs at least 4 samples".into()));
        }
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dr = 2.0 * half_length / (n - 1) as f64;
        let points = (0..n)
            .map(|j| {
                let r = -half_length + j as f64 * dr;
                x0.iter().zip(direction).map(|(a, v)| a + r * v / norm).collect()
            })
            .collect();
        Ok(ReferenceSet::Curve {
            r0: -half_length,
            dr,
            points,
        })
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        match self {
            ReferenceSet::Point(p) => vec![p.clone()],
            ReferenceSet::Curve { points, .. } => points.clone(),
        }
    }

    /// Dimension `d₁` of the reference set.
    pub fn dim(&self) -> usize {
        match self {
            ReferenceSet::Point(_) => 0,
            ReferenceSet::Curve { .. } => 1,
        }
    }

    /// `(r0, dr)` of the parameter grid; a point uses a single node at `r = 0`.
    pub fn parameter_grid(&self) -> (f64, f64) {
        match self {
            ReferenceSet::Point(_) => (0.0, 1.0),
            ReferenceSet::Curve { r0, dr, .. } => (*r0, *dr),
        }
    }
}

/// One oscillatory wave component polarized on a single mode.
#[derive(Clone)]
pub struct Component {
    pub mode: usize,
    pub reference: ReferenceSet,
    pub phase: Arc<dyn InitialPhase>,
    pub amplitude: Arc<dyn InitialAmplitude>,
}

impl fmt::Debug for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Component")
            .field("mode", &self.mode)
            .field("reference", &self.reference)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct InitialData {
    pub components: Vec<Component>,
}

/// Tolerance for `Im ψ = 0` and `Im dψ = 0` on the reference set.
pub const REALITY_TOL: f64 = 1e-12;
/// Tolerance for `π h = h` on the reference set.
pub const POLARIZATION_TOL: f64 = 1e-8;

impl Component {
    /// Checks reality of `ψ, dψ` and polarization of `h` on every reference sample.
    pub fn validate(&self, spec: &SystemSpec) -> Result<()> {
        for x in self.reference.points() {
            if x.len() != spec.dim {
                return Err(CgoError::Config(format!("reference point {x:?} has wrong dimension")));
            }
            let psi = self.phase.value(&x);
            let grad = self.phase.gradient(&x);
            let scale = 1.0 + psi.norm();
            if psi.im.abs() > REALITY_TOL * scale || grad.iter().any(|g| g.im.abs() > REALITY_TOL * (1.0 + g.norm())) {
                return Err(CgoError::Config(format!(
                    "phase or its gradient is not real at reference point {x:?}"
                )));
            }
            let xi: Vec<f64> = grad.iter().map(|g| g.re).collect();
            let dec = eigen_decompose(spec, 0.0, &x, &xi, Order::Zero)?;
            let pi = &dec.mode(self.mode)?.projector;
            let h = self.amplitude.value(&x);
            if h.len() != spec.size {
                return Err(CgoError::Config(format!("amplitude has {} entries, expected {}", h.len(), spec.size)));
            }
            let violation = (&h - pi * &h).norm() / h.norm().max(1e-300);
            if violation > POLARIZATION_TOL {
                return Err(CgoError::Config(format!(
                    "amplitude is not polarized on mode {} at {x:?} (violation {violation:.3e})",
                    self.mode
                )));
            }
        }
        Ok(())
    }
}

impl InitialData {
    /// Exact `h^ε(x)`.
    pub fn eval(&self, eps: f64, x: &[f64]) -> CVector {
        let mut out: Option<CVector> = None;
        for c in &self.components {
            let term = c.amplitude.value(x) * (C64::new(0.0, 1.0) * c.phase.value(x) / eps).exp();
            out = Some(match out {
                Some(acc) => acc + term,
                None => term,
            });
        }
        out.expect("initial data has at least one component")
    }
}
