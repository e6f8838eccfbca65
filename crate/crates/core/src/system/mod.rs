//! Linear symmetric hyperbolic systems `∂_t u + Σ A_j ∂_j u + B u = 0`.
//!
//! A [`SystemSpec`] bundles the coefficient evaluators with the domain of
//! determinacy `{ |x - x̄| <= ρ - c t, 0 <= t <= T }` on which the Cauchy
//! problem is posed.  Spectral data of the principal symbol lives in
//! [`spectral`], sampled sanity checks in [`check`].

pub mod check;
pub mod spectral;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CgoError, Result};
use crate::linalg::{hermitian_deviation, CMatrix, C64};

pub use check::{check_assumptions, AssumptionReport, SampleGrid};
pub use spectral::{contour_projector, eigen_decompose, Mode, ModeDecomposition, Order, SymbolAt};

/// Coefficient evaluators `A_j(t,x)` and `B(t,x)` of a first-order system.
pub trait Coefficients: Send + Sync {
    fn a(&self, t: f64, x: &[f64], j: usize) -> CMatrix;
    fn b(&self, t: f64, x: &[f64]) -> CMatrix;

    /// `∂A_j/∂x_k`, when known in closed form.
    fn dx_a(&self, _t: f64, _x: &[f64], _j: usize, _k: usize) -> Option<CMatrix> {
        None
    }

    fn time_independent(&self) -> bool {
        false
    }
}

/// Domain of determinacy parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub center: Vec<f64>,
    pub radius: f64,
    pub t_final: f64,
    pub speed: f64,
}

impl Domain {
    /// Radius of the cross-section `X^t`.
    pub fn radius_at(&self, t: f64) -> f64 {
        self.radius - self.speed * t
    }

    pub fn contains(&self, t: f64, x: &[f64]) -> bool {
        dist(x, &self.center) <= self.radius_at(t) + 1e-12
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Numerical tolerances of the spectral layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub hermitian: f64,
    pub gap_min: f64,
    pub cluster: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: 1e-10,
            gap_min: 1e-6,
            cluster: 1e-9,
        }
    }
}

/// A symmetric hyperbolic system together with its domain. Immutable and cheap to clone.
#[derive(Clone)]
pub struct SystemSpec {
    pub name: String,
    pub dim: usize,
    pub size: usize,
    pub domain: Domain,
    pub tol: Tolerances,
    coeffs: Arc<dyn Coefficients>,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("size", &self.size)
            .field("domain", &self.domain)
            .finish()
    }
}

impl SystemSpec {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        size: usize,
        coeffs: Arc<dyn Coefficients>,
        domain: Domain,
    ) -> Result<Self> {
        if dim == 0 || size == 0 {
            return Err(CgoError::Config("dimension and system size must be positive".into()));
        }
        if domain.center.len() != dim {
            return Err(CgoError::Config(format!(
                "domain center has {} coordinates, expected {dim}",
                domain.center.len()
            )));
        }
        if !(domain.radius > 0.0 && domain.speed > 0.0 && domain.t_final > 0.0) {
            return Err(CgoError::Config("domain radius, speed and final time must be positive".into()));
        }
        if domain.t_final >= domain.radius / domain.speed {
            return Err(CgoError::Config(format!(
                "final time {} must be below radius/speed = {}",
                domain.t_final,
                domain.radius / domain.speed
            )));
        }
        Ok(Self {
            name: name.into(),
            dim,
            size,
            domain,
            tol: Tolerances::default(),
            coeffs,
        })
    }

    pub fn builtin(name: &str, domain: Domain) -> Result<Self> {
        let (dim, size, coeffs): (usize, usize, Arc<dyn Coefficients>) = match name {
            "advection" => (1, 1, Arc::new(Advection { speed: 1.0, damping: 0.0 })),
            "wave2x2" => (1, 2, Arc::new(Wave2x2)),
            "acoustics3" => (2, 3, Arc::new(Acoustics3)),
            "variable_advection" => (1, 1, Arc::new(VariableAdvection { amplitude: 0.3 })),
            other => return Err(CgoError::Config(format!("unknown builtin system '{other}'"))),
        };
        Self::new(name, dim, size, coeffs, domain)
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn coefficients(&self) -> &dyn Coefficients {
        self.coeffs.as_ref()
    }

    pub fn a(&self, t: f64, x: &[f64], j: usize) -> CMatrix {
        self.coeffs.a(t, x, j)
    }

    pub fn b(&self, t: f64, x: &[f64]) -> CMatrix {
        self.coeffs.b(t, x)
    }

    /// All `A_j(t,x)`.
    pub fn a_all(&self, t: f64, x: &[f64]) -> Vec<CMatrix> {
        (0..self.dim).map(|j| self.coeffs.a(t, x, j)).collect()
    }

    /// `∂A_j/∂x_k`, analytic when available, else a central difference with step 1e-5.
    pub fn dx_a(&self, t: f64, x: &[f64], j: usize, k: usize) -> CMatrix {
        if let Some(m) = self.coeffs.dx_a(t, x, j, k) {
            return m;
        }
        let h = 1e-5 * (1.0 + x[k].abs());
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        (self.coeffs.a(t, &xp, j) - self.coeffs.a(t, &xm, j)) / C64::from(2.0 * h)
    }

    /// Principal symbol `A(t,x,ξ) = Σ A_j(t,x) ξ_j` without validation.
    pub fn symbol(&self, t: f64, x: &[f64], xi: &[f64]) -> CMatrix {
        let mut m = CMatrix::zeros(self.size, self.size);
        for (j, &k) in xi.iter().enumerate() {
            if k != 0.0 {
                m += self.coeffs.a(t, x, j) * C64::from(k);
            }
        }
        m
    }

    /// Symbol at a complex covector; `A` is linear so no Taylor extension is needed.
    pub fn symbol_complex(&self, t: f64, x: &[f64], zeta: &[C64]) -> CMatrix {
        let mut m = CMatrix::zeros(self.size, self.size);
        for (j, &z) in zeta.iter().enumerate() {
            m += self.coeffs.a(t, x, j) * z;
        }
        m
    }
}

/// Evaluates the principal symbol and checks that it is Hermitian.
pub fn eval_symbol(spec: &SystemSpec, t: f64, x: &[f64], xi: &[f64]) -> Result<CMatrix> {
    let m = spec.symbol(t, x, xi);
    let deviation = hermitian_deviation(&m);
    if deviation > spec.tol.hermitian {
        return Err(CgoError::NonHermitian { deviation });
    }
    Ok(m)
}

fn scalar(v: f64) -> CMatrix {
    CMatrix::from_element(1, 1, C64::from(v))
}

/// `u_t + c u_x + b u = 0`.
#[derive(Debug, Clone, Copy)]
pub struct Advection {
    pub speed: f64,
    pub damping: f64,
}

impl Coefficients for Advection {
    fn a(&self, _t: f64, _x: &[f64], _j: usize) -> CMatrix {
        scalar(self.speed)
    }
    fn b(&self, _t: f64, _x: &[f64]) -> CMatrix {
        scalar(self.damping)
    }
    fn dx_a(&self, _t: f64, _x: &[f64], _j: usize, _k: usize) -> Option<CMatrix> {
        Some(scalar(0.0))
    }
    fn time_independent(&self) -> bool {
        true
    }
}

/// One-dimensional wave equation as a 2x2 system with `A = [[0,1],[1,0]]`.
#[derive(Debug, Clone, Copy)]
pub struct Wave2x2;

impl Coefficients for Wave2x2 {
    fn a(&self, _t: f64, _x: &[f64], _j: usize) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[C64::from(0.0), C64::from(1.0), C64::from(1.0), C64::from(0.0)])
    }
    fn b(&self, _t: f64, _x: &[f64]) -> CMatrix {
        CMatrix::zeros(2, 2)
    }
    fn dx_a(&self, _t: f64, _x: &[f64], _j: usize, _k: usize) -> Option<CMatrix> {
        Some(CMatrix::zeros(2, 2))
    }
    fn time_independent(&self) -> bool {
        true
    }
}

/// Linear acoustics in two dimensions: unknowns `(p, v_1, v_2)`.
#[derive(Debug, Clone, Copy)]
pub struct Acoustics3;

impl Coefficients for Acoustics3 {
    fn a(&self, _t: f64, _x: &[f64], j: usize) -> CMatrix {
        let mut m = CMatrix::zeros(3, 3);
        m[(0, j + 1)] = C64::from(1.0);
        m[(j + 1, 0)] = C64::from(1.0);
        m
    }
    fn b(&self, _t: f64, _x: &[f64]) -> CMatrix {
        CMatrix::zeros(3, 3)
    }
    fn dx_a(&self, _t: f64, _x: &[f64], _j: usize, _k: usize) -> Option<CMatrix> {
        Some(CMatrix::zeros(3, 3))
    }
    fn time_independent(&self) -> bool {
        true
    }
}

/// `u_t + c(x) u_x = 0` with `c(x) = 1 + amplitude·sin(x)`.
#[derive(Debug, Clone, Copy)]
pub struct VariableAdvection {
    pub amplitude: f64,
}

impl Coefficients for VariableAdvection {
    fn a(&self, _t: f64, x: &[f64], _j: usize) -> CMatrix {
        scalar(1.0 + self.amplitude * x[0].sin())
    }
    fn b(&self, _t: f64, _x: &[f64]) -> CMatrix {
        scalar(0.0)
    }
    fn dx_a(&self, _t: f64, x: &[f64], _j: usize, _k: usize) -> Option<CMatrix> {
        Some(scalar(self.amplitude * x[0].cos()))
    }
    fn time_independent(&self) -> bool {
        true
    }
}

/// Constant coefficient tables, e.g. loaded from a scenario file.
#[derive(Debug, Clone)]
pub struct ConstantCoefficients {
    pub a: Vec<CMatrix>,
    pub b: CMatrix,
}

impl Coefficients for ConstantCoefficients {
    fn a(&self, _t: f64, _x: &[f64], j: usize) -> CMatrix {
        self.a[j].clone()
    }
    fn b(&self, _t: f64, _x: &[f64]) -> CMatrix {
        self.b.clone()
    }
    fn dx_a(&self, _t: f64, _x: &[f64], j: usize, _k: usize) -> Option<CMatrix> {
        Some(CMatrix::zeros(self.a[j].nrows(), self.a[j].ncols()))
    }
    fn time_independent(&self) -> bool {
        true
    }
}
