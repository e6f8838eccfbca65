//! Eigenvalues, spectral projectors and their covector derivatives.
//!
//! First derivatives use the perturbation formulas
//! `∂_j λ = tr(A_j π)/m` and
//! `∂_j π_l = Σ_{l'≠l} (π_l A_j π_{l'} + π_{l'} A_j π_l)/(λ_l − λ_{l'})`.
//! The Hessian of `λ` follows exactly from `m ∂_k∂_j λ = tr(A_j ∂_k π)`;
//! second derivatives of `π` are central differences of the analytic first
//! derivatives.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::{SystemSpec, Tolerances};
use crate::error::{CgoError, Result};
use crate::linalg::{hermitian_deviation, CMatrix, RMatrix, C64};

/// Number of covector derivatives to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Order {
    Zero,
    One,
    Two,
}

/// One eigenvalue cluster. Derivative fields are empty below the requested order.
#[derive(Debug, Clone)]
pub struct Mode {
    pub lambda: f64,
    pub multiplicity: usize,
    pub projector: CMatrix,
    pub grad: Vec<f64>,
    pub hess: RMatrix,
    pub dproj: Vec<CMatrix>,
    pub d2proj: Vec<Vec<CMatrix>>,
}

#[derive(Debug, Clone)]
pub struct ModeDecomposition {
    pub t: f64,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub modes: Vec<Mode>,
    /// Smallest distance between distinct eigenvalues at `ξ/|ξ|`; infinite for a single cluster.
    pub gap: f64,
}

impl ModeDecomposition {
    pub fn mode(&self, l: usize) -> Result<&Mode> {
        self.modes.get(l).ok_or(CgoError::ModeIndex {
            mode: l,
            count: self.modes.len(),
        })
    }
}

/// The matrices `A_j` frozen at one `(t, x)`.
#[derive(Debug, Clone)]
pub struct SymbolAt {
    pub a: Vec<CMatrix>,
    pub tol: Tolerances,
}

impl SymbolAt {
    pub fn new(spec: &SystemSpec, t: f64, x: &[f64]) -> Result<Self> {
        let a = spec.a_all(t, x);
        for m in &a {
            let deviation = hermitian_deviation(m);
            if deviation > spec.tol.hermitian {
                return Err(CgoError::NonHermitian { deviation });
            }
        }
        Ok(Self { a, tol: spec.tol })
    }

    pub fn from_matrices(a: Vec<CMatrix>, tol: Tolerances) -> Self {
        Self { a, tol }
    }

    pub fn size(&self) -> usize {
        self.a[0].nrows()
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn symbol(&self, xi: &[f64]) -> CMatrix {
        let n = self.size();
        let mut m = CMatrix::zeros(n, n);
        for (aj, &k) in self.a.iter().zip(xi) {
            m += aj * C64::from(k);
        }
        m
    }

    pub fn symbol_complex(&self, zeta: &[C64]) -> CMatrix {
        let n = self.size();
        let mut m = CMatrix::zeros(n, n);
        for (aj, &z) in self.a.iter().zip(zeta) {
            m += aj * z;
        }
        m
    }

    /// Sorted eigenvalue clusters with projectors; returns the clusters and the unit-covector gap.
    fn clusters(&self, xi: &[f64]) -> Result<(Vec<(f64, usize, CMatrix)>, f64)> {
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(CgoError::Config("covector must be nonzero".into()));
        }
        let m = self.symbol(xi);
        let n = m.nrows();
        if n == 1 {
            return Ok((vec![(m[(0, 0)].re, 1, CMatrix::identity(1, 1))], f64::INFINITY));
        }
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

        let mut out: Vec<(f64, usize, CMatrix)> = Vec::new();
        let mut members: Vec<usize> = Vec::new();
        let mut gap = f64::INFINITY;
        let flush = |members: &mut Vec<usize>, out: &mut Vec<(f64, usize, CMatrix)>| {
            let mut p = CMatrix::zeros(n, n);
            let mut mean = 0.0;
            for &i in members.iter() {
                let v = eig.eigenvectors.column(i);
                p += v * v.adjoint();
                mean += eig.eigenvalues[i];
            }
            out.push((mean / members.len() as f64, members.len(), p));
            members.clear();
        };
        for (pos, &i) in order.iter().enumerate() {
            if pos > 0 {
                let prev = order[pos - 1];
                let diff = (eig.eigenvalues[i] - eig.eigenvalues[prev]) / norm;
                if diff > self.tol.cluster {
                    if diff < self.tol.gap_min {
                        return Err(CgoError::GapCollapse {
                            gap: diff,
                            xi: xi.to_vec(),
                        });
                    }
                    gap = gap.min(diff);
                    flush(&mut members, &mut out);
                }
            }
            members.push(i);
        }
        flush(&mut members, &mut out);
        Ok((out, gap))
    }

    /// Eigen-decomposition at covector `xi` with derivatives up to `order`.
    pub fn decompose(&self, xi: &[f64], order: Order) -> Result<(Vec<Mode>, f64)> {
        let (clusters, gap) = self.clusters(xi)?;
        let d = self.dim();
        let n = self.size();
        let mut modes: Vec<Mode> = clusters
            .into_iter()
            .map(|(lambda, multiplicity, projector)| Mode {
                lambda,
                multiplicity,
                projector,
                grad: Vec::new(),
                hess: RMatrix::zeros(0, 0),
                dproj: Vec::new(),
                d2proj: Vec::new(),
            })
            .collect();
        if order == Order::Zero {
            return Ok((modes, gap));
        }

        let count = modes.len();
        for l in 0..count {
            let m = modes[l].multiplicity as f64;
            let grad: Vec<f64> = self
                .a
                .iter()
                .map(|aj| (aj * &modes[l].projector).trace().re / m)
                .collect();
            let dproj: Vec<CMatrix> = self
                .a
                .iter()
                .map(|aj| {
                    let mut acc = CMatrix::zeros(n, n);
                    let pl = &modes[l].projector;
                    for (lp, other) in modes.iter().enumerate() {
                        if lp == l {
                            continue;
                        }
                        let po = &other.projector;
                        let w = 1.0 / (modes[l].lambda - other.lambda);
                        acc += (pl * aj * po + po * aj * pl) * C64::from(w);
                    }
                    acc
                })
                .collect();
            let mut hess = RMatrix::zeros(d, d);
            for j in 0..d {
                for k in 0..d {
                    hess[(j, k)] = (&self.a[j] * &dproj[k]).trace().re / m;
                }
            }
            modes[l].grad = grad;
            modes[l].hess = (&hess + hess.transpose()) * 0.5;
            modes[l].dproj = dproj;
        }
        // The derivatives of Σπ_l = I vanish; spread the rounding residue evenly.
        remove_mean(modes.iter_mut().map(|m| m.dproj.iter_mut().collect()).collect());
        if order == Order::One {
            return Ok((modes, gap));
        }

        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1e-5 * norm;
        let mut table: Vec<Vec<Vec<CMatrix>>> = vec![vec![Vec::with_capacity(d); d]; count];
        for k in 0..d {
            let mut xp = xi.to_vec();
            let mut xm = xi.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let (plus, _) = self.decompose(&xp, Order::One)?;
            let (minus, _) = self.decompose(&xm, Order::One)?;
            if plus.len() != count || minus.len() != count {
                return Err(CgoError::GapCollapse { gap, xi: xi.to_vec() });
            }
            for l in 0..count {
                for j in 0..d {
                    table[l][j].push((&plus[l].dproj[j] - &minus[l].dproj[j]) / C64::from(2.0 * h));
                }
            }
        }
        for (l, rows) in table.into_iter().enumerate() {
            let mut sym = rows.clone();
            for j in 0..d {
                for k in 0..d {
                    sym[j][k] = (&rows[j][k] + &rows[k][j]) * C64::from(0.5);
                }
            }
            modes[l].d2proj = sym;
        }
        remove_mean(modes.iter_mut().map(|m| m.d2proj.iter_mut().flatten().collect()).collect());
        Ok((modes, gap))
    }

    /// Projector onto mode `l` by trapezoidal quadrature of the resolvent on a circle.
    pub fn contour_projector(&self, xi: &[f64], l: usize, n_quad: usize, radius: Option<f64>) -> Result<CMatrix> {
        let (clusters, _) = self.clusters(xi)?;
        let count = clusters.len();
        if l >= count {
            return Err(CgoError::ModeIndex { mode: l, count });
        }
        let center = clusters[l].0;
        let local_gap = clusters
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != l)
            .map(|(_, c)| (c.0 - center).abs())
            .fold(f64::INFINITY, f64::min);
        let base = radius.unwrap_or(if local_gap.is_finite() {
            0.2 * local_gap
        } else {
            1.0 + center.abs()
        });
        let eigenvalues: Vec<f64> = clusters.iter().map(|c| c.0).collect();
        let a = self.symbol(xi);
        let mut r = base;
        for _ in 0..4 {
            match resolvent_quadrature(&a, &eigenvalues, center, r, n_quad) {
                Err(CgoError::SingularResolvent) => r *= 1.0 + 1e-3,
                other => return other,
            }
        }
        Err(CgoError::SingularResolvent)
    }
}

/// Subtracts the mode average from matching slots so that each slot sums to zero over modes.
fn remove_mean(mut slots: Vec<Vec<&mut CMatrix>>) {
    let count = slots.len();
    if count < 2 {
        return;
    }
    for i in 0..slots[0].len() {
        let mut mean = slots[0][i].clone();
        for l in 1..count {
            mean += &*slots[l][i];
        }
        mean /= C64::from(count as f64);
        for slot in slots.iter_mut() {
            *slot[i] -= &mean;
        }
    }
}

fn resolvent_quadrature(a: &CMatrix, eigenvalues: &[f64], center: f64, r: f64, n_quad: usize) -> Result<CMatrix> {
    let n = a.nrows();
    let mut acc = CMatrix::zeros(n, n);
    let id = CMatrix::identity(n, n);
    for k in 0..n_quad {
        let theta = std::f64::consts::TAU * k as f64 / n_quad as f64;
        let w = C64::from_polar(r, theta);
        let z = C64::from(center) + w;
        if eigenvalues.iter().any(|&e| (z - e).norm() < 1e-12) {
            return Err(CgoError::SingularResolvent);
        }
        let res = (&id * z - a).try_inverse().ok_or(CgoError::SingularResolvent)?;
        acc += res * w;
    }
    Ok(acc / C64::from(n_quad as f64))
}

/// Eigen-decomposition of the principal symbol at `(t, x, ξ)`.
pub fn eigen_decompose(spec: &SystemSpec, t: f64, x: &[f64], xi: &[f64], order: Order) -> Result<ModeDecomposition> {
    let sym = SymbolAt::new(spec, t, x)?;
    let (modes, gap) = sym.decompose(xi, order)?;
    Ok(ModeDecomposition {
        t,
        x: x.to_vec(),
        xi: xi.to_vec(),
        modes,
        gap,
    })
}

/// Contour-integral projector for mode `l`; the circle radius defaults to a fifth of the local gap.
pub fn contour_projector(
    spec: &SystemSpec,
    t: f64,
    x: &[f64],
    xi: &[f64],
    l: usize,
    n_quad: usize,
) -> Result<CMatrix> {
    if n_quad < 16 {
        return Err(CgoError::Config(format!("n_quad = {n_quad} is below 16")));
    }
    SymbolAt::new(spec, t, x)?.contour_projector(xi, l, n_quad, None)
}
