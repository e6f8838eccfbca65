//! Property checks on a built beam and on the extended spectral calculus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rate::{fit_rate, RateFit};
use crate::amplitude::transport_generator;
use crate::beam::BeamSolution;
use crate::complex_symbol::{eikonal_defect, extended_modes_at, ComplexCovector};
use crate::error::Result;
use crate::linalg::{max_abs, CMatrix, CVector, RVector, C64};
use crate::system::{SymbolAt, SystemSpec, Tolerances};

/// `|s|` levels of the eikonal defect fit, as fractions of the cutoff radius.
const DEFECT_LEVELS: [f64; 5] = [0.16, 0.08, 0.04, 0.02, 0.01];

/// Slope of `max |∂_tφ + λ̃(d_xφ)|` against `|s|` over a few times and rays.
pub fn eikonal_defect_fit(spec: &SystemSpec, beam: &BeamSolution) -> Result<RateFit> {
    let tube = &beam.tube;
    let d2 = tube.d2();
    let (r_lo, r_hi) = tube.r_range();
    let rays = [r_lo + 0.25 * (r_hi - r_lo), 0.5 * (r_lo + r_hi), r_lo + 0.75 * (r_hi - r_lo)];
    let times = [0.2, 0.5, 0.9].map(|f| f * tube.grid.t_final());
    let dirs: Vec<RVector> = if d2 == 1 {
        vec![RVector::from_element(1, 1.0), RVector::from_element(1, -1.0)]
    } else {
        crate::system::check::unit_directions(d2, 6).into_iter().map(RVector::from_vec).collect()
    };
    let mut levels = Vec::new();
    let mut defects = Vec::new();
    for frac in DEFECT_LEVELS {
        let s = frac * beam.cutoff.radius;
        let mut worst: f64 = 0.0;
        for &t in &times {
            for &r in &rays {
                for dir in &dirs {
                    let pv = beam.jet.eval_chart(tube, t, r, &(dir * s))?;
                    let zeta = ComplexCovector::from_complex(pv.dx_phi.as_slice())?;
                    worst = worst.max(eikonal_defect(spec, tube.mode, pv.dt_phi, &zeta, t, pv.x.as_slice())?.norm());
                }
            }
        }
        levels.push(s);
        defects.push(worst);
    }
    fit_rate(&levels, &defects)
}

/// Per-beam diagnostics of the construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamDiagnostics {
    pub min_im_eig: f64,
    pub frame_deviation: f64,
    pub max_chart_condition: f64,
    pub max_polarization_violation: f64,
    pub max_necessary_condition: f64,
    pub max_corrector_residual: f64,
    pub max_identity_defect: f64,
    pub cutoff_radius: f64,
    /// `None` when the defect vanishes to rounding (exact phases).
    pub eikonal_defect_slope: Option<f64>,
    pub eikonal_defect_max: f64,
}

pub fn beam_diagnostics(spec: &SystemSpec, beam: &BeamSolution) -> Result<BeamDiagnostics> {
    let (slope, max) = match eikonal_defect_fit(spec, beam) {
        Ok(fit) => (Some(fit.slope), (fit.intercept + fit.slope * (DEFECT_LEVELS[0] * beam.cutoff.radius).ln()).exp()),
        Err(_) => (None, 0.0),
    };
    Ok(BeamDiagnostics {
        min_im_eig: beam.jet.min_im_eig,
        frame_deviation: beam.tube.frame_deviation,
        max_chart_condition: beam.tube.max_condition(),
        max_polarization_violation: beam.amplitude.paths.iter().map(|p| p.max_violation).fold(0.0, f64::max),
        max_necessary_condition: beam.amplitude.max_necessary,
        max_corrector_residual: beam.amplitude.max_solve_residual,
        max_identity_defect: beam.amplitude.max_identity_defect,
        cutoff_radius: beam.cutoff.radius,
        eikonal_defect_slope: slope,
        eikonal_defect_max: max,
    })
}

/// Phase of `a(t)` relative to the transport solution without the localization term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GouyPhase {
    pub times: Vec<f64>,
    /// `arg a(t) − arg ã(t)`, unwrapped.
    pub phase: Vec<f64>,
    /// `−∫₀ᵗ g` by the trapezoidal rule on the transport grid.
    pub integrated: Vec<f64>,
}

/// Solves `ȧ = (K + i g) a` with `refine` times smaller steps than the beam and compares phases
/// with the beam amplitude on ray `j` at every beam time node.
pub fn gouy_phase(spec: &SystemSpec, beam: &BeamSolution, j: usize, refine: usize) -> Result<GouyPhase> {
    let tube = &beam.tube;
    let path = &beam.amplitude.paths[j];
    let r = tube.r_node(j);
    let grid = tube.grid;
    let h = grid.dt / refine as f64;
    let no_gouy = |t: f64| -> Result<(CMatrix, CMatrix)> {
        let g = transport_generator(spec, tube, &beam.jet, t, r)?;
        let n = g.k.nrows();
        Ok((g.k + CMatrix::identity(n, n) * C64::new(0.0, g.gouy), g.pi))
    };
    let mut oracle: CVector = path.a.at_node(0).clone();
    let mut times = vec![0.0];
    let mut phase = vec![0.0];
    let mut integrated = vec![0.0];
    let mut gen = no_gouy(0.0)?;
    let mut unwrap = 0.0;
    for k in 0..grid.steps {
        for m in 0..refine {
            let t = grid.time(k) + m as f64 * h;
            let half = no_gouy(t + 0.5 * h)?;
            let end = no_gouy(t + h)?;
            let k1 = &gen.0 * &oracle;
            let k2 = &half.0 * (&oracle + &k1 * C64::from(0.5 * h));
            let k3 = &half.0 * (&oracle + &k2 * C64::from(0.5 * h));
            let k4 = &end.0 * (&oracle + &k3 * C64::from(h));
            oracle += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h / 6.0);
            oracle = &end.1 * &oracle;
            gen = end;
        }
        let a = path.a.at_node(k + 1);
        let raw = oracle.dotc(a).arg();
        let prev = *phase.last().unwrap_or(&0.0);
        let mut p = raw + unwrap;
        while p - prev > std::f64::consts::PI {
            p -= std::f64::consts::TAU;
            unwrap -= std::f64::consts::TAU;
        }
        while p - prev < -std::f64::consts::PI {
            p += std::f64::consts::TAU;
            unwrap += std::f64::consts::TAU;
        }
        times.push(grid.time(k + 1));
        phase.push(p);
        let last = *integrated.last().unwrap_or(&0.0);
        integrated.push(last - 0.5 * grid.dt * (path.gouy[k] + path.gouy[k + 1]));
    }
    Ok(GouyPhase {
        times,
        phase,
        integrated,
    })
}

/// Algebra of extended projectors on random Hermitian systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectorAlgebraReport {
    pub systems: usize,
    /// Largest `|Σ_l π̃_l − I|` over all systems and `η`.
    pub max_resolution_defect: f64,
    /// Smallest slope of `max_{l,l'} |π̃_l π̃_l' − δ π̃_l|` in `|η|`.
    pub min_idempotency_slope: f64,
    /// Smallest slope of `max_l |Ã π̃_l − λ̃_l π̃_l|`.
    pub min_eigen_slope: f64,
    /// Smallest slope of `|Ã − Σ λ̃_l π̃_l|`.
    pub min_spectral_sum_slope: f64,
}

fn random_hermitian(rng: &mut impl Rng, n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::from(rng.gen_range(-1.0..1.0));
        for j in i + 1..n {
            let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Remainders below this are rounding; the expansion is then exact.
const REMAINDER_FLOOR: f64 = 1e-12;

/// Slope in `|η|`, infinite when every remainder is at rounding level.
fn remainder_slope(err: &[f64]) -> Result<f64> {
    if err.iter().all(|e| *e <= REMAINDER_FLOOR) {
        return Ok(f64::INFINITY);
    }
    Ok(fit_rate(&ETA_LEVELS, err)?.slope)
}

/// `|η|` levels of the remainder fits.
pub const ETA_LEVELS: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];

pub fn projector_algebra(systems: usize, seed: u64) -> Result<ProjectorAlgebraReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ProjectorAlgebraReport {
        systems: 0,
        max_resolution_defect: 0.0,
        min_idempotency_slope: f64::INFINITY,
        min_eigen_slope: f64::INFINITY,
        min_spectral_sum_slope: f64::INFINITY,
    };
    while report.systems < systems {
        let d = rng.gen_range(1..=3);
        let n = rng.gen_range(2..=5);
        let a: Vec<CMatrix> = (0..d).map(|_| random_hermitian(&mut rng, n)).collect();
        let sym = SymbolAt::from_matrices(a, Tolerances::default());
        let xi: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dir: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        // Draws with nearly coincident eigenvalues are redrawn.
        match sym.decompose(&xi, crate::system::Order::Zero) {
            Ok((modes, gap)) if modes.len() == n && gap > 0.05 && norm > 0.1 => {}
            _ => continue,
        }
        let (mut idem, mut eig, mut sum) = (Vec::new(), Vec::new(), Vec::new());
        for &scale in &ETA_LEVELS {
            let eta: Vec<f64> = dir.iter().map(|v| scale * v / norm).collect();
            let zeta = ComplexCovector::new(xi.clone(), eta.clone())?;
            let modes = extended_modes_at(&sym, &zeta)?;
            let zc: Vec<C64> = xi.iter().zip(&eta).map(|(x, e)| C64::new(*x, *e)).collect();
            let a_tilde = sym.symbol_complex(&zc);
            let mut resolution = -CMatrix::identity(n, n);
            let mut spectral = a_tilde.clone();
            let (mut worst_idem, mut worst_eig): (f64, f64) = (0.0, 0.0);
            for (l, m) in modes.iter().enumerate() {
                resolution += &m.projector;
                spectral -= &m.projector * m.lambda;
                worst_eig = worst_eig.max(max_abs(&(&a_tilde * &m.projector - &m.projector * m.lambda)));
                for (k, q) in modes.iter().enumerate() {
                    let mut prod = &m.projector * &q.projector;
                    if k == l {
                        prod -= &m.projector;
                    }
                    worst_idem = worst_idem.max(max_abs(&prod));
                }
            }
            report.max_resolution_defect = report.max_resolution_defect.max(max_abs(&resolution));
            idem.push(worst_idem);
            eig.push(worst_eig);
            sum.push(max_abs(&spectral));
        }
        report.min_idempotency_slope = report.min_idempotency_slope.min(remainder_slope(&idem)?);
        report.min_eigen_slope = report.min_eigen_slope.min(remainder_slope(&eig)?);
        report.min_spectral_sum_slope = report.min_spectral_sum_slope.min(remainder_slope(&sum)?);
        report.systems += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::build_beam;
    use crate::config::ScenarioConfig;

    fn bundled_beam(name: &str, steps: usize) -> (SystemSpec, BeamSolution) {
        let mut cfg = ScenarioConfig::bundled(name).unwrap();
        cfg.beam.steps = steps;
        cfg.beam.lattice_steps = 20;
        let sc = cfg.build().unwrap();
        let beam = build_beam(&sc.spec, &sc.initial.components[0], &sc.config.beam).unwrap();
        (sc.spec, beam)
    }

    #[test]
    fn sheet_beam_gouy_phase_is_half_arctan() {
        let (spec, beam) = bundled_beam("acoustics3_beam", 100);
        let g = gouy_phase(&spec, &beam, 10, 4).unwrap();
        assert_eq!(g.times.len(), 101);
        for ((t, p), i) in g.times.iter().zip(&g.phase).zip(&g.integrated) {
            assert!((p + 0.5 * t.atan()).abs() < 1e-6, "t = {t}: {p}");
            assert!((p - i).abs() < 1e-4);
        }
    }

    #[test]
    fn flat_advection_has_no_gouy_phase() {
        let (spec, beam) = bundled_beam("advection_exact", 50);
        let g = gouy_phase(&spec, &beam, 0, 2).unwrap();
        assert!(g.phase.iter().all(|p| p.abs() < 1e-14));
    }

    #[test]
    fn eikonal_defect_is_cubic_in_s() {
        let (spec, beam) = bundled_beam("variable_advection", 400);
        let fit = eikonal_defect_fit(&spec, &beam).unwrap();
        assert!(fit.slope >= 2.8, "{fit:?}");
        let d = beam_diagnostics(&spec, &beam).unwrap();
        assert_eq!(d.eikonal_defect_slope, Some(fit.slope));
        assert!(d.min_im_eig > 0.0);
    }

    #[test]
    fn random_systems_satisfy_the_extended_algebra() {
        let r = projector_algebra(20, 3).unwrap();
        assert!(r.max_resolution_defect < 1e-12, "{r:?}");
        assert!(r.min_idempotency_slope >= 2.8, "{r:?}");
        assert!(r.min_eigen_slope >= 2.8, "{r:?}");
        assert!(r.min_spectral_sum_slope >= 2.8, "{r:?}");
    }
}
