//! Sampled checks of the exponential localization bounds.
//!
//! Far bound: `ε^{−k}|f e^{iφ/ε}| <= (k/e)^k sup_S |f/χ^k|` on sets where `χ > 0`.
//! Near bound (`χ >= c|s|^q`, `q = 2`, one transverse variable):
//! `|(f − Σ_{j<k} f⁽ʲ⁾(0)sʲ/j!) e^{iφ/ε}| <= ε^{k/2} sup_A |f⁽ᵏ⁾| C_k`, `C_k = max_v |v|^k e^{−cv²}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// `Σ_m c_m sin(ω_m s + θ_m) + c₀`, differentiable in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigSum {
    pub c0: f64,
    pub terms: Vec<(f64, f64, f64)>,
}

impl TrigSum {
    pub fn random(rng: &mut impl Rng) -> Self {
        Self {
            c0: rng.gen_range(-1.0..1.0),
            terms: (0..3)
                .map(|_| {
                    (
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(0.2..3.0),
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect(),
        }
    }

    /// `k`-th derivative.
    pub fn deriv(&self, k: usize, s: f64) -> f64 {
        let shift = k as f64 * std::f64::consts::FRAC_PI_2;
        let mut out = if k == 0 { self.c0 } else { 0.0 };
        for &(c, w, th) in &self.terms {
            out += c * w.powi(k as i32) * (w * s + th + shift).sin();
        }
        out
    }
}

/// Smallest relative margins `1 − lhs/rhs` per tested `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaslovReport {
    pub instances: usize,
    /// `(k, min margin)` of the far bound.
    pub far: Vec<(usize, f64)>,
    /// `(k, min margin)` of the near bound.
    pub near: Vec<(usize, f64)>,
    pub passed: bool,
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Margin of the far bound for one instance: `f` on points where `χ = χ_min + b x²`.
pub fn far_margin(f: &TrigSum, chi_min: f64, b: f64, eps: f64, k: usize, points: &[f64]) -> f64 {
    let chi = |x: f64| chi_min + b * x * x;
    let sup = points.iter().map(|&x| (f.deriv(0, x) / chi(x).powi(k as i32)).abs()).fold(0.0, f64::max);
    let kf = k as f64;
    let bound = kf.powf(kf) * (-kf).exp() * sup;
    let lhs = points
        .iter()
        .map(|&x| eps.powf(-kf) * f.deriv(0, x).abs() * (-chi(x) / eps).exp())
        .fold(0.0, f64::max);
    if bound == 0.0 {
        return if lhs == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    1.0 - lhs / bound
}

/// Margin of the near bound on `A = [−a, a]` with `χ = c s² + b s⁴`.
pub fn near_margin(f: &TrigSum, a: f64, c: f64, b: f64, eps: f64, k: usize, n: usize) -> f64 {
    let kf = k as f64;
    let taylor: Vec<f64> = (0..k)
        .map(|j| f.deriv(j, 0.0) / (1..=j).map(|m| m as f64).product::<f64>())
        .collect();
    let mut lhs: f64 = 0.0;
    let mut sup_dk: f64 = 0.0;
    for i in 0..=n {
        let s = -a + 2.0 * a * i as f64 / n as f64;
        let poly: f64 = taylor.iter().enumerate().map(|(j, cj)| cj * s.powi(j as i32)).sum();
        let chi = c * s * s + b * s.powi(4);
        lhs = lhs.max((f.deriv(0, s) - poly).abs() * (-chi / eps).exp());
        sup_dk = sup_dk.max(f.deriv(k, s).abs());
    }
    let c_k = (kf / (2.0 * c)).powf(kf / 2.0) * (-kf / 2.0).exp();
    1.0 - lhs / (eps.powf(kf / 2.0) * sup_dk * c_k)
}

/// Runs `instances` random `(f, φ, ε)` draws per bound with a fixed seed.
pub fn check_maslov_bounds(instances: usize, seed: u64) -> MaslovReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut far: Vec<(usize, f64)> = [1, 2, 3].iter().map(|&k| (k, f64::INFINITY)).collect();
    let mut near: Vec<(usize, f64)> = [1, 3].iter().map(|&k| (k, f64::INFINITY)).collect();
    let points: Vec<f64> = (0..=200).map(|i| -1.0 + i as f64 / 100.0).collect();
    for _ in 0..instances {
        let f = TrigSum::random(&mut rng);
        let chi_min = log_uniform(&mut rng, 1e-2, 1.0);
        let b = rng.gen_range(0.0..2.0);
        let eps = log_uniform(&mut rng, 1e-3, 1.0);
        for entry in far.iter_mut() {
            entry.1 = entry.1.min(far_margin(&f, chi_min, b, eps, entry.0, &points));
        }
        let a = rng.gen_range(0.5..2.0);
        let c = rng.gen_range(0.2..2.0);
        let b4 = rng.gen_range(0.0..1.0);
        for entry in near.iter_mut() {
            entry.1 = entry.1.min(near_margin(&f, a, c, b4, eps, entry.0, 4000));
        }
    }
    let passed = far.iter().chain(&near).all(|(_, m)| *m >= 0.0);
    MaslovReport {
        instances,
        far,
        near,
        passed,
    }
}
