//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use cgoptics::beam::{build_beam, BeamSolution};
use cgoptics::config::{Scenario, ScenarioConfig, BUNDLED};
use cgoptics::geometry::frame::orthonormality_deviation;
use cgoptics::linalg::C64;
use cgoptics::verify::checks::{eikonal_defect_fit, gouy_phase, projector_algebra};
use cgoptics::verify::maslov::check_maslov_bounds;
use cgoptics::verify::{run_sweep, Rate, SweepResult};

const EPS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
const PROJECTOR_SEED: u64 = 3;
const MASLOV_SEED: u64 = 20240611;

struct Built {
    scenario: Scenario,
    beams: Vec<BeamSolution>,
    seconds: f64,
}

fn build(name: &str) -> Built {
    let start = Instant::now();
    let scenario = ScenarioConfig::bundled(name).unwrap().build().unwrap();
    assert_eq!(scenario.config.eps, EPS, "{name}");
    let beams = scenario
        .initial
        .components
        .iter()
        .map(|c| build_beam(&scenario.spec, c, &scenario.config.beam).unwrap())
        .collect();
    Built {
        scenario,
        beams,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn sweep(b: &Built) -> (SweepResult, f64) {
    let start = Instant::now();
    let s = &b.scenario;
    let r = run_sweep(&s.spec, &s.initial, &b.beams, &s.config.eps, &s.config.verify).unwrap();
    (r, b.seconds + start.elapsed().as_secs_f64())
}

/// `(slope, stderr)` of a fitted rate.
fn fitted(rate: &Rate) -> Option<(f64, f64)> {
    match rate {
        Rate::Fit(f) => Some((f.slope, f.stderr)),
        _ => None,
    }
}

struct Outcome {
    failed: usize,
}

impl Outcome {
    fn report(&mut self, id: &str, passed: bool, detail: String) {
        println!("criterion {id}: {} {detail}", if passed { "PASS" } else { "FAIL" });
        if !passed {
            self.failed += 1;
        }
    }
}

fn main() -> ExitCode {
    let mut out = Outcome { failed: 0 };
    let built: Vec<(&str, Built)> = BUNDLED.iter().map(|&n| (n, build(n))).collect();
    let get = |name: &str| &built.iter().find(|(n, _)| *n == name).unwrap().1;

    // 1. Exactness baseline.
    let exact = get("advection_exact");
    let (r, secs) = sweep(exact);
    let max_res = r.entries.iter().map(|e| e.residual).fold(0.0, f64::max);
    let ratios: Vec<f64> = r
        .entries
        .iter()
        .map(|e| e.l2_sup().unwrap() / e.reference_error_sup().unwrap())
        .collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    out.report(
        "1",
        max_res <= 1e-8 && max_ratio <= 2.0 && secs < 120.0,
        format!(
            "advection_exact: sup residual {max_res:.2e} (<= 1e-8), sup_t L2 / reference error {max_ratio:.3} (<= 2), {secs:.1} s (< 120 s)"
        ),
    );

    // 2. Initial mismatch rate.
    let (r, secs) = sweep(get("advection_cubic_phase"));
    let (slope, stderr) = fitted(&r.mismatch_rate).unwrap_or((f64::NAN, f64::NAN));
    out.report(
        "2",
        slope >= 0.45 && stderr <= 0.1 && secs < 120.0,
        format!("advection_cubic_phase: mismatch slope {slope:.3} (>= 0.45), stderr {stderr:.1e} (<= 0.1), {secs:.1} s (< 120 s)"),
    );

    // 3 and 4 share the variable_advection sweep.
    let var = get("variable_advection");
    let (r, secs) = sweep(var);
    let (slope, stderr) = fitted(&r.residual_rate).unwrap_or((f64::NAN, f64::NAN));
    out.report(
        "3",
        slope >= 0.45 && stderr <= 0.1 && secs < 300.0,
        format!("variable_advection: residual slope {slope:.3} (>= 0.45), stderr {stderr:.1e} (<= 0.1), {secs:.1} s (< 300 s)"),
    );
    let (slope, _) = fitted(&r.l2_rate).unwrap_or((f64::NAN, f64::NAN));
    let dx_per_eps = var.scenario.config.verify.reference.dx_per_eps;
    out.report(
        "4",
        slope >= 0.45 && dx_per_eps == 40.0 && secs < 600.0,
        format!("variable_advection: sup_t L2 slope {slope:.3} (>= 0.45), dx = eps/{dx_per_eps}, {secs:.1} s (< 600 s)"),
    );

    // 5. Riccati positivity and closed form.
    let ac = get("acoustics3_beam");
    let beam = &ac.beams[0];
    let mut min_eig = f64::INFINITY;
    let mut closed_form_err: f64 = 0.0;
    for series in &beam.jet.hessian {
        for k in 0..=beam.tube.grid.steps {
            let t = beam.tube.grid.time(k);
            let phi = series.at_node(k);
            min_eig = min_eig.min(phi[(0, 0)].im);
            let expected = C64::new(t, 1.0) / (1.0 + t * t);
            closed_form_err = closed_form_err.max((phi[(0, 0)] - expected).norm());
        }
    }
    min_eig = min_eig.min(beam.jet.min_im_eig);
    out.report(
        "5",
        min_eig > 0.0 && closed_form_err <= 1e-6,
        format!("acoustics3_beam: min eig Im Phi {min_eig:.3} (> 0), |Phi - (t+i)/(1+t^2)| {closed_form_err:.1e} (<= 1e-6)"),
    );

    // 6. Eikonal defect order.
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["acoustics3_beam", "variable_advection"] {
        let b = get(name);
        let slope = eikonal_defect_fit(&b.scenario.spec, &b.beams[0]).map_or(f64::NAN, |f| f.slope);
        ok &= slope >= 2.8;
        parts.push(format!("{name} slope {slope:.3}"));
    }
    out.report("6", ok, format!("eikonal defect in |s|: {} (>= 2.8)", parts.join(", ")));

    // 7. Extended projector algebra.
    let alg = projector_algebra(20, PROJECTOR_SEED).unwrap();
    let min_slope = alg
        .min_idempotency_slope
        .min(alg.min_eigen_slope)
        .min(alg.min_spectral_sum_slope);
    out.report(
        "7",
        alg.max_resolution_defect <= 1e-12 && min_slope >= 2.8,
        format!(
            "{} random Hermitian systems: |sum pi - I| {:.1e} (<= 1e-12), remainder slopes in |eta| >= {min_slope:.3} (>= 2.8)",
            alg.systems, alg.max_resolution_defect
        ),
    );

    // 8. Frame orthonormality, recomputed from the stored frames.
    let mut worst: f64 = 0.0;
    for (_, b) in &built {
        for beam in &b.beams {
            worst = worst.max(beam.tube.frame_deviation);
            for f in &beam.tube.frames {
                worst = f.values.iter().map(orthonormality_deviation).fold(worst, f64::max);
            }
        }
    }
    out.report(
        "8",
        worst <= 1e-8,
        format!("all bundled scenarios: max |E^T E - I| {worst:.1e} (<= 1e-8)"),
    );

    // 9. Polarization and Gouy phase.
    let mut violation: f64 = 0.0;
    for name in ["wave2x2_beam", "acoustics3_beam"] {
        for beam in &get(name).beams {
            violation = beam.amplitude.paths.iter().map(|p| p.max_violation).fold(violation, f64::max);
        }
    }
    let n_rays = beam.tube.n_rays();
    let mut gouy_err: f64 = 0.0;
    for j in [0, n_rays / 2, n_rays - 1] {
        let g = gouy_phase(&ac.scenario.spec, beam, j, 16).unwrap();
        gouy_err = g
            .times
            .iter()
            .zip(&g.phase)
            .map(|(t, p)| (p + 0.5 * t.atan()).abs())
            .fold(gouy_err, f64::max);
    }
    out.report(
        "9",
        violation <= 1e-6 && gouy_err <= 1e-4,
        format!(
            "max |(I - pi)a|/|a| {violation:.1e} (<= 1e-6); acoustics3_beam Gouy phase vs -arctan(t)/2 against dt/16 oracle {gouy_err:.1e} (<= 1e-4)"
        ),
    );

    // 10. Localization bounds.
    let m = check_maslov_bounds(1000, MASLOV_SEED);
    let min_far = m.far.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let min_near = m.near.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    out.report(
        "10",
        m.passed,
        format!(
            "{} instances: far bound k = 1,2,3 min margin {min_far:.2e}, near bound q = 2, k = 1,3 min margin {min_near:.2e} (>= 0)",
            m.instances
        ),
    );

    if out.failed == 0 {
        println!("acceptance: all 10 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria fail", out.failed);
        ExitCode::FAILURE
    }
}
