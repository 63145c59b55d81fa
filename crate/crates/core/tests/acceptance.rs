//! Acceptance suite: one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use darcylab_core::cell::{agree_to_digits, grid_refinement_study, PermeabilityTensor};
use darcylab_core::darcy::{solve_darcy, DarcyProblem};
use darcylab_core::geometry::HoleShape;
use darcylab_core::grid::{GridSpec, ScalarField, StaggeredVectorField};
use darcylab_core::harness::{run_sweep, run_verify, ModelName, SweepConfig, SweepReport};
use darcylab_core::micro::ScalingNorms;

struct Outcome {
    results: Vec<bool>,
}

impl Outcome {
    fn report(&mut self, id: u32, name: &str, passed: bool, detail: String) {
        let status = if passed { "PASS" } else { "FAIL" };
        println!("{status} {id:>2} {name}: {detail}");
        self.results.push(passed);
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn sweep(r: f64, model: ModelName) -> SweepReport {
    let mut cfg = SweepConfig::default();
    cfg.carreau.r = r;
    cfg.carreau.model = model;
    let start = Instant::now();
    let report = run_sweep(&cfg).expect("valid configuration");
    eprintln!("sweep r = {r} ({model:?}): {:.1} s", start.elapsed().as_secs_f64());
    report
}

fn check_value(report: &SweepReport, name: &str) -> (bool, f64) {
    report.check(name).map_or((false, f64::NAN), |c| (c.passed, c.value))
}

fn permeability(out: &mut Outcome) {
    let start = Instant::now();
    let study = grid_refinement_study(&HoleShape::disk(0.25), &[32, 64, 128], 1e-9);
    let secs = start.elapsed().as_secs_f64();
    let Ok(study) = study else {
        out.report(1, "permeability", false, format!("cell solve failed: {:?}", study.err()));
        return;
    };
    let mut ok = secs < 120.0;
    let mut worst_asym = 0.0f64;
    let mut worst_iso = 0.0f64;
    for row in study.rows.iter().filter(|r| r.n >= 64) {
        let a = row.permeability;
        let ev = a.eigenvalues();
        worst_asym = worst_asym.max(a.relative_asymmetry());
        worst_iso = worst_iso.max((a.entries[0][0] - a.entries[1][1]).abs() / a.entries[0][0]);
        ok &= ev[0] > 0.0 && ev[1] > 0.0;
    }
    ok &= worst_asym <= 1e-6 && worst_iso <= 1e-4;
    let (x, y) = (study.estimates[0].extrapolated.entries, study.estimates[1].extrapolated.entries);
    let stable = (0..2).all(|d| agree_to_digits(x[d][d], y[d][d], 3));
    ok &= stable;
    out.report(
        1,
        "permeability",
        ok,
        format!(
            "A11(128) = {:.6}, asym {worst_asym:.1e}, |A11-A22|/A11 {worst_iso:.1e}, extrapolates {:.5} / {:.5}, {secs:.1} s",
            study.rows[2].permeability.entries[0][0], x[0][0], y[0][0]
        ),
    );
}

fn manufactured_darcy(out: &mut Outcome) {
    let start = Instant::now();
    let a = PermeabilityTensor {
        entries: [[0.03, 0.0], [0.0, 0.02]],
    };
    let eta0 = 2.0;
    let p_exact = |x: f64, y: f64| (PI * x).cos() * (2.0 * PI * y).cos() + 0.5 * x * y;
    let grad = |x: f64, y: f64| {
        [
            -PI * (PI * x).sin() * (2.0 * PI * y).cos() + 0.5 * y,
            -2.0 * PI * (PI * x).cos() * (2.0 * PI * y).sin() + 0.5 * x,
        ]
    };
    let u_exact = |x: f64, y: f64| {
        let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
        [2.0 * PI * sx * sx * sy * (PI * y).cos(), -2.0 * PI * sy * sy * sx * (PI * x).cos()]
    };
    let f = |x: f64, y: f64, k: usize| grad(x, y)[k] + 0.5 * eta0 * u_exact(x, y)[k] / a.entries[k][k];
    let mut errors = Vec::new();
    for n in [32, 64, 128] {
        let g = GridSpec::walled(n, n, 1.0, 1.0).unwrap();
        let mut problem = DarcyProblem::new(a, eta0, StaggeredVectorField::from_fn(g, |x, y| f(x, y, 0), |x, y| f(x, y, 1)));
        problem.tol = 1e-12;
        let Ok(sol) = solve_darcy(&problem) else {
            out.report(9, "manufactured Darcy", false, format!("solve failed at n = {n}"));
            return;
        };
        let u = StaggeredVectorField::from_fn(g, |x, y| u_exact(x, y)[0], |x, y| u_exact(x, y)[1]);
        let mut du = sol.u.clone();
        du.axpy(-1.0, &u);
        let p = ScalarField::from_fn(g, p_exact);
        let mean = p.values.iter().sum::<f64>() / p.values.len() as f64;
        let dp: f64 = sol.p.values.iter().zip(&p.values).map(|(a, b)| (a - b + mean).powi(2)).sum();
        let pp: f64 = p.values.iter().map(|b| (b - mean).powi(2)).sum();
        errors.push([(du.dot(&du) / u.dot(&u)).sqrt(), (dp / pp).sqrt()]);
    }
    let secs = start.elapsed().as_secs_f64();
    let orders: Vec<[f64; 2]> = errors
        .windows(2)
        .map(|w| [(w[0][0] / w[1][0]).log2(), (w[0][1] / w[1][1]).log2()])
        .collect();
    let min = orders.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    out.report(
        9,
        "manufactured Darcy",
        min >= 1.7 && secs < 60.0,
        format!("observed orders (u, p) {orders:.3?}, min {min:.3}, {secs:.1} s"),
    );
}

fn main() -> ExitCode {
    let mut out = Outcome { results: Vec::new() };
    permeability(&mut out);

    let flagship = sweep(2.0, ModelName::Carreau);
    let thinning = sweep(1.5, ModelName::Carreau);
    let thickening = sweep(3.0, ModelName::Carreau);
    let constant = sweep(2.0, ModelName::Constant);
    let sweeps = [&flagship, &thinning, &thickening, &constant];
    let complete = sweeps.iter().all(|s| s.complete);
    if !complete {
        for s in sweeps.iter().filter(|s| !s.complete) {
            println!("incomplete sweep (r = {}): {:?}", s.config.carreau.r, s.failure);
        }
    }

    let worst = sweeps
        .iter()
        .flat_map(|s| s.runs.iter().map(|r| r.energy.relative_worst_slack))
        .fold(f64::INFINITY, f64::min);
    let runs: usize = sweeps.iter().map(|s| s.runs.len()).sum();
    out.report(
        2,
        "energy inequality",
        complete && runs == 12 && worst >= -1e-10,
        format!("worst relative slack {worst:.3e} over {runs} runs"),
    );

    let (gu_ok, gu) = check_value(&flagship, "grad_velocity_slope");
    let (u_ok, u) = check_value(&flagship, "velocity_slope");
    out.report(
        3,
        "velocity scaling",
        gu_ok && u_ok,
        format!("slopes |grad u| {gu:.3} in [0.7, 1.3], |u| {u:.3} in [1.7, 2.3] (vortex forcing)"),
    );

    let (g_ok, g) = check_value(&flagship, "convection_integral_slope");
    let (h_ok, h) = check_value(&flagship, "stress_integral_slope");
    out.report(4, "time integrals", g_ok && h_ok, format!("slopes G {g:.3} >= 1.5, H {h:.3} >= 0.7"));

    let decay = |s: &SweepReport| s.remainder.as_ref().map(|d| (d.decreasing, d.norms.clone()));
    let (d15, n15) = decay(&thinning).unwrap_or((false, vec![]));
    let (d3, n3) = decay(&thickening).unwrap_or((false, vec![]));
    let zero = flagship.runs.iter().map(|r| r.norms.r_lq).fold(0.0, f64::max);
    out.report(
        5,
        "stress remainder",
        d15 && d3 && zero == 0.0 && flagship.complete,
        format!("r = 1.5 {}, r = 3 {}, r = 2 max {zero:e}", sci(&n15), sci(&n3)),
    );

    let errs: Vec<f64> = flagship.runs.iter().filter_map(|r| r.darcy_error).collect();
    let (m_ok, _) = check_value(&flagship, "darcy_monotone");
    let (f_ok, last) = check_value(&flagship, "darcy_final_error");
    let others: Vec<Vec<f64>> = [&thinning, &thickening]
        .iter()
        .map(|s| s.runs.iter().filter_map(|r| r.darcy_error).collect())
        .collect();
    out.report(
        6,
        "Darcy convergence (empirical proxy)",
        m_ok && f_ok,
        format!("errors {errs:.4?}, final {last:.4} < 0.25; r = 1.5 {:.4?}, r = 3 {:.4?}", others[0], others[1]),
    );

    let mut dev = 0.0f64;
    let mut compared = 0;
    for (a, b) in flagship.runs.iter().zip(&constant.runs) {
        for (x, y) in a.norms.values().iter().zip(b.norms.values()) {
            compared += 1;
            if *x != y {
                dev = dev.max((x - y).abs() / x.abs().max(y.abs()));
            }
        }
    }
    out.report(
        7,
        "Newtonian reduction",
        complete && compared == 3 * ScalingNorms::NAMES.len() && dev <= 1e-9,
        format!("max relative difference {dev:.2e} over {compared} norms"),
    );

    let (p_ok, spread) = check_value(&flagship, "poincare_uniform");
    let ratios: Vec<f64> = flagship.runs.iter().filter_map(|r| r.poincare_ratio).collect();
    out.report(8, "Poincare uniformity", p_ok, format!("ratios {ratios:.4?}, max/min {spread:.3} <= 3"));

    manufactured_darcy(&mut out);

    let start = Instant::now();
    let verify = run_verify();
    let secs = start.elapsed().as_secs_f64();
    let names = ["div_grad_duality", "cg_monotone_a_norm", "determinism"];
    let core = names
        .iter()
        .all(|n| verify.checks.iter().any(|c| c.name == *n && c.passed));
    let rerun = sweep(2.0, ModelName::Carreau);
    let identical = rerun.to_json() == flagship.to_json();
    let failed: Vec<&str> = verify.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    out.report(
        10,
        "infrastructure",
        core && verify.all_passed() && secs < 60.0 && identical,
        format!(
            "verify {} checks in {secs:.2} s, failed {failed:?}; rerun report identical: {identical}",
            verify.checks.len()
        ),
    );

    let passed = out.results.iter().filter(|&&p| p).count();
    println!("{passed}/{} criteria passed", out.results.len());
    if passed == out.results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
