//! Property suite on 16 x 16 grids.

use serde::{Deserialize, Serialize};

use super::analysis::{fit_rate, zero_extend};
use super::sweep::{Check, ENERGY_SLACK_TOL};
use crate::cell::permeability;
use crate::darcy::{solve_darcy, DarcyProblem};
use crate::error::Result;
use crate::geometry::{wall_faces, DomainSpec, HoleShape};
use crate::grid::{
    cg_solve_monitored, cg_solve_with, field_norm, CgOptions, GridSpec, Operators, ScalarField,
    SparseMatrix, StaggeredVectorField,
};
use crate::cell::PermeabilityTensor;
use crate::micro::{run_micro, CarreauParams, ForcingKind, MicroConfig, MicroRun, ViscosityModel};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Deterministic rough test data.
fn wiggle(k: usize, seed: f64) -> f64 {
    ((k as f64 + 1.0) * (0.7548776662 + seed)).sin() + 0.3 * ((k as f64) * 1.3247 * seed).cos()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn duality() -> Check {
    let g = GridSpec::walled(16, 16, 1.0, 1.0).unwrap();
    let ops = Operators::new(g);
    let walls = wall_faces(&g);
    let u: Vec<f64> = (0..g.n_faces())
        .map(|f| if walls[f] { 0.0 } else { wiggle(f, 0.1) })
        .collect();
    let p: Vec<f64> = (0..g.n_cells()).map(|c| wiggle(c, 0.37)).collect();
    let vol = g.cell_volume();
    let lhs: f64 = ops.div.mul_vec(&u).iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() * vol;
    let rhs: f64 = -ops.grad.mul_vec(&p).iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() * vol;
    let scale = vol * u.iter().map(|x| x.abs()).sum::<f64>() * p.iter().fold(0.0f64, |m, x| m.max(x.abs())) / g.hx();
    let err = (lhs - rhs).abs() / scale;
    Check::new("div_grad_duality", err <= 1e-12, err, "<= 1e-12 relative")
}

fn cg_monotone() -> Check {
    let g = GridSpec::walled(16, 16, 1.0, 1.0).unwrap();
    let ops = Operators::new(g);
    let a = ops
        .neg_laplacian()
        .add_scaled(1.0, &SparseMatrix::identity(g.n_faces()))
        .unwrap();
    let b: Vec<f64> = (0..g.n_faces()).map(|f| wiggle(f, 0.21)).collect();
    let (exact, _) = cg_solve_with(&a, &b, None, &CgOptions::new(1e-15, 10_000)).unwrap();
    let a_norm = |x: &[f64]| {
        let e: Vec<f64> = x.iter().zip(&exact).map(|(x, y)| x - y).collect();
        a.mul_vec(&e).iter().zip(&e).map(|(p, q)| p * q).sum::<f64>().sqrt()
    };
    let mut errors = vec![a_norm(&vec![0.0; b.len()])];
    let opts = CgOptions::new(1e-10, 10_000);
    let run = cg_solve_monitored(&a, &b, None, &opts, |_, x| errors.push(a_norm(x)));
    let worst = errors
        .windows(2)
        .map(|w| (w[1] - w[0]) / errors[0])
        .fold(f64::MIN, f64::max);
    let ok = run.is_ok() && worst <= 1e-14;
    Check::new("cg_monotone_a_norm", ok, worst, "error_A non-increasing")
}

fn viscosity_bounds() -> Check {
    let mut worst = 0.0f64;
    let mut ok = true;
    for r in [1.5, 2.0, 3.0] {
        let p = CarreauParams {
            eta0: 2.0,
            eta_inf: 0.5,
            lambda: 1.0,
            r,
        };
        let mut prev = p.eta(0.0);
        for k in 0..60 {
            let s = 10f64.powf(-6.0 + 0.2 * k as f64);
            let e = p.eta(s);
            let step = e - prev;
            ok &= match r.partial_cmp(&2.0).unwrap() {
                std::cmp::Ordering::Less => step <= 0.0 && e >= p.eta_inf && e <= p.eta0,
                std::cmp::Ordering::Equal => e == p.eta0,
                std::cmp::Ordering::Greater => step >= 0.0 && e >= p.eta0,
            };
            worst = worst.max(if r < 2.0 { step } else { -step });
            prev = e;
        }
    }
    Check::new("viscosity_monotone_bounded", ok, worst, "monotone in |D|^2, within bounds")
}

fn small_domain() -> DomainSpec {
    DomainSpec {
        lx: 0.5,
        ly: 0.5,
        epsilon: 0.25,
        hole: HoleShape::disk(0.25),
        cells_per_eps: 8,
    }
}

fn small_run(viscosity: ViscosityModel, forcing: ForcingKind) -> Result<MicroRun> {
    let mut cfg = MicroConfig::new(small_domain(), viscosity, forcing);
    cfg.t_end = 0.05;
    run_micro(&cfg)
}

fn carreau(r: f64) -> ViscosityModel {
    ViscosityModel::Carreau(CarreauParams {
        eta0: 1.0,
        eta_inf: 0.5,
        lambda: 1.0,
        r,
    })
}

fn darcy_checks(out: &mut Vec<Check>) {
    let g = GridSpec::walled(16, 16, 1.0, 1.0).unwrap();
    let a = PermeabilityTensor {
        entries: [[0.03, 0.005], [0.005, 0.02]],
    };
    let f = StaggeredVectorField::from_fn(g, |x, y| (3.0 * y).sin() + x, |x, y| (2.0 * x).cos() * y);
    let solve = |f: StaggeredVectorField| {
        let mut pr = DarcyProblem::new(a, 1.0, f);
        pr.tol = 1e-13;
        solve_darcy(&pr)
    };
    let mut f3 = f.clone();
    f3.scale(3.0);
    match (solve(f.clone()), solve(f3)) {
        (Ok(s1), Ok(s3)) => {
            let mut d = s3.u.clone();
            d.axpy(-3.0, &s1.u);
            let mut dp = s3.p.values.clone();
            dp.iter_mut().zip(&s1.p.values).for_each(|(x, y)| *x -= 3.0 * y);
            let eu = d.max_abs() / s3.u.max_abs();
            let ep = dp.iter().fold(0.0f64, |m, x| m.max(x.abs())) / s3.p.max_abs();
            let err = eu.max(ep);
            out.push(Check::new("darcy_scaling", err <= 1e-12, err, "<= 1e-12 relative"));
        }
        _ => out.push(Check::new("darcy_scaling", false, f64::NAN, "<= 1e-12 relative").noted("solve failed")),
    }
    let phi = ScalarField::from_fn(g, |x, y| x * x - (2.0 * y).sin());
    let grad = crate::grid::gradient(&phi);
    match solve(grad.clone()) {
        Ok(s) => {
            let err = s.u.max_abs() / grad.max_abs();
            out.push(Check::new("darcy_gradient_absorbed", err <= 1e-9, err, "|u| <= 1e-9 |f|"));
        }
        Err(e) => out.push(Check::new("darcy_gradient_absorbed", false, f64::NAN, "").noted(&e.to_string())),
    }
}

pub fn run_verify() -> VerifyReport {
    let mut checks = vec![duality(), cg_monotone(), viscosity_bounds()];

    let rate = fit_rate(&[(0.25, 0.0625), (0.125, 0.015625), (0.0625, 0.00390625)]);
    let dev = rate.map_or(f64::NAN, |f| (f.slope - 2.0).abs());
    checks.push(Check::new("fit_rate_exact", dev <= 1e-12, dev, "|slope - 2| <= 1e-12"));

    match permeability(&HoleShape::disk(0.25), 16, 1e-9) {
        Ok((a, _)) => {
            let asym = a.relative_asymmetry();
            let iso = rel(a.entries[0][0], a.entries[1][1]);
            let ev = a.eigenvalues();
            let ok = asym <= 1e-6 && iso <= 1e-4 && ev[0] > 0.0 && ev[1] > 0.0;
            checks.push(Check::new("cell_symmetric_positive", ok, asym.max(iso), "asym <= 1e-6, A11 = A22 to 1e-4"));
        }
        Err(e) => checks.push(Check::new("cell_symmetric_positive", false, f64::NAN, "").noted(&e.to_string())),
    }

    darcy_checks(&mut checks);

    let zero = small_run(carreau(1.5), ForcingKind::Constant { fx: 0.0, fy: 0.0 });
    let z = zero.as_ref().map_or(f64::NAN, |r| r.state.u.max_abs());
    checks.push(Check::new("zero_forcing_stays_at_rest", z == 0.0, z, "== 0"));

    let vortex = ForcingKind::Vortex { amplitude: 1.0 };
    let runs = [
        small_run(carreau(1.5), vortex),
        small_run(carreau(3.0), vortex),
        small_run(carreau(2.0), vortex),
        small_run(ViscosityModel::Constant { eta: 1.0 }, vortex),
        small_run(carreau(1.5), vortex),
    ];
    if let Some(e) = runs.iter().find_map(|r| r.as_ref().err()) {
        checks.push(Check::new("micro_runs", false, f64::NAN, "").noted(&e.to_string()));
        return VerifyReport { checks };
    }
    let runs: Vec<&MicroRun> = runs.iter().map(|r| r.as_ref().unwrap()).collect();

    let slack = runs[..2]
        .iter()
        .map(|r| r.ledger.relative_worst_slack())
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::new("energy_inequality", slack >= -ENERGY_SLACK_TOL, slack, ">= -1e-10"));

    let div = runs.iter().map(|r| r.summary.max_divergence).fold(0.0, f64::max);
    checks.push(Check::new("incompressibility", div <= 1e-8, div, "<= 1e-8"));

    let dev = runs[2]
        .norms
        .values()
        .iter()
        .zip(runs[3].norms.values())
        .map(|(a, b)| if *a == b { 0.0 } else { rel(*a, b) })
        .fold(0.0, f64::max);
    checks.push(Check::new("newtonian_reduction", dev <= 1e-9, dev, "<= 1e-9 relative"));

    let ops = Operators::new(runs[0].state.u.grid);
    let defect = runs[..2]
        .iter()
        .map(|r| r.integrals.decomposition_defect(&ops) / r.integrals.h.max_abs())
        .fold(0.0, f64::max);
    checks.push(Check::new("stress_decomposition", defect <= 1e-12, defect, "<= 1e-12 relative"));

    let ext = zero_extend(&runs[0].state.u, &runs[0].faces);
    let dn = ext.map_or(f64::NAN, |e| {
        let a = field_norm(&e, 2.0).unwrap();
        let b = field_norm(&runs[0].state.u, 2.0).unwrap();
        rel(a, b)
    });
    checks.push(Check::new("zero_extension_norm", dn == 0.0, dn, "== 0"));

    let same = runs[0].state == runs[4].state && runs[0].ledger == runs[4].ledger;
    checks.push(Check::new("determinism", same, f64::from(u8::from(!same)), "bit-identical"));

    VerifyReport { checks }
}
