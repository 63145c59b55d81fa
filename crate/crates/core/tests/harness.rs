use darcylab_core::geometry::{DomainSpec, FaceGeometry, HoleShape};
use darcylab_core::grid::{divergence, field_norm, StaggeredVectorField};
use darcylab_core::harness::{
    cell_average, compare_to_darcy, fit_rate, monotone_with_tolerance, run_sweep, zero_extend, SweepConfig,
};
use darcylab_core::micro::ScalingNorms;
use darcylab_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn two_holes() -> (DomainSpec, FaceGeometry) {
    let d = DomainSpec {
        lx: 0.75,
        ly: 0.5,
        epsilon: 0.25,
        hole: HoleShape::disk(0.25),
        cells_per_eps: 8,
    };
    (d, FaceGeometry::perforated(&d).unwrap())
}

#[test]
fn zero_extension_contract() {
    let (d, faces) = two_holes();
    assert_eq!(d.hole_indices().len(), 2);
    let g = d.grid().unwrap();
    let zero = StaggeredVectorField::zeros(g);
    assert_eq!(zero_extend(&zero, &faces).unwrap(), zero);

    // Any field with the hole faces cleared.
    let mut u = StaggeredVectorField::from_fn(g, |x, y| (7.0 * y).sin() + x, |x, y| (5.0 * x).cos() * y);
    let mut flat = u.to_flat();
    for (f, &dead) in faces.dead.iter().enumerate() {
        if dead {
            flat[f] = 0.0;
        }
    }
    u = StaggeredVectorField::from_flat(g, &flat).unwrap();
    let ext = zero_extend(&u, &faces).unwrap();
    assert_eq!(field_norm(&ext, 2.0).unwrap(), field_norm(&u, 2.0).unwrap());

    flat[faces.dead.iter().position(|&d| d).unwrap()] = 1e-6;
    let bad = StaggeredVectorField::from_flat(g, &flat).unwrap();
    assert!(matches!(zero_extend(&bad, &faces), Err(Error::Structure(_))));
}

#[test]
fn extension_divergence_mismatch_sits_on_hole_boundaries() {
    let (d, faces) = two_holes();
    let g = d.grid().unwrap();
    let u = StaggeredVectorField::from_fn(g, |_, _| 1.0, |_, _| 0.0);
    let mut flat = u.to_flat();
    let blocked = faces.blocked_faces();
    for (f, b) in blocked.iter().enumerate() {
        if *b {
            flat[f] = 0.0;
        }
    }
    let ext = zero_extend(&StaggeredVectorField::from_flat(g, &flat).unwrap(), &faces).unwrap();
    let div = divergence(&ext);
    let pressure = faces.pressure_cells();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.cell(i, j);
            let touches_blocked = [g.u_face(i, j), g.u_face(i + 1, j)]
                .into_iter()
                .chain([g.n_u() + g.v_face(i, j), g.n_u() + g.v_face(i, j + 1)])
                .any(|f| blocked[f]);
            if div.values[c] != 0.0 {
                assert!(touches_blocked, "cell {i},{j}");
            }
            if !touches_blocked {
                assert!(pressure.contains(&c));
            }
        }
    }
}

#[test]
fn noisy_slope_one_data_fits_within_ten_percent() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let pairs: Vec<(f64, f64)> = [0.25, 0.125, 0.0625, 0.03125]
            .iter()
            .map(|&e| (e, 2.0 * e * (1.0 + rng.random_range(-0.05..0.05))))
            .collect();
        let fit = fit_rate(&pairs).unwrap();
        assert!((0.9..=1.1).contains(&fit.slope), "{}", fit.slope);
    }
}

#[test]
fn self_comparison_and_localized_averages() {
    let g = darcylab_core::grid::GridSpec::walled(32, 32, 1.0, 1.0).unwrap();
    let eps = 0.25;
    let u = StaggeredVectorField::from_fn(g, |x, y| x * y + 1.0, |x, _| x);
    let mut scaled = u.clone();
    scaled.scale(eps * eps);
    assert!(compare_to_darcy(&scaled, &u, eps).unwrap() < 1e-14);
    let zero = StaggeredVectorField::zeros(g);
    assert!(matches!(compare_to_darcy(&u, &zero, eps), Err(Error::Degenerate(_))));

    // A field on the faces strictly inside lattice cell (2, 1).
    let mut bump = StaggeredVectorField::zeros(g);
    for j in 6..10 {
        for i in 15..18 {
            bump.u[g.u_face(i, j)] = 1.0;
        }
    }
    let avg = cell_average(&bump, eps).unwrap();
    for (k, v) in avg.values.iter().enumerate() {
        if k == avg.index(2, 1) {
            assert!((v[0] - 12.0 / 64.0).abs() < 1e-14, "{v:?}");
        } else {
            assert_eq!(v[0], 0.0, "{k}");
        }
    }
}

#[test]
fn monotone_gate_allows_one_small_inversion() {
    assert!(monotone_with_tolerance(&[0.8, 0.3, 0.1]));
    assert!(monotone_with_tolerance(&[0.8, 0.82, 0.1]));
    assert!(!monotone_with_tolerance(&[0.8, 0.9, 0.1]));
    assert!(!monotone_with_tolerance(&[0.5, 0.51, 0.5, 0.505]));
}

fn small_sweep() -> SweepConfig {
    SweepConfig::from_toml(
        "[domain]\nlx = 0.5\nly = 0.5\ncells_per_eps = 8\n[solver]\nt_end = 0.1\n[sweep]\nepsilons = [0.25, 0.125, 0.0625]\nworkers = 2\n",
    )
    .unwrap()
}

#[test]
fn sweep_report_is_complete_and_reproducible() {
    let cfg = small_sweep();
    let a = run_sweep(&cfg).unwrap();
    assert!(a.complete);
    assert_eq!(a.rates.len(), ScalingNorms::NAMES.len());
    for r in &a.rates {
        assert!(r.fit.is_some() || r.name == "r_lq", "{}", r.name);
    }
    assert!(a.runs.iter().all(|r| r.config_hash == a.config_hash));
    let stored: SweepConfig = serde_json::from_str(&serde_json::to_string(&a.config).unwrap()).unwrap();
    assert_eq!(stored.hash(), a.config_hash);
    assert!(a.remainder.is_some());
    let b = run_sweep(&cfg).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn solver_failure_yields_a_partial_report() {
    let mut cfg = small_sweep();
    cfg.solver.max_steps = 1;
    cfg.solver.steady_tol = 0.0;
    let r = run_sweep(&cfg).unwrap();
    assert!(!r.complete);
    assert_eq!(r.failure_code, Some(2));
    assert!(r.failure.as_deref().unwrap().contains("did not converge"));
    assert!(r.permeability.is_some() && r.darcy.is_some());
    assert!(r.checks.is_empty());
    assert!(!r.all_passed());
}

proptest! {
    #[test]
    fn exact_power_laws_are_recovered(slope in -3.0f64..3.0, c in 1e-3f64..1e3) {
        let pairs: Vec<(f64, f64)> = [0.5, 0.2, 0.1, 0.03].iter().map(|&e: &f64| (e, c * e.powf(slope))).collect();
        let fit = fit_rate(&pairs).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-9);
    }
}
