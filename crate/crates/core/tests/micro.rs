use darcylab_core::geometry::{DomainSpec, HoleShape};
use darcylab_core::grid::{field_norm, GridSpec, Operators, StaggeredVectorField};
use darcylab_core::micro::{
    carreau_viscosity, poincare_probe, run_micro, sample_forcing, CarreauParams, ForcingKind, InitialKind,
    MicroConfig, MicroRun, ViscosityModel,
};
use darcylab_core::grid::ScalarField;
use darcylab_core::Error;
use proptest::prelude::*;

fn domain(eps: f64) -> DomainSpec {
    DomainSpec {
        lx: 0.5,
        ly: 0.5,
        epsilon: eps,
        hole: HoleShape::disk(0.25),
        cells_per_eps: 8,
    }
}

fn carreau(r: f64) -> ViscosityModel {
    ViscosityModel::Carreau(CarreauParams {
        eta0: 1.0,
        eta_inf: 0.5,
        lambda: 1.0,
        r,
    })
}

fn run(eps: f64, viscosity: ViscosityModel, forcing: ForcingKind) -> MicroRun {
    let mut cfg = MicroConfig::new(domain(eps), viscosity, forcing);
    cfg.t_end = 0.2;
    run_micro(&cfg).unwrap()
}

const VORTEX: ForcingKind = ForcingKind::Vortex { amplitude: 1.0 };

#[test]
fn carreau_oracle() {
    let p = CarreauParams {
        eta0: 2.0,
        eta_inf: 1.0,
        lambda: 1.0,
        r: 3.0,
    };
    assert!((p.eta(1.0) - (1.0 + 2f64.sqrt())).abs() < 1e-12);
    assert!((p.eta(1.0) - 2.41421).abs() < 1e-5);
    let g = GridSpec::walled(4, 4, 1.0, 1.0).unwrap();
    let mut s = ScalarField::zeros(g);
    s.values[3] = -1e-3;
    assert!(matches!(carreau_viscosity(&s, &p), Err(Error::Domain(_))));
}

#[test]
fn zero_forcing_from_rest_stays_at_rest() {
    let r = run(0.125, carreau(1.5), ForcingKind::Constant { fx: 0.0, fy: 0.0 });
    assert_eq!(r.state.u.max_abs(), 0.0);
    assert!(r.norms.values().iter().all(|&v| v == 0.0));
    assert!(r.ledger.entries.iter().all(|e| e.slack == 0.0));
}

#[test]
fn newtonian_carreau_matches_constant_viscosity() {
    let a = run(0.125, carreau(2.0), VORTEX);
    let b = run(0.125, ViscosityModel::Constant { eta: 1.0 }, VORTEX);
    for (x, y) in a.norms.values().iter().zip(b.norms.values()) {
        assert!((x - y).abs() <= 1e-9 * x.abs().max(y.abs()), "{x} vs {y}");
    }
    assert_eq!(a.norms.r_lq, 0.0);
}

#[test]
fn incompressible_and_energy_stable() {
    for r in [1.5, 2.0, 3.0] {
        let run = run(0.125, carreau(r), VORTEX);
        assert!(run.summary.max_divergence <= 1e-8, "r = {r}");
        let slack = run.ledger.relative_worst_slack();
        assert!(slack >= -1e-10, "r = {r}: slack {slack}");
        for e in &run.ledger.entries {
            assert!(e.slack >= -1e-10 * run.ledger.term_scale(), "step {}", e.step);
        }
        let ops = Operators::new(run.state.u.grid);
        assert!(run.integrals.decomposition_defect(&ops) <= 1e-12 * run.integrals.h.max_abs());
    }
}

#[test]
fn free_decay_loses_energy() {
    let mut cfg = MicroConfig::new(domain(0.125), carreau(1.5), ForcingKind::Constant { fx: 0.0, fy: 0.0 });
    cfg.initial = InitialKind::Vortex { amplitude: 1.0 };
    cfg.t_end = 0.05;
    let run = run_micro(&cfg).unwrap();
    let k: Vec<f64> = run.ledger.entries.iter().map(|e| e.kinetic).collect();
    assert!(k[0] > 0.0 || run.ledger.initial_kinetic > 0.0);
    assert!(run.ledger.initial_kinetic >= k[0]);
    assert!(k.windows(2).all(|w| w[1] <= w[0]));
    assert!(*k.last().unwrap() < 1e-3 * run.ledger.initial_kinetic);
}

#[test]
fn newtonian_response_is_nearly_linear() {
    let a = run(0.125, carreau(2.0), VORTEX);
    let b = run(0.125, carreau(2.0), ForcingKind::Vortex { amplitude: 2.0 });
    let mut d = b.state.u.clone();
    d.axpy(-2.0, &a.state.u);
    assert!(d.max_abs() <= 1e-3 * b.state.u.max_abs(), "{}", d.max_abs() / b.state.u.max_abs());
}

#[test]
fn holes_make_the_poincare_ratio_uniform() {
    let eps = 0.0625;
    let perforated = run(eps, carreau(2.0), VORTEX);
    let ratio = poincare_probe(&perforated.state, eps).unwrap();
    let g = perforated.state.u.grid;
    let ops = Operators::new(g);
    let plain: StaggeredVectorField = sample_forcing(&VORTEX, &g);
    let plain_ratio = field_norm(&plain, 2.0).unwrap()
        / (eps * darcylab_core::grid::norm_from_sq(&ops.grad_sq(&plain.to_flat()), g.cell_volume(), 2.0).unwrap());
    assert!(ratio < 0.5, "{ratio}");
    assert!(plain_ratio > 4.0 * ratio, "{plain_ratio} vs {ratio}");
}

proptest! {
    #[test]
    fn viscosity_is_monotone(a in -8.0f64..6.0, b in -8.0f64..6.0, r in 1.1f64..4.0) {
        let p = CarreauParams { eta0: 1.5, eta_inf: 0.25, lambda: 2.0, r };
        let (s, t) = (10f64.powf(a.min(b)), 10f64.powf(a.max(b)));
        let (es, et) = (p.eta(s), p.eta(t));
        if r < 2.0 {
            prop_assert!(et <= es && et >= p.eta_inf && es <= p.eta0);
        } else {
            prop_assert!(et >= es && es >= p.eta0);
        }
    }
}
