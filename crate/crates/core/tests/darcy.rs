use std::f64::consts::PI;

use darcylab_core::cell::PermeabilityTensor;
use darcylab_core::darcy::{darcy_residual, solve_darcy, DarcyProblem, DarcySolution};
use darcylab_core::grid::{GridSpec, ScalarField, StaggeredVectorField};

fn tensor() -> PermeabilityTensor {
    PermeabilityTensor {
        entries: [[0.03, 0.006], [0.006, 0.02]],
    }
}

fn diagonal() -> PermeabilityTensor {
    PermeabilityTensor {
        entries: [[0.03, 0.0], [0.0, 0.02]],
    }
}

fn exact_p(x: f64, y: f64) -> f64 {
    (PI * x).cos() * (2.0 * PI * y).cos() + 0.5 * x * y
}

fn grad_p(x: f64, y: f64) -> [f64; 2] {
    [
        -PI * (PI * x).sin() * (2.0 * PI * y).cos() + 0.5 * y,
        -2.0 * PI * (PI * x).cos() * (2.0 * PI * y).sin() + 0.5 * x,
    ]
}

/// `curl` of `sin^2(pi x) sin^2(pi y)`: solenoidal with zero normal flux.
fn exact_u(x: f64, y: f64) -> [f64; 2] {
    let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
    [
        2.0 * PI * sx * sx * sy * (PI * y).cos(),
        -2.0 * PI * sy * sy * sx * (PI * x).cos(),
    ]
}

fn manufactured(n: usize, eta0: f64, a: PermeabilityTensor) -> DarcyProblem {
    let e = a.entries;
    let det = e[0][0] * e[1][1] - e[0][1] * e[1][0];
    let inv = [[e[1][1] / det, -e[0][1] / det], [-e[1][0] / det, e[0][0] / det]];
    let f = move |x: f64, y: f64| {
        let g = grad_p(x, y);
        let u = exact_u(x, y);
        [
            g[0] + 0.5 * eta0 * (inv[0][0] * u[0] + inv[0][1] * u[1]),
            g[1] + 0.5 * eta0 * (inv[1][0] * u[0] + inv[1][1] * u[1]),
        ]
    };
    let grid = GridSpec::walled(n, n, 1.0, 1.0).unwrap();
    let mut problem = DarcyProblem::new(a, eta0, StaggeredVectorField::from_fn(grid, |x, y| f(x, y)[0], |x, y| f(x, y)[1]));
    problem.tol = 1e-12;
    problem
}

fn errors(n: usize, a: PermeabilityTensor) -> (f64, f64) {
    let problem = manufactured(n, 2.0, a);
    let sol = solve_darcy(&problem).unwrap();
    let g = problem.grid();
    let u = StaggeredVectorField::from_fn(g, |x, y| exact_u(x, y)[0], |x, y| exact_u(x, y)[1]);
    let mut du = sol.u.clone();
    du.axpy(-1.0, &u);
    let eu = (du.dot(&du) / u.dot(&u)).sqrt();
    let p = ScalarField::from_fn(g, exact_p);
    let mean = p.values.iter().sum::<f64>() / p.values.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in sol.p.values.iter().zip(&p.values) {
        num += (a - (b - mean)).powi(2);
        den += (b - mean).powi(2);
    }
    (eu, (num / den).sqrt())
}

fn orders(a: PermeabilityTensor) -> Vec<(f64, f64)> {
    let e: Vec<(f64, f64)> = [32, 64, 128].iter().map(|&n| errors(n, a)).collect();
    assert!(e[2].0 < 1e-2 && e[2].1 < 1e-2, "{e:?}");
    e.windows(2)
        .map(|w| ((w[0].0 / w[1].0).log2(), (w[0].1 / w[1].1).log2()))
        .collect()
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    for (ou, op) in orders(diagonal()) {
        assert!(ou >= 1.7 && op >= 1.7, "orders {ou} {op}");
    }
}

#[test]
fn cross_permeability_loses_half_an_order_at_the_walls() {
    for (ou, op) in orders(tensor()) {
        assert!(ou >= 1.5 && op >= 1.9, "orders {ou} {op}");
    }
}

#[test]
fn solution_residuals_are_small() {
    let problem = manufactured(32, 2.0, tensor());
    let sol = solve_darcy(&problem).unwrap();
    let r = darcy_residual(&problem, &sol).unwrap();
    let scale = problem.f.max_abs();
    assert!(r.momentum <= 1e-9 * scale && r.mass <= 1e-8 * scale && r.flux <= 1e-12 * scale, "{r:?}");
    let p_mean = sol.p.values.iter().sum::<f64>() / sol.p.values.len() as f64;
    assert!(p_mean.abs() < 1e-12);
}

#[test]
fn pressure_perturbations_raise_the_momentum_residual_linearly() {
    let problem = manufactured(24, 1.0, tensor());
    let sol = solve_darcy(&problem).unwrap();
    let g = problem.grid();
    let perturbed = |c: f64| DarcySolution {
        p: ScalarField::from_values(
            g,
            sol.p
                .values
                .iter()
                .enumerate()
                .map(|(k, p)| p + c * ((k * 7919 % 97) as f64 / 97.0 - 0.5))
                .collect(),
        )
        .unwrap(),
        ..sol.clone()
    };
    let r1 = darcy_residual(&problem, &perturbed(1e-3)).unwrap().momentum;
    let r2 = darcy_residual(&problem, &perturbed(2e-3)).unwrap().momentum;
    let r0 = darcy_residual(&problem, &sol).unwrap().momentum;
    assert!(r1 > 1e3 * r0);
    assert!((r2 / r1 - 2.0).abs() < 1e-6, "{}", r2 / r1);
}

#[test]
fn sealed_box_absorbs_constant_force() {
    let g = GridSpec::walled(20, 20, 1.0, 1.0).unwrap();
    let f = StaggeredVectorField::from_fn(g, |_, _| 1.5, |_, _| -0.5);
    let sol = solve_darcy(&DarcyProblem::new(tensor(), 1.0, f)).unwrap();
    assert!(sol.u.max_abs() < 1e-9, "{}", sol.u.max_abs());
    let slope_x = (sol.p.get(11, 4) - sol.p.get(10, 4)) / g.hx();
    let slope_y = (sol.p.get(3, 8) - sol.p.get(3, 7)) / g.hy();
    assert!((slope_x - 1.5).abs() < 1e-8 && (slope_y + 0.5).abs() < 1e-8);
}

#[test]
fn scaling_the_force_scales_the_solution() {
    let problem = manufactured(24, 1.0, tensor());
    let mut scaled = problem.clone();
    scaled.f.scale(-4.0);
    let a = solve_darcy(&problem).unwrap();
    let b = solve_darcy(&scaled).unwrap();
    let mut d = b.u.clone();
    d.axpy(4.0, &a.u);
    assert!(d.max_abs() <= 1e-12 * b.u.max_abs());
    let dp = a.p.values.iter().zip(&b.p.values).fold(0.0f64, |m, (x, y)| m.max((y + 4.0 * x).abs()));
    assert!(dp <= 1e-12 * b.p.max_abs());
}

#[test]
fn quarter_turn_rotates_the_solution() {
    let n = 24;
    let g = GridSpec::walled(n, n, 1.0, 1.0).unwrap();
    let fx = |x: f64, y: f64| (3.0 * y).sin() + x * x;
    let fy = |x: f64, y: f64| (2.0 * x).cos() * y;
    // (x', y') = (1 - y, x) and f' = R f with R (a, b) = (-b, a).
    let f = StaggeredVectorField::from_fn(g, fx, fy);
    let fr = StaggeredVectorField::from_fn(g, |x, y| -fy(y, 1.0 - x), |x, y| fx(y, 1.0 - x));
    let a = PermeabilityTensor::isotropic(0.02);
    let solve = |f| {
        let mut p = DarcyProblem::new(a, 1.0, f);
        p.tol = 1e-13;
        solve_darcy(&p).unwrap()
    };
    let (s, r) = (solve(f), solve(fr));
    let scale = s.u.max_abs();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=n {
            worst = worst.max((r.u.u[g.u_face(i, j)] + s.u.v[g.v_face(j, n - i)]).abs());
        }
    }
    for j in 0..=n {
        for i in 0..n {
            worst = worst.max((r.u.v[g.v_face(i, j)] - s.u.u[g.u_face(j, n - 1 - i)]).abs());
        }
    }
    assert!(worst <= 1e-9 * scale, "{worst}");
    for j in 0..n {
        for i in 0..n {
            assert!((r.p.get(i, j) - s.p.get(j, n - 1 - i)).abs() <= 1e-9 * s.p.max_abs());
        }
    }
}
