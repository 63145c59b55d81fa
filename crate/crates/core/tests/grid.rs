use darcylab_core::geometry::wall_faces;
use darcylab_core::grid::{cg_solve_monitored, CgOptions, GridSpec, Operators, SparseMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn divergence_is_minus_the_adjoint_of_gradient(seed in any::<u64>(), nx in 4usize..24, ny in 4usize..24, periodic in any::<bool>()) {
        let g = if periodic {
            GridSpec::new(nx, ny, 1.3, 0.7, true, true).unwrap()
        } else {
            GridSpec::walled(nx, ny, 1.3, 0.7).unwrap()
        };
        let ops = Operators::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let walls = wall_faces(&g);
        let u: Vec<f64> = random(g.n_faces(), &mut rng)
            .into_iter()
            .zip(&walls)
            .map(|(x, &w)| if w { 0.0 } else { x })
            .collect();
        let p = random(g.n_cells(), &mut rng);
        let lhs: f64 = ops.div.mul_vec(&u).iter().zip(&p).map(|(a, b)| a * b).sum();
        let rhs: f64 = -ops.grad.mul_vec(&p).iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
        let scale: f64 = u.iter().map(|x| x.abs()).sum::<f64>() / g.hx().min(g.hy());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }

    #[test]
    fn cg_error_decreases_in_the_energy_norm(seed in any::<u64>()) {
        let g = GridSpec::walled(12, 12, 1.0, 1.0).unwrap();
        let ops = Operators::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: Vec<f64> = (0..g.n_faces()).map(|_| rng.random_range(0.5..2.0)).collect();
        let a = ops.neg_laplacian().add_scaled(1.0, &SparseMatrix::diagonal_matrix(&shift)).unwrap();
        let b = random(g.n_faces(), &mut rng);
        let (exact, _) = cg_solve_monitored(&a, &b, None, &CgOptions::new(1e-15, 5000), |_, _| {}).unwrap();
        let energy = |x: &[f64]| {
            let e: Vec<f64> = x.iter().zip(&exact).map(|(x, y)| x - y).collect();
            a.mul_vec(&e).iter().zip(&e).map(|(p, q)| p * q).sum::<f64>()
        };
        let mut errs = vec![energy(&vec![0.0; b.len()])];
        cg_solve_monitored(&a, &b, None, &CgOptions::new(1e-10, 5000), |_, x| errs.push(energy(x))).unwrap();
        for w in errs.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-28);
        }
    }
}
