//! Homogenized Darcy problem `(eta0 / 2) u = A (f - grad p)`, `div u = 0`
//! in `Omega`, `u . n = 0` on the boundary.

use serde::{Deserialize, Serialize};

use crate::cell::PermeabilityTensor;
use crate::error::{Error, Result};
use crate::grid::{
    cg_solve, cg_solve_with, divergence, field_norm, CgOptions, GridSpec, LinearSolveReport,
    Operators, ScalarField, SparseMatrix, StaggeredVectorField,
};

#[derive(Debug, Clone, PartialEq)]
pub struct DarcyProblem {
    pub a: PermeabilityTensor,
    pub eta0: f64,
    pub f: StaggeredVectorField,
    pub tol: f64,
    pub max_iter: usize,
}

impl DarcyProblem {
    pub fn new(a: PermeabilityTensor, eta0: f64, f: StaggeredVectorField) -> Self {
        Self {
            a,
            eta0,
            f,
            tol: 1e-10,
            max_iter: 100_000,
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.f.grid
    }

    pub fn validate(&self) -> Result<()> {
        self.a.validate()?;
        if self.a.relative_asymmetry() > 1e-6 {
            return Err(Error::config("permeability tensor is not symmetric"));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::config(format!("eta0 must be positive, got {}", self.eta0)));
        }
        let g = self.grid();
        if g.periodic_x || g.periodic_y {
            return Err(Error::config("the Darcy grid must be walled"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::config(format!("tolerance must be in (0, 1), got {}", self.tol)));
        }
        if self.f.u.iter().chain(&self.f.v).any(|x| !x.is_finite()) {
            return Err(Error::config("non-finite forcing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DarcySolution {
    pub u: StaggeredVectorField,
    /// Zero mean over `Omega`.
    pub p: ScalarField,
    pub report: LinearSolveReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarcyResidual {
    /// `|(eta0 / 2) u - A (f - grad p)|_2` over the faces.
    pub momentum: f64,
    /// `|div u|_2`.
    pub mass: f64,
    /// `|u . n|` in `L^2` of the boundary.
    pub flux: f64,
}

/// Discrete energy `Q(xi) = (1/2) xi^T M xi ~ (1/2) int xi . A xi` on face
/// vectors. Gradients are `Gamma [p; g]`: the MAC gradient on interior faces
/// and free unknowns `g` on the wall faces, which makes the no-flux condition
/// the natural one.
struct Discretization {
    grid: GridSpec,
    /// Faces x faces.
    m: SparseMatrix,
    /// Faces x (cells + wall faces).
    gamma: SparseMatrix,
    system: SparseMatrix,
    wall: Vec<usize>,
    /// 1 inside, 1/2 on walls.
    omega: Vec<f64>,
}

impl Discretization {
    fn new(grid: GridSpec, a: &PermeabilityTensor) -> Result<Self> {
        let e = a.symmetric().entries;
        let (a11, a12, a22) = (e[0][0], e[0][1], e[1][1]);
        let vol = grid.cell_volume();
        let nu = grid.n_u();
        let mut t = Vec::with_capacity(12 * grid.n_cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let x = [grid.u_face(i, j), grid.u_face(i + 1, j)];
                let y = [nu + grid.v_face(i, j), nu + grid.v_face(i, j + 1)];
                for &f in &x {
                    t.push((f, f, 0.5 * vol * a11));
                }
                for &f in &y {
                    t.push((f, f, 0.5 * vol * a22));
                }
                if a12 != 0.0 {
                    for &fx in &x {
                        for &fy in &y {
                            t.push((fx, fy, 0.25 * vol * a12));
                            t.push((fy, fx, 0.25 * vol * a12));
                        }
                    }
                }
            }
        }
        let m = SparseMatrix::from_triplets(grid.n_faces(), grid.n_faces(), &t)?;
        let walls = crate::geometry::wall_faces(&grid);
        let wall: Vec<usize> = (0..grid.n_faces()).filter(|&f| walls[f]).collect();
        let ops = Operators::new(grid);
        let n_c = grid.n_cells();
        let mut gt = ops.grad.triplets();
        for (k, &f) in wall.iter().enumerate() {
            gt.push((f, n_c + k, 1.0));
        }
        let gamma = SparseMatrix::from_triplets(grid.n_faces(), n_c + wall.len(), &gt)?;
        let system = gamma.transpose().matmul(&m.matmul(&gamma)?)?;
        let omega = walls.iter().map(|&w| if w { 0.5 } else { 1.0 }).collect();
        Ok(Self {
            grid,
            m,
            gamma,
            system,
            wall,
            omega,
        })
    }

    /// Discrete `A xi` on faces.
    fn flux(&self, xi: &[f64]) -> Vec<f64> {
        let vol = self.grid.cell_volume();
        self.m
            .mul_vec(xi)
            .iter()
            .zip(&self.omega)
            .map(|(x, w)| x / (w * vol))
            .collect()
    }

    fn xi(&self, f: &[f64], z: &[f64]) -> Vec<f64> {
        let gz = self.gamma.mul_vec(z);
        f.iter().zip(&gz).map(|(a, b)| a - b).collect()
    }
}

pub fn solve_darcy(problem: &DarcyProblem) -> Result<DarcySolution> {
    problem.validate()?;
    let grid = problem.grid();
    let disc = Discretization::new(grid, &problem.a)?;
    let f = problem.f.to_flat();
    let gamma_t = disc.gamma.transpose();
    let rhs = gamma_t.mul_vec(&disc.m.mul_vec(&f));
    let n_c = grid.n_cells();
    let mut kernel = vec![0.0; n_c + disc.wall.len()];
    kernel[..n_c].iter_mut().for_each(|k| *k = 1.0);
    let mut opts = CgOptions::new(problem.tol, problem.max_iter);
    opts.kernel = Some(kernel);
    let (z, report) = cg_solve_with(&disc.system, &rhs, None, &opts)?;
    let q = disc.flux(&disc.xi(&f, &z));
    let u: Vec<f64> = q.iter().map(|x| 2.0 / problem.eta0 * x).collect();
    Ok(DarcySolution {
        u: StaggeredVectorField::from_flat(grid, &u)?,
        p: ScalarField::from_values(grid, z[..n_c].to_vec())?,
        report,
    })
}

/// Residuals of a candidate pair `(u, p)`. The wall gradients are
/// eliminated by minimizing the energy for the given `p`.
pub fn darcy_residual(problem: &DarcyProblem, solution: &DarcySolution) -> Result<DarcyResidual> {
    let grid = problem.grid();
    grid.ensure_same(&solution.u.grid, "Darcy velocity")?;
    grid.ensure_same(&solution.p.grid, "Darcy pressure")?;
    let disc = Discretization::new(grid, &problem.a)?;
    let f = problem.f.to_flat();
    let n_c = grid.n_cells();
    let mut z = solution.p.values.clone();
    z.resize(n_c + disc.wall.len(), 0.0);
    let keep: Vec<usize> = (n_c..z.len()).collect();
    let sys_g = disc.system.select_rows(&keep).select_columns(&keep);
    let res = disc.gamma.transpose().mul_vec(&disc.m.mul_vec(&disc.xi(&f, &z)));
    let rg: Vec<f64> = keep.iter().map(|&k| res[k]).collect();
    if rg.iter().any(|x| *x != 0.0) {
        let (g, _) = cg_solve(&sys_g, &rg, 1e-14, 10_000)?;
        for (k, x) in keep.iter().zip(g) {
            z[*k] += x;
        }
    }
    let q = disc.flux(&disc.xi(&f, &z));
    let u = solution.u.to_flat();
    let defect: Vec<f64> = u
        .iter()
        .zip(&q)
        .map(|(u, q)| 0.5 * problem.eta0 * u - q)
        .collect();
    let momentum = field_norm(&StaggeredVectorField::from_flat(grid, &defect)?, 2.0)?;
    let mass = field_norm(&divergence(&solution.u), 2.0)?;
    let mut flux = 0.0;
    for &f in &disc.wall {
        let h = if f < grid.n_u() { grid.hy() } else { grid.hx() };
        flux += u[f] * u[f] * h;
    }
    Ok(DarcyResidual {
        momentum,
        mass,
        flux: flux.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor() -> PermeabilityTensor {
        PermeabilityTensor {
            entries: [[0.03, 0.008], [0.008, 0.02]],
        }
    }

    #[test]
    fn gradient_forcing_is_absorbed() {
        let g = GridSpec::walled(24, 24, 1.0, 1.0).unwrap();
        let phi = |x: f64, y: f64| (2.0 * x).sin() * y * y + x;
        let h = 1e-6;
        let f = StaggeredVectorField::from_fn(
            g,
            |x, y| (phi(x + h, y) - phi(x - h, y)) / (2.0 * h),
            |x, y| (phi(x, y + h) - phi(x, y - h)) / (2.0 * h),
        );
        // Exact discrete gradient: forcing is the MAC gradient of phi.
        let p = ScalarField::from_fn(g, phi);
        let mut fd = crate::grid::gradient(&p);
        for (x, y) in fd.u.iter_mut().zip(&f.u) {
            if *x == 0.0 {
                *x = *y;
            }
        }
        for (x, y) in fd.v.iter_mut().zip(&f.v) {
            if *x == 0.0 {
                *x = *y;
            }
        }
        let sol = solve_darcy(&DarcyProblem::new(tensor(), 1.0, fd.clone())).unwrap();
        assert!(sol.u.max_abs() < 1e-8 * fd.max_abs(), "{}", sol.u.max_abs());
        let mean = p.values.iter().sum::<f64>() / p.values.len() as f64;
        let err = sol
            .p
            .values
            .iter()
            .zip(&p.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - (b - mean)).abs()));
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn residuals_vanish_for_solution_and_zero() {
        let g = GridSpec::walled(16, 12, 1.0, 0.75).unwrap();
        let f = StaggeredVectorField::from_fn(g, |x, y| (3.0 * y).cos() + x, |x, _| x * x);
        let problem = DarcyProblem::new(tensor(), 2.0, f);
        let sol = solve_darcy(&problem).unwrap();
        let r = darcy_residual(&problem, &sol).unwrap();
        assert!(r.momentum < 1e-9 && r.mass < 1e-7 && r.flux < 1e-9, "{r:?}");
        let zero = DarcyProblem::new(tensor(), 2.0, StaggeredVectorField::zeros(g));
        let z = DarcySolution {
            u: StaggeredVectorField::zeros(g),
            p: ScalarField::zeros(g),
            report: sol.report.clone(),
        };
        let r = darcy_residual(&zero, &z).unwrap();
        assert_eq!((r.momentum, r.mass, r.flux), (0.0, 0.0, 0.0));
    }
}
