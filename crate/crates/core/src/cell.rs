//! Periodic Stokes cell problem in the reference cell and the permeability
//! tensor `A_ij = int w^i_j`.
//!
//! The hole is imposed by penalizing every face touching a solid cell with
//! `w / kappa`; velocity and pressure are coupled by a Schur-complement
//! (Uzawa) conjugate gradient iteration whose inner velocity solves are
//! Jacobi-preconditioned conjugate gradients.

use std::cell::{Cell, RefCell};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_cell_mask, DomainSpec, FaceGeometry, HoleShape, SolidMask};
use crate::grid::{
    cg_solve_with, CgOptions, LinearOperator, LinearSolveReport, Operators, ScalarField,
    SparseMatrix, StaggeredVectorField,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellConfig {
    pub mask: SolidMask,
    pub faces: FaceGeometry,
    /// Penalty parameter `kappa`; solid faces feel `w / kappa`.
    pub penalty: f64,
    /// Relative divergence tolerance of the outer iteration, in `(0, 1e-4]`.
    pub tolerance: f64,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl CellConfig {
    /// Defaults: `kappa = penalty_scale * h^2` with `penalty_scale = 1e-8`.
    /// Staircase configuration from a mask alone.
    pub fn new(mask: SolidMask) -> Self {
        let faces = FaceGeometry::staircase(&mask);
        Self::with_faces(mask, faces)
    }

    pub fn with_faces(mask: SolidMask, faces: FaceGeometry) -> Self {
        let h = mask.grid.hx();
        Self {
            faces,
            penalty: 1e-8 * h * h,
            tolerance: 1e-9,
            max_outer: 2000,
            max_inner: 20_000,
            mask,
        }
    }

    /// Cell mask with the cut-link boundary correction.
    pub fn for_hole(hole: &HoleShape, n: usize) -> Result<Self> {
        let mask = build_cell_mask(hole, n)?;
        let faces = FaceGeometry::cell(hole, mask.grid)?;
        Ok(Self::with_faces(mask, faces))
    }

    pub fn with_penalty_scale(mut self, scale: f64) -> Self {
        let h = self.mask.grid.hx();
        self.penalty = scale * h * h;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        let g = &self.mask.grid;
        if !(g.periodic_x && g.periodic_y) || g.nx != g.ny || (g.lx - 1.0).abs() > 1e-12 {
            return Err(Error::config("cell problem needs a periodic unit-square grid"));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-4) {
            return Err(Error::config(format!(
                "cell tolerance must lie in (0, 1e-4], got {}",
                self.tolerance
            )));
        }
        if !(self.penalty > 0.0) {
            return Err(Error::config("penalty must be positive"));
        }
        self.faces.grid.ensure_same(g, "cell face geometry")?;
        if self.faces.dead_count() == 0 {
            return Err(Error::Degenerate(
                "cell without a hole: permeability is unbounded".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CellSolution {
    pub direction: Axis,
    pub w: StaggeredVectorField,
    /// Pressure, zero mean over the fluid cells and zero inside the hole.
    pub pi: ScalarField,
    pub report: LinearSolveReport,
    pub inner_iterations: usize,
    pub penalty: f64,
}

impl CellSolution {
    /// `(int w_x, int w_y)` over the reference cell.
    pub fn mean_velocity(&self) -> [f64; 2] {
        let h2 = self.w.grid.cell_volume();
        [
            self.w.u.iter().sum::<f64>() * h2,
            self.w.v.iter().sum::<f64>() * h2,
        ]
    }
}

/// Symmetric positive definite 2x2 permeability tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermeabilityTensor {
    pub entries: [[f64; 2]; 2],
}

impl PermeabilityTensor {
    pub fn isotropic(a: f64) -> Self {
        Self {
            entries: [[a, 0.0], [0.0, a]],
        }
    }

    /// `|A12 - A21| / |A|_max`.
    pub fn relative_asymmetry(&self) -> f64 {
        let e = self.entries;
        let scale = e.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        (e[0][1] - e[1][0]).abs() / scale
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let e = self.entries;
        let a = e[0][0];
        let d = e[1][1];
        let b = 0.5 * (e[0][1] + e[1][0]);
        let m = 0.5 * (a + d);
        let r = (0.25 * (a - d).powi(2) + b * b).sqrt();
        [m - r, m + r]
    }

    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        let e = self.entries;
        [e[0][0] * x[0] + e[0][1] * x[1], e[1][0] * x[0] + e[1][1] * x[1]]
    }

    /// Symmetrized copy.
    pub fn symmetric(&self) -> Self {
        let e = self.entries;
        let b = 0.5 * (e[0][1] + e[1][0]);
        Self {
            entries: [[e[0][0], b], [b, e[1][1]]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::numerical("non-finite permeability"));
        }
        if self.eigenvalues()[0] <= 0.0 {
            return Err(Error::domain(format!("permeability {self:?} is not positive definite")));
        }
        Ok(())
    }
}

struct VelocityOperator {
    k: SparseMatrix,
    max_inner: usize,
    tol: f64,
}

impl VelocityOperator {
    fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, LinearSolveReport)> {
        let mut opts = CgOptions::new(self.tol, self.max_inner);
        // the last digits are not always attainable; accept a near miss
        opts.allow_unconverged = true;
        let (x, rep) = cg_solve_with(&self.k, b, None, &opts)?;
        if rep.relative_residual > 1e3 * self.tol {
            return Err(Error::NotConverged {
                what: "cell problem velocity solve".into(),
                report: rep,
            });
        }
        Ok((x, rep))
    }
}

/// `q -> B K^{-1} B^T q` on the fluid cells.
struct Schur<'a> {
    vel: &'a VelocityOperator,
    b: &'a SparseMatrix,
    bt: &'a SparseMatrix,
    inner: Cell<usize>,
    failure: RefCell<Option<Error>>,
}

impl LinearOperator for Schur<'_> {
    fn nrows(&self) -> usize {
        self.b.nrows()
    }

    fn ncols(&self) -> usize {
        self.b.nrows()
    }

    fn apply(&self, q: &[f64], y: &mut [f64]) {
        let rhs = self.bt.mul_vec(q);
        match self.vel.solve(&rhs) {
            Ok((x, rep)) => {
                self.inner.set(self.inner.get() + rep.iterations);
                self.b.apply(&x, y);
            }
            Err(e) => {
                self.failure.borrow_mut().get_or_insert(e);
                y.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }
}

/// Solves the cell problem `-Delta w + grad pi = e_i`, `div w = 0`, `w = 0`
/// in the hole, periodic in the reference cell.
pub fn solve_cell(direction: Axis, config: &CellConfig) -> Result<CellSolution> {
    config.validate()?;
    let grid = config.mask.grid;
    let ops = Operators::new(grid);
    let pen: Vec<f64> = config
        .faces
        .dead
        .iter()
        .zip(&config.faces.cut)
        .map(|(&d, &c)| if d { 1.0 / config.penalty } else { c })
        .collect();
    let k = ops
        .neg_laplacian()
        .add_scaled(1.0, &SparseMatrix::diagonal_matrix(&pen))?;
    let vel = VelocityOperator {
        k,
        max_inner: config.max_inner,
        tol: (config.tolerance * 1e-3).max(1e-14),
    };
    let fluid = config.faces.pressure_cells();
    let b = ops.div.select_rows(&fluid);
    let bt = b.transpose();

    let mut e = vec![0.0; grid.n_faces()];
    match direction {
        Axis::X => e[..grid.n_u()].iter_mut().for_each(|x| *x = 1.0),
        Axis::Y => e[grid.n_u()..].iter_mut().for_each(|x| *x = 1.0),
    }
    let (w0, rep0) = vel.solve(&e)?;
    let schur = Schur {
        vel: &vel,
        b: &b,
        bt: &bt,
        inner: Cell::new(rep0.iterations),
        failure: RefCell::new(None),
    };
    let g: Vec<f64> = b.mul_vec(&w0).into_iter().map(|x| -x).collect();
    let mut opts = CgOptions::new(config.tolerance, config.max_outer).with_constant_kernel(fluid.len());
    opts.jacobi = false;
    let solved = cg_solve_with(&schur, &g, None, &opts);
    if let Some(err) = schur.failure.borrow_mut().take() {
        return Err(err);
    }
    let (pi_f, report) = solved?;
    let mut rhs = bt.mul_vec(&pi_f);
    rhs.iter_mut().zip(&e).for_each(|(r, e)| *r += e);
    let (w, _) = vel.solve(&rhs)?;
    let mut pi = vec![0.0; grid.n_cells()];
    for (&c, &p) in fluid.iter().zip(&pi_f) {
        pi[c] = p;
    }
    Ok(CellSolution {
        direction,
        w: StaggeredVectorField::from_flat(grid, &w)?,
        pi: ScalarField::from_values(grid, pi)?,
        report,
        inner_iterations: schur.inner.get(),
        penalty: config.penalty,
    })
}

/// `A_ij = int_Q w^i_j` from the two cell solutions.
pub fn assemble_permeability(solutions: &[CellSolution]) -> Result<PermeabilityTensor> {
    let sx = solutions.iter().find(|s| s.direction == Axis::X);
    let sy = solutions.iter().find(|s| s.direction == Axis::Y);
    let (Some(sx), Some(sy)) = (sx, sy) else {
        return Err(Error::structure("need cell solutions for both directions"));
    };
    sx.w.grid.ensure_same(&sy.w.grid, "cell solutions")?;
    let a = PermeabilityTensor {
        entries: [sx.mean_velocity(), sy.mean_velocity()],
    };
    a.validate()?;
    Ok(a)
}

/// Both cell solutions and the permeability for one hole and resolution.
pub fn permeability(hole: &HoleShape, n: usize, tolerance: f64) -> Result<(PermeabilityTensor, [CellSolution; 2])> {
    let config = CellConfig::for_hole(hole, n)?.with_tolerance(tolerance);
    let sx = solve_cell(Axis::X, &config)?;
    let sy = solve_cell(Axis::Y, &config)?;
    let a = assemble_permeability(&[sx.clone(), sy.clone()])?;
    Ok((a, [sx, sy]))
}

/// Tiles `w^i(x / eps)` and `pi^i(x / eps)` over the lattice cells of
/// `K_eps`; the collar and faces on the boundary of the tiled region are zero.
///
/// The cell grid size must equal `cells_per_eps` or be a multiple of it, in
/// which case the cell solution is averaged onto the coarser faces.
pub fn rescale_cell_function(
    sol: &CellSolution,
    target: &DomainSpec,
) -> Result<(StaggeredVectorField, ScalarField)> {
    let grid = target.grid()?;
    let cpe = target.cells_per_eps;
    let n = sol.w.grid.nx;
    if n % cpe != 0 {
        return Err(Error::structure(format!(
            "cell grid {n} is not a multiple of cells_per_eps = {cpe}"
        )));
    }
    let (wl, pl) = coarsen(sol, n / cpe)?;
    let lg = wl.grid;

    let interior = |i: usize, j: usize| {
        let (kx, _) = target.lattice_of(i);
        let (ky, _) = target.lattice_of(j);
        target.is_interior([kx, ky])
    };
    let mut out = StaggeredVectorField::zeros(grid);
    for j in 0..grid.ny {
        let (_, my) = target.lattice_of(j);
        for i in 1..grid.nx {
            if interior(i - 1, j) && interior(i, j) {
                let (_, mx) = target.lattice_of(i);
                out.u[grid.u_face(i, j)] = wl.u[lg.u_face(mx, my)];
            }
        }
    }
    for j in 1..grid.ny {
        let (_, my) = target.lattice_of(j);
        for i in 0..grid.nx {
            if interior(i, j - 1) && interior(i, j) {
                let (_, mx) = target.lattice_of(i);
                out.v[grid.v_face(i, j)] = wl.v[lg.v_face(mx, my)];
            }
        }
    }
    let mut p = ScalarField::zeros(grid);
    for j in 0..grid.ny {
        let (_, my) = target.lattice_of(j);
        for i in 0..grid.nx {
            if interior(i, j) {
                let (_, mx) = target.lattice_of(i);
                p.values[grid.cell(i, j)] = pl.values[lg.cell(mx, my)];
            }
        }
    }
    Ok((out, p))
}

fn coarsen(sol: &CellSolution, m: usize) -> Result<(StaggeredVectorField, ScalarField)> {
    if m == 1 {
        return Ok((sol.w.clone(), sol.pi.clone()));
    }
    let fg = sol.w.grid;
    let nc = fg.nx / m;
    let cg = crate::grid::GridSpec::periodic(nc, 1.0)?;
    let mut w = StaggeredVectorField::zeros(cg);
    let mut p = ScalarField::zeros(cg);
    let inv = 1.0 / m as f64;
    for j in 0..nc {
        for i in 0..nc {
            let mut su = 0.0;
            let mut sv = 0.0;
            let mut sp = 0.0;
            for s in 0..m {
                su += sol.w.u[fg.u_face(i * m, j * m + s)];
                sv += sol.w.v[fg.v_face(i * m + s, j * m)];
                for t in 0..m {
                    sp += sol.pi.values[fg.cell(i * m + s, j * m + t)];
                }
            }
            w.u[cg.u_face(i, j)] = su * inv;
            w.v[cg.v_face(i, j)] = sv * inv;
            p.values[cg.cell(i, j)] = sp * inv * inv;
        }
    }
    Ok((w, p))
}

/// One level of a grid refinement study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub n: usize,
    pub permeability: PermeabilityTensor,
    pub outer_iterations: [usize; 2],
    pub relative_residual: [f64; 2],
}

/// Richardson extrapolate of two consecutive levels with formal order 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichardsonEstimate {
    /// Finer level of the pair.
    pub n: usize,
    pub extrapolated: PermeabilityTensor,
    /// Observed order of the diagonal entries from the triple ending at `n`.
    pub observed_order: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub rows: Vec<RefinementRow>,
    pub estimates: Vec<RichardsonEstimate>,
}

impl RefinementStudy {
    /// Largest relative change of any entry between consecutive extrapolates,
    /// relative to the largest entry.
    pub fn extrapolate_spread(&self) -> Option<f64> {
        let e = &self.estimates;
        if e.len() < 2 {
            return None;
        }
        let a = e[e.len() - 2].extrapolated.entries;
        let b = e[e.len() - 1].extrapolated.entries;
        let scale = b.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        let diff = (0..4).fold(0.0f64, |m, k| m.max((a[k / 2][k % 2] - b[k / 2][k % 2]).abs()));
        Some(diff / scale)
    }
}

/// Whether `a` and `b` agree to `digits` significant digits: the difference
/// is at most half a unit in the last digit of the larger magnitude.
pub fn agree_to_digits(a: f64, b: f64, digits: i32) -> bool {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        return true;
    }
    let unit = 10f64.powf(m.log10().floor() - (digits - 1) as f64);
    (a - b).abs() <= 0.5 * unit
}

/// Solves the cell problem on every level (doubling sizes) and extrapolates
/// consecutive pairs with `A_2h + (A_h - A_2h) * 4/3`.
pub fn grid_refinement_study(
    hole: &HoleShape,
    levels: &[usize],
    tolerance: f64,
) -> Result<RefinementStudy> {
    if levels.len() < 2 {
        return Err(Error::config("refinement study needs at least two levels"));
    }
    if levels.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::config("refinement levels must double"));
    }
    let mut rows = Vec::new();
    for &n in levels {
        let (a, [sx, sy]) = permeability(hole, n, tolerance)?;
        log::info!("cell n={n}: A = {:?}", a.entries);
        rows.push(RefinementRow {
            n,
            permeability: a,
            outer_iterations: [sx.report.iterations, sy.report.iterations],
            relative_residual: [sx.report.relative_residual, sy.report.relative_residual],
        });
    }
    let mut estimates = Vec::new();
    for (k, t) in rows.windows(2).enumerate() {
        let (a1, a2) = (t[0].permeability.entries, t[1].permeability.entries);
        let mut ext = a2;
        for d in 0..2 {
            for c in 0..2 {
                ext[d][c] = a2[d][c] + (a2[d][c] - a1[d][c]) / 3.0;
            }
        }
        let observed_order = (k > 0).then(|| {
            let a0 = rows[k - 1].permeability.entries;
            [0, 1].map(|d| ((a0[d][d] - a1[d][d]) / (a1[d][d] - a2[d][d])).abs().log2())
        });
        estimates.push(RichardsonEstimate {
            n: t[1].n,
            extrapolated: PermeabilityTensor { entries: ext },
            observed_order,
        });
    }
    Ok(RefinementStudy { rows, estimates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solid_free_cell_is_degenerate() {
        let cfg = CellConfig::new(SolidMask::all_fluid(crate::grid::GridSpec::periodic(8, 1.0).unwrap()));
        assert!(matches!(solve_cell(Axis::X, &cfg), Err(Error::Degenerate(_))));
    }

    #[test]
    fn tolerance_range_is_enforced() {
        let cfg = CellConfig::for_hole(&HoleShape::disk(0.25), 16).unwrap().with_tolerance(1e-3);
        assert!(matches!(solve_cell(Axis::X, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn small_cell_is_divergence_free_and_symmetric() {
        let (a, [sx, _]) = permeability(&HoleShape::disk(0.25), 16, 1e-9).unwrap();
        let div = crate::grid::divergence(&sx.w);
        assert!(crate::grid::field_norm(&div, 2.0).unwrap() < 1e-8);
        assert!(a.relative_asymmetry() < 1e-6);
        assert!((a.entries[0][0] - a.entries[1][1]).abs() < 1e-6 * a.entries[0][0]);
        assert!(a.entries[0][0] > 0.0);
    }
}
