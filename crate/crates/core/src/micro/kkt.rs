use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};
use crate::geometry::FaceGeometry;
use crate::grid::{Operators, SparseMatrix};

/// Unknown numbering of the implicit step: free faces, then pressure cells
/// minus the first one (which pins the gauge).
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub free: Vec<usize>,
    pub pressure: Vec<usize>,
    /// `B`: divergence on pressure rows and free columns.
    pub div: SparseMatrix,
    pub div_t: SparseMatrix,
}

impl Layout {
    pub fn new(ops: &Operators, faces: &FaceGeometry) -> Result<Self> {
        let blocked = faces.blocked_faces();
        let free: Vec<usize> = (0..blocked.len()).filter(|&f| !blocked[f]).collect();
        let pressure = faces.pressure_cells();
        if free.is_empty() || pressure.is_empty() {
            return Err(Error::config("domain has no fluid faces"));
        }
        let div = ops.div.select_rows(&pressure).select_columns(&free);
        let div_t = div.transpose();
        Ok(Self {
            free,
            pressure,
            div,
            div_t,
        })
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn n_unknowns(&self) -> usize {
        self.free.len() + self.pressure.len() - 1
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&f| full[f]).collect()
    }

    pub fn scatter(&self, free: &[f64], full: &mut [f64]) {
        for (&f, &x) in self.free.iter().zip(free) {
            full[f] = x;
        }
    }
}

/// Factorized `[[m I + K, -B^T], [-B, 0]]` for a fixed mass coefficient and
/// reference viscosity.
pub(crate) struct Kkt {
    lu: Lu<usize, f64>,
    pub mass: f64,
    n: usize,
    n_free: usize,
}

impl Kkt {
    pub fn factor(layout: &Layout, viscous: &SparseMatrix, cut_diag: &[f64], mass: f64) -> Result<Self> {
        let n_free = layout.n_free();
        let n = layout.n_unknowns();
        let k = viscous.select_rows(&layout.free).select_columns(&layout.free);
        let mut t = Vec::with_capacity(k.nnz() + n_free + 4 * n);
        for (r, row) in (0..n_free).map(|r| (r, k.row(r))) {
            for (c, v) in row {
                t.push(Triplet::new(r, c, v));
            }
            t.push(Triplet::new(r, r, mass + cut_diag[r]));
        }
        for r in 1..layout.pressure.len() {
            for (c, v) in layout.div.row(r) {
                t.push(Triplet::new(n_free + r - 1, c, -v));
                t.push(Triplet::new(c, n_free + r - 1, -v));
            }
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t)
            .map_err(|e| Error::numerical(format!("implicit step matrix: {e:?}")))?;
        let lu = a
            .sp_lu()
            .map_err(|e| Error::numerical(format!("implicit step factorization failed: {e:?}")))?;
        Ok(Self {
            lu,
            mass,
            n,
            n_free,
        })
    }

    /// Solves for `(du on free faces, dp on pressure cells)`; `dp` of the
    /// first pressure cell is zero.
    pub fn solve(&self, ru: &[f64], rp: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut b = Mat::<f64>::zeros(self.n, 1);
        for (k, &x) in ru.iter().enumerate() {
            b[(k, 0)] = x;
        }
        for (k, &x) in rp.iter().enumerate().skip(1) {
            b[(self.n_free + k - 1, 0)] = x;
        }
        let x = self.lu.solve(&b);
        let du: Vec<f64> = (0..self.n_free).map(|k| x[(k, 0)]).collect();
        let mut dp = vec![0.0; rp.len()];
        for (k, d) in dp.iter_mut().enumerate().skip(1) {
            *d = x[(self.n_free + k - 1, 0)];
        }
        if du.iter().chain(&dp).any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite implicit step solution"));
        }
        Ok((du, dp))
    }
}
