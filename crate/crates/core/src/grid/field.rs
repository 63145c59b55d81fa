use serde::{Deserialize, Serialize};

use super::GridSpec;
use crate::error::{Error, Result};

/// Cell-centered scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            values: vec![0.0; grid.n_cells()],
            grid,
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::structure(format!(
                "scalar field needs {} values, got {}",
                grid.n_cells(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let [x, y] = grid.cell_center(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.cell(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }
}

/// Face-centered velocity on a staggered grid.
///
/// `u` holds `grid.u_cols() x ny` values, `v` holds `nx x grid.v_rows()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaggeredVectorField {
    pub grid: GridSpec,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl StaggeredVectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            u: vec![0.0; grid.n_u()],
            v: vec![0.0; grid.n_v()],
            grid,
        }
    }

    pub fn from_parts(grid: GridSpec, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != grid.n_u() || v.len() != grid.n_v() {
            return Err(Error::structure(format!(
                "staggered field needs {}+{} values, got {}+{}",
                grid.n_u(),
                grid.n_v(),
                u.len(),
                v.len()
            )));
        }
        Ok(Self { grid, u, v })
    }

    /// Samples the two components at their own face positions.
    pub fn from_fn(
        grid: GridSpec,
        fu: impl Fn(f64, f64) -> f64,
        fv: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut u = Vec::with_capacity(grid.n_u());
        for j in 0..grid.ny {
            for i in 0..grid.u_cols() {
                let [x, y] = grid.u_position(i, j);
                u.push(fu(x, y));
            }
        }
        let mut v = Vec::with_capacity(grid.n_v());
        for j in 0..grid.v_rows() {
            for i in 0..grid.nx {
                let [x, y] = grid.v_position(i, j);
                v.push(fv(x, y));
            }
        }
        Self { grid, u, v }
    }

    /// Builds a field from one flat vector, `u` block first.
    pub fn from_flat(grid: GridSpec, flat: &[f64]) -> Result<Self> {
        if flat.len() != grid.n_faces() {
            return Err(Error::structure(format!(
                "flat velocity needs {} values, got {}",
                grid.n_faces(),
                flat.len()
            )));
        }
        let (u, v) = flat.split_at(grid.n_u());
        Ok(Self {
            grid,
            u: u.to_vec(),
            v: v.to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.u.len() + self.v.len());
        out.extend_from_slice(&self.u);
        out.extend_from_slice(&self.v);
        out
    }

    /// Face-weighted inner product `sum u1 u2 hx hy`.
    pub fn dot(&self, other: &Self) -> f64 {
        let s: f64 = self
            .u
            .iter()
            .zip(&other.u)
            .chain(self.v.iter().zip(&other.v))
            .map(|(a, b)| a * b)
            .sum();
        s * self.grid.cell_volume()
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.u.iter_mut().zip(&other.u) {
            *x += a * y;
        }
        for (x, y) in self.v.iter_mut().zip(&other.v) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.u.iter_mut().chain(self.v.iter_mut()).for_each(|x| *x *= a);
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.u).max(max_abs(&self.v))
    }
}

/// Symmetric 2x2 tensor at cell centers.
///
/// Only `xx`, `xy` and `yy` are stored; [`TensorField::yx`] returns the `xy`
/// component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorField {
    pub grid: GridSpec,
    pub xx: Vec<f64>,
    pub xy: Vec<f64>,
    pub yy: Vec<f64>,
}

impl TensorField {
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.n_cells();
        Self {
            grid,
            xx: vec![0.0; n],
            xy: vec![0.0; n],
            yy: vec![0.0; n],
        }
    }

    pub fn yx(&self) -> &[f64] {
        &self.xy
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.xx.iter_mut().zip(&other.xx) {
            *x += a * y;
        }
        for (x, y) in self.xy.iter_mut().zip(&other.xy) {
            *x += a * y;
        }
        for (x, y) in self.yy.iter_mut().zip(&other.yy) {
            *x += a * y;
        }
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.xx).max(max_abs(&self.xy)).max(max_abs(&self.yy))
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
