use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FaceGeometry;
use crate::grid::{divergence, GridSpec, StaggeredVectorField};

/// Body force `f` on `Omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingKind {
    /// Uniform force. In a sealed box this is a pure gradient.
    Constant { fx: f64, fy: f64 },
    /// Solenoidal vortex `curl psi`, `psi = a sin^2(pi x/lx) sin^2(pi y/ly) / pi`.
    Vortex { amplitude: f64 },
}

/// Initial velocity `u0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialKind {
    Rest,
    /// Discrete curl of the vortex stream function, cut to zero around holes.
    Vortex { amplitude: f64 },
}

/// Forcing and initial data sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSpec {
    pub f: StaggeredVectorField,
    pub u0: StaggeredVectorField,
}

impl ForcingSpec {
    pub fn build(force: &ForcingKind, initial: &InitialKind, faces: &FaceGeometry) -> Result<Self> {
        let grid = faces.grid;
        let f = sample_forcing(force, &grid);
        let u0 = match *initial {
            InitialKind::Rest => StaggeredVectorField::zeros(grid),
            InitialKind::Vortex { amplitude } => {
                let mut psi = stream_nodes(&grid, amplitude);
                for (f, _) in faces.dead.iter().enumerate().filter(|(_, d)| **d) {
                    for n in face_nodes(&grid, f) {
                        psi[n] = 0.0;
                    }
                }
                curl(&grid, &psi)
            }
        };
        let spec = Self { f, u0 };
        spec.validate(faces)?;
        Ok(spec)
    }

    /// `u0` must be discretely divergence-free and vanish on blocked faces.
    pub fn validate(&self, faces: &FaceGeometry) -> Result<()> {
        faces.grid.ensure_same(&self.f.grid, "forcing")?;
        faces.grid.ensure_same(&self.u0.grid, "initial velocity")?;
        if [&self.f, &self.u0].iter().any(|v| v.u.iter().chain(&v.v).any(|x| !x.is_finite())) {
            return Err(Error::config("non-finite forcing or initial data"));
        }
        let div = divergence(&self.u0).max_abs();
        if div > 1e-10 {
            return Err(Error::config(format!("initial velocity has divergence {div:e}")));
        }
        let flat = self.u0.to_flat();
        if faces
            .blocked_faces()
            .iter()
            .zip(&flat)
            .any(|(&b, &x)| b && x != 0.0)
        {
            return Err(Error::config("initial velocity does not vanish on the holes and walls"));
        }
        Ok(())
    }
}

/// The body force on the faces of any grid of `Omega`.
pub fn sample_forcing(force: &ForcingKind, grid: &GridSpec) -> StaggeredVectorField {
    match *force {
        ForcingKind::Constant { fx, fy } => StaggeredVectorField::from_fn(*grid, |_, _| fx, |_, _| fy),
        ForcingKind::Vortex { amplitude } => curl(grid, &stream_nodes(grid, amplitude)),
    }
}

fn stream_nodes(g: &GridSpec, amplitude: f64) -> Vec<f64> {
    let pi = std::f64::consts::PI;
    let mut psi = vec![0.0; g.n_nodes()];
    for j in 0..g.node_rows() {
        for i in 0..g.node_cols() {
            let edge_x = !g.periodic_x && (i == 0 || i + 1 == g.node_cols());
            let edge_y = !g.periodic_y && (j == 0 || j + 1 == g.node_rows());
            if edge_x || edge_y {
                continue;
            }
            let [x, y] = g.node_position(i, j);
            let sx = (pi * x / g.lx).sin();
            let sy = (pi * y / g.ly).sin();
            psi[g.node(i, j)] = amplitude * sx * sx * sy * sy / pi;
        }
    }
    psi
}

/// `(d psi/dy, -d psi/dx)` on faces from nodal values.
fn curl(g: &GridSpec, psi: &[f64]) -> StaggeredVectorField {
    let mut out = StaggeredVectorField::zeros(*g);
    for j in 0..g.ny {
        for i in 0..g.u_cols() {
            out.u[g.u_face(i, j)] = (psi[g.node(i, g.next_y(j))] - psi[g.node(i, j)]) / g.hy();
        }
    }
    for j in 0..g.v_rows() {
        for i in 0..g.nx {
            out.v[g.v_face(i, j)] = -(psi[g.node(g.next_x(i), j)] - psi[g.node(i, j)]) / g.hx();
        }
    }
    out
}

/// The two end nodes of a face.
fn face_nodes(g: &GridSpec, f: usize) -> [usize; 2] {
    if f < g.n_u() {
        let (i, j) = (f % g.u_cols(), f / g.u_cols());
        [g.node(i, j), g.node(i, g.next_y(j))]
    } else {
        let f = f - g.n_u();
        let (i, j) = (f % g.nx, f / g.nx);
        [g.node(i, j), g.node(g.next_x(i), j)]
    }
}
