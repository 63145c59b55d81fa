use super::{GridSpec, ScalarField, SparseMatrix, StaggeredVectorField, TensorField};
use crate::error::Result;
use crate::geometry::SolidMask;

/// Assembled staggered-grid operators acting on flat velocity vectors
/// (`u` block first) and cell vectors.
///
/// Tangential derivatives at walls use the mirror ghost value `-u`, i.e. the
/// walls are no-slip. Normal derivatives never reach outside the grid.
#[derive(Debug, Clone)]
pub struct Operators {
    pub grid: GridSpec,
    /// Cells x faces.
    pub div: SparseMatrix,
    /// Faces x cells; rows of wall faces are empty.
    pub grad: SparseMatrix,
    /// Rows `[D_xx (cells), D_yy (cells), D_xy (nodes)]`.
    pub strain: SparseMatrix,
    /// Rows `[du/dx (cells), dv/dy (cells), du/dy (nodes), dv/dx (nodes)]`.
    pub vgrad: SparseMatrix,
    /// Cells x nodes, each cell averaging its four corners.
    pub node_to_cell: SparseMatrix,
    /// Column sums of `node_to_cell`: 1 inside, 1/2 on a wall, 1/4 at a corner.
    pub node_weight: Vec<f64>,
}

impl Operators {
    pub fn new(grid: GridSpec) -> Self {
        let div = divergence_matrix(&grid);
        let grad = gradient_matrix(&grid);
        let (dudy, dvdx) = nodal_shear_matrices(&grid);
        let n_c = grid.n_cells();
        let n_n = grid.n_nodes();
        let mut strain_t = Vec::new();
        let mut vgrad_t = Vec::new();
        for r in 0..n_c {
            for (c, v) in div.row(r) {
                let is_u = c < grid.n_u();
                let block = if is_u { 0 } else { n_c };
                strain_t.push((r + block, c, v));
                vgrad_t.push((r + block, c, v));
            }
        }
        for r in 0..n_n {
            for (c, v) in dudy.row(r) {
                strain_t.push((2 * n_c + r, c, 0.5 * v));
                vgrad_t.push((2 * n_c + r, c, v));
            }
            for (c, v) in dvdx.row(r) {
                strain_t.push((2 * n_c + r, c, 0.5 * v));
                vgrad_t.push((2 * n_c + n_n + r, c, v));
            }
        }
        let nf = grid.n_faces();
        let strain = SparseMatrix::from_triplets(2 * n_c + n_n, nf, &strain_t).expect("strain");
        let vgrad = SparseMatrix::from_triplets(2 * n_c + 2 * n_n, nf, &vgrad_t).expect("vgrad");
        let node_to_cell = node_to_cell_matrix(&grid);
        let mut node_weight = vec![0.0; n_n];
        for r in 0..n_c {
            for (c, v) in node_to_cell.row(r) {
                node_weight[c] += v;
            }
        }
        Self {
            grid,
            div,
            grad,
            strain,
            vgrad,
            node_to_cell,
            node_weight,
        }
    }

    /// Positive vector Laplacian `-Delta_h` as the energy form of `vgrad`.
    pub fn neg_laplacian(&self) -> SparseMatrix {
        let n_c = self.grid.n_cells();
        let mut w = vec![1.0; 2 * n_c];
        w.extend_from_slice(&self.node_weight);
        w.extend_from_slice(&self.node_weight);
        let wg = self.vgrad.scale_rows(&w);
        self.vgrad.transpose().matmul(&wg).expect("shapes agree")
    }

    /// Viscous operator `S^T W S` for cell viscosities `eta`; its quadratic
    /// form is `sum_c eta_c |D|^2_c` (per unit cell volume).
    pub fn viscous_matrix(&self, eta: &[f64]) -> SparseMatrix {
        let w = self.strain_weights(eta);
        let ws = self.strain.scale_rows(&w);
        self.strain.transpose().matmul(&ws).expect("shapes agree")
    }

    /// Row weights of the strain rows for cell viscosities `eta`.
    pub fn strain_weights(&self, eta: &[f64]) -> Vec<f64> {
        let n_c = self.grid.n_cells();
        let mut w = Vec::with_capacity(2 * n_c + self.grid.n_nodes());
        w.extend_from_slice(eta);
        w.extend_from_slice(eta);
        let mut nodal = vec![0.0; self.grid.n_nodes()];
        for r in 0..n_c {
            for (c, v) in self.node_to_cell.row(r) {
                nodal[c] += v * eta[r];
            }
        }
        w.extend(nodal.into_iter().map(|x| 2.0 * x));
        w
    }

    /// `|D|^2` at cell centers: `D_xx^2 + D_yy^2 + 2 avg(D_xy^2)`.
    pub fn strain_sq(&self, flat: &[f64]) -> Vec<f64> {
        let n_c = self.grid.n_cells();
        let d = self.strain.mul_vec(flat);
        let shear: Vec<f64> = d[2 * n_c..].iter().map(|x| x * x).collect();
        let avg = self.node_to_cell.mul_vec(&shear);
        (0..n_c)
            .map(|c| d[c] * d[c] + d[n_c + c] * d[n_c + c] + 2.0 * avg[c])
            .collect()
    }

    /// `|grad v|^2` at cell centers with nodal terms averaged.
    pub fn grad_sq(&self, flat: &[f64]) -> Vec<f64> {
        let n_c = self.grid.n_cells();
        let n_n = self.grid.n_nodes();
        let g = self.vgrad.mul_vec(flat);
        let nodal: Vec<f64> = (0..n_n)
            .map(|k| g[2 * n_c + k].powi(2) + g[2 * n_c + n_n + k].powi(2))
            .collect();
        let avg = self.node_to_cell.mul_vec(&nodal);
        (0..n_c)
            .map(|c| g[c] * g[c] + g[n_c + c] * g[n_c + c] + avg[c])
            .collect()
    }

    /// Strain tensor with `D_xy` averaged from the nodes to cell centers.
    pub fn strain_tensor(&self, flat: &[f64]) -> TensorField {
        let n_c = self.grid.n_cells();
        let d = self.strain.mul_vec(flat);
        let xy = self.node_to_cell.mul_vec(&d[2 * n_c..]);
        TensorField {
            grid: self.grid,
            xx: d[..n_c].to_vec(),
            xy,
            yy: d[n_c..2 * n_c].to_vec(),
        }
    }
}

fn divergence_matrix(g: &GridSpec) -> SparseMatrix {
    let (hx, hy) = (g.hx(), g.hy());
    let nu = g.n_u();
    let mut t = Vec::with_capacity(4 * g.n_cells());
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.cell(i, j);
            t.push((c, g.u_face(i, j), -1.0 / hx));
            t.push((c, g.u_face(g.next_x(i), j), 1.0 / hx));
            t.push((c, nu + g.v_face(i, j), -1.0 / hy));
            t.push((c, nu + g.v_face(i, g.next_y(j)), 1.0 / hy));
        }
    }
    SparseMatrix::from_triplets(g.n_cells(), g.n_faces(), &t).expect("div")
}

fn gradient_matrix(g: &GridSpec) -> SparseMatrix {
    let (hx, hy) = (g.hx(), g.hy());
    let nu = g.n_u();
    let mut t = Vec::with_capacity(2 * g.n_faces());
    for j in 0..g.ny {
        for i in 0..g.u_cols() {
            if let (Some(l), Some(r)) = g.u_neighbors(i) {
                let f = g.u_face(i, j);
                t.push((f, g.cell(r, j), 1.0 / hx));
                t.push((f, g.cell(l, j), -1.0 / hx));
            }
        }
    }
    for j in 0..g.v_rows() {
        if let (Some(b), Some(a)) = g.v_neighbors(j) {
            for i in 0..g.nx {
                let f = nu + g.v_face(i, j);
                t.push((f, g.cell(i, a), 1.0 / hy));
                t.push((f, g.cell(i, b), -1.0 / hy));
            }
        }
    }
    SparseMatrix::from_triplets(g.n_faces(), g.n_cells(), &t).expect("grad")
}

/// `du/dy` and `dv/dx` at nodes (nodes x faces).
fn nodal_shear_matrices(g: &GridSpec) -> (SparseMatrix, SparseMatrix) {
    let (hx, hy) = (g.hx(), g.hy());
    let nu = g.n_u();
    let mut tu = Vec::new();
    let mut tv = Vec::new();
    for j in 0..g.node_rows() {
        for i in 0..g.node_cols() {
            let n = g.node(i, j);
            // u faces in column i below and above the node
            let (below, above) = g.v_neighbors(j);
            match (below, above) {
                (Some(b), Some(a)) => {
                    tu.push((n, g.u_face(i, a), 1.0 / hy));
                    tu.push((n, g.u_face(i, b), -1.0 / hy));
                }
                (None, Some(a)) => tu.push((n, g.u_face(i, a), 2.0 / hy)),
                (Some(b), None) => tu.push((n, g.u_face(i, b), -2.0 / hy)),
                (None, None) => {}
            }
            let (left, right) = g.u_neighbors(i);
            match (left, right) {
                (Some(l), Some(r)) => {
                    tv.push((n, nu + g.v_face(r, j), 1.0 / hx));
                    tv.push((n, nu + g.v_face(l, j), -1.0 / hx));
                }
                (None, Some(r)) => tv.push((n, nu + g.v_face(r, j), 2.0 / hx)),
                (Some(l), None) => tv.push((n, nu + g.v_face(l, j), -2.0 / hx)),
                (None, None) => {}
            }
        }
    }
    let nn = g.n_nodes();
    let nf = g.n_faces();
    (
        SparseMatrix::from_triplets(nn, nf, &tu).expect("dudy"),
        SparseMatrix::from_triplets(nn, nf, &tv).expect("dvdx"),
    )
}

fn node_to_cell_matrix(g: &GridSpec) -> SparseMatrix {
    let mut t = Vec::with_capacity(4 * g.n_cells());
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.cell(i, j);
            let (i1, j1) = (g.next_x(i), g.next_y(j));
            for n in [g.node(i, j), g.node(i1, j), g.node(i, j1), g.node(i1, j1)] {
                t.push((c, n, 0.25));
            }
        }
    }
    SparseMatrix::from_triplets(g.n_cells(), g.n_nodes(), &t).expect("node_to_cell")
}

/// Discrete divergence at cell centers.
pub fn divergence(v: &StaggeredVectorField) -> ScalarField {
    let ops = Operators::new(v.grid);
    ScalarField {
        grid: v.grid,
        values: ops.div.mul_vec(&v.to_flat()),
    }
}

/// Discrete gradient on faces; wall faces carry zero.
pub fn gradient(p: &ScalarField) -> StaggeredVectorField {
    let ops = Operators::new(p.grid);
    StaggeredVectorField::from_flat(p.grid, &ops.grad.mul_vec(&p.values)).expect("grad shape")
}

/// Symmetric rate-of-strain tensor at cell centers.
pub fn rate_of_strain(v: &StaggeredVectorField) -> TensorField {
    Operators::new(v.grid).strain_tensor(&v.to_flat())
}

/// Five-point vector Laplacian of `v`.
///
/// Faces touching a solid cell of `mask` are treated as zero and return zero,
/// as do wall-normal faces.
pub fn vector_laplacian(
    v: &StaggeredVectorField,
    mask: Option<&SolidMask>,
) -> Result<StaggeredVectorField> {
    let g = v.grid;
    let blocked = match mask {
        Some(m) => {
            g.ensure_same(&m.grid, "vector_laplacian mask")?;
            m.blocked_faces()
        }
        None => crate::geometry::wall_faces(&g),
    };
    let mut x = v.to_flat();
    for (xi, &b) in x.iter_mut().zip(&blocked) {
        if b {
            *xi = 0.0;
        }
    }
    let mut y = Operators::new(g).neg_laplacian().mul_vec(&x);
    for (yi, &b) in y.iter_mut().zip(&blocked) {
        *yi = if b { 0.0 } else { -*yi };
    }
    StaggeredVectorField::from_flat(g, &y)
}
