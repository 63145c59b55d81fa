//! Hole shapes, the periodic reference cell and the perforated domain
//! `Omega_eps`, rasterized into solid masks by cell-center inclusion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Shape of the solid obstacle in the reference cell `(-1/2, 1/2)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HoleKind {
    Disk { radius: f64 },
    Ellipse { semi_x: f64, semi_y: f64 },
    Square { half_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleShape {
    pub kind: HoleKind,
    /// Offset `x0` of the hole inside the reference cell.
    pub center: [f64; 2],
}

impl HoleShape {
    pub fn disk(radius: f64) -> Self {
        Self {
            kind: HoleKind::Disk { radius },
            center: [0.0, 0.0],
        }
    }

    pub fn square(half_width: f64) -> Self {
        Self {
            kind: HoleKind::Square { half_width },
            center: [0.0, 0.0],
        }
    }

    pub fn ellipse(semi_x: f64, semi_y: f64) -> Self {
        Self {
            kind: HoleKind::Ellipse { semi_x, semi_y },
            center: [0.0, 0.0],
        }
    }

    pub fn with_center(mut self, center: [f64; 2]) -> Self {
        self.center = center;
        self
    }

    /// Half extents along x and y.
    pub fn extents(&self) -> [f64; 2] {
        match self.kind {
            HoleKind::Disk { radius } => [radius, radius],
            HoleKind::Ellipse { semi_x, semi_y } => [semi_x, semi_y],
            HoleKind::Square { half_width } => [half_width, half_width],
        }
    }

    /// The closed hole must sit strictly inside the reference cell.
    pub fn validate(&self) -> Result<()> {
        let ext = self.extents();
        if ext.iter().chain(&self.center).any(|x| !x.is_finite()) || ext.iter().any(|&e| e < 0.0) {
            return Err(Error::config(format!("invalid hole parameters {self:?}")));
        }
        for axis in 0..2 {
            if ext[axis] + self.center[axis].abs() >= 0.5 {
                return Err(Error::config(format!(
                    "hole {self:?} touches the boundary of the reference cell"
                )));
            }
        }
        Ok(())
    }

    /// Whether the point (reference-cell coordinates) lies in the hole.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.level(p) < 0.0
    }

    /// Level-set function, negative inside the hole.
    pub fn level(&self, p: [f64; 2]) -> f64 {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        match self.kind {
            HoleKind::Disk { radius } => (dx * dx + dy * dy).sqrt() - radius,
            HoleKind::Ellipse { semi_x, semi_y } => {
                if semi_x > 0.0 && semi_y > 0.0 {
                    ((dx / semi_x).powi(2) + (dy / semi_y).powi(2)).sqrt() - 1.0
                } else {
                    1.0
                }
            }
            HoleKind::Square { half_width } => dx.abs().max(dy.abs()) - half_width,
        }
    }

    /// Fraction `theta` of the segment `a -> b` (with `a` outside, `b`
    /// inside) at which the hole boundary is crossed.
    pub fn crossing(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let at = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.level(at(mid)) < 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Exact area of the hole.
    pub fn area(&self) -> f64 {
        match self.kind {
            HoleKind::Disk { radius } => std::f64::consts::PI * radius * radius,
            HoleKind::Ellipse { semi_x, semi_y } => std::f64::consts::PI * semi_x * semi_y,
            HoleKind::Square { half_width } => 4.0 * half_width * half_width,
        }
    }
}

/// Perforated rectangle `Omega = (0, lx) x (0, ly)` with holes of size `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub lx: f64,
    pub ly: f64,
    pub epsilon: f64,
    pub hole: HoleShape,
    /// Grid cells per lattice period along each axis.
    pub cells_per_eps: usize,
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        self.hole.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::config(format!("epsilon must be in (0, 1], got {}", self.epsilon)));
        }
        if self.cells_per_eps < 8 || self.cells_per_eps % 2 != 0 {
            return Err(Error::config(format!(
                "cells_per_eps must be even and >= 8, got {}",
                self.cells_per_eps
            )));
        }
        for (name, l) in [("lx", self.lx), ("ly", self.ly)] {
            let k = l / self.epsilon;
            if !(l > 0.0) || (k - k.round()).abs() > 1e-9 * k.max(1.0) || k.round() < 1.0 {
                return Err(Error::config(format!(
                    "{name} = {l} is not a positive integer multiple of epsilon = {}",
                    self.epsilon
                )));
            }
        }
        Ok(())
    }

    /// Number of lattice periods along x and y.
    pub fn periods(&self) -> [usize; 2] {
        [
            (self.lx / self.epsilon).round() as usize,
            (self.ly / self.epsilon).round() as usize,
        ]
    }

    pub fn grid(&self) -> Result<GridSpec> {
        self.validate()?;
        let [px, py] = self.periods();
        GridSpec::walled(px * self.cells_per_eps, py * self.cells_per_eps, self.lx, self.ly)
    }

    /// Lattice index range of `K_eps` per axis: `eps * closure(Q_k)` lies in
    /// `Omega` exactly for `k = 1..=N-1`.
    pub fn interior_range(&self) -> [std::ops::RangeInclusive<usize>; 2] {
        let [px, py] = self.periods();
        [1..=px.saturating_sub(1), 1..=py.saturating_sub(1)]
    }

    pub fn is_interior(&self, k: [usize; 2]) -> bool {
        let [rx, ry] = self.interior_range();
        rx.contains(&k[0]) && ry.contains(&k[1])
    }

    /// Lattice indices of all holes.
    pub fn hole_indices(&self) -> Vec<[usize; 2]> {
        let [rx, ry] = self.interior_range();
        let mut out = Vec::new();
        for ky in ry {
            for kx in rx.clone() {
                out.push([kx, ky]);
            }
        }
        out
    }

    /// Lattice cell containing grid cell column `i` (the lattice cell `k`
    /// covers `eps (k - 1/2, k + 1/2)`) and the local column inside it.
    pub fn lattice_of(&self, i: usize) -> (usize, usize) {
        let half = self.cells_per_eps / 2;
        let k = (i + half) / self.cells_per_eps;
        (k, i + half - k * self.cells_per_eps)
    }
}

/// Solid indicator per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SolidMask {
    pub grid: GridSpec,
    pub solid: Vec<bool>,
    pub porosity: f64,
}

impl SolidMask {
    pub fn new(grid: GridSpec, solid: Vec<bool>) -> Result<Self> {
        if solid.len() != grid.n_cells() {
            return Err(Error::structure("mask size does not match grid"));
        }
        let fluid = solid.iter().filter(|s| !**s).count();
        if fluid == 0 {
            return Err(Error::config("mask has no fluid cells"));
        }
        Ok(Self {
            grid,
            porosity: fluid as f64 / grid.n_cells() as f64,
            solid,
        })
    }

    pub fn all_fluid(grid: GridSpec) -> Self {
        Self::new(grid, vec![false; grid.n_cells()]).expect("non-empty grid")
    }

    pub fn is_solid(&self, i: usize, j: usize) -> bool {
        self.solid[self.grid.cell(i, j)]
    }

    pub fn fluid_cells(&self) -> Vec<usize> {
        (0..self.solid.len()).filter(|&c| !self.solid[c]).collect()
    }

    pub fn solid_count(&self) -> usize {
        self.solid.iter().filter(|s| **s).count()
    }

    /// Faces with a solid cell on either side.
    pub fn solid_faces(&self) -> Vec<bool> {
        let g = &self.grid;
        let mut out = vec![false; g.n_faces()];
        for j in 0..g.ny {
            for i in 0..g.u_cols() {
                let (l, r) = g.u_neighbors(i);
                out[g.u_face(i, j)] = [l, r].iter().flatten().any(|&c| self.solid[g.cell(c, j)]);
            }
        }
        for j in 0..g.v_rows() {
            let (b, a) = g.v_neighbors(j);
            for i in 0..g.nx {
                out[g.n_u() + g.v_face(i, j)] =
                    [b, a].iter().flatten().any(|&c| self.solid[g.cell(i, c)]);
            }
        }
        out
    }

    /// Faces pinned to zero velocity: solid faces and wall-normal faces.
    pub fn blocked_faces(&self) -> Vec<bool> {
        let mut out = self.solid_faces();
        for (o, w) in out.iter_mut().zip(wall_faces(&self.grid)) {
            *o |= w;
        }
        out
    }
}

/// Wall-normal faces of a grid.
pub fn wall_faces(g: &GridSpec) -> Vec<bool> {
    let mut out = vec![false; g.n_faces()];
    for j in 0..g.ny {
        for i in 0..g.u_cols() {
            out[g.u_face(i, j)] = g.is_wall_u(i);
        }
    }
    for j in 0..g.v_rows() {
        for i in 0..g.nx {
            out[g.n_u() + g.v_face(i, j)] = g.is_wall_v(j);
        }
    }
    out
}

/// Mask of the periodic reference cell `(-1/2, 1/2)^2` on an `n x n` grid.
pub fn build_cell_mask(hole: &HoleShape, n: usize) -> Result<SolidMask> {
    hole.validate()?;
    let grid = GridSpec::periodic(n, 1.0)?;
    let mut solid = Vec::with_capacity(grid.n_cells());
    for j in 0..n {
        for i in 0..n {
            let [x, y] = grid.cell_center(i, j);
            solid.push(hole.contains([x - 0.5, y - 0.5]));
        }
    }
    SolidMask::new(grid, solid)
}

/// Mask of the perforated domain `Omega_eps`.
pub fn build_perforated_mask(spec: &DomainSpec) -> Result<SolidMask> {
    let grid = spec.grid()?;
    let cpe = spec.cells_per_eps as f64;
    let mut solid = Vec::with_capacity(grid.n_cells());
    for j in 0..grid.ny {
        let (ky, my) = spec.lattice_of(j);
        for i in 0..grid.nx {
            let (kx, mx) = spec.lattice_of(i);
            let inside = spec.is_interior([kx, ky])
                && spec.hole.contains([
                    (mx as f64 + 0.5) / cpe - 0.5,
                    (my as f64 + 0.5) / cpe - 0.5,
                ]);
            solid.push(inside);
        }
    }
    SolidMask::new(grid, solid)
}

/// Smallest boundary fraction used by the cut-link correction.
const MIN_THETA: f64 = 1e-6;

/// Face-level obstacle description shared by the solvers.
///
/// A face is dead when its position lies inside a hole. A live face whose
/// Laplacian link to a neighbor face crosses the hole boundary at fraction
/// `theta` of the link gets the extra diagonal `(1/theta - 1) / h^2`: the
/// symmetric ghost-value correction placing the no-slip condition on the
/// true boundary instead of at the dead neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceGeometry {
    pub grid: GridSpec,
    pub dead: Vec<bool>,
    pub cut: Vec<f64>,
}

enum Lattice<'a> {
    Cell(&'a HoleShape),
    Domain(&'a DomainSpec),
}

impl Lattice<'_> {
    fn hole(&self) -> &HoleShape {
        match self {
            Lattice::Cell(h) => h,
            Lattice::Domain(d) => &d.hole,
        }
    }

    /// Lattice cell owning `x`, if it carries a hole.
    fn owner(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        match self {
            Lattice::Cell(_) => Some([0.5, 0.5]),
            Lattice::Domain(d) => {
                let kx = (x[0] / d.epsilon + 0.5).floor();
                let ky = (x[1] / d.epsilon + 0.5).floor();
                (kx >= 0.0 && ky >= 0.0 && d.is_interior([kx as usize, ky as usize]))
                    .then(|| [kx * d.epsilon, ky * d.epsilon])
            }
        }
    }

    fn scale(&self) -> f64 {
        match self {
            Lattice::Cell(_) => 1.0,
            Lattice::Domain(d) => d.epsilon,
        }
    }

    fn local(&self, x: [f64; 2], origin: [f64; 2]) -> [f64; 2] {
        let s = self.scale();
        [(x[0] - origin[0]) / s, (x[1] - origin[1]) / s]
    }

    fn inside(&self, x: [f64; 2]) -> bool {
        self.owner(x)
            .is_some_and(|o| self.hole().contains(self.local(x, o)))
    }
}

impl FaceGeometry {
    /// Faces of the periodic reference cell grid.
    pub fn cell(hole: &HoleShape, grid: GridSpec) -> Result<Self> {
        hole.validate()?;
        Ok(Self::build(grid, &Lattice::Cell(hole)))
    }

    /// Plain staircase: faces touching a solid cell are dead, no correction.
    pub fn staircase(mask: &SolidMask) -> Self {
        Self {
            grid: mask.grid,
            dead: mask.solid_faces(),
            cut: vec![0.0; mask.grid.n_faces()],
        }
    }

    pub fn perforated(spec: &DomainSpec) -> Result<Self> {
        let grid = spec.grid()?;
        Ok(Self::build(grid, &Lattice::Domain(spec)))
    }

    /// Reference cell coordinates are shifted so the cell is `(0, 1)^2`.
    fn build(grid: GridSpec, lat: &Lattice<'_>) -> Self {
        let nf = grid.n_faces();
        let nu = grid.n_u();
        let mut pos = Vec::with_capacity(nf);
        for j in 0..grid.ny {
            for i in 0..grid.u_cols() {
                pos.push(grid.u_position(i, j));
            }
        }
        for j in 0..grid.v_rows() {
            for i in 0..grid.nx {
                pos.push(grid.v_position(i, j));
            }
        }
        let dead: Vec<bool> = pos.iter().map(|&x| lat.inside(x)).collect();
        let mut cut = vec![0.0; nf];
        let (hx, hy) = (grid.hx(), grid.hy());
        let links = |f: usize| -> Vec<(usize, [f64; 2], f64)> {
            let mut out = Vec::with_capacity(4);
            let (is_u, local) = if f < nu { (true, f) } else { (false, f - nu) };
            let cols = if is_u { grid.u_cols() } else { grid.nx };
            let rows = if is_u { grid.ny } else { grid.v_rows() };
            let (i, j) = (local % cols, local / cols);
            let base = if is_u { 0 } else { nu };
            let x = pos[f];
            let per_x = grid.periodic_x;
            let per_y = grid.periodic_y;
            let mut push = |ii: Option<usize>, jj: Option<usize>, d: [f64; 2], h: f64| {
                if let (Some(ii), Some(jj)) = (ii, jj) {
                    out.push((base + jj * cols + ii, [x[0] + d[0], x[1] + d[1]], h));
                }
            };
            let left = if i > 0 { Some(i - 1) } else { per_x.then(|| cols - 1) };
            let right = if i + 1 < cols { Some(i + 1) } else { per_x.then_some(0) };
            let down = if j > 0 { Some(j - 1) } else { per_y.then(|| rows - 1) };
            let up = if j + 1 < rows { Some(j + 1) } else { per_y.then_some(0) };
            push(left, Some(j), [-hx, 0.0], hx);
            push(right, Some(j), [hx, 0.0], hx);
            push(Some(i), down, [0.0, -hy], hy);
            push(Some(i), up, [0.0, hy], hy);
            out
        };
        for f in 0..nf {
            if dead[f] {
                continue;
            }
            for (n, xn, h) in links(f) {
                if !dead[n] {
                    continue;
                }
                let origin = lat.owner(xn).expect("dead face belongs to a hole");
                let theta = lat
                    .hole()
                    .crossing(lat.local(pos[f], origin), lat.local(xn, origin))
                    .max(MIN_THETA);
                cut[f] += (1.0 / theta - 1.0) / (h * h);
            }
        }
        Self { grid, dead, cut }
    }

    /// Cells with at least one face that is neither dead nor on a wall.
    pub fn pressure_cells(&self) -> Vec<usize> {
        let g = &self.grid;
        let walls = wall_faces(g);
        let live = |f: usize| !self.dead[f] && !walls[f];
        let mut out = Vec::new();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let faces = [
                    g.u_face(i, j),
                    g.u_face(g.next_x(i), j),
                    g.n_u() + g.v_face(i, j),
                    g.n_u() + g.v_face(i, g.next_y(j)),
                ];
                if faces.iter().any(|&f| live(f)) {
                    out.push(g.cell(i, j));
                }
            }
        }
        out
    }

    /// Dead faces plus wall-normal faces.
    pub fn blocked_faces(&self) -> Vec<bool> {
        let mut out = self.dead.clone();
        for (o, w) in out.iter_mut().zip(wall_faces(&self.grid)) {
            *o |= w;
        }
        out
    }

    pub fn dead_count(&self) -> usize {
        self.dead.iter().filter(|d| **d).count()
    }
}

pub fn porosity(mask: &SolidMask) -> f64 {
    mask.porosity
}

#[cfg(test)]
mod tests {
    use super::*;

    fn domain(eps: f64) -> DomainSpec {
        DomainSpec {
            lx: 1.0,
            ly: 1.0,
            epsilon: eps,
            hole: HoleShape::disk(0.25),
            cells_per_eps: 16,
        }
    }

    #[test]
    fn square_hole_porosity_is_exact() {
        let m = build_cell_mask(&HoleShape::square(0.25), 64).unwrap();
        assert_eq!(m.porosity, 0.75);
    }

    #[test]
    fn disk_porosity_converges() {
        let exact = 1.0 - std::f64::consts::PI / 16.0;
        let m = build_cell_mask(&HoleShape::disk(0.25), 256).unwrap();
        assert!((m.porosity - exact).abs() < 1e-3);
    }

    #[test]
    fn rejects_holes_touching_cell_boundary() {
        assert!(build_cell_mask(&HoleShape::disk(0.5), 16).is_err());
        assert!(HoleShape::disk(0.3).with_center([0.25, 0.0]).validate().is_err());
        assert!(HoleShape::disk(0.2).with_center([0.25, 0.0]).validate().is_ok());
    }

    #[test]
    fn hole_counts() {
        assert_eq!(domain(0.25).hole_indices().len(), 9);
        assert_eq!(domain(1.0).hole_indices().len(), 0);
        let m = build_perforated_mask(&domain(1.0)).unwrap();
        assert_eq!(m.solid_count(), 0);
    }

    #[test]
    fn perforated_cells_match_reference_cell() {
        let spec = domain(0.25);
        let m = build_perforated_mask(&spec).unwrap();
        let cell = build_cell_mask(&spec.hole, 16).unwrap();
        for k in spec.hole_indices() {
            for my in 0..16 {
                for mx in 0..16 {
                    let i = k[0] * 16 - 8 + mx;
                    let j = k[1] * 16 - 8 + my;
                    assert_eq!(m.is_solid(i, j), cell.is_solid(mx, my));
                }
            }
        }
        assert_eq!(m.solid_count(), 9 * cell.solid_count());
    }

    #[test]
    fn rejects_incommensurate_epsilon() {
        let mut s = domain(0.3);
        assert!(s.validate().is_err());
        s.epsilon = 0.25;
        s.cells_per_eps = 9;
        assert!(s.validate().is_err());
    }
}
