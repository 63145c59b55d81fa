use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest number of cells allowed along either axis.
pub const MIN_CELLS: usize = 4;

/// Uniform staggered grid on the rectangle `(0, lx) x (0, ly)`.
///
/// Pressure lives at cell centers, `u` on vertical faces, `v` on horizontal
/// faces and shear quantities at nodes. Along a periodic axis the last face
/// (node) coincides with the first one and is not stored; along a walled axis
/// both boundary faces are stored.
///
/// All arrays are row-major with `y` as the slow index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub periodic_x: bool,
    pub periodic_y: bool,
}

impl GridSpec {
    pub fn new(
        nx: usize,
        ny: usize,
        lx: f64,
        ly: f64,
        periodic_x: bool,
        periodic_y: bool,
    ) -> Result<Self> {
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return Err(Error::config(format!(
                "grid needs at least {MIN_CELLS} cells per axis, got {nx} x {ny}"
            )));
        }
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::config(format!(
                "grid extents must be positive, got {lx} x {ly}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            periodic_x,
            periodic_y,
        })
    }

    /// Doubly periodic grid with `n x n` cells on a square of side `l`.
    pub fn periodic(n: usize, l: f64) -> Result<Self> {
        Self::new(n, n, l, l, true, true)
    }

    /// Grid with walls on all four sides.
    pub fn walled(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::new(nx, ny, lx, ly, false, false)
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Number of `u` faces per grid row.
    pub fn u_cols(&self) -> usize {
        if self.periodic_x {
            self.nx
        } else {
            self.nx + 1
        }
    }

    /// Number of rows of `v` faces.
    pub fn v_rows(&self) -> usize {
        if self.periodic_y {
            self.ny
        } else {
            self.ny + 1
        }
    }

    pub fn n_u(&self) -> usize {
        self.u_cols() * self.ny
    }

    pub fn n_v(&self) -> usize {
        self.nx * self.v_rows()
    }

    /// Total number of velocity unknowns, `u` block first.
    pub fn n_faces(&self) -> usize {
        self.n_u() + self.n_v()
    }

    pub fn node_cols(&self) -> usize {
        self.u_cols()
    }

    pub fn node_rows(&self) -> usize {
        self.v_rows()
    }

    pub fn n_nodes(&self) -> usize {
        self.node_cols() * self.node_rows()
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn u_face(&self, i: usize, j: usize) -> usize {
        j * self.u_cols() + i
    }

    #[inline]
    pub fn v_face(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.node_cols() + i
    }

    /// Whether `u` face column `i` lies on a wall.
    #[inline]
    pub fn is_wall_u(&self, i: usize) -> bool {
        !self.periodic_x && (i == 0 || i == self.nx)
    }

    #[inline]
    pub fn is_wall_v(&self, j: usize) -> bool {
        !self.periodic_y && (j == 0 || j == self.ny)
    }

    /// Cell columns left and right of `u` face column `i`.
    #[inline]
    pub fn u_neighbors(&self, i: usize) -> (Option<usize>, Option<usize>) {
        neighbors(i, self.nx, self.periodic_x)
    }

    /// Cell rows below and above `v` face row `j`.
    #[inline]
    pub fn v_neighbors(&self, j: usize) -> (Option<usize>, Option<usize>) {
        neighbors(j, self.ny, self.periodic_y)
    }

    /// Index of the next cell column, wrapping on a periodic axis.
    #[inline]
    pub fn next_x(&self, i: usize) -> usize {
        if self.periodic_x {
            (i + 1) % self.nx
        } else {
            i + 1
        }
    }

    #[inline]
    pub fn next_y(&self, j: usize) -> usize {
        if self.periodic_y {
            (j + 1) % self.ny
        } else {
            j + 1
        }
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [(i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy()]
    }

    pub fn u_position(&self, i: usize, j: usize) -> [f64; 2] {
        [i as f64 * self.hx(), (j as f64 + 0.5) * self.hy()]
    }

    pub fn v_position(&self, i: usize, j: usize) -> [f64; 2] {
        [(i as f64 + 0.5) * self.hx(), j as f64 * self.hy()]
    }

    pub fn node_position(&self, i: usize, j: usize) -> [f64; 2] {
        [i as f64 * self.hx(), j as f64 * self.hy()]
    }

    pub fn ensure_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::structure(format!(
                "{what}: grid {self:?} does not match {other:?}"
            )))
        }
    }
}

fn neighbors(face: usize, n: usize, periodic: bool) -> (Option<usize>, Option<usize>) {
    if periodic {
        (Some((face + n - 1) % n), Some(face % n))
    } else {
        let lo = (face > 0).then(|| face - 1);
        let hi = (face < n).then_some(face);
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_grids() {
        assert!(GridSpec::periodic(3, 1.0).is_err());
        assert!(GridSpec::walled(4, 4, 0.0, 1.0).is_err());
    }

    #[test]
    fn face_counts() {
        let p = GridSpec::periodic(8, 1.0).unwrap();
        assert_eq!((p.n_u(), p.n_v(), p.n_nodes()), (64, 64, 64));
        let w = GridSpec::walled(8, 4, 2.0, 1.0).unwrap();
        assert_eq!((w.n_u(), w.n_v(), w.n_nodes()), (36, 40, 45));
        assert_eq!(w.u_neighbors(0), (None, Some(0)));
        assert_eq!(w.u_neighbors(8), (Some(7), None));
        assert_eq!(p.u_neighbors(0), (Some(7), Some(0)));
    }
}
