use crate::error::{Error, Result};

/// Square or rectangular linear map applied to flat vectors.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Diagonal used by Jacobi preconditioning, if available.
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Compressed sparse row matrix with sorted column indices and no explicit
/// zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::structure(format!(
                    "triplet ({r}, {c}) outside a {nrows} x {ncols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::numerical(format!("non-finite entry at ({r}, {c})")));
            }
            counts[r + 1] += 1;
        }
        for r in 0..nrows {
            counts[r + 1] += counts[r];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut next = counts.clone();
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            row.clear();
            row.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut s = 0.0;
                while k < row.len() && row[k].0 == c {
                    s += row[k].1;
                    k += 1;
                }
                if s != 0.0 {
                    col_idx.push(c);
                    values.push(s);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal_matrix(&vec![1.0; n])
    }

    pub fn diagonal_matrix(d: &[f64]) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for (i, &x) in d.iter().enumerate() {
            if x != 0.0 {
                col_idx.push(i);
                values.push(x);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows: d.len(),
            ncols: d.len(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.apply(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                col_idx[next[c]] = r;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::structure(format!(
                "cannot multiply {} x {} by {} x {}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut touched = Vec::new();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.nrows {
            touched.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if acc[c] != 0.0 {
                    col_idx.push(c);
                    values.push(acc[c]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: other.ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &Self) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::structure("cannot add matrices of different shapes"));
        }
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, a * v)));
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        let mut out = self.clone();
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.values[k] *= d[r];
            }
        }
        out
    }

    /// Keeps the listed columns, renumbered in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.ncols];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                if map[c] != usize::MAX {
                    t.push((r, map[c], v));
                }
            }
        }
        Self::from_triplets(self.nrows, keep.len(), &t).expect("valid selection")
    }

    pub fn select_rows(&self, keep: &[usize]) -> Self {
        let mut t = Vec::new();
        for (new, &old) in keep.iter().enumerate() {
            t.extend(self.row(old).map(|(c, v)| (new, c, v)));
        }
        Self::from_triplets(keep.len(), self.ncols, &t).expect("valid selection")
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            t.extend(self.row(r).map(|(c, v)| (r, c, v)));
        }
        t
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst = 0.0f64;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - t.get(r, c)).abs());
            }
            for (c, v) in t.row(r) {
                worst = worst.max((v - self.get(r, c)).abs());
            }
        }
        worst
    }
}

impl LinearOperator for SparseMatrix {
    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.nrows) {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yr = s;
        }
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some((0..self.nrows.min(self.ncols)).map(|r| self.get(r, r)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_and_drop_zeros() {
        let a = SparseMatrix::from_triplets(
            2,
            3,
            &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 3.0), (1, 1, 1.0), (1, 1, -1.0)],
        )
        .unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 2), 4.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert!(SparseMatrix::from_triplets(1, 1, &[(1, 0, 1.0)]).is_err());
    }

    #[test]
    fn product_and_transpose() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)]).unwrap();
        let at = a.transpose();
        assert_eq!(at.get(1, 0), 2.0);
        let p = at.matmul(&a).unwrap();
        assert_eq!(p.get(0, 0), 1.0);
        assert_eq!(p.get(0, 1), 2.0);
        assert_eq!(p.get(1, 1), 13.0);
        assert_eq!(p.asymmetry(), 0.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![3.0, 3.0]);
    }
}
