use super::{GridSpec, ScalarField, StaggeredVectorField, TensorField};
use crate::error::{Error, Result};

/// Field with a pointwise magnitude collocated at cell centers.
pub trait FieldMagnitude {
    fn grid(&self) -> &GridSpec;
    /// Squared magnitude per cell.
    fn magnitude_sq(&self) -> Vec<f64>;
}

impl FieldMagnitude for ScalarField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn magnitude_sq(&self) -> Vec<f64> {
        self.values.iter().map(|x| x * x).collect()
    }
}

impl FieldMagnitude for StaggeredVectorField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Averages the squares of the two faces bounding each cell per component.
    fn magnitude_sq(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.n_cells());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let ul = self.u[g.u_face(i, j)];
                let ur = self.u[g.u_face(g.next_x(i), j)];
                let vb = self.v[g.v_face(i, j)];
                let vt = self.v[g.v_face(i, g.next_y(j))];
                out.push(0.5 * (ul * ul + ur * ur + vb * vb + vt * vt));
            }
        }
        out
    }
}

impl FieldMagnitude for TensorField {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Frobenius norm squared.
    fn magnitude_sq(&self) -> Vec<f64> {
        (0..self.xx.len())
            .map(|c| self.xx[c].powi(2) + 2.0 * self.xy[c].powi(2) + self.yy[c].powi(2))
            .collect()
    }
}

/// Discrete `L^q(Omega)` norm, `q` in `[1, inf]`.
pub fn field_norm(f: &impl FieldMagnitude, q: f64) -> Result<f64> {
    norm_from_sq(&f.magnitude_sq(), f.grid().cell_volume(), q)
}

/// `L^q` norm of a field given by squared magnitudes per cell.
pub fn norm_from_sq(mag_sq: &[f64], cell_volume: f64, q: f64) -> Result<f64> {
    check_exponent(q)?;
    if q.is_infinite() {
        return Ok(mag_sq.iter().fold(0.0f64, |m, &x| m.max(x)).sqrt());
    }
    Ok((power_sum(mag_sq, q) * cell_volume).powf(1.0 / q))
}

/// `sum_c |f_c|^q` from squared magnitudes.
pub fn power_sum(mag_sq: &[f64], q: f64) -> f64 {
    if q == 2.0 {
        mag_sq.iter().sum()
    } else {
        let half = 0.5 * q;
        mag_sq.iter().map(|&x| x.powf(half)).sum()
    }
}

pub(crate) fn check_exponent(q: f64) -> Result<()> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::domain(format!("norm exponent must be >= 1, got {q}")));
    }
    Ok(())
}

/// Discrete `L^q(0, T; L^q(Omega))` accumulator:
/// `(sum_n dt_n sum_c |f_c^n|^q h^2)^(1/q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeNorm {
    pub q: f64,
    sum: f64,
}

impl SpaceTimeNorm {
    pub fn new(q: f64) -> Result<Self> {
        check_exponent(q)?;
        if q.is_infinite() {
            return Err(Error::domain("space-time accumulator needs a finite exponent"));
        }
        Ok(Self { q, sum: 0.0 })
    }

    pub fn add(&mut self, dt: f64, mag_sq: &[f64], cell_volume: f64) {
        self.sum += dt * power_sum(mag_sq, self.q) * cell_volume;
    }

    /// Adds `dt * value^q` for an already computed spatial norm.
    pub fn add_norm(&mut self, dt: f64, value: f64) {
        self.sum += dt * value.powf(self.q);
    }

    pub fn value(&self) -> f64 {
        self.sum.powf(1.0 / self.q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_constant_has_unit_norm() {
        let g = GridSpec::walled(5, 7, 1.0, 1.0).unwrap();
        let one = ScalarField::from_fn(g, |_, _| 1.0);
        for q in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            assert!((field_norm(&one, q).unwrap() - 1.0).abs() < 1e-12);
        }
        let e = StaggeredVectorField::from_fn(g, |_, _| 1.0, |_, _| 0.0);
        assert!((field_norm(&e, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(field_norm(&one, 0.5).is_err());
    }

    #[test]
    fn space_time_accumulates() {
        let mut n = SpaceTimeNorm::new(2.0).unwrap();
        n.add(0.5, &[4.0], 1.0);
        n.add(0.5, &[4.0], 1.0);
        assert!((n.value() - 2.0).abs() < 1e-14);
    }
}
