use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FaceGeometry;
use crate::grid::{GridSpec, StaggeredVectorField};

/// Largest value tolerated on a dead face.
pub const ZERO_EXTENSION_TOL: f64 = 1e-10;

/// `u` on `Omega_eps` viewed on `Omega`; dead faces are set to exactly zero.
pub fn zero_extend(u: &StaggeredVectorField, faces: &FaceGeometry) -> Result<StaggeredVectorField> {
    faces.grid.ensure_same(&u.grid, "zero extension")?;
    let mut flat = u.to_flat();
    for (f, x) in flat.iter_mut().enumerate() {
        if faces.dead[f] {
            if x.abs() > ZERO_EXTENSION_TOL {
                return Err(Error::structure(format!(
                    "velocity {x:e} on hole face {f} violates the zero-extension contract"
                )));
            }
            *x = 0.0;
        }
    }
    StaggeredVectorField::from_flat(u.grid, &flat)
}

/// One vector per lattice cell `eps Q_k` cut to `Omega`, `k = 0..=N` per
/// axis; the collar cells along the walls are half (or quarter) cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseField {
    pub epsilon: f64,
    /// Lattice cells per axis.
    pub n: [usize; 2],
    pub volumes: Vec<f64>,
    pub values: Vec<[f64; 2]>,
}

impl CoarseField {
    pub fn index(&self, kx: usize, ky: usize) -> usize {
        ky * self.n[0] + kx
    }

    /// Volume-weighted `L^2` norm.
    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.volumes)
            .map(|(v, w)| w * (v[0] * v[0] + v[1] * v[1]))
            .sum::<f64>()
            .sqrt()
    }
}

fn cells_per_period(grid: &GridSpec, eps: f64) -> Result<[usize; 2]> {
    let mut out = [0; 2];
    for (k, (n, l)) in [(grid.nx, grid.lx), (grid.ny, grid.ly)].into_iter().enumerate() {
        let periods = l / eps;
        let p = periods.round();
        if (periods - p).abs() > 1e-9 * p.max(1.0) || p < 1.0 {
            return Err(Error::config(format!("extent {l} is not a multiple of epsilon {eps}")));
        }
        let p = p as usize;
        if n % p != 0 || (n / p) % 2 != 0 {
            return Err(Error::config(format!(
                "{n} grid cells do not split into {p} periods of an even number of cells"
            )));
        }
        out[k] = n / p;
    }
    Ok(out)
}

/// Volume averages of the cell-centered components over every lattice cell.
pub fn cell_average(u: &StaggeredVectorField, eps: f64) -> Result<CoarseField> {
    let g = &u.grid;
    if g.periodic_x || g.periodic_y {
        return Err(Error::config("cell averages need a walled grid"));
    }
    let m = cells_per_period(g, eps)?;
    let n = [g.nx / m[0] + 1, g.ny / m[1] + 1];
    let mut sums = vec![[0.0; 2]; n[0] * n[1]];
    let mut counts = vec![0usize; n[0] * n[1]];
    for j in 0..g.ny {
        let ky = (j + m[1] / 2) / m[1];
        for i in 0..g.nx {
            let kx = (i + m[0] / 2) / m[0];
            let uc = 0.5 * (u.u[g.u_face(i, j)] + u.u[g.u_face(i + 1, j)]);
            let vc = 0.5 * (u.v[g.v_face(i, j)] + u.v[g.v_face(i, j + 1)]);
            let k = ky * n[0] + kx;
            sums[k][0] += uc;
            sums[k][1] += vc;
            counts[k] += 1;
        }
    }
    let vol = g.cell_volume();
    Ok(CoarseField {
        epsilon: eps,
        n,
        volumes: counts.iter().map(|&c| c as f64 * vol).collect(),
        values: sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| [s[0] / c as f64, s[1] / c as f64])
            .collect(),
    })
}

/// Least-squares fit of `log(norm) = slope log(eps) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the log residuals.
    pub residual: f64,
    pub points: usize,
}

pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 3 {
        return Err(Error::config(format!("a rate fit needs >= 3 points, got {}", pairs.len())));
    }
    if let Some(&(e, v)) = pairs.iter().find(|(e, v)| !(*e > 0.0) || !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::domain(format!("rate fit needs positive data, got ({e}, {v})")));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("rate fit needs distinct epsilon values".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateFit {
        slope,
        intercept,
        residual,
        points: pairs.len(),
    })
}

/// Relative `L^2` distance between the lattice-cell averages of
/// `eps^-2 u_eps` (zero-extended) and of the Darcy velocity.
pub fn compare_to_darcy(micro: &StaggeredVectorField, darcy: &StaggeredVectorField, eps: f64) -> Result<f64> {
    if (micro.grid.lx - darcy.grid.lx).abs() > 1e-12 || (micro.grid.ly - darcy.grid.ly).abs() > 1e-12 {
        return Err(Error::config("micro and Darcy grids cover different domains"));
    }
    let a = cell_average(micro, eps)?;
    let b = cell_average(darcy, eps)?;
    let scale = eps.powi(-2);
    let mut num = 0.0;
    for ((x, y), w) in a.values.iter().zip(&b.values).zip(&b.volumes) {
        num += w * ((scale * x[0] - y[0]).powi(2) + (scale * x[1] - y[1]).powi(2));
    }
    let den = b.norm();
    if den == 0.0 {
        return Err(Error::Degenerate(
            "the Darcy velocity is zero; a relative error is undefined".into(),
        ));
    }
    Ok(num.sqrt() / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let pairs: Vec<(f64, f64)> = [0.25, 0.125, 0.0625].iter().map(|&e| (e, 3.0 * e * e)).collect();
        let fit = fit_rate(&pairs).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12 && fit.residual < 1e-12);
        let flat: Vec<(f64, f64)> = pairs.iter().map(|p| (p.0, 0.7)).collect();
        assert!(fit_rate(&flat).unwrap().slope.abs() < 1e-12);
        assert!(fit_rate(&pairs[..2]).is_err());
        assert!(matches!(fit_rate(&[(0.5, 1.0), (0.25, 0.0), (0.1, 1.0)]), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_and_localized_averages() {
        let g = GridSpec::walled(32, 32, 1.0, 1.0).unwrap();
        let c = StaggeredVectorField::from_fn(g, |_, _| 1.5, |_, _| -2.0);
        let avg = cell_average(&c, 0.25).unwrap();
        assert_eq!(avg.n, [5, 5]);
        assert!(avg.values.iter().all(|v| (v[0] - 1.5).abs() < 1e-14 && (v[1] + 2.0).abs() < 1e-14));
        let total: f64 = avg.volumes.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(cell_average(&c, 0.3).is_err());
        assert!(cell_average(&c, 1.0 / 32.0).is_err());
    }
}
