use std::fmt;

use serde::{Deserialize, Serialize};

use super::sparse::LinearOperator;
use crate::error::{Error, Result};

/// Outcome of an iterative solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSolveReport {
    pub iterations: usize,
    /// Final residual relative to the (projected) right-hand side.
    pub relative_residual: f64,
    pub converged: bool,
    /// Relative residual after every iteration, starting with the initial one.
    #[serde(skip)]
    pub history: Vec<f64>,
}

impl fmt::Display for LinearSolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} iterations, relative residual {:.3e}",
            self.iterations, self.relative_residual
        )
    }
}

#[derive(Debug, Clone)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Diagonal (Jacobi) preconditioning.
    pub jacobi: bool,
    /// Kernel vector of a singular operator. The right-hand side and the
    /// iterates are kept orthogonal to it.
    pub kernel: Option<Vec<f64>>,
    /// Return the last iterate instead of an error when not converged.
    pub allow_unconverged: bool,
}

impl CgOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            jacobi: true,
            kernel: None,
            allow_unconverged: false,
        }
    }

    /// Singular system whose kernel is the constant vector.
    pub fn with_constant_kernel(mut self, n: usize) -> Self {
        self.kernel = Some(vec![1.0; n]);
        self
    }
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// (semi-)definite sparse matrix.
pub fn cg_solve<A: LinearOperator>(
    a: &A,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    cg_solve_with(a, b, None, &CgOptions::new(tol, max_iter))
}

pub fn cg_solve_with<A: LinearOperator>(
    a: &A,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &CgOptions,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    cg_solve_monitored(a, b, x0, opts, |_, _| {})
}

/// Conjugate gradients calling `monitor(iteration, x)` after every update.
pub fn cg_solve_monitored<A: LinearOperator>(
    a: &A,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &CgOptions,
    mut monitor: impl FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, LinearSolveReport)> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::structure(format!(
            "cg needs a square operator matching b: {} x {} with |b| = {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::config(format!("cg tolerance must be positive, got {}", opts.tol)));
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("non-finite right-hand side"));
    }
    let kernel = match &opts.kernel {
        Some(k) => {
            let kk = dot(k, k);
            if k.len() != n || kk == 0.0 {
                return Err(Error::structure("kernel vector has wrong length or is zero"));
            }
            Some((k.as_slice(), kk))
        }
        None => None,
    };
    let project = |x: &mut [f64]| {
        if let Some((k, kk)) = kernel {
            let c = dot(k, x) / kk;
            for (xi, ki) in x.iter_mut().zip(k) {
                *xi -= c * ki;
            }
        }
    };
    let inv_diag: Option<Vec<f64>> = if opts.jacobi {
        a.diagonal().map(|d| {
            d.into_iter()
                .map(|x| if x > 0.0 { 1.0 / x } else { 1.0 })
                .collect()
        })
    } else {
        None
    };
    let precondition = |r: &[f64], z: &mut [f64]| {
        match &inv_diag {
            Some(d) => z.iter_mut().zip(r).zip(d).for_each(|((z, r), d)| *z = r * d),
            None => z.copy_from_slice(r),
        }
        project(z);
    };

    let mut rhs = b.to_vec();
    project(&mut rhs);
    let bnorm = norm(&rhs);
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(_) => return Err(Error::structure("initial guess has wrong length")),
        None => vec![0.0; n],
    };
    project(&mut x);
    if bnorm == 0.0 {
        let report = LinearSolveReport {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            history: vec![0.0],
        };
        return Ok((vec![0.0; n], report));
    }

    let mut r = vec![0.0; n];
    a.apply(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(&rhs) {
        *ri = bi - *ri;
    }
    project(&mut r);
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = norm(&r) / bnorm;
    let mut history = vec![rel];
    let mut it = 0;
    while rel > opts.tol && it < opts.max_iter {
        a.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !pq.is_finite() {
            return Err(Error::numerical("NaN encountered in conjugate gradients"));
        }
        if pq <= 0.0 {
            return Err(Error::numerical(format!(
                "conjugate gradients breakdown: p^T A p = {pq:e} at iteration {it}"
            )));
        }
        let alpha = rz / pq;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        it += 1;
        // Periodic refresh keeps the recursive residual honest.
        if it % 50 == 0 {
            a.apply(&x, &mut r);
            for (ri, bi) in r.iter_mut().zip(&rhs) {
                *ri = bi - *ri;
            }
            project(&mut r);
        }
        monitor(it, &x);
        rel = norm(&r) / bnorm;
        history.push(rel);
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    if !rel.is_finite() {
        return Err(Error::numerical("NaN encountered in conjugate gradients"));
    }
    project(&mut x);
    let report = LinearSolveReport {
        iterations: it,
        relative_residual: rel,
        converged: rel <= opts.tol,
        history,
    };
    if !report.converged && !opts.allow_unconverged {
        return Err(Error::NotConverged {
            what: "conjugate gradients".into(),
            report,
        });
    }
    Ok((x, report))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SparseMatrix;

    fn laplace_1d(n: usize, neumann: bool) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            let mut d = 2.0;
            if neumann && (i == 0 || i == n - 1) {
                d = 1.0;
            }
            t.push((i, i, d));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn solves_dirichlet_problem() {
        let a = laplace_1d(50, false);
        let exact: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&exact);
        let (x, rep) = cg_solve(&a, &b, 1e-12, 500).unwrap();
        assert!(rep.converged);
        let err = x.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn singular_system_projects_rhs() {
        let a = laplace_1d(40, true);
        let b = vec![1.0; 40];
        let opts = CgOptions::new(1e-12, 500).with_constant_kernel(40);
        let (x, rep) = cg_solve_with(&a, &b, None, &opts).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
        let b: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let (x, rep) = cg_solve_with(&a, &b, None, &opts).unwrap();
        assert!(rep.converged);
        assert!(x.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn reports_non_convergence() {
        let a = laplace_1d(200, false);
        let b = vec![1.0; 200];
        match cg_solve(&a, &b, 1e-14, 3) {
            Err(Error::NotConverged { report, .. }) => assert_eq!(report.iterations, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_nan() {
        let a = laplace_1d(5, false);
        assert!(matches!(
            cg_solve(&a, &[f64::NAN; 5], 1e-8, 10),
            Err(Error::Numerical(_))
        ));
    }
}
