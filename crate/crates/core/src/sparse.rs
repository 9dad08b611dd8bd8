//! Symmetric positive-definite sparse solves by Jacobi-preconditioned
//! conjugate gradients on `nalgebra_sparse` CSR matrices.

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("matrix is {rows}x{cols}, right-hand side has {rhs} entries")]
    Dimension {
        rows: usize,
        cols: usize,
        rhs: usize,
    },
    #[error("non-positive diagonal entry {value} in row {row}; matrix is not positive definite")]
    NonPositiveDiagonal { row: usize, value: f64 },
    #[error("search direction lost positive curvature at iteration {iteration}")]
    Breakdown { iteration: usize },
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Stop when `|b − Ax| ≤ tolerance · |b|`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// `y = A x`, row-parallel for large matrices.
pub fn mul(a: &CsrMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let row = |i: usize| {
        let r = a.row(i);
        r.col_indices()
            .iter()
            .zip(r.values())
            .map(|(&j, v)| v * x[j])
            .sum::<f64>()
    };
    if a.nrows() >= 4096 {
        (0..a.nrows()).into_par_iter().map(row).collect()
    } else {
        (0..a.nrows()).map(row).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` starting from `x`, which is overwritten with the result.
pub fn solve_cg(
    a: &CsrMatrix<f64>,
    b: &[f64],
    x: &mut [f64],
    options: &CgOptions,
) -> Result<CgReport, SolveError> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n || x.len() != n {
        return Err(SolveError::Dimension {
            rows: n,
            cols: a.ncols(),
            rhs: b.len(),
        });
    }
    let mut inv_diag = vec![0.0; n];
    for (i, d) in inv_diag.iter_mut().enumerate() {
        let row = a.row(i);
        let value = row
            .col_indices()
            .iter()
            .zip(row.values())
            .filter(|(&j, _)| j == i)
            .map(|(_, v)| *v)
            .sum::<f64>();
        // Also catches NaN.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(value > 0.0) {
            return Err(SolveError::NonPositiveDiagonal { row: i, value });
        }
        *d = 1.0 / value;
    }

    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(CgReport {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let ax = mul(a, x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut residual = dot(&r, &r).sqrt() / b_norm;
    for iteration in 0..options.max_iterations {
        if residual <= options.tolerance {
            return Ok(CgReport {
                iterations: iteration,
                relative_residual: residual,
            });
        }
        let ap = mul(a, &p);
        let curvature = dot(&p, &ap);
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(curvature > 0.0) {
            return Err(SolveError::Breakdown { iteration });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        residual = dot(&r, &r).sqrt() / b_norm;
    }
    // Recheck against the true residual before giving up.
    let ax = mul(a, x);
    let true_residual = b
        .iter()
        .zip(&ax)
        .map(|(b, ax)| (b - ax) * (b - ax))
        .sum::<f64>()
        .sqrt()
        / b_norm;
    if true_residual <= options.tolerance {
        Ok(CgReport {
            iterations: options.max_iterations,
            relative_residual: true_residual,
        })
    } else {
        Err(SolveError::NoConvergence {
            iterations: options.max_iterations,
            residual: true_residual,
        })
    }
}

/// Convenience wrapper returning a fresh solution vector.
pub fn solve(
    a: &CsrMatrix<f64>,
    b: &DVector<f64>,
    options: &CgOptions,
) -> Result<DVector<f64>, SolveError> {
    let mut x = vec![0.0; b.len()];
    solve_cg(a, b.as_slice(), &mut x, options)?;
    Ok(DVector::from_vec(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use nalgebra_sparse::CooMatrix;

    fn path_laplacian_plus_identity(n: usize) -> CsrMatrix<f64> {
        let mut coo = CooMatrix::new(n, n);
        for i in 0..n {
            coo.push(i, i, 1.0);
            if i + 1 < n {
                coo.push(i, i, 1.0);
                coo.push(i + 1, i + 1, 1.0);
                coo.push(i, i + 1, -1.0);
                coo.push(i + 1, i, -1.0);
            }
        }
        CsrMatrix::from(&coo)
    }

    #[test]
    fn matches_dense_solution() {
        let a = path_laplacian_plus_identity(50);
        let b = DVector::from_fn(50, |i, _| (i as f64 * 0.37).sin());
        let x = solve(&a, &b, &CgOptions::default()).unwrap();
        let dense = DMatrix::from(&a);
        let reference = dense.lu().solve(&b).unwrap();
        assert!((x - reference).norm() < 1e-8);
    }

    #[test]
    fn residual_meets_tolerance() {
        let a = path_laplacian_plus_identity(300);
        let b: Vec<f64> = (0..300).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let mut x = vec![0.0; 300];
        let report = solve_cg(&a, &b, &mut x, &CgOptions::default()).unwrap();
        let r: f64 = mul(&a, &x)
            .iter()
            .zip(&b)
            .map(|(ax, b)| (ax - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(r <= 1e-10 * dot(&b, &b).sqrt());
        assert!(report.relative_residual <= 1e-10);
    }

    #[test]
    fn rejects_indefinite_diagonal() {
        let mut coo = CooMatrix::new(2, 2);
        coo.push(0, 0, 1.0);
        coo.push(1, 1, -1.0);
        let a = CsrMatrix::from(&coo);
        let mut x = vec![0.0; 2];
        assert!(matches!(
            solve_cg(&a, &[1.0, 1.0], &mut x, &CgOptions::default()),
            Err(SolveError::NonPositiveDiagonal { row: 1, .. })
        ));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = path_laplacian_plus_identity(5);
        let mut x = vec![3.0; 5];
        solve_cg(&a, &[0.0; 5], &mut x, &CgOptions::default()).unwrap();
        assert_eq!(x, vec![0.0; 5]);
    }
}
