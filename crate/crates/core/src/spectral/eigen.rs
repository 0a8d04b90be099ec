//! Top eigenvalue of a dense symmetric matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{LcdfError, Result};
use crate::rng::stream;

const REL_TOL: f64 = 1e-8;
const DIRECT_MAX: usize = 64;
const FALLBACK_MAX: usize = 1000;
const START_SEED: u64 = 0x1a2c_5eed;

fn largest_eigen(t: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let e = SymmetricEigen::new(t.clone());
    let (i, _) = e
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    (e.eigenvalues[i], e.eigenvectors.column(i).into_owned())
}

/// Largest eigenvalue by Lanczos with full reorthogonalization. Small
/// matrices and non-converged runs with `n <= 1000` use a full decomposition.
pub fn top_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(LcdfError::Domain(format!("expected a non-empty square matrix, got {}x{}", n, m.ncols())));
    }
    if n <= DIRECT_MAX {
        return Ok(largest_eigen(m).0);
    }
    let mut rng = stream(START_SEED, 0);
    let mut q = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    q /= q.norm();
    let max_iter = n.min(400);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(max_iter);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = DVector::zeros(n);
    let mut residual = f64::INFINITY;
    for k in 0..max_iter {
        w.gemv(1.0, m, &q, 0.0);
        let a = q.dot(&w);
        alpha.push(a);
        basis.push(q.clone());
        for _ in 0..2 {
            for v in &basis {
                let c = v.dot(&w);
                w.axpy(-c, v, 1.0);
            }
        }
        let b = w.norm();
        let check = k < 20 || k % 5 == 0 || b == 0.0 || k + 1 == max_iter;
        if check {
            let size = k + 1;
            let t = DMatrix::from_fn(size, size, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j {
                    beta[i]
                } else if j + 1 == i {
                    beta[j]
                } else {
                    0.0
                }
            });
            let (theta, s) = largest_eigen(&t);
            let scale = t.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            residual = b * s[size - 1].abs();
            if residual <= REL_TOL * theta.abs().max(1e-3 * scale) || b <= f64::EPSILON * scale {
                return Ok(theta);
            }
        }
        beta.push(b);
        q = &w / b;
    }
    if n <= FALLBACK_MAX {
        log::debug!("Lanczos stalled at residual {residual:e}; using full decomposition");
        return Ok(largest_eigen(m).0);
    }
    Err(LcdfError::Numerical {
        message: format!("Lanczos did not converge for n = {n}"),
        achieved: residual,
    })
}
