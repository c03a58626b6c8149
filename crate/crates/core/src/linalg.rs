//! Small dense solvers used by the refit and kernel steps.
//!
//! Systems here are at most a few thousand unknowns, so plain
//! row-major Cholesky and partially pivoted LU are enough.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Relative pivot floor below which a matrix is treated as singular.
const PIVOT_FLOOR: f64 = 1e-13;

/// Solve `a x = b` for symmetric positive definite `a` via Cholesky.
pub fn cholesky_solve(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let scale = a.diag().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if n > 0 && !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let floor = PIVOT_FLOOR * scale;

    // lower triangle of the factor, stored densely
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d.is_nan() || d <= floor {
            return Err(Error::SingularSystem);
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }

    let mut y = b.to_owned();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    Ok(y)
}

/// Solve a general square system with partially pivoted Gaussian elimination.
pub fn lu_solve(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if a.ncols() != n { a.ncols() } else { b.len() },
        });
    }
    let mut m = a.to_owned();
    let mut x = b.to_owned();
    let scale = m.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    if n > 0 && !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let floor = PIVOT_FLOOR * scale;

    for col in 0..n {
        let mut pivot = col;
        for r in (col + 1)..n {
            if m[[r, col]].abs() > m[[pivot, col]].abs() {
                pivot = r;
            }
        }
        if m[[pivot, col]].is_nan() || m[[pivot, col]].abs() <= floor {
            return Err(Error::SingularSystem);
        }
        if pivot != col {
            for c in 0..n {
                m.swap([pivot, c], [col, c]);
            }
            x.swap(pivot, col);
        }
        let p = m[[col, col]];
        for r in (col + 1)..n {
            let f = m[[r, col]] / p;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[[r, c]] -= f * m[[col, c]];
            }
            x[r] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= m[[i, k]] * x[k];
        }
        x[i] = s / m[[i, i]];
    }
    Ok(x)
}

/// Largest eigenvalue of `aᵀa` by power iteration, without forming the product.
///
/// Returns the Rayleigh quotient at convergence, which approaches the top
/// eigenvalue from below.
pub fn top_gram_eigenvalue(a: ArrayView2<f64>, max_iters: usize, rel_tol: f64) -> f64 {
    let cols = a.ncols();
    if cols == 0 || a.nrows() == 0 {
        return 0.0;
    }
    // fixed, non-symmetric start so no eigenvector is systematically missed
    let mut v: Array1<f64> = (0..cols)
        .map(|j| 1.0 + 0.5 * ((j as f64 + 1.0) * 0.754_877_666).fract())
        .collect();
    let norm = v.dot(&v).sqrt();
    v /= norm;

    let mut estimate = 0.0;
    for _ in 0..max_iters {
        let av = a.dot(&v);
        let w = a.t().dot(&av);
        let rayleigh = av.dot(&av);
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
        let converged = (rayleigh - estimate).abs() <= rel_tol * rayleigh.abs();
        estimate = rayleigh;
        if converged {
            break;
        }
    }
    // one more Rayleigh quotient on the final iterate
    let av = a.dot(&v);
    estimate.max(av.dot(&av))
}
