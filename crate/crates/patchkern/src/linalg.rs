//! Dense symmetric positive-definite solves built on LAPACK Cholesky.
//!
//! BLAS is pinned to one thread so results are bitwise independent of the
//! worker-pool size; parallelism lives at the realization level instead.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use ndarray_linalg::cholesky::{CholeskyInplace, UPLO};
use ndarray_linalg::eigh::EigValsh;
use std::sync::Once;

use crate::error::{Error, Result};

extern "C" {
    fn openblas_set_num_threads(num: i32);
}

static BLAS_INIT: Once = Once::new();

/// Pin OpenBLAS to a single thread (idempotent).
pub fn init_blas() {
    BLAS_INIT.call_once(|| unsafe {
        openblas_set_num_threads(1);
    });
}

/// Lower-triangular Cholesky factor of `a + jitter * I`, trying each jitter
/// in turn. Returns `(factor, jitter_used)`.
///
/// Only the lower triangle of the returned matrix is meaningful.
pub fn cholesky_with_jitter(a: &Array2<f64>, jitters: &[f64]) -> Result<(Array2<f64>, f64)> {
    init_blas();
    let n = a.nrows();
    let mut last_jitter = 0.0;
    for &jitter in jitters {
        last_jitter = jitter;
        let mut attempt = a.clone();
        if jitter != 0.0 {
            for i in 0..n {
                attempt[[i, i]] += jitter;
            }
        }
        if attempt.cholesky_inplace(UPLO::Lower).is_ok() {
            return Ok((attempt, jitter));
        }
    }
    let min_eigenvalue = min_eigenvalue(a).unwrap_or(f64::NAN);
    Err(Error::Factorization {
        jitter: last_jitter,
        min_eigenvalue,
    })
}

/// Smallest eigenvalue of a symmetric matrix (diagnostics and PSD checks).
pub fn min_eigenvalue(a: &Array2<f64>) -> Result<f64> {
    init_blas();
    let vals = a
        .eigvalsh(UPLO::Lower)
        .map_err(|e| Error::Kernel(format!("eigendecomposition failed: {e}")))?;
    Ok(vals.iter().copied().fold(f64::INFINITY, f64::min))
}

/// `L z` using only the lower triangle of `l`.
pub fn lower_matvec(l: ArrayView2<f64>, z: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut out = Array1::zeros(n);
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..=i {
            acc += l[[i, j]] * z[j];
        }
        out[i] = acc;
    }
    out
}

/// Solve `L L^T x = b` by forward then back substitution.
pub fn cholesky_solve(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for i in 0..n {
        let mut acc = x[i];
        for j in 0..i {
            acc -= l[[i, j]] * x[j];
        }
        x[i] = acc / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in (i + 1)..n {
            acc -= l[[j, i]] * x[j];
        }
        x[i] = acc / l[[i, i]];
    }
    x
}
