//! Kernel ridge / ridgeless regression.
//!
//! The estimator solves `((1/P) K_P + lambda I) c = y / P` and predicts with
//! `f(x) = sum_u K(x, x^u) c_u`, so the user-facing `lambda` matches the
//! ridge in the regularized empirical-risk objective with the 1/P-normalized
//! data term. `lambda = 0` requests the ridgeless limit and substitutes a
//! scale-free `lambda_eff = 1e-10 * trace(K_P) / P^2`.

use std::sync::Arc;

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::kernels::CompositeKernel;
use crate::linalg;

/// Relative scale of the ridgeless substitute: 1e-10 * trace(K_P) / P^2.
pub const RIDGELESS_SCALE: f64 = 1e-10;
/// Residual contract: ||(K/P + lambda I) c - y/P|| <= RESIDUAL_TOL * ||y|| / P.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// A fitted kernel ridge regressor; immutable and cheap to share.
#[derive(Debug, Clone)]
pub struct Predictor {
    coeffs: Array1<f64>,
    /// Ridge as requested (0 means ridgeless).
    lambda: f64,
    /// Ridge actually used in the solve.
    lambda_eff: f64,
    x_train: Arc<Array2<f64>>,
    kernel: CompositeKernel,
}

impl Predictor {
    pub fn coefficients(&self) -> ArrayView1<'_, f64> {
        self.coeffs.view()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lambda_effective(&self) -> f64 {
        self.lambda_eff
    }

    pub fn kernel(&self) -> &CompositeKernel {
        &self.kernel
    }

    /// Predictions on new points: `cross_gram . coefficients`.
    pub fn predict(&self, x_new: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x_new.nrows() == 0 {
            return Ok(Array1::zeros(0));
        }
        let cross = self.kernel.cross_gram(x_new, self.x_train.view())?;
        Ok(cross.dot(&self.coeffs))
    }

    /// Mean squared error against held-out targets.
    pub fn test_error(&self, x_test: ArrayView2<f64>, y_test: ArrayView1<f64>) -> Result<f64> {
        let preds = self.predict(x_test)?;
        Ok(mean_squared_error(preds.view(), y_test))
    }
}

pub fn mean_squared_error(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let q = a.len();
    assert_eq!(q, b.len(), "prediction/target length mismatch");
    assert!(q > 0, "empty test set");
    let mut acc = 0.0;
    for i in 0..q {
        let r = a[i] - b[i];
        acc += r * r;
    }
    acc / q as f64
}

/// Fit kernel ridge regression; `lambda = 0` means ridgeless.
pub fn fit(
    student: &CompositeKernel,
    x_train: ArrayView2<f64>,
    y_train: ArrayView1<f64>,
    lambda: f64,
) -> Result<Predictor> {
    if lambda < 0.0 {
        return Err(Error::Kernel(format!("ridge must be >= 0, got {lambda}")));
    }
    let p = x_train.nrows();
    if p == 0 || y_train.len() != p {
        return Err(Error::Kernel(format!(
            "need P >= 1 training points with matching targets (P={p}, |y|={})",
            y_train.len()
        )));
    }
    let gram = student.gram(x_train)?;
    let trace = gram.diag().sum();
    let lambda_eff = if lambda == 0.0 {
        RIDGELESS_SCALE * trace / (p * p) as f64
    } else {
        lambda
    };

    // A = K/P + lambda I, solved via Cholesky with escalating jitter for the
    // singular duplicate-point corner.
    let mut a = gram.mapv(|v| v / p as f64);
    for i in 0..p {
        a[[i, i]] += lambda_eff;
    }
    let scale = trace / (p * p) as f64;
    let jitters = [0.0, 1e-12 * scale, 1e-10 * scale, 1e-8 * scale];
    let (l, jitter) = linalg::cholesky_with_jitter(&a, &jitters)?;
    if jitter > 0.0 {
        warn!(
            "ridge system at lambda={lambda_eff:.3e} needed extra jitter {jitter:.3e} (duplicate points?)"
        );
    }

    let rhs = y_train.mapv(|v| v / p as f64);
    let mut coeffs = linalg::cholesky_solve(l.view(), rhs.view());

    // Residual contract with a couple of refinement steps if needed.
    let y_norm = y_train.dot(&y_train).sqrt();
    let bound = RESIDUAL_TOL * y_norm / p as f64;
    for _ in 0..3 {
        let residual = &a.dot(&coeffs) - &rhs;
        let rnorm = residual.dot(&residual).sqrt();
        if rnorm <= bound {
            return Ok(Predictor {
                coeffs,
                lambda,
                lambda_eff,
                x_train: Arc::new(x_train.to_owned()),
                kernel: student.clone(),
            });
        }
        let correction = linalg::cholesky_solve(l.view(), residual.view());
        coeffs -= &correction;
    }
    let residual = &a.dot(&coeffs) - &rhs;
    let rnorm = residual.dot(&residual).sqrt();
    if rnorm <= bound {
        Ok(Predictor {
            coeffs,
            lambda,
            lambda_eff,
            x_train: Arc::new(x_train.to_owned()),
            kernel: student.clone(),
        })
    } else {
        Err(Error::Residual {
            residual: rnorm,
            bound,
        })
    }
}
