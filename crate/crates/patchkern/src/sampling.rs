//! Input-point sampling and Gaussian-random-field targets.
//!
//! Targets are draws of a zero-mean Gaussian field whose covariance is the
//! teacher kernel's Gram matrix, so `E[f*(x) f*(y)] = K_T(x, y)` by
//! construction. Train and test points for one realization are drawn jointly
//! and split downstream, keeping the target a single consistent function.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernels::CompositeKernel;
use crate::linalg;
use crate::rng::rng_from_seed;

/// Input domains. `Torus01` samples exactly like `Hypercube01`; the torus
/// only changes distance semantics if a periodic constituent is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    #[serde(rename = "cube")]
    Hypercube01,
    #[serde(rename = "sphere")]
    SphereUnit,
    #[serde(rename = "torus")]
    Torus01,
}

/// A seeded point set; regenerating with the same seed reproduces the
/// points bitwise.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub points: Array2<f64>,
    pub domain: Domain,
    pub seed: u64,
}

/// One draw of the teacher Gaussian field on a dataset.
#[derive(Debug, Clone)]
pub struct TargetSample {
    pub values: Array1<f64>,
    pub teacher: CompositeKernel,
    /// Diagonal jitter that was needed to factorize the covariance.
    pub jitter: f64,
}

/// Draw `p` i.i.d. points; uniform for cube/torus, normalized Gaussian for
/// the sphere.
pub fn sample_points(domain: Domain, p: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let points = match domain {
        Domain::Hypercube01 | Domain::Torus01 => {
            Array2::from_shape_fn((p, d), |_| rng.random::<f64>())
        }
        Domain::SphereUnit => {
            let mut pts = Array2::zeros((p, d));
            for mut row in pts.rows_mut() {
                loop {
                    let mut norm2 = 0.0;
                    for slot in row.iter_mut() {
                        let g: f64 = rng.sample(StandardNormal);
                        *slot = g;
                        norm2 += g * g;
                    }
                    if norm2 > 0.0 {
                        let norm = norm2.sqrt();
                        row.mapv_inplace(|v| v / norm);
                        break;
                    }
                }
            }
            pts
        }
    };
    Dataset {
        points,
        domain,
        seed,
    }
}

/// Escalating jitter ladder, relative to trace/n of the covariance.
const GRF_JITTER_STEPS: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// Sample the teacher Gaussian field on all points of `data`:
/// draw `z ~ N(0, I)` and return `L z` with `L L^T = Gram + jitter * I`.
pub fn sample_grf(teacher: &CompositeKernel, data: &Dataset, seed: u64) -> Result<TargetSample> {
    let gram = teacher.gram(data.points.view())?;
    let n = gram.nrows();
    let scale = gram.diag().sum() / n as f64;
    let jitters: Vec<f64> = GRF_JITTER_STEPS.iter().map(|j| j * scale).collect();
    let (l, jitter) = linalg::cholesky_with_jitter(&gram, &jitters)?;
    drop(gram);
    let mut rng = rng_from_seed(seed);
    let z = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
    let values = linalg::lower_matvec(l.view(), z.view());
    Ok(TargetSample {
        values,
        teacher: teacher.clone(),
        jitter,
    })
}
