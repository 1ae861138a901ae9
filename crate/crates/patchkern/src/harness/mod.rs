//! Learning-curve sweeps: sample, fit, evaluate, aggregate.
//!
//! Each (P, realization) work unit redraws input points (train + test
//! jointly) and the teacher field, fits the student, and scores the test
//! error. Units fan out over a worker pool; each carries a counter-derived
//! seed so results are bitwise independent of the thread count.

mod fitting;
mod report;

pub use fitting::{collapse_check, fit_exponent, CollapseReport, CollapseVerdict, RatioPoint};
pub use report::{theory_report_for_curve, theory_vs_experiment, ReplicaPoint, TheoryReport};

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::KernelConfig;
use crate::error::{Error, Result};
use crate::kernels::CompositeKernel;
use crate::regression;
use crate::rng::{self, ROLE_FIELD, ROLE_POINTS};
use crate::sampling::{sample_grf, sample_points, Domain};

/// Ridge schedule across the P grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RidgeSchedule {
    Ridgeless,
    Fixed { lambda0: f64 },
    /// `lambda(P) = lambda0 * P^-gamma`.
    Decaying { lambda0: f64, gamma: f64 },
}

impl RidgeSchedule {
    /// Ridge passed to the solver at training-set size P (0 = ridgeless).
    pub fn lambda_at(&self, p: usize) -> f64 {
        match self {
            RidgeSchedule::Ridgeless => 0.0,
            RidgeSchedule::Fixed { lambda0 } => *lambda0,
            RidgeSchedule::Decaying { lambda0, gamma } => {
                lambda0 * (p as f64).powf(-gamma)
            }
        }
    }
}

/// A fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub teacher: CompositeKernel,
    pub student: CompositeKernel,
    /// Serializable descriptors (cache keys, manifests, reports).
    pub teacher_cfg: KernelConfig,
    pub student_cfg: KernelConfig,
    pub domain: Domain,
    pub p_grid: Vec<usize>,
    pub p_test: usize,
    pub realizations: u64,
    pub ridge: RidgeSchedule,
    pub base_seed: u64,
    /// Inclusive window of P values for the exponent fit; default is the
    /// last decade of the grid.
    pub fit_window: Option<(usize, usize)>,
}

impl ExperimentConfig {
    pub fn effective_window(&self) -> (usize, usize) {
        match self.fit_window {
            Some(w) => w,
            None => {
                let hi = *self.p_grid.last().expect("nonempty grid");
                let lo = hi / 10;
                (self.p_grid.iter().copied().find(|&p| p >= lo).unwrap_or(hi), hi)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvePoint {
    pub p: usize,
    pub mean_err: f64,
    /// Standard deviation across realizations.
    pub std_err: f64,
    /// Standard error of the mean: std / sqrt(n).
    pub sem: f64,
    pub n: u64,
}

/// Measured learning curve with its fitted exponent.
#[derive(Debug, Clone, Serialize)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
    /// (P, realization, test error) triples in deterministic order.
    pub raw: Vec<(usize, u64, f64)>,
    pub beta: f64,
    pub beta_stderr: f64,
    pub fit_window: (usize, usize),
}

impl LearningCurve {
    pub fn point(&self, p: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|c| c.p == p)
    }
}

/// One cached draw: joint train+test points and the teacher field on them.
struct CachedDraw {
    points: Array2<f64>,
    values: Array1<f64>,
}

/// Process-wide memo of teacher field draws keyed by everything that
/// determines them (teacher descriptor, domain, point count, seed). A pure
/// cache: hits return bitwise-identical data, so sweeps that share a teacher
/// and base seed (e.g. several students against one teacher) skip the
/// dominant Gram + factorization cost.
fn grf_cache() -> &'static Mutex<HashMap<String, Arc<CachedDraw>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<CachedDraw>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

const GRF_CACHE_CAP: usize = 512;

/// Drop all memoized teacher draws (frees memory; draws are recomputed
/// identically on demand).
pub fn clear_grf_cache() {
    grf_cache().lock().unwrap().clear();
}

fn draw_teacher_field(
    teacher: &CompositeKernel,
    teacher_cfg: &KernelConfig,
    domain: Domain,
    n: usize,
    seed: u64,
) -> Result<Arc<CachedDraw>> {
    let key = format!(
        "{}|{domain:?}|n={n}|seed={seed}",
        serde_json::to_string(teacher_cfg).expect("kernel config serializes")
    );
    if let Some(hit) = grf_cache().lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let d = teacher.patches().d();
    let ds = sample_points(domain, n, d, rng::substream(seed, ROLE_POINTS));
    let grf = sample_grf(teacher, &ds, rng::substream(seed, ROLE_FIELD))?;
    let draw = Arc::new(CachedDraw {
        points: ds.points,
        values: grf.values,
    });
    let mut cache = grf_cache().lock().unwrap();
    if cache.len() >= GRF_CACHE_CAP {
        cache.clear();
    }
    cache.insert(key, draw.clone());
    Ok(draw)
}

/// Run one (P, realization) unit: sample, fit, evaluate.
fn run_unit(cfg: &ExperimentConfig, p: usize, seed: u64) -> Result<f64> {
    let n = p + cfg.p_test;
    let draw = draw_teacher_field(&cfg.teacher, &cfg.teacher_cfg, cfg.domain, n, seed)?;
    let x_train = draw.points.slice(ndarray::s![..p, ..]);
    let y_train = draw.values.slice(ndarray::s![..p]);
    let x_test = draw.points.slice(ndarray::s![p.., ..]);
    let y_test = draw.values.slice(ndarray::s![p..]);
    let lambda = cfg.ridge.lambda_at(p);
    let predictor = regression::fit(&cfg.student, x_train, y_train, lambda)?;
    predictor.test_error(x_test, y_test)
}

/// Measure the learning curve over the P grid.
///
/// Deterministic given the base seed regardless of thread count; a failed
/// realization is retried once with a derived seed before aborting the run.
pub fn run_learning_curve(cfg: &ExperimentConfig) -> Result<LearningCurve> {
    let tasks: Vec<(usize, u64)> = cfg
        .p_grid
        .iter()
        .flat_map(|&p| (0..cfg.realizations).map(move |r| (p, r)))
        .collect();
    let errors: Vec<Result<f64>> = tasks
        .par_iter()
        .map(|&(p, r)| {
            let seed = rng::stream_seed(cfg.base_seed, p, r);
            run_unit(cfg, p, seed).or_else(|first| {
                log::warn!("realization (P={p}, r={r}) failed ({first}); retrying once");
                run_unit(cfg, p, rng::retry_seed(seed)).map_err(|second| Error::Realization {
                    p,
                    realization: r,
                    source: Box::new(second),
                })
            })
        })
        .collect();

    let mut raw = Vec::with_capacity(tasks.len());
    for ((p, r), res) in tasks.into_iter().zip(errors) {
        raw.push((p, r, res?));
    }

    let mut points = Vec::with_capacity(cfg.p_grid.len());
    for &p in &cfg.p_grid {
        let vals: Vec<f64> = raw
            .iter()
            .filter(|(pp, _, _)| *pp == p)
            .map(|(_, _, e)| *e)
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = if vals.len() > 1 {
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std = var.sqrt();
        points.push(CurvePoint {
            p,
            mean_err: mean,
            std_err: std,
            sem: std / n.sqrt(),
            n: vals.len() as u64,
        });
    }

    let window = cfg.effective_window();
    let curve_pts: Vec<(f64, f64)> = points
        .iter()
        .map(|c| (c.p as f64, c.mean_err))
        .collect();
    let (beta, beta_stderr) = fit_exponent(&curve_pts, window)?;
    Ok(LearningCurve {
        points,
        raw,
        beta,
        beta_stderr,
        fit_window: window,
    })
}
