//! Constituent kernels and their convolutional / local composites.
//!
//! A composite kernel acts on `d`-dimensional sequences by applying a
//! low-dimensional constituent kernel `C` to contiguous wrapped patches:
//!
//! - convolutional: `K(x, y) = |P|^-2 sum_{i,j in P} C(x_i, y_j)`
//! - local:         `K(x, y) = |P|^-1 sum_{i in P} C(x_i, y_i)`
//!
//! where `x_i = (x_i, ..., x_{i+s-1})` with indices wrapped modulo `d`.
//! Patch indices are 1-based in the docs and 0-based in code.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Scale-free PSD tolerance: min Gram eigenvalue >= -PSD_TOL_FACTOR * trace / P.
pub const PSD_TOL_FACTOR: f64 = 1e-8;

/// Patch layout over the input sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Overlap {
    /// Patches start at every coordinate; |P| = d.
    Overlapping,
    /// Patches tile the sequence; requires d % s == 0 and |P| = d / s.
    NonOverlapping,
}

/// Input dimension, filter size and patch index set (wrapping always on).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchScheme {
    d: usize,
    s: usize,
    overlap: Overlap,
}

impl PatchScheme {
    pub fn new(d: usize, s: usize, overlap: Overlap) -> Result<Self> {
        if d == 0 || s == 0 {
            return Err(Error::Kernel(format!(
                "patch scheme needs positive dimensions, got d={d}, s={s}"
            )));
        }
        if s > d {
            return Err(Error::Kernel(format!(
                "filter size s={s} exceeds input dimension d={d}"
            )));
        }
        if overlap == Overlap::NonOverlapping && d % s != 0 {
            return Err(Error::Kernel(format!(
                "nonoverlapping patches need d divisible by s, got d={d}, s={s}"
            )));
        }
        Ok(PatchScheme { d, s, overlap })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn overlap(&self) -> Overlap {
        self.overlap
    }

    /// Number of patches |P|.
    pub fn n_patches(&self) -> usize {
        match self.overlap {
            Overlap::Overlapping => self.d,
            Overlap::NonOverlapping => self.d / self.s,
        }
    }

    /// 0-based patch start indices.
    pub fn starts(&self) -> impl Iterator<Item = usize> {
        let step = match self.overlap {
            Overlap::Overlapping => 1,
            Overlap::NonOverlapping => self.s,
        };
        (0..self.d).step_by(step)
    }
}

/// Copy the wrapped patch starting at 0-based index `start` into `out`.
pub fn write_patch(x: &[f64], start: usize, out: &mut [f64]) {
    let d = x.len();
    for (t, slot) in out.iter_mut().enumerate() {
        *slot = x[(start + t) % d];
    }
}

/// The wrapped patch `(x_start, ..., x_{start+s-1})`, indices modulo `d`.
pub fn extract_patch(x: &[f64], start: usize, s: usize) -> Vec<f64> {
    let mut out = vec![0.0; s];
    write_patch(x, start, &mut out);
    out
}

/// Fixed random-feature set backing a finite-width NTK (drawn once per kernel).
#[derive(Debug)]
pub struct RandomFeatures {
    /// Filters, H x s row-major.
    w: Vec<f64>,
    /// Biases, length H.
    b: Vec<f64>,
    /// Squared output weights a_h^2, length H.
    a2: Vec<f64>,
    h: usize,
    dim: usize,
}

impl RandomFeatures {
    fn draw(dim: usize, h: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut w = vec![0.0; h * dim];
        let mut b = vec![0.0; h];
        let mut a2 = vec![0.0; h];
        for slot in w.iter_mut() {
            *slot = rng.sample(StandardNormal);
        }
        for slot in b.iter_mut() {
            *slot = rng.sample(StandardNormal);
        }
        for slot in a2.iter_mut() {
            let a: f64 = rng.sample(StandardNormal);
            *slot = a * a;
        }
        RandomFeatures { w, b, a2, h, dim }
    }

    /// Empirical NTK of a width-H one-hidden-layer ReLU network.
    fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut acc = 0.0;
        let uv = dot(u, v) + 1.0;
        for hh in 0..self.h {
            let row = &self.w[hh * self.dim..(hh + 1) * self.dim];
            let zu = dot(row, u) + self.b[hh];
            let zv = dot(row, v) + self.b[hh];
            if zu > 0.0 && zv > 0.0 {
                acc += zu * zv + self.a2[hh] * uv;
            }
        }
        acc / self.h as f64
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for t in 0..u.len() {
        acc += u[t] * v[t];
    }
    acc
}

/// A low-dimensional base kernel acting on patches.
#[derive(Clone)]
pub enum ConstituentKernel {
    /// `exp(-|u - v|)`; cusp exponent alpha = 1.
    Laplacian { dim: usize },
    /// Infinite-width NTK of a one-hidden-layer ReLU network; alpha = 1.
    ReluNtk { dim: usize },
    /// Finite-width random-feature NTK; converges to `ReluNtk` as H grows.
    RandomFeatureNtk {
        dim: usize,
        seed: u64,
        features: Arc<RandomFeatures>,
    },
    /// Spectrally defined kernel with eigenvalues
    /// `lambda_k = (mass^2 + k^2)^(-(dim + alpha)/2)`; no real-space form.
    PowerLawSpectral { dim: usize, alpha: f64, mass: f64 },
}

impl fmt::Debug for ConstituentKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstituentKernel::Laplacian { dim } => write!(f, "Laplacian(dim={dim})"),
            ConstituentKernel::ReluNtk { dim } => write!(f, "ReluNtk(dim={dim})"),
            ConstituentKernel::RandomFeatureNtk { dim, seed, features } => {
                write!(f, "RandomFeatureNtk(dim={dim}, H={}, seed={seed})", features.h)
            }
            ConstituentKernel::PowerLawSpectral { dim, alpha, mass } => {
                write!(f, "PowerLawSpectral(dim={dim}, alpha={alpha}, mass={mass})")
            }
        }
    }
}

impl ConstituentKernel {
    pub fn laplacian(dim: usize) -> Self {
        ConstituentKernel::Laplacian { dim }
    }

    pub fn relu_ntk(dim: usize) -> Self {
        ConstituentKernel::ReluNtk { dim }
    }

    pub fn random_feature_ntk(dim: usize, h: usize, seed: u64) -> Self {
        ConstituentKernel::RandomFeatureNtk {
            dim,
            seed,
            features: Arc::new(RandomFeatures::draw(dim, h, seed)),
        }
    }

    pub fn power_law_spectral(dim: usize, alpha: f64, mass: f64) -> Self {
        ConstituentKernel::PowerLawSpectral { dim, alpha, mass }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConstituentKernel::Laplacian { dim }
            | ConstituentKernel::ReluNtk { dim }
            | ConstituentKernel::RandomFeatureNtk { dim, .. }
            | ConstituentKernel::PowerLawSpectral { dim, .. } => *dim,
        }
    }

    /// Smoothness exponent alpha (leading nonanalyticity at coincident args).
    pub fn alpha(&self) -> f64 {
        match self {
            ConstituentKernel::Laplacian { .. }
            | ConstituentKernel::ReluNtk { .. }
            | ConstituentKernel::RandomFeatureNtk { .. } => 1.0,
            ConstituentKernel::PowerLawSpectral { alpha, .. } => *alpha,
        }
    }

    pub fn supports_real_space(&self) -> bool {
        !matches!(self, ConstituentKernel::PowerLawSpectral { .. })
    }

    /// Evaluate `C(u, v)`.
    ///
    /// `PowerLawSpectral` is spectral-only and rejects real-space evaluation.
    pub fn eval(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        if u.len() != self.dim() || v.len() != self.dim() {
            return Err(Error::Kernel(format!(
                "constituent expects {}-vectors, got {} and {}",
                self.dim(),
                u.len(),
                v.len()
            )));
        }
        if !self.supports_real_space() {
            return Err(Error::Kernel(
                "PowerLawSpectral is spectral-only; real-space evaluation is not defined".into(),
            ));
        }
        Ok(self.eval_unchecked(u, v))
    }

    #[inline]
    fn eval_unchecked(&self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            ConstituentKernel::Laplacian { .. } => {
                let mut s2 = 0.0;
                for t in 0..u.len() {
                    let dlt = u[t] - v[t];
                    s2 += dlt * dlt;
                }
                (-s2.sqrt()).exp()
            }
            ConstituentKernel::ReluNtk { .. } => relu_ntk(u, v),
            ConstituentKernel::RandomFeatureNtk { features, .. } => features.eval(u, v),
            ConstituentKernel::PowerLawSpectral { .. } => unreachable!("checked by caller"),
        }
    }
}

/// Analytic NTK of a one-hidden-layer ReLU network with bias.
///
/// The arccos argument is a cosine analytically; it is clamped to [-1, 1]
/// to absorb rounding.
fn relu_ntk(u: &[f64], v: &[f64]) -> f64 {
    use std::f64::consts::PI;
    let nu = (dot(u, u) + 1.0).sqrt();
    let nv = (dot(v, v) + 1.0).sqrt();
    let uv = dot(u, v) + 1.0;
    let cos_phi = (uv / (nu * nv)).clamp(-1.0, 1.0);
    let phi = cos_phi.acos();
    (nu * nv * (phi.sin() + (PI - phi) * cos_phi) + uv * (PI - phi)) / (2.0 * PI)
}

/// Convolutional (double patch sum) or local (diagonal patch sum) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompositeKind {
    Convolutional,
    Local,
}

/// A constituent kernel combined over a patch scheme.
#[derive(Debug, Clone)]
pub struct CompositeKernel {
    kind: CompositeKind,
    constituent: ConstituentKernel,
    patches: PatchScheme,
}

impl CompositeKernel {
    pub fn new(
        kind: CompositeKind,
        constituent: ConstituentKernel,
        patches: PatchScheme,
    ) -> Result<Self> {
        if constituent.dim() != patches.s() {
            return Err(Error::Kernel(format!(
                "constituent dimension {} does not match filter size {}",
                constituent.dim(),
                patches.s()
            )));
        }
        Ok(CompositeKernel {
            kind,
            constituent,
            patches,
        })
    }

    pub fn kind(&self) -> CompositeKind {
        self.kind
    }

    pub fn constituent(&self) -> &ConstituentKernel {
        &self.constituent
    }

    pub fn patches(&self) -> &PatchScheme {
        &self.patches
    }

    fn check_real_space(&self) -> Result<()> {
        if !self.constituent.supports_real_space() {
            return Err(Error::Kernel(
                "PowerLawSpectral composites have no real-space evaluation; use the spectral module"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Evaluate `K(x, y)` on `d`-vectors.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_real_space()?;
        let d = self.patches.d();
        if x.len() != d || y.len() != d {
            return Err(Error::Kernel(format!(
                "composite expects {d}-vectors, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        let mut scratch = EvalScratch::new(&self.patches);
        Ok(self.eval_with(&mut scratch, x, y))
    }

    /// Single evaluation path shared by `eval`, `gram` and `cross_gram` so
    /// matrix entries are bitwise identical to pointwise evaluation.
    fn eval_with(&self, scratch: &mut EvalScratch, x: &[f64], y: &[f64]) -> f64 {
        let s = self.patches.s();
        let np = self.patches.n_patches();
        scratch.fill(&self.patches, x, y);
        let mut acc = 0.0;
        match self.kind {
            CompositeKind::Convolutional => {
                for i in 0..np {
                    let pa = &scratch.xp[i * s..(i + 1) * s];
                    for j in 0..np {
                        let pb = &scratch.yp[j * s..(j + 1) * s];
                        acc += self.constituent.eval_unchecked(pa, pb);
                    }
                }
                acc / (np * np) as f64
            }
            CompositeKind::Local => {
                for i in 0..np {
                    let pa = &scratch.xp[i * s..(i + 1) * s];
                    let pb = &scratch.yp[i * s..(i + 1) * s];
                    acc += self.constituent.eval_unchecked(pa, pb);
                }
                acc / np as f64
            }
        }
    }

    /// Gram matrix `(K_P)_{uv} = K(x^u, x^v)`; symmetric by construction
    /// (upper triangle computed, lower mirrored bitwise).
    pub fn gram(&self, points: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_real_space()?;
        let p = points.nrows();
        let d = points.ncols();
        if d != self.patches.d() {
            return Err(Error::Kernel(format!(
                "points have dimension {d}, kernel expects {}",
                self.patches.d()
            )));
        }
        let mut flat = vec![0.0f64; p * p];
        flat.par_chunks_mut(p).enumerate().for_each_init(
            || EvalScratch::new(&self.patches),
            |scratch, (i, row)| {
                let xi = points.row(i);
                let xi = xi.as_standard_layout();
                let xi = xi.as_slice().expect("contiguous row");
                for j in i..p {
                    let xj = points.row(j);
                    let xj = xj.as_standard_layout();
                    let xj = xj.as_slice().expect("contiguous row");
                    row[j] = self.eval_with(scratch, xi, xj);
                }
            },
        );
        for i in 0..p {
            for j in 0..i {
                flat[i * p + j] = flat[j * p + i];
            }
        }
        Ok(Array2::from_shape_vec((p, p), flat).expect("shape"))
    }

    /// Cross Gram: entry (q, u) = K(x_test^q, x_train^u).
    pub fn cross_gram(
        &self,
        x_test: ArrayView2<f64>,
        x_train: ArrayView2<f64>,
    ) -> Result<Array2<f64>> {
        self.check_real_space()?;
        let q = x_test.nrows();
        let p = x_train.nrows();
        if x_test.ncols() != self.patches.d() || x_train.ncols() != self.patches.d() {
            return Err(Error::Kernel(format!(
                "point dimensions {} / {} do not match kernel d={}",
                x_test.ncols(),
                x_train.ncols(),
                self.patches.d()
            )));
        }
        let mut flat = vec![0.0f64; q * p];
        flat.par_chunks_mut(p.max(1)).enumerate().for_each_init(
            || EvalScratch::new(&self.patches),
            |scratch, (i, row)| {
                let xi = x_test.row(i);
                let xi = xi.as_standard_layout();
                let xi = xi.as_slice().expect("contiguous row");
                for j in 0..p {
                    let xj = x_train.row(j);
                    let xj = xj.as_standard_layout();
                    let xj = xj.as_slice().expect("contiguous row");
                    row[j] = self.eval_with(scratch, xi, xj);
                }
            },
        );
        Ok(Array2::from_shape_vec((q, p), flat).expect("shape"))
    }
}

/// Reusable patch buffers for one evaluating thread.
struct EvalScratch {
    xp: Vec<f64>,
    yp: Vec<f64>,
}

impl EvalScratch {
    fn new(scheme: &PatchScheme) -> Self {
        let len = scheme.n_patches() * scheme.s();
        EvalScratch {
            xp: vec![0.0; len],
            yp: vec![0.0; len],
        }
    }

    fn fill(&mut self, scheme: &PatchScheme, x: &[f64], y: &[f64]) {
        let s = scheme.s();
        for (slot, start) in scheme.starts().enumerate() {
            write_patch(x, start, &mut self.xp[slot * s..(slot + 1) * s]);
            write_patch(y, start, &mut self.yp[slot * s..(slot + 1) * s]);
        }
    }
}
