//! Fourier spectral theory of composite kernels on the torus.
//!
//! Translationally-invariant constituents diagonalize in plane waves
//! `phi_k(u) = exp(i k . u)` with `k = 2 pi n`, `n` an integer vector. The
//! composite eigenvalues follow from the constituent eigenvalues `lambda_k`:
//!
//! - nonoverlapping patches: `Lambda_0 = lambda_0` and `Lambda_k = (s/d)
//!   lambda_k` otherwise; local kernels repeat each eigenvalue once per patch;
//! - overlapping patches: wavevectors are classified by the extent `u` of
//!   their minimal window of nonzero components, eigenmodes are indexed by
//!   canonical representatives (nonzero first and u-th components, zeros
//!   after), and `Lambda_k = ((s - u + 1)/d) lambda_k`; local kernels carry
//!   patch multiplicity `d`.
//!
//! Eigenvalues here use the power-law profile
//! `lambda_k = amplitude * (mass^2 + k^2)^(-(s + alpha)/2)`, exact for the
//! spectrally-defined constituent and matching real-space constituents only
//! in the decay exponent (for the Laplacian also in amplitude, via its
//! Fourier transform).

mod coeffs;
mod estimates;
mod replica;

pub use coeffs::{target_coefficients, TargetCoefficients};
pub use estimates::{
    cutoff_modulus, predicted_beta, ridge_threshold_sum, tail_power, BetaPrediction,
    PredictedOutcome, PredictionInput, RidgePolicy, RidgeTheoremParams, ValidityFlags,
};
pub use replica::{replica_error, replica_kappa};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernels::{CompositeKernel, CompositeKind, ConstituentKernel, Overlap, PatchScheme};

/// Largest supported filter size for enumeration.
pub const MAX_FILTER_DIM: usize = 12;
/// Hard cap on enumerated canonical entries.
pub const ENTRY_BUDGET: usize = 10_000_000;

/// What the spectral theory needs to know about a composite kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDescriptor {
    pub kind: CompositeKind,
    pub s: usize,
    pub d: usize,
    pub overlap: Overlap,
    /// Smoothness exponent: eigenvalues decay as `k^-(s + alpha)`.
    pub alpha: f64,
    /// Infrared mass in `lambda_k = amplitude (mass^2 + k^2)^(-(s+alpha)/2)`.
    pub mass: f64,
    /// Overall eigenvalue scale.
    pub amplitude: f64,
}

impl SpectralDescriptor {
    /// The spectrally-defined power-law kernel itself (unit amplitude).
    pub fn power_law(
        kind: CompositeKind,
        s: usize,
        d: usize,
        overlap: Overlap,
        alpha: f64,
        mass: f64,
    ) -> Result<Self> {
        PatchScheme::new(d, s, overlap)?;
        if s > MAX_FILTER_DIM {
            return Err(Error::Kernel(format!(
                "spectral enumeration supports s <= {MAX_FILTER_DIM}, got {s}"
            )));
        }
        if alpha <= 0.0 || mass <= 0.0 {
            return Err(Error::Kernel(format!(
                "power-law spectrum needs alpha > 0 and mass > 0, got alpha={alpha}, mass={mass}"
            )));
        }
        Ok(SpectralDescriptor {
            kind,
            s,
            d,
            overlap,
            alpha,
            mass,
            amplitude: 1.0,
        })
    }

    /// Spectral surrogate for a real-space composite kernel.
    ///
    /// The Laplacian constituent gets its exact Fourier amplitude
    /// `2^s pi^((s-1)/2) Gamma((s+1)/2)`; other real-space constituents share
    /// only the decay exponent (amplitude left at 1), so only slopes are
    /// comparable.
    pub fn for_kernel(kernel: &CompositeKernel) -> Result<Self> {
        let scheme = kernel.patches();
        let s = scheme.s();
        let (alpha, mass, amplitude) = match kernel.constituent() {
            ConstituentKernel::Laplacian { .. } => (1.0, 1.0, laplacian_fourier_amplitude(s)),
            ConstituentKernel::ReluNtk { .. } | ConstituentKernel::RandomFeatureNtk { .. } => {
                (1.0, 1.0, 1.0)
            }
            ConstituentKernel::PowerLawSpectral { alpha, mass, .. } => (*alpha, *mass, 1.0),
        };
        let mut desc = SpectralDescriptor::power_law(
            kernel.kind(),
            s,
            scheme.d(),
            scheme.overlap(),
            alpha,
            mass,
        )?;
        desc.amplitude = amplitude;
        Ok(desc)
    }

    /// Whether replica/tail values are on the same scale as the real-space
    /// kernel (true for spectral kernels and the Laplacian surrogate).
    pub fn amplitude_is_calibrated(kernel: &CompositeKernel) -> bool {
        !matches!(
            kernel.constituent(),
            ConstituentKernel::ReluNtk { .. } | ConstituentKernel::RandomFeatureNtk { .. }
        )
    }

    /// Constituent eigenvalue at squared wavevector modulus `k2`.
    pub fn constituent_eigenvalue(&self, k2: f64) -> f64 {
        self.amplitude * (self.mass * self.mass + k2).powf(-0.5 * (self.s as f64 + self.alpha))
    }

    pub fn n_patches(&self) -> usize {
        match self.overlap {
            Overlap::Overlapping => self.d,
            Overlap::NonOverlapping => self.d / self.s,
        }
    }

    pub fn patch_scheme(&self) -> PatchScheme {
        PatchScheme::new(self.d, self.s, self.overlap).expect("validated at construction")
    }

    /// Eigenvalue degeneracy carried by every non-constant eigenmode.
    fn mode_multiplicity(&self) -> u64 {
        match self.kind {
            CompositeKind::Convolutional => 1,
            CompositeKind::Local => self.n_patches() as u64,
        }
    }
}

/// Exact Fourier amplitude of `exp(-|u|)` on `R^s`:
/// `2^s pi^((s-1)/2) Gamma((s+1)/2)`.
pub fn laplacian_fourier_amplitude(s: usize) -> f64 {
    let two_pow = (s as f64).exp2();
    two_pow * PI.powf((s as f64 - 1.0) / 2.0) * gamma_of_half(s as u32 + 1)
}

/// Gamma(n/2) for integer n >= 1.
fn gamma_of_half(n: u32) -> f64 {
    let mut x = n as f64 / 2.0;
    let mut acc = 1.0;
    while x > 1.25 {
        x -= 1.0;
        acc *= x;
    }
    if (x - 0.5).abs() < 1e-12 {
        acc * PI.sqrt()
    } else {
        acc // Gamma(1) = 1
    }
}

/// An enumerated wavevector: integer components (units of 2 pi), modulus,
/// and the extent `u` of its minimal window of nonzero components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavevector {
    comps: [i16; MAX_FILTER_DIM],
    len: u8,
    u: u8,
    k: f64,
}

impl Wavevector {
    fn new(comps: &[i16]) -> Self {
        debug_assert!(comps.len() <= MAX_FILTER_DIM);
        let mut store = [0i16; MAX_FILTER_DIM];
        store[..comps.len()].copy_from_slice(comps);
        let mut lo = None;
        let mut hi = 0usize;
        let mut n2: i64 = 0;
        for (i, &c) in comps.iter().enumerate() {
            n2 += (c as i64) * (c as i64);
            if c != 0 {
                if lo.is_none() {
                    lo = Some(i);
                }
                hi = i;
            }
        }
        let u = match lo {
            None => 0,
            Some(lo) => hi - lo + 1,
        };
        let k = 2.0 * PI * (n2 as f64).sqrt();
        Wavevector {
            comps: store,
            len: comps.len() as u8,
            u: u as u8,
            k,
        }
    }

    pub fn components(&self) -> &[i16] {
        &self.comps[..self.len as usize]
    }

    /// Modulus `k = 2 pi sqrt(sum n_i^2)`.
    pub fn modulus(&self) -> f64 {
        self.k
    }

    /// Squared modulus.
    pub fn modulus_sq(&self) -> f64 {
        self.k * self.k
    }

    /// Extent of the minimal window of nonzero components (0 iff k = 0).
    pub fn class_u(&self) -> usize {
        self.u as usize
    }
}

/// One eigenvalue family of the composite kernel.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumEntry {
    pub wavevector: Wavevector,
    /// Constituent eigenvalue `lambda_k`.
    pub lambda: f64,
    /// Composite eigenvalue `Lambda`.
    pub big_lambda: f64,
    /// Number of eigenfunctions sharing this entry.
    pub degeneracy: u64,
}

/// Enumerated spectrum, sorted by descending `Lambda` (ties by lexicographic
/// components) so ranks, tail sums and cutoffs are deterministic.
#[derive(Debug, Clone)]
pub struct SpectrumModel {
    descriptor: Option<SpectralDescriptor>,
    entries: Vec<SpectrumEntry>,
    k_max: f64,
    total_modes: u64,
}

impl SpectrumModel {
    pub fn descriptor(&self) -> Option<&SpectralDescriptor> {
        self.descriptor.as_ref()
    }

    pub fn entries(&self) -> &[SpectrumEntry] {
        &self.entries
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    /// Number of eigenfunctions counting degeneracy.
    pub fn total_modes(&self) -> u64 {
        self.total_modes
    }

    /// Sum of `Lambda * degeneracy`: the truncated operator trace.
    pub fn trace(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.big_lambda * e.degeneracy as f64)
            .sum()
    }

    /// Synthetic spectrum from raw `(eigenvalue, degeneracy)` pairs, for
    /// replica solves on spectra that do not come from a composite kernel.
    pub fn from_eigenvalues<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (f64, u64)>,
    {
        let mut entries: Vec<SpectrumEntry> = pairs
            .into_iter()
            .map(|(lambda, degeneracy)| SpectrumEntry {
                wavevector: Wavevector::new(&[]),
                lambda,
                big_lambda: lambda,
                degeneracy,
            })
            .collect();
        entries.sort_unstable_by(|a, b| b.big_lambda.total_cmp(&a.big_lambda));
        let total_modes = entries.iter().map(|e| e.degeneracy).sum();
        SpectrumModel {
            descriptor: None,
            entries,
            k_max: f64::NAN,
            total_modes,
        }
    }
}

/// Number of canonical entries enumerated at component bound `n_max`.
fn canonical_entry_count(desc: &SpectralDescriptor, n_max: usize) -> u128 {
    let two_n = 2 * n_max as u128;
    let full = two_n + 1;
    match desc.overlap {
        Overlap::Overlapping => {
            // u = 0 plus, for each u >= 1, vectors with nonzero first and
            // u-th components and zeros past u.
            let mut count: u128 = 1;
            for u in 1..=desc.s {
                count += match u {
                    1 => two_n,
                    _ => two_n * two_n * full.pow(u as u32 - 2),
                };
            }
            count
        }
        Overlap::NonOverlapping => full.pow(desc.s as u32),
    }
}

/// Total eigenfunction count (with degeneracy) at component bound `n_max`.
fn mode_count(desc: &SpectralDescriptor, n_max: usize) -> u128 {
    let canonical = canonical_entry_count(desc, n_max);
    let mult = desc.mode_multiplicity() as u128;
    1 + (canonical - 1) * mult
}

/// Enumerate all eigenvalues with every `|n_i| <= k_max / 2 pi`.
pub fn enumerate_spectrum(desc: &SpectralDescriptor, k_max: f64) -> Result<SpectrumModel> {
    if !(k_max > 0.0) {
        return Err(Error::Kernel(format!("k_max must be positive, got {k_max}")));
    }
    let n_max = (k_max / (2.0 * PI)).floor() as usize;
    let count = canonical_entry_count(desc, n_max);
    if count > ENTRY_BUDGET as u128 {
        let mut n_ok = n_max;
        while n_ok > 0 && canonical_entry_count(desc, n_ok) > ENTRY_BUDGET as u128 {
            n_ok -= 1;
        }
        return Err(Error::SpectrumBudget {
            k_max,
            entries: count.min(usize::MAX as u128) as usize,
            budget: ENTRY_BUDGET,
            suggested: 2.0 * PI * n_ok as f64,
        });
    }

    let mut entries = Vec::with_capacity(count as usize);
    let mult = desc.mode_multiplicity();
    let push = |entries: &mut Vec<SpectrumEntry>, comps: &[i16]| {
        let wv = Wavevector::new(comps);
        let u = wv.class_u();
        let lambda = desc.constituent_eigenvalue(wv.modulus_sq());
        let (big_lambda, degeneracy) = if u == 0 {
            (lambda, 1)
        } else {
            let factor = match desc.overlap {
                Overlap::Overlapping => (desc.s - u + 1) as f64 / desc.d as f64,
                Overlap::NonOverlapping => desc.s as f64 / desc.d as f64,
            };
            (factor * lambda, mult)
        };
        entries.push(SpectrumEntry {
            wavevector: wv,
            lambda,
            big_lambda,
            degeneracy,
        });
    };

    let n = n_max as i64;
    match desc.overlap {
        Overlap::Overlapping => {
            push(&mut entries, &vec![0i16; desc.s]);
            for u in 1..=desc.s {
                enumerate_canonical(u, n, &mut |head: &[i16]| {
                    let mut comps = vec![0i16; desc.s];
                    comps[..u].copy_from_slice(head);
                    push(&mut entries, &comps);
                });
            }
        }
        Overlap::NonOverlapping => {
            let mut comps = vec![0i16; desc.s];
            enumerate_box(desc.s, n, &mut comps, 0, &mut |comps: &[i16]| {
                push(&mut entries, comps)
            });
        }
    }

    entries.sort_unstable_by(|a, b| {
        b.big_lambda
            .total_cmp(&a.big_lambda)
            .then_with(|| a.wavevector.components().cmp(b.wavevector.components()))
    });
    let total_modes = entries.iter().map(|e| e.degeneracy).sum();
    Ok(SpectrumModel {
        descriptor: Some(*desc),
        entries,
        k_max,
        total_modes,
    })
}

/// Smallest `k_max` whose mode count (with degeneracy) reaches `target`,
/// clamped to the entry budget.
pub fn k_max_for_modes(desc: &SpectralDescriptor, target: u64) -> f64 {
    let mut n = 1usize;
    while mode_count(desc, n) < target as u128
        && canonical_entry_count(desc, n + 1) <= ENTRY_BUDGET as u128
    {
        n += 1;
    }
    2.0 * PI * n as f64
}

/// Visit every u-dim head with nonzero first and last components.
fn enumerate_canonical(u: usize, n: i64, visit: &mut impl FnMut(&[i16])) {
    let mut head = vec![0i16; u];
    fn rec(head: &mut Vec<i16>, pos: usize, u: usize, n: i64, visit: &mut impl FnMut(&[i16])) {
        if pos == u {
            visit(head);
            return;
        }
        let extremal = pos == 0 || pos == u - 1;
        for v in -n..=n {
            if extremal && v == 0 {
                continue;
            }
            head[pos] = v as i16;
            rec(head, pos + 1, u, n, visit);
        }
    }
    rec(&mut head, 0, u, n, visit);
}

/// Visit every vector of the full box `[-n, n]^s`.
fn enumerate_box(
    s: usize,
    n: i64,
    comps: &mut Vec<i16>,
    pos: usize,
    visit: &mut impl FnMut(&[i16]),
) {
    if pos == s {
        visit(comps);
        return;
    }
    for v in -n..=n {
        comps[pos] = v as i16;
        enumerate_box(s, n, comps, pos + 1, visit);
    }
}

/// Plane wave `exp(i 2 pi n . u)` on a patch.
pub fn plane_wave(comps: &[i16], patch: &[f64]) -> Complex64 {
    let mut phase = 0.0;
    for (c, x) in comps.iter().zip(patch.iter()) {
        phase += 2.0 * PI * (*c as f64) * x;
    }
    Complex64::from_polar(1.0, phase)
}

/// Convolutional eigenfunction: constant 1 for the zero wavevector,
/// `|P|^{-1/2} sum_m phi_k(x_m)` otherwise.
pub fn conv_eigenfunction(scheme: &PatchScheme, comps: &[i16], x: &[f64]) -> Complex64 {
    if comps.iter().all(|&c| c == 0) {
        return Complex64::new(1.0, 0.0);
    }
    let s = scheme.s();
    let mut patch = vec![0.0; s];
    let mut acc = Complex64::new(0.0, 0.0);
    for start in scheme.starts() {
        crate::kernels::write_patch(x, start, &mut patch);
        acc += plane_wave(comps, &patch);
    }
    acc / (scheme.n_patches() as f64).sqrt()
}

/// Local eigenfunction: `phi_k(x_i)` at one patch (index into scheme starts).
pub fn local_eigenfunction(
    scheme: &PatchScheme,
    comps: &[i16],
    patch_slot: usize,
    x: &[f64],
) -> Complex64 {
    let s = scheme.s();
    let start = scheme
        .starts()
        .nth(patch_slot)
        .expect("patch slot within scheme");
    let mut patch = vec![0.0; s];
    crate::kernels::write_patch(x, start, &mut patch);
    plane_wave(comps, &patch)
}
