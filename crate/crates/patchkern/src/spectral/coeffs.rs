//! Variance of the target coefficients in the student eigenbasis.
//!
//! With a Gaussian-field teacher, `E[|c_k|^2]` is the double torus integral
//! of the teacher kernel against the student eigenfunction pair. The lattice
//! algebra collapses it to: the coefficient is nonzero only when the
//! wavevector is effectively t-dimensional (nonzero components confined to a
//! window a teacher patch can cover, at an admissible offset), and then it
//! equals the teacher eigenvalue of the embedded t-dimensional wavevector
//! summed over admissible embedding offsets.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{CompositeKind, Overlap};
use crate::spectral::{SpectralDescriptor, SpectrumModel};

/// Per-eigenmode target variances aligned with a student spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct TargetCoefficients {
    /// Per-copy variance `E[|c|^2]`, aligned with the spectrum entries.
    pub variances: Vec<f64>,
    pub teacher: SpectralDescriptor,
    pub student: SpectralDescriptor,
    /// False when the student eigenbasis cannot span the teacher field
    /// (s < t, or a shift-invariant student facing a local teacher).
    pub teacher_representable: bool,
    /// Support of the reduced eigenvalue density with respect to the target.
    pub support: String,
}

impl TargetCoefficients {
    /// Total captured target power: sum of degeneracy-weighted variances.
    pub fn captured_power(&self, spectrum: &SpectrumModel) -> f64 {
        self.variances
            .iter()
            .zip(spectrum.entries())
            .map(|(v, e)| v * e.degeneracy as f64)
            .sum()
    }
}

/// Compute `E[|c|^2]` for every enumerated student eigenmode.
pub fn target_coefficients(
    teacher: &SpectralDescriptor,
    spectrum: &SpectrumModel,
) -> Result<TargetCoefficients> {
    let student = spectrum.descriptor().ok_or_else(|| {
        Error::IncompatibleSchemes("synthetic spectra carry no kernel descriptor".into())
    })?;
    if teacher.d != student.d {
        return Err(Error::IncompatibleSchemes(format!(
            "teacher d={} vs student d={}",
            teacher.d, student.d
        )));
    }
    if teacher.overlap != student.overlap {
        return Err(Error::IncompatibleSchemes(
            "teacher and student must share the patch overlap policy".into(),
        ));
    }
    let t = teacher.s;
    let s = student.s;
    let d = student.d as f64;
    let overlap = student.overlap;

    if overlap == Overlap::NonOverlapping && s % t != 0 {
        return Err(Error::IncompatibleSchemes(format!(
            "nonoverlapping schemes need s divisible by t, got s={s}, t={t}"
        )));
    }

    // A local (non-shift-invariant) field is outside the span of a
    // convolutional student's eigenbasis; s < t puts the teacher outside any
    // student span.
    let degenerate_small_student = overlap == Overlap::Overlapping && s < t;
    let teacher_representable = !degenerate_small_student
        && !(teacher.kind == CompositeKind::Local && student.kind == CompositeKind::Convolutional);

    let lambda_t = |k2: f64| teacher.constituent_eigenvalue(k2);
    let variances: Vec<f64> = spectrum
        .entries()
        .iter()
        .map(|entry| {
            let u = entry.wavevector.class_u();
            if u == 0 {
                return lambda_t(0.0);
            }
            if degenerate_small_student {
                return 0.0;
            }
            match overlap {
                Overlap::Overlapping => {
                    if u > t {
                        return 0.0;
                    }
                    let base = (t - u + 1) as f64 / d * lambda_t(entry.wavevector.modulus_sq());
                    match (teacher.kind, student.kind) {
                        (_, CompositeKind::Convolutional) => base,
                        (CompositeKind::Convolutional, CompositeKind::Local) => base / d,
                        (CompositeKind::Local, CompositeKind::Local) => base,
                    }
                }
                Overlap::NonOverlapping => {
                    if !fits_aligned_window(entry.wavevector.components(), t) {
                        return 0.0;
                    }
                    let lam = lambda_t(entry.wavevector.modulus_sq());
                    let (tf, sf) = (t as f64, s as f64);
                    match (teacher.kind, student.kind) {
                        (CompositeKind::Convolutional, CompositeKind::Convolutional) => {
                            tf * tf / (sf * d) * lam
                        }
                        (CompositeKind::Convolutional, CompositeKind::Local) => {
                            tf * tf / (d * d) * lam
                        }
                        (CompositeKind::Local, _) => tf / d * lam,
                    }
                }
            }
        })
        .collect();

    let support = if degenerate_small_student {
        "constant mode only (student patches smaller than teacher patches)".to_string()
    } else {
        match overlap {
            Overlap::Overlapping => format!(
                "wavevectors with nonzero components confined to a window of extent <= {t}, plus the constant mode"
            ),
            Overlap::NonOverlapping => format!(
                "wavevectors with nonzero components inside one aligned window of length {t}, plus the constant mode"
            ),
        }
    };

    Ok(TargetCoefficients {
        variances,
        teacher: *teacher,
        student: *student,
        teacher_representable,
        support,
    })
}

/// Whether the nonzero components sit inside one teacher window at an
/// aligned offset (multiples of `t` within the student patch).
fn fits_aligned_window(comps: &[i16], t: usize) -> bool {
    let mut lo = None;
    let mut hi = 0usize;
    for (i, &c) in comps.iter().enumerate() {
        if c != 0 {
            if lo.is_none() {
                lo = Some(i);
            }
            hi = i;
        }
    }
    match lo {
        None => true,
        Some(lo) => {
            let window = lo / t;
            hi < (window + 1) * t
        }
    }
}
