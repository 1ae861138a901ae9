//! Closed-form learning-curve estimates from the enumerated spectrum.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{CompositeKind, Overlap};
use crate::spectral::{SpectrumModel, TargetCoefficients};

/// Tail sum `B(P)`: target power past the first `P` eigenmodes in the
/// deterministic spectrum order. `P` equal to the mode count gives 0.
pub fn tail_power(
    coeffs: &TargetCoefficients,
    spectrum: &SpectrumModel,
    p: usize,
) -> Result<f64> {
    let total = spectrum.total_modes();
    if p as u64 > total {
        return Err(Error::RankPastEnumeration {
            p,
            modes: total as usize,
        });
    }
    let mut cum: u64 = 0;
    let mut acc = 0.0;
    for (entry, &c2) in spectrum.entries().iter().zip(coeffs.variances.iter()) {
        let g = entry.degeneracy;
        let in_head = (p as u64).saturating_sub(cum).min(g);
        let in_tail = g - in_head;
        if in_tail > 0 && c2 != 0.0 {
            acc += c2 * in_tail as f64;
        }
        cum += g;
    }
    Ok(acc)
}

/// Modulus of the P-th largest eigenvalue's wavevector (ranks count
/// degeneracy; the constant mode ranks first).
pub fn cutoff_modulus(spectrum: &SpectrumModel, p: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::Kernel("rank must be >= 1".into()));
    }
    if p as u64 > spectrum.total_modes() {
        return Err(Error::RankPastEnumeration {
            p,
            modes: spectrum.total_modes() as usize,
        });
    }
    let mut cum: u64 = 0;
    for entry in spectrum.entries() {
        cum += entry.degeneracy;
        if cum >= p as u64 {
            return Ok(entry.wavevector.modulus());
        }
    }
    unreachable!("rank checked against total modes")
}

/// Decaying-ridge error estimate: target power on modes with `Lambda < lambda`
/// (the discrete form of `int_0^lambda D_T(L) c^2(L) dL`).
pub fn ridge_threshold_sum(
    coeffs: &TargetCoefficients,
    spectrum: &SpectrumModel,
    lambda: f64,
) -> f64 {
    spectrum
        .entries()
        .iter()
        .zip(coeffs.variances.iter())
        .filter(|(e, _)| e.big_lambda < lambda)
        .map(|(e, &c2)| c2 * e.degeneracy as f64)
        .sum()
}

/// Exponents of the reduced density `D_T ~ Lambda^-(1+r)` and coefficient
/// profile `c^2 ~ Lambda^q`, with the ridge decay exponent `gamma`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RidgeTheoremParams {
    pub r: f64,
    pub q: f64,
    pub gamma: f64,
}

impl RidgeTheoremParams {
    pub fn new(alpha_t: f64, t: usize, alpha_s: f64, s: usize, gamma: f64) -> Self {
        RidgeTheoremParams {
            r: t as f64 / (s as f64 + alpha_s),
            q: (alpha_t + t as f64) / (alpha_s + s as f64),
            gamma,
        }
    }

    pub fn q_gt_r(&self) -> bool {
        self.q > self.r
    }

    /// Equivalent to `alpha_t < 2 (alpha_s + s)`.
    pub fn q_lt_r_plus_2(&self) -> bool {
        self.q < self.r + 2.0
    }

    pub fn gamma_in_range(&self) -> bool {
        self.gamma > 0.0 && self.gamma < 0.5
    }
}

/// Ridge schedule for the closed-form exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgePolicy {
    Ridgeless,
    /// Fixed positive ridge: no power-law decay, the error plateaus at the
    /// ridge bias.
    Fixed { lambda0: f64 },
    /// `lambda(P) = lambda0 * P^-gamma`.
    Decaying { lambda0: f64, gamma: f64 },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PredictionInput {
    pub alpha_t: f64,
    pub t: usize,
    pub alpha_s: f64,
    pub s: usize,
    pub student_kind: CompositeKind,
    pub overlap: Overlap,
    pub ridge: RidgePolicy,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictedOutcome {
    /// `error(P) ~ P^-beta`.
    Exponent { beta: f64 },
    /// No learning: the error does not decrease with P.
    Plateau { reason: String },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ValidityFlags {
    /// Overlapping: s >= t; nonoverlapping: s a multiple of t.
    pub filter_sizes_compatible: bool,
    /// Ridgeless estimate needs `alpha_t <= 2 (alpha_s + s)`.
    pub ridgeless_smoothness_ok: Option<bool>,
    pub q_gt_r: Option<bool>,
    pub q_lt_r_plus_2: Option<bool>,
    pub gamma_in_range: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaPrediction {
    pub input: PredictionInput,
    pub outcome: PredictedOutcome,
    pub flags: ValidityFlags,
    pub params: Option<RidgeTheoremParams>,
    /// Local students reach the same exponent after rescaling P by the
    /// number of patches.
    pub note: Option<String>,
}

/// Closed-form learning-curve exponent with validity flags.
pub fn predicted_beta(input: PredictionInput) -> BetaPrediction {
    let PredictionInput {
        alpha_t,
        t,
        alpha_s,
        s,
        student_kind,
        overlap,
        ridge,
    } = input;
    let compatible = match overlap {
        Overlap::Overlapping => s >= t,
        Overlap::NonOverlapping => t > 0 && s % t == 0,
    };
    let mut flags = ValidityFlags {
        filter_sizes_compatible: compatible,
        ridgeless_smoothness_ok: None,
        q_gt_r: None,
        q_lt_r_plus_2: None,
        gamma_in_range: None,
    };
    if !compatible {
        return BetaPrediction {
            input,
            outcome: PredictedOutcome::Plateau {
                reason: format!(
                    "student patches (s={s}) cannot cover teacher patches (t={t}): no learning, the error plateaus"
                ),
            },
            flags,
            params: None,
            note: None,
        };
    }
    let note = match student_kind {
        CompositeKind::Local => Some(
            "local student: same exponent with P rescaled by the number of patches".to_string(),
        ),
        CompositeKind::Convolutional => None,
    };
    match ridge {
        RidgePolicy::Ridgeless => {
            flags.ridgeless_smoothness_ok = Some(alpha_t <= 2.0 * (alpha_s + s as f64));
            BetaPrediction {
                input,
                outcome: PredictedOutcome::Exponent {
                    beta: alpha_t / s as f64,
                },
                flags,
                params: None,
                note,
            }
        }
        RidgePolicy::Fixed { lambda0 } => BetaPrediction {
            input,
            outcome: PredictedOutcome::Plateau {
                reason: format!(
                    "fixed ridge {lambda0}: the error saturates at the ridge bias instead of decaying"
                ),
            },
            flags,
            params: None,
            note,
        },
        RidgePolicy::Decaying { gamma, .. } => {
            let params = RidgeTheoremParams::new(alpha_t, t, alpha_s, s, gamma);
            flags.q_gt_r = Some(params.q_gt_r());
            flags.q_lt_r_plus_2 = Some(params.q_lt_r_plus_2());
            flags.gamma_in_range = Some(params.gamma_in_range());
            BetaPrediction {
                input,
                outcome: PredictedOutcome::Exponent {
                    beta: gamma * alpha_t / (alpha_s + s as f64),
                },
                flags,
                params: Some(params),
                note,
            }
        }
    }
}

impl BetaPrediction {
    pub fn beta(&self) -> Option<f64> {
        match self.outcome {
            PredictedOutcome::Exponent { beta } => Some(beta),
            PredictedOutcome::Plateau { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{enumerate_spectrum, target_coefficients, SpectralDescriptor};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ridgeless(alpha_t: f64, t: usize, s: usize) -> PredictionInput {
        PredictionInput {
            alpha_t,
            t,
            alpha_s: 1.0,
            s,
            student_kind: CompositeKind::Convolutional,
            overlap: Overlap::Overlapping,
            ridge: RidgePolicy::Ridgeless,
        }
    }

    #[test]
    fn theorem_exponents() {
        let p = predicted_beta(ridgeless(1.0, 3, 3));
        assert_relative_eq!(p.beta().unwrap(), 1.0 / 3.0, max_relative = 1e-15);
        // Curse regime: s = d = 9.
        let p = predicted_beta(ridgeless(1.0, 1, 9));
        assert_relative_eq!(p.beta().unwrap(), 1.0 / 9.0, max_relative = 1e-15);
        assert_eq!(p.flags.ridgeless_smoothness_ok, Some(true));
    }

    #[test]
    fn decaying_ridge_exponent() {
        let input = PredictionInput {
            alpha_t: 1.0,
            t: 2,
            alpha_s: 1.0,
            s: 2,
            student_kind: CompositeKind::Convolutional,
            overlap: Overlap::Overlapping,
            ridge: RidgePolicy::Decaying {
                lambda0: 1.0,
                gamma: 0.4,
            },
        };
        let p = predicted_beta(input);
        assert_relative_eq!(p.beta().unwrap(), 0.4 / 3.0, max_relative = 1e-15);
        let params = p.params.unwrap();
        assert_relative_eq!(params.r, 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(params.q, 1.0, max_relative = 1e-15);
        assert_eq!(p.flags.q_gt_r, Some(true));
        assert_eq!(p.flags.q_lt_r_plus_2, Some(true));
        assert_eq!(p.flags.gamma_in_range, Some(true));
    }

    #[test]
    fn small_student_plateaus() {
        let p = predicted_beta(ridgeless(1.0, 2, 1));
        assert!(p.beta().is_none());
        assert!(!p.flags.filter_sizes_compatible);
    }

    #[test]
    fn local_student_notes_rescaling() {
        let mut input = ridgeless(1.0, 2, 2);
        input.student_kind = CompositeKind::Local;
        let p = predicted_beta(input);
        assert!(p.note.unwrap().contains("rescaled"));
    }

    fn spectrum_and_coeffs() -> (SpectrumModel, TargetCoefficients) {
        let desc = SpectralDescriptor::power_law(
            CompositeKind::Convolutional,
            2,
            4,
            Overlap::Overlapping,
            1.0,
            1.0,
        )
        .unwrap();
        let spec = enumerate_spectrum(&desc, 2.0 * PI * 60.0).unwrap();
        let coeffs = target_coefficients(&desc, &spec).unwrap();
        (spec, coeffs)
    }

    #[test]
    fn tail_vanishes_at_full_rank_and_errors_past_it() {
        let (spec, coeffs) = spectrum_and_coeffs();
        let total = spec.total_modes() as usize;
        assert_eq!(tail_power(&coeffs, &spec, total).unwrap(), 0.0);
        assert!(tail_power(&coeffs, &spec, total + 1).is_err());
        let b1 = tail_power(&coeffs, &spec, 1).unwrap();
        let b10 = tail_power(&coeffs, &spec, 10).unwrap();
        assert!(b1 > b10 && b10 > 0.0);
    }

    #[test]
    fn cutoff_starts_at_zero_and_grows_as_p_to_one_over_s() {
        let (spec, _) = spectrum_and_coeffs();
        assert_eq!(cutoff_modulus(&spec, 1).unwrap(), 0.0);
        // s = 2: slope 1/2 +- 0.03 over two decades.
        let points: Vec<(f64, f64)> = [30usize, 100, 300, 1000, 3000]
            .iter()
            .map(|&p| {
                (
                    (p as f64).ln(),
                    cutoff_modulus(&spec, p).unwrap().ln(),
                )
            })
            .collect();
        let slope = slope_of(&points);
        assert!(
            (slope - 0.5).abs() < 0.03,
            "k_c(P) slope {slope} should be 0.5 +- 0.03"
        );
    }

    #[test]
    fn one_dimensional_cutoff_counts_modes() {
        let desc = SpectralDescriptor::power_law(
            CompositeKind::Convolutional,
            1,
            3,
            Overlap::Overlapping,
            1.0,
            1.0,
        )
        .unwrap();
        let spec = enumerate_spectrum(&desc, 2.0 * PI * 600.0).unwrap();
        // |n| <= N holds P = 2N + 1 modes, so k_c(P) ~ pi P.
        for p in [101usize, 501, 1001] {
            let kc = cutoff_modulus(&spec, p).unwrap();
            let expect = PI * (p as f64 - 1.0); // 2 pi floor(P/2)
            assert_relative_eq!(kc, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn ridge_threshold_sums_bracket_the_total() {
        let (spec, coeffs) = spectrum_and_coeffs();
        let total = coeffs.captured_power(&spec);
        let lam_max = spec.entries()[0].big_lambda;
        assert_relative_eq!(
            ridge_threshold_sum(&coeffs, &spec, lam_max * 2.0),
            total,
            max_relative = 1e-12
        );
        assert_eq!(ridge_threshold_sum(&coeffs, &spec, 0.0), 0.0);
    }

    fn slope_of(points: &[(f64, f64)]) -> f64 {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    }
}
