//! Side-by-side theory and experiment for one configuration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{run_learning_curve, CurvePoint, ExperimentConfig, LearningCurve, RidgeSchedule};
use crate::sampling::Domain;
use crate::spectral::{
    self, predicted_beta, BetaPrediction, PredictionInput, RidgePolicy, SpectrumModel,
    TargetCoefficients,
};

/// Acceptance-style default: fitted beta within this of the prediction.
pub const BETA_TOLERANCE: f64 = 0.12;
/// Replica-curve slope must match the tail-sum slope within this.
pub const SLOPE_TOLERANCE: f64 = 0.05;
/// Modes to enumerate per largest requested P.
pub const MODES_PER_SAMPLE: u64 = 100;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReplicaPoint {
    pub p: usize,
    pub lambda: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportChecks {
    /// |fitted - predicted| <= 0.12 (None when the prediction is a plateau
    /// or theory is unavailable).
    pub beta_within_tolerance: Option<bool>,
    /// Replica and tail-sum slopes agree within 0.05.
    pub replica_matches_tail_slope: Option<bool>,
    /// Replica error >= tail sum pointwise (teacher = student only).
    pub replica_above_tail: Option<bool>,
}

/// Everything one run says about the theory.
#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub fitted_beta: f64,
    pub fitted_beta_stderr: f64,
    pub fit_window: (usize, usize),
    pub curve: Vec<CurvePoint>,
    pub predicted: BetaPrediction,
    /// Replica error on the P grid (when the spectrum is enumerable).
    pub replica: Option<Vec<ReplicaPoint>>,
    /// Tail sums B(P) on the P grid and their log-log slope.
    pub tail: Option<Vec<(usize, f64)>>,
    pub tail_slope: Option<f64>,
    pub replica_slope: Option<f64>,
    pub theory_available: bool,
    pub theory_note: Option<String>,
    /// Replica/tail values share the empirical error scale (Laplacian and
    /// spectral constituents); for NTK constituents only slopes compare.
    pub amplitude_calibrated: bool,
    pub checks: ReportChecks,
    pub runtime_seconds: f64,
}

fn ridge_policy(r: RidgeSchedule) -> RidgePolicy {
    match r {
        RidgeSchedule::Ridgeless => RidgePolicy::Ridgeless,
        RidgeSchedule::Fixed { lambda0 } => RidgePolicy::Fixed { lambda0 },
        RidgeSchedule::Decaying { lambda0, gamma } => RidgePolicy::Decaying { lambda0, gamma },
    }
}

struct TheorySide {
    spectrum: SpectrumModel,
    coeffs: TargetCoefficients,
}

fn build_theory(cfg: &ExperimentConfig) -> Result<TheorySide> {
    let student = cfg.student_cfg.spectral_descriptor()?;
    let teacher = cfg.teacher_cfg.spectral_descriptor()?;
    let p_max = *cfg.p_grid.last().expect("nonempty grid") as u64;
    let k_max = spectral::k_max_for_modes(&student, MODES_PER_SAMPLE * p_max);
    let spectrum = spectral::enumerate_spectrum(&student, k_max)?;
    let coeffs = spectral::target_coefficients(&teacher, &spectrum)?;
    Ok(TheorySide { spectrum, coeffs })
}

/// Assemble the report for an already-measured curve.
pub fn theory_report_for_curve(
    cfg: &ExperimentConfig,
    curve: &LearningCurve,
    runtime_seconds: f64,
) -> TheoryReport {
    let teacher_desc = cfg.teacher_cfg.spectral_descriptor().ok();
    let student_desc = cfg.student_cfg.spectral_descriptor().ok();
    let (alpha_t, alpha_s) = (
        teacher_desc.map(|d| d.alpha).unwrap_or(1.0),
        student_desc.map(|d| d.alpha).unwrap_or(1.0),
    );
    let predicted = predicted_beta(PredictionInput {
        alpha_t,
        t: cfg.teacher.patches().s(),
        alpha_s,
        s: cfg.student.patches().s(),
        student_kind: cfg.student.kind(),
        overlap: cfg.student.patches().overlap(),
        ridge: ridge_policy(cfg.ridge),
    });

    let mut report = TheoryReport {
        fitted_beta: curve.beta,
        fitted_beta_stderr: curve.beta_stderr,
        fit_window: curve.fit_window,
        curve: curve.points.clone(),
        predicted,
        replica: None,
        tail: None,
        tail_slope: None,
        replica_slope: None,
        theory_available: false,
        theory_note: None,
        amplitude_calibrated: cfg.teacher_cfg.amplitude_calibrated()
            && cfg.student_cfg.amplitude_calibrated(),
        checks: ReportChecks {
            beta_within_tolerance: None,
            replica_matches_tail_slope: None,
            replica_above_tail: None,
        },
        runtime_seconds,
    };

    report.checks.beta_within_tolerance = report
        .predicted
        .beta()
        .map(|b| (curve.beta - b).abs() <= BETA_TOLERANCE);

    if cfg.domain == Domain::SphereUnit {
        report.theory_note =
            Some("sphere domain: torus spectral theory does not apply".into());
        return report;
    }
    let theory = match build_theory(cfg) {
        Ok(t) => t,
        Err(e) => {
            report.theory_note = Some(format!("spectral theory unavailable: {e}"));
            return report;
        }
    };

    let mut replica = Vec::with_capacity(cfg.p_grid.len());
    let mut tail = Vec::with_capacity(cfg.p_grid.len());
    for &p in &cfg.p_grid {
        let lambda = cfg.ridge.lambda_at(p);
        let err = match spectral::replica_error(&theory.spectrum, &theory.coeffs, p, lambda) {
            Ok(e) => e,
            Err(e) => {
                report.theory_note = Some(format!("replica solve failed: {e}"));
                return report;
            }
        };
        replica.push(ReplicaPoint { p, lambda, error: err });
        match spectral::tail_power(&theory.coeffs, &theory.spectrum, p) {
            Ok(b) => tail.push((p, b)),
            Err(e) => {
                report.theory_note = Some(format!("tail sum failed: {e}"));
                return report;
            }
        }
    }

    let window = curve.fit_window;
    let rep_pts: Vec<(f64, f64)> = replica.iter().map(|r| (r.p as f64, r.error)).collect();
    let tail_pts: Vec<(f64, f64)> = tail.iter().map(|&(p, b)| (p as f64, b)).collect();
    report.replica_slope = super::fit_exponent(&rep_pts, window).ok().map(|(b, _)| b);
    report.tail_slope = super::fit_exponent(&tail_pts, window).ok().map(|(b, _)| b);
    if let (Some(rs), Some(ts)) = (report.replica_slope, report.tail_slope) {
        report.checks.replica_matches_tail_slope = Some((rs - ts).abs() <= SLOPE_TOLERANCE);
    }
    if theory.coeffs.teacher == theory.coeffs.student {
        report.checks.replica_above_tail = Some(
            replica
                .iter()
                .zip(tail.iter())
                .all(|(r, &(_, b))| r.error >= b * (1.0 - 1e-9)),
        );
    }
    report.replica = Some(replica);
    report.tail = Some(tail);
    report.theory_available = true;
    report
}

/// Run the experiment and assemble the full report.
pub fn theory_vs_experiment(cfg: &ExperimentConfig) -> Result<TheoryReport> {
    let start = std::time::Instant::now();
    let curve = run_learning_curve(cfg)?;
    let runtime = start.elapsed().as_secs_f64();
    Ok(theory_report_for_curve(cfg, &curve, runtime))
}

impl TheoryReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(Error::from)
    }
}
