//! Power-law exponent fitting and the weight-sharing collapse check.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::LearningCurve;

/// Least-squares slope of `log error` vs `log P` over the window, negated.
///
/// Returns `(beta, stderr)` with the standard error from the fit residuals.
pub fn fit_exponent(points: &[(f64, f64)], window: (usize, usize)) -> Result<(f64, f64)> {
    let (lo, hi) = (window.0 as f64, window.1 as f64);
    let selected: Vec<(f64, f64)> = points
        .iter()
        .filter(|(p, _)| *p >= lo && *p <= hi)
        .copied()
        .collect();
    if selected.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 points in window [{lo}, {hi}], got {}",
            selected.len()
        )));
    }
    if let Some((p, e)) = selected.iter().find(|(_, e)| *e <= 0.0) {
        return Err(Error::Fit(format!(
            "non-positive error {e} at P={p}; cannot fit a power law"
        )));
    }
    let logs: Vec<(f64, f64)> = selected.iter().map(|(p, e)| (p.ln(), e.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|q| q.0).sum::<f64>() / n;
    let my = logs.iter().map(|q| q.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|q| (q.0 - mx) * (q.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs
        .iter()
        .map(|q| {
            let r = q.1 - (intercept + slope * q.0);
            r * r
        })
        .sum();
    let stderr = if logs.len() > 2 {
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((-slope, stderr))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CollapseVerdict {
    Pass,
    Fail,
    /// Rescaled curves do not share a P range; nothing to compare.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RatioPoint {
    /// Local-curve abscissa after the P -> P / |patches| rescale.
    pub p_rescaled: f64,
    /// local error / interpolated convolutional error.
    pub ratio: f64,
}

/// Outcome of the weight-sharing rescale comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CollapseReport {
    pub verdict: CollapseVerdict,
    pub patches: usize,
    pub ratios: Vec<RatioPoint>,
    /// Slopes refitted over each curve's full grid for stability.
    pub slope_local: f64,
    pub slope_conv: f64,
    pub slope_gap: f64,
    pub note: Option<String>,
}

const RATIO_BAND: (f64, f64) = (0.5, 2.0);
const SLOPE_TOL: f64 = 0.05;

/// Check that the local student's curve overlays the convolutional one after
/// rescaling P by the number of patches: ratios within [0.5, 2] on the
/// shared range and slopes equal within 0.05.
pub fn collapse_check(
    curve_local: &LearningCurve,
    curve_conv: &LearningCurve,
    patches: usize,
) -> Result<CollapseReport> {
    if patches == 0 {
        return Err(Error::Fit("patch count must be >= 1".into()));
    }
    let conv_pts: Vec<(f64, f64)> = curve_conv
        .points
        .iter()
        .map(|c| (c.p as f64, c.mean_err))
        .collect();
    let local_pts: Vec<(f64, f64)> = curve_local
        .points
        .iter()
        .map(|c| (c.p as f64, c.mean_err))
        .collect();
    let full_window = |pts: &[(f64, f64)]| -> (usize, usize) {
        (pts[0].0 as usize, pts[pts.len() - 1].0 as usize)
    };
    let (slope_local, _) = fit_exponent(&local_pts, full_window(&local_pts))?;
    let (slope_conv, _) = fit_exponent(&conv_pts, full_window(&conv_pts))?;
    let slope_gap = (slope_local - slope_conv).abs();

    let conv_min = conv_pts.first().unwrap().0;
    let conv_max = conv_pts.last().unwrap().0;
    let mut ratios = Vec::new();
    for (p, e) in &local_pts {
        let x = p / patches as f64;
        if x < conv_min || x > conv_max {
            continue;
        }
        let interp = log_log_interp(&conv_pts, x);
        ratios.push(RatioPoint {
            p_rescaled: x,
            ratio: e / interp,
        });
    }
    if ratios.is_empty() {
        return Ok(CollapseReport {
            verdict: CollapseVerdict::Inconclusive,
            patches,
            ratios,
            slope_local,
            slope_conv,
            slope_gap,
            note: Some("no overlapping P range after rescaling".into()),
        });
    }
    let ratios_ok = ratios
        .iter()
        .all(|r| r.ratio >= RATIO_BAND.0 && r.ratio <= RATIO_BAND.1);
    let slopes_ok = slope_gap <= SLOPE_TOL;
    let verdict = if ratios_ok && slopes_ok {
        CollapseVerdict::Pass
    } else {
        CollapseVerdict::Fail
    };
    Ok(CollapseReport {
        verdict,
        patches,
        ratios,
        slope_local,
        slope_conv,
        slope_gap,
        note: None,
    })
}

/// Piecewise-linear interpolation in log-log coordinates.
fn log_log_interp(pts: &[(f64, f64)], x: f64) -> f64 {
    let lx = x.ln();
    for w in pts.windows(2) {
        let (x0, y0) = (w[0].0.ln(), w[0].1.ln());
        let (x1, y1) = (w[1].0.ln(), w[1].1.ln());
        if lx >= x0 && lx <= x1 {
            let frac = if x1 > x0 { (lx - x0) / (x1 - x0) } else { 0.0 };
            return (y0 + frac * (y1 - y0)).exp();
        }
    }
    // Caller keeps x inside the range; nearest endpoint as a fallback.
    if lx < pts[0].0.ln() {
        pts[0].1
    } else {
        pts[pts.len() - 1].1
    }
}
