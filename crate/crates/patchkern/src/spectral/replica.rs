//! Replica prediction of the generalization error.
//!
//! The scalar self-consistent equation
//! `kappa/P = lambda + (1/P) sum_rho lambda_rho (kappa/P) / (lambda_rho + kappa/P)`
//! has a unique nonnegative root (the right side is monotone); it acts as an
//! eigenvalue threshold separating learnt from unlearnt modes. The error is
//! the threshold-weighted sum
//! `eps = d(kappa/P)/d lambda * sum_rho E[|c_rho|^2] (kappa/P)^2 / (lambda_rho + kappa/P)^2`.

use crate::error::{Error, Result};
use crate::spectral::{SpectrumModel, TargetCoefficients};

const MAX_ITERATIONS: usize = 100_000;
/// Contract tolerance on the fixed point; iteration aims well below it.
const CONTRACT_RTOL: f64 = 1e-10;
const TARGET_RTOL: f64 = 1e-14;

/// Eigenvalues grouped by identical value (and coefficient), with
/// degeneracy-weighted multiplicities.
fn grouped(spectrum: &SpectrumModel, coeffs: Option<&TargetCoefficients>) -> Vec<(f64, f64, f64)> {
    let mut out: Vec<(f64, f64, f64)> = Vec::new();
    for (i, e) in spectrum.entries().iter().enumerate() {
        let c2 = coeffs.map(|c| c.variances[i]).unwrap_or(0.0);
        match out.last_mut() {
            Some((lam, g, cc))
                if lam.to_bits() == e.big_lambda.to_bits() && cc.to_bits() == c2.to_bits() =>
            {
                *g += e.degeneracy as f64;
            }
            _ => out.push((e.big_lambda, e.degeneracy as f64, c2)),
        }
    }
    out
}

fn solve_kappa(groups: &[(f64, f64, f64)], p: f64, lambda: f64, total_modes: f64) -> Result<f64> {
    if lambda <= 0.0 && total_modes <= p {
        // Every mode is resolvable: the only nonnegative root is zero.
        return Ok(0.0);
    }
    let trace: f64 = groups.iter().map(|(lam, g, _)| lam * g).sum();
    let f = |x: f64| -> f64 {
        let mut acc = 0.0;
        for &(lam, g, _) in groups {
            acc += g * lam * x / (lam + x);
        }
        lambda + acc / p
    };
    let mut x = lambda.max(0.0) + trace / p;
    for _ in 0..MAX_ITERATIONS {
        let next = f(x);
        let delta = (next - x).abs();
        x = next;
        if delta <= TARGET_RTOL * x.abs().max(f64::MIN_POSITIVE) {
            return Ok(x);
        }
    }
    let residual = (f(x) - x).abs() / x.abs().max(f64::MIN_POSITIVE);
    if residual <= CONTRACT_RTOL {
        Ok(x)
    } else {
        Err(Error::NonConvergence {
            what: "replica kappa fixed point".into(),
            iterations: MAX_ITERATIONS,
            residual,
        })
    }
}

/// Solve the self-consistent equation; returns `kappa_lambda(P) / P`.
pub fn replica_kappa(spectrum: &SpectrumModel, p: usize, lambda: f64) -> Result<f64> {
    if p == 0 {
        return Err(Error::Kernel("replica_kappa needs P >= 1".into()));
    }
    if lambda < 0.0 {
        return Err(Error::Kernel(format!("ridge must be >= 0, got {lambda}")));
    }
    let groups = grouped(spectrum, None);
    solve_kappa(&groups, p as f64, lambda, spectrum.total_modes() as f64)
}

/// Mode-resolved replica estimate of the generalization error.
///
/// `P = 0` is the nothing-learnt convention: the total target power.
pub fn replica_error(
    spectrum: &SpectrumModel,
    coeffs: &TargetCoefficients,
    p: usize,
    lambda: f64,
) -> Result<f64> {
    let groups = grouped(spectrum, Some(coeffs));
    if p == 0 {
        return Ok(groups.iter().map(|(_, g, c2)| g * c2).sum());
    }
    if lambda < 0.0 {
        return Err(Error::Kernel(format!("ridge must be >= 0, got {lambda}")));
    }
    let total = spectrum.total_modes() as f64;
    let pf = p as f64;
    let kappa = solve_kappa(&groups, pf, lambda, total)?;
    if kappa == 0.0 {
        return Ok(0.0);
    }
    // d(kappa/P)/d lambda by centered finite difference.
    let h = (1e-6 * lambda).max(1e-12);
    let plus = solve_kappa(&groups, pf, lambda + h, total)?;
    let minus = solve_kappa(&groups, pf, lambda - h, total)?;
    let dkappa = (plus - minus) / (2.0 * h);
    let mut acc = 0.0;
    for &(lam, g, c2) in &groups {
        if c2 == 0.0 {
            continue;
        }
        let w = kappa / (lam + kappa);
        acc += g * c2 * w * w;
    }
    Ok(dkappa * acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{CompositeKind, Overlap};
    use crate::spectral::{enumerate_spectrum, target_coefficients, SpectralDescriptor};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn single_mode_root_is_zero() {
        let spec = SpectrumModel::from_eigenvalues([(0.7, 1)]);
        for p in [1usize, 2, 5] {
            let kappa = replica_kappa(&spec, p, 0.0).unwrap();
            assert_eq!(kappa, 0.0, "P={p} should resolve the single mode");
        }
    }

    #[test]
    fn power_law_kappa_has_slope_minus_a() {
        let a = 1.5;
        let spec = SpectrumModel::from_eigenvalues(
            (1..=1_000_000u64).map(|rho| ((rho as f64).powf(-a), 1)),
        );
        let ps = [100usize, 316, 1000, 3162, 10000];
        let logs: Vec<(f64, f64)> = ps
            .iter()
            .map(|&p| {
                let kappa = replica_kappa(&spec, p, 0.0).unwrap();
                ((p as f64).ln(), kappa.ln())
            })
            .collect();
        let slope = ols_slope(&logs);
        assert!(
            (slope + a).abs() < 0.05,
            "kappa_0(P)/P slope {slope} should be -{a} +- 0.05"
        );
    }

    #[test]
    fn large_ridge_saturates_to_lambda_plus_trace_over_p() {
        let spec = SpectrumModel::from_eigenvalues([(0.5, 2), (0.25, 4)]);
        let trace = 0.5 * 2.0 + 0.25 * 4.0;
        let lambda = 1e6;
        let kappa = replica_kappa(&spec, 4, lambda).unwrap();
        assert_relative_eq!(kappa, lambda + trace / 4.0, max_relative = 1e-5);
    }

    #[test]
    fn kappa_monotone_decreasing_in_p_increasing_in_lambda() {
        let spec = SpectrumModel::from_eigenvalues(
            (1..=10_000u64).map(|rho| ((rho as f64).powf(-1.5), 1)),
        );
        let mut prev = f64::INFINITY;
        for p in [10usize, 30, 100, 300, 1000] {
            let kappa = replica_kappa(&spec, p, 1e-6).unwrap();
            assert!(kappa < prev, "kappa should strictly decrease in P");
            prev = kappa;
        }
        let mut prev = -1.0;
        for lambda in [0.0, 1e-6, 1e-4, 1e-2, 1.0] {
            let kappa = replica_kappa(&spec, 100, lambda).unwrap();
            assert!(kappa > prev, "kappa should increase in lambda");
            prev = kappa;
        }
    }

    #[test]
    fn finite_difference_matches_implicit_function_derivative() {
        // Three-mode toy spectrum: d kappa / d lambda =
        // 1 / (1 - (1/P) sum g lam^2 / (lam + kappa)^2).
        let modes = [(0.6, 1.0), (0.3, 2.0), (0.05, 3.0)];
        let spec = SpectrumModel::from_eigenvalues(modes.iter().map(|&(l, g)| (l, g as u64)));
        let p = 3usize;
        let lambda = 0.01;
        let groups = grouped(&spec, None);
        let kappa = solve_kappa(&groups, p as f64, lambda, spec.total_modes() as f64).unwrap();
        let mut denom = 0.0;
        for &(lam, g) in &modes {
            denom += g * lam * lam / ((lam + kappa) * (lam + kappa));
        }
        let implicit = 1.0 / (1.0 - denom / p as f64);
        let h = 1e-6 * lambda;
        let plus = solve_kappa(&groups, p as f64, lambda + h, 6.0).unwrap();
        let minus = solve_kappa(&groups, p as f64, lambda - h, 6.0).unwrap();
        let fd = (plus - minus) / (2.0 * h);
        assert_relative_eq!(fd, implicit, max_relative = 1e-6);
    }

    #[test]
    fn error_conventions_at_the_ends() {
        let desc = SpectralDescriptor::power_law(
            CompositeKind::Convolutional,
            1,
            3,
            Overlap::Overlapping,
            1.0,
            1.0,
        )
        .unwrap();
        let spec = enumerate_spectrum(&desc, 2.0 * PI * 10.0).unwrap();
        let coeffs = target_coefficients(&desc, &spec).unwrap();
        // P = 0: nothing learnt.
        let all = replica_error(&spec, &coeffs, 0, 0.0).unwrap();
        assert_relative_eq!(all, coeffs.captured_power(&spec), max_relative = 1e-12);
        // P far beyond the finite enumerated spectrum: everything learnt.
        let p = spec.total_modes() as usize + 100;
        let nothing = replica_error(&spec, &coeffs, p, 0.0).unwrap();
        assert_eq!(nothing, 0.0);
    }

    fn ols_slope(points: &[(f64, f64)]) -> f64 {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    }
}
