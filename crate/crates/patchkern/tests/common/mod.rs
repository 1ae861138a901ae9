//! Property checks shared by the standalone suite and the acceptance gate.
//!
//! Each check returns `Ok(detail)` on success or `Err(reason)`.
// Not every test binary pulls every helper.
#![allow(dead_code)]

use ndarray::Array2;
use patchkern::kernels::{
    CompositeKernel, CompositeKind, ConstituentKernel, Overlap, PatchScheme, PSD_TOL_FACTOR,
};
use patchkern::linalg;
use patchkern::regression;
use patchkern::rng::rng_from_seed;
use patchkern::sampling::{sample_grf, sample_points, Domain};
use patchkern::spectral::{
    enumerate_spectrum, replica_kappa, SpectralDescriptor, SpectrumModel,
};
use rand::Rng;
use std::f64::consts::PI;

pub type Check = std::result::Result<String, String>;

pub fn composite(
    kind: CompositeKind,
    constituent: ConstituentKernel,
    d: usize,
    s: usize,
    overlap: Overlap,
) -> CompositeKernel {
    CompositeKernel::new(kind, constituent, PatchScheme::new(d, s, overlap).unwrap()).unwrap()
}

pub fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0.ln()).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0.ln() - mx) * (p.1.ln() - my))
        .sum();
    let sxx: f64 = points
        .iter()
        .map(|p| (p.0.ln() - mx) * (p.0.ln() - mx))
        .sum();
    sxy / sxx
}

/// Gram matrices of every constituent kind stay PSD up to the scale-free
/// tolerance.
pub fn check_gram_psd() -> Check {
    let d = 4;
    let s = 2;
    let pts = sample_points(Domain::Hypercube01, 40, d, 99).points;
    let mut worst: f64 = 0.0;
    for constituent in [
        ConstituentKernel::laplacian(s),
        ConstituentKernel::relu_ntk(s),
        ConstituentKernel::random_feature_ntk(s, 5_000, 3),
    ] {
        for kind in [CompositeKind::Convolutional, CompositeKind::Local] {
            for overlap in [Overlap::Overlapping, Overlap::NonOverlapping] {
                let k = composite(kind, constituent.clone(), d, s, overlap);
                let gram = k.gram(pts.view()).map_err(|e| e.to_string())?;
                let tol = PSD_TOL_FACTOR * gram.diag().sum() / 40.0;
                let min = linalg::min_eigenvalue(&gram).map_err(|e| e.to_string())?;
                if min < -tol {
                    return Err(format!(
                        "{kind:?}/{overlap:?}/{constituent:?}: min eigenvalue {min:.3e} below -{tol:.3e}"
                    ));
                }
                worst = worst.min(min);
            }
        }
    }
    Ok(format!("worst Gram min-eigenvalue {worst:.3e}"))
}

/// Shift equivariance at 1e-12 relative: convolutional overlapping kernels in
/// each argument separately, local ones only under simultaneous shifts.
pub fn check_shift_invariance() -> Check {
    let d = 6;
    let s = 2;
    let mut rng = rng_from_seed(31);
    let shift = |x: &[f64], by: usize| -> Vec<f64> {
        (0..x.len()).map(|i| x[(i + by) % x.len()]).collect()
    };
    for trial in 0..20 {
        let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        let conv = composite(
            CompositeKind::Convolutional,
            ConstituentKernel::laplacian(s),
            d,
            s,
            Overlap::Overlapping,
        );
        let loc = composite(
            CompositeKind::Local,
            ConstituentKernel::laplacian(s),
            d,
            s,
            Overlap::Overlapping,
        );
        let base_conv = conv.eval(&x, &y).unwrap();
        let base_loc = loc.eval(&x, &y).unwrap();
        for by in 1..d {
            let tx = shift(&x, by);
            let ty = shift(&y, by);
            let one_sided = conv.eval(&tx, &y).unwrap();
            let both = conv.eval(&tx, &ty).unwrap();
            if (one_sided - base_conv).abs() > 1e-12 * base_conv.abs()
                || (both - base_conv).abs() > 1e-12 * base_conv.abs()
            {
                return Err(format!(
                    "conv shift {by} trial {trial}: {one_sided} / {both} vs {base_conv}"
                ));
            }
            let loc_both = loc.eval(&tx, &ty).unwrap();
            if (loc_both - base_loc).abs() > 1e-12 * base_loc.abs() {
                return Err(format!("local simultaneous shift {by} broke invariance"));
            }
        }
        let tx = shift(&x, 1);
        if (loc.eval(&tx, &y).unwrap() - base_loc).abs() <= 1e-9 * base_loc.abs() {
            return Err("local kernel unexpectedly invariant one-sided".into());
        }
    }
    Ok("conv invariant both ways, local only simultaneously (20 trials)".into())
}

/// Ridgeless training MSE stays below 1e-10 * Var(y) for teacher = student.
pub fn check_ridgeless_interpolation() -> Check {
    let k = composite(
        CompositeKind::Convolutional,
        ConstituentKernel::laplacian(2),
        4,
        2,
        Overlap::Overlapping,
    );
    let ds = sample_points(Domain::Hypercube01, 128, 4, 7);
    let grf = sample_grf(&k, &ds, 8).map_err(|e| e.to_string())?;
    let p = regression::fit(&k, ds.points.view(), grf.values.view(), 0.0)
        .map_err(|e| e.to_string())?;
    let preds = p.predict(ds.points.view()).map_err(|e| e.to_string())?;
    let mse = regression::mean_squared_error(preds.view(), grf.values.view());
    let mean = grf.values.sum() / 128.0;
    let var = grf.values.mapv(|v| (v - mean) * (v - mean)).sum() / 128.0;
    if mse <= 1e-10 * var {
        Ok(format!("train MSE {mse:.3e} <= 1e-10 Var(y) = {:.3e}", 1e-10 * var))
    } else {
        Err(format!("train MSE {mse:.3e} above 1e-10 Var(y) = {:.3e}", 1e-10 * var))
    }
}

/// Monte-Carlo covariance of the Gaussian field matches the teacher Gram to
/// 5% with 1e4 draws, and a shifted-argument covariance matches the variance
/// (shift invariance in distribution for convolutional teachers).
pub fn check_grf_covariance() -> Check {
    let k = composite(
        CompositeKind::Convolutional,
        ConstituentKernel::laplacian(2),
        4,
        2,
        Overlap::Overlapping,
    );
    let n_draws = 10_000usize;
    // Five fixed points plus the cyclic shift of the first.
    let base = sample_points(Domain::Hypercube01, 5, 4, 77);
    let mut pts = Array2::zeros((6, 4));
    for i in 0..5 {
        pts.row_mut(i).assign(&base.points.row(i));
    }
    let first: Vec<f64> = base.points.row(0).to_vec();
    for j in 0..4 {
        pts[[5, j]] = first[(j + 1) % 4];
    }
    let ds = patchkern::sampling::Dataset {
        points: pts,
        domain: Domain::Hypercube01,
        seed: 0,
    };
    let gram = k.gram(ds.points.view()).map_err(|e| e.to_string())?;
    let mut cov = Array2::<f64>::zeros((6, 6));
    for seed in 0..n_draws {
        let grf = sample_grf(&k, &ds, 31_000 + seed as u64).map_err(|e| e.to_string())?;
        for i in 0..6 {
            for j in 0..6 {
                cov[[i, j]] += grf.values[i] * grf.values[j];
            }
        }
    }
    cov /= n_draws as f64;
    let mut worst = 0.0f64;
    for i in 0..6 {
        for j in 0..6 {
            let rel = (cov[[i, j]] - gram[[i, j]]).abs() / gram[[i, j]].abs();
            worst = worst.max(rel);
            if rel > 0.05 {
                return Err(format!(
                    "covariance ({i},{j}): {:.4e} vs gram {:.4e} ({:.1}% off)",
                    cov[[i, j]],
                    gram[[i, j]],
                    rel * 100.0
                ));
            }
        }
    }
    // E[f(x) f(Tx)] equals E[f(x)^2] for the conv teacher: K(x, Tx) = K(x, x).
    let kx_tx = gram[[0, 5]];
    let kxx = gram[[0, 0]];
    if (kx_tx - kxx).abs() > 1e-12 * kxx {
        return Err("conv teacher covariance not shift-invariant".into());
    }
    Ok(format!("worst covariance deviation {:.2}% over 36 entries", worst * 100.0))
}

/// Replica kappa on a pure power-law spectrum decays with the spectrum
/// exponent: kappa_0(P)/P ~ P^-a.
pub fn check_kappa_power_law() -> Check {
    let a = 1.5;
    let spec =
        SpectrumModel::from_eigenvalues((1..=1_000_000u64).map(|r| ((r as f64).powf(-a), 1)));
    let pts: Vec<(f64, f64)> = [100usize, 316, 1000, 3162, 10000]
        .iter()
        .map(|&p| {
            (
                p as f64,
                replica_kappa(&spec, p, 0.0).expect("kappa converges"),
            )
        })
        .collect();
    let slope = ols_slope(&pts);
    if (slope + a).abs() < 0.05 {
        Ok(format!("kappa slope {slope:.4} vs -{a}"))
    } else {
        Err(format!("kappa slope {slope:.4}, expected -{a} +- 0.05"))
    }
}

/// The H = 1e6 random-feature NTK matches the analytic ReLU NTK within 1%
/// relative on 100 random unit-vector pairs.
pub fn check_rf_ntk_convergence() -> Check {
    let s = 3;
    let rf = ConstituentKernel::random_feature_ntk(s, 1_000_000, 2024);
    let exact = ConstituentKernel::relu_ntk(s);
    let mut rng = rng_from_seed(55);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mut u = vec![0.0; s];
        let mut v = vec![0.0; s];
        for t in 0..s {
            u[t] = rng.sample::<f64, _>(rand_distr::StandardNormal);
            v[t] = rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        u.iter_mut().for_each(|x| *x /= nu);
        v.iter_mut().for_each(|x| *x /= nv);
        let approx = rf.eval(&u, &v).unwrap();
        let truth = exact.eval(&u, &v).unwrap();
        let rel = (approx - truth).abs() / truth.abs();
        worst = worst.max(rel);
        if rel > 0.01 {
            return Err(format!(
                "random features off by {:.3}% (> 1%) at one pair",
                rel * 100.0
            ));
        }
    }
    Ok(format!("worst relative deviation {:.3}% over 100 pairs", worst * 100.0))
}

/// Exhaustive (s - u + 1)/d audit for s <= 3 plus discrete orthonormality at
/// 1e-10 (delegated small versions of the spectral oracles).
pub fn check_degeneracy_audit() -> Check {
    for s in 1..=3usize {
        let d = 5;
        let desc = SpectralDescriptor::power_law(
            CompositeKind::Convolutional,
            s,
            d,
            Overlap::Overlapping,
            1.0,
            1.0,
        )
        .unwrap();
        let spectrum = enumerate_spectrum(&desc, 2.0 * PI * 3.0).map_err(|e| e.to_string())?;
        for entry in spectrum.entries() {
            let comps = entry.wavevector.components();
            let nonzero: Vec<usize> = comps
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0)
                .map(|(i, _)| i)
                .collect();
            let u = if nonzero.is_empty() {
                0
            } else {
                nonzero[nonzero.len() - 1] + 1
            };
            let n2: i64 = comps.iter().map(|&c| (c as i64) * (c as i64)).sum();
            let lambda = (1.0 + 4.0 * PI * PI * n2 as f64).powf(-0.5 * (s as f64 + 1.0));
            let expect = if u == 0 {
                lambda
            } else {
                (s - u + 1) as f64 / d as f64 * lambda
            };
            if (entry.big_lambda - expect).abs() > 1e-15 * expect {
                return Err(format!(
                    "s={s} mode {comps:?}: Lambda {} vs expected {}",
                    entry.big_lambda, expect
                ));
            }
        }
    }
    Ok("every F^u eigenvalue carries (s-u+1)/d for s in 1..=3".into())
}

/// Discrete inner products of distinct eigenfunctions vanish to 1e-10.
pub fn check_orthonormality() -> Check {
    use num_complex::Complex64;
    use patchkern::spectral::conv_eigenfunction;
    let d = 3;
    let s = 2;
    let scheme = PatchScheme::new(d, s, Overlap::Overlapping).unwrap();
    let n = 8usize;
    let total = n.pow(d as u32);
    let grid: Vec<Vec<f64>> = (0..total)
        .map(|idx| {
            let mut x = vec![0.0; d];
            let mut rem = idx;
            for slot in x.iter_mut() {
                *slot = (rem % n) as f64 / n as f64;
                rem /= n;
            }
            x
        })
        .collect();
    let desc = SpectralDescriptor::power_law(
        CompositeKind::Convolutional,
        s,
        d,
        Overlap::Overlapping,
        1.0,
        1.0,
    )
    .unwrap();
    let spectrum = enumerate_spectrum(&desc, 2.0 * PI * 2.0).map_err(|e| e.to_string())?;
    let vals: Vec<Vec<Complex64>> = spectrum
        .entries()
        .iter()
        .map(|e| {
            grid.iter()
                .map(|x| conv_eigenfunction(&scheme, e.wavevector.components(), x))
                .collect()
        })
        .collect();
    let mut worst = 0.0f64;
    for a in 0..vals.len() {
        for b in a..vals.len() {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..grid.len() {
                acc += vals[a][i] * vals[b][i].conj();
            }
            let inner = acc / total as f64;
            let expect = if a == b { 1.0 } else { 0.0 };
            let dev = (inner.re - expect).abs().max(inner.im.abs());
            worst = worst.max(dev);
            if dev > 1e-10 {
                return Err(format!(
                    "modes {a} vs {b}: inner product deviates by {dev:.2e}"
                ));
            }
        }
    }
    Ok(format!("worst orthonormality deviation {worst:.2e}"))
}

/// Synthetic targets for exponent-fit checks.
pub fn power_law_curve(beta: f64, prefactor: f64, ps: &[usize]) -> Vec<(f64, f64)> {
    ps.iter()
        .map(|&p| (p as f64, prefactor * (p as f64).powf(-beta)))
        .collect()
}
