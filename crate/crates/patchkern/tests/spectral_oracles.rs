//! Independent oracles for the spectral theory.
//!
//! Target-coefficient variances are recomputed by quadrature of the double
//! torus integral `E[|c|^2] = integral Phi(x) conj(Phi(y)) K_T(x, y) dx dy`
//! on a regular grid, with the teacher kernel evaluated by direct summation
//! of a truncated Fourier series. On a grid of N points per axis the
//! quadrature is exact for the band-limited integrand, so agreement is at
//! rounding level; 1e-6 is asserted.

use num_complex::Complex64;
use patchkern::kernels::{CompositeKind, Overlap, PatchScheme};
use patchkern::spectral::{
    conv_eigenfunction, enumerate_spectrum, local_eigenfunction, target_coefficients,
    SpectralDescriptor,
};
use std::f64::consts::PI;

/// Truncated Fourier series of a power-law constituent on the t-torus.
struct TruncatedConstituent {
    t: usize,
    cutoff: i32,
    alpha: f64,
}

impl TruncatedConstituent {
    fn lambda(&self, n2: i64) -> f64 {
        let k2 = 4.0 * PI * PI * n2 as f64;
        (1.0 + k2).powf(-0.5 * (self.t as f64 + self.alpha))
    }

    /// `C(u) = sum_{|q_i| <= cutoff} lambda_q exp(i 2 pi q . u)` (real).
    fn eval(&self, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        let mut q = vec![-self.cutoff; self.t];
        loop {
            let n2: i64 = q.iter().map(|&c| (c as i64) * (c as i64)).sum();
            let phase: f64 = q
                .iter()
                .zip(u.iter())
                .map(|(&c, &x)| 2.0 * PI * c as f64 * x)
                .sum();
            acc += self.lambda(n2) * phase.cos();
            // Odometer over the box.
            let mut pos = 0;
            loop {
                if pos == self.t {
                    return acc;
                }
                q[pos] += 1;
                if q[pos] <= self.cutoff {
                    break;
                }
                q[pos] = -self.cutoff;
                pos += 1;
            }
        }
    }
}

/// All grid points of the torus [0,1)^d with n per axis.
fn grid_points(d: usize, n: usize) -> Vec<Vec<f64>> {
    let total = n.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut x = vec![0.0; d];
        let mut rem = idx;
        for slot in x.iter_mut() {
            *slot = (rem % n) as f64 / n as f64;
            rem /= n;
        }
        out.push(x);
    }
    out
}

/// Teacher kernel on two points via the patch sum of the truncated series.
fn teacher_eval(
    kind: CompositeKind,
    scheme: &PatchScheme,
    c: &TruncatedConstituent,
    x: &[f64],
    y: &[f64],
) -> f64 {
    let t = scheme.s();
    let starts: Vec<usize> = scheme.starts().collect();
    let np = starts.len() as f64;
    let mut diff = vec![0.0; t];
    let mut patch_x = vec![0.0; t];
    let mut patch_y = vec![0.0; t];
    match kind {
        CompositeKind::Convolutional => {
            let mut acc = 0.0;
            for &a in &starts {
                patchkern::kernels::write_patch(x, a, &mut patch_x);
                for &b in &starts {
                    patchkern::kernels::write_patch(y, b, &mut patch_y);
                    for i in 0..t {
                        diff[i] = patch_x[i] - patch_y[i];
                    }
                    acc += c.eval(&diff);
                }
            }
            acc / (np * np)
        }
        CompositeKind::Local => {
            let mut acc = 0.0;
            for &a in &starts {
                patchkern::kernels::write_patch(x, a, &mut patch_x);
                patchkern::kernels::write_patch(y, a, &mut patch_y);
                for i in 0..t {
                    diff[i] = patch_x[i] - patch_y[i];
                }
                acc += c.eval(&diff);
            }
            acc / np
        }
    }
}

/// Quadrature of `E[|c|^2]` for one eigenfunction.
fn quadrature_variance(
    teacher_kind: CompositeKind,
    teacher_scheme: &PatchScheme,
    c: &TruncatedConstituent,
    grid: &[Vec<f64>],
    phi: impl Fn(&[f64]) -> Complex64,
) -> f64 {
    // Precompute the teacher kernel row structure lazily: the grid is small
    // enough for the full double loop.
    let m = grid.len() as f64;
    let phis: Vec<Complex64> = grid.iter().map(|x| phi(x)).collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, x) in grid.iter().enumerate() {
        let mut inner = Complex64::new(0.0, 0.0);
        for (j, y) in grid.iter().enumerate() {
            let k = teacher_eval(teacher_kind, teacher_scheme, c, x, y);
            inner += phis[j] * k;
        }
        acc += phis[i].conj() * inner;
    }
    let val = acc / (m * m);
    assert!(
        val.im.abs() < 1e-10,
        "variance should be real, got imaginary part {}",
        val.im
    );
    val.re
}

fn assert_close(label: &str, got: f64, expect: f64) {
    let tol = 1e-6 * expect.abs().max(1e-9);
    assert!(
        (got - expect).abs() <= tol,
        "{label}: quadrature {got:.12e} vs assigned {expect:.12e}"
    );
}

#[test]
fn quadrature_confirms_overlap_conv_teacher_coefficients() {
    // d=3, s=2, t=1, overlapping, conv teacher / conv student.
    let d = 3;
    let n_grid = 8;
    let teacher =
        SpectralDescriptor::power_law(CompositeKind::Convolutional, 1, d, Overlap::Overlapping, 1.0, 1.0)
            .unwrap();
    let student =
        SpectralDescriptor::power_law(CompositeKind::Convolutional, 2, d, Overlap::Overlapping, 1.0, 1.0)
            .unwrap();
    let spectrum = enumerate_spectrum(&student, 2.0 * PI * 2.0).unwrap();
    let coeffs = target_coefficients(&teacher, &spectrum).unwrap();

    let c = TruncatedConstituent {
        t: 1,
        cutoff: 3,
        alpha: 1.0,
    };
    let teacher_scheme = PatchScheme::new(d, 1, Overlap::Overlapping).unwrap();
    let student_scheme = PatchScheme::new(d, 2, Overlap::Overlapping).unwrap();
    let grid = grid_points(d, n_grid);

    for (entry, &assigned) in spectrum.entries().iter().zip(coeffs.variances.iter()) {
        let comps = entry.wavevector.components().to_vec();
        let q = quadrature_variance(
            CompositeKind::Convolutional,
            &teacher_scheme,
            &c,
            &grid,
            |x| conv_eigenfunction(&student_scheme, &comps, x),
        );
        assert_close(&format!("conv/conv mode {comps:?}"), q, assigned);
    }
}

#[test]
fn quadrature_confirms_local_student_coefficients() {
    // Conv teacher, local student: each patch copy carries the conv value
    // divided by the number of patches.
    let d = 3;
    let teacher =
        SpectralDescriptor::power_law(CompositeKind::Convolutional, 1, d, Overlap::Overlapping, 1.0, 1.0)
            .unwrap();
    let student =
        SpectralDescriptor::power_law(CompositeKind::Local, 2, d, Overlap::Overlapping, 1.0, 1.0)
            .unwrap();
    let spectrum = enumerate_spectrum(&student, 2.0 * PI).unwrap();
    let coeffs = target_coefficients(&teacher, &spectrum).unwrap();

    let c = TruncatedConstituent {
        t: 1,
        cutoff: 3,
        alpha: 1.0,
    };
    let teacher_scheme = PatchScheme::new(d, 1, Overlap::Overlapping).unwrap();
    let student_scheme = PatchScheme::new(d, 2, Overlap::Overlapping).unwrap();
    let grid = grid_points(d, 8);

    for (entry, &assigned) in spectrum.entries().iter().zip(coeffs.variances.iter()) {
        let comps = entry.wavevector.components().to_vec();
        if entry.wavevector.class_u() == 0 {
            continue;
        }
        assert_eq!(entry.degeneracy, d as u64);
        for slot in 0..d {
            let q = quadrature_variance(
                CompositeKind::Convolutional,
                &teacher_scheme,
                &c,
                &grid,
                |x| local_eigenfunction(&student_scheme, &comps, slot, x),
            );
            assert_close(&format!("conv/local mode {comps:?} patch {slot}"), q, assigned);
        }
    }
}

#[test]
fn quadrature_confirms_local_teacher_coefficients() {
    // Local teacher with local student (same patch copy value as conv/conv),
    // and with conv student (captures only the shift-invariant part).
    let d = 3;
    let c = TruncatedConstituent {
        t: 1,
        cutoff: 3,
        alpha: 1.0,
    };
    let teacher_scheme = PatchScheme::new(d, 1, Overlap::Overlapping).unwrap();
    let student_scheme = PatchScheme::new(d, 2, Overlap::Overlapping).unwrap();
    let grid = grid_points(d, 8);
    let teacher =
        SpectralDescriptor::power_law(CompositeKind::Local, 1, d, Overlap::Overlapping, 1.0, 1.0)
            .unwrap();

    let local_student =
        SpectralDescriptor::power_law(CompositeKind::Local, 2, d, Overlap::Overlapping, 1.0, 1.0)
            .unwrap();
    let spectrum = enumerate_spectrum(&local_student, 2.0 * PI).unwrap();
    let coeffs = target_coefficients(&teacher, &spectrum).unwrap();
    assert!(coeffs.teacher_representable);
    for (entry, &assigned) in spectrum.entries().iter().zip(coeffs.variances.iter()) {
        let comps = entry.wavevector.components().to_vec();
        if entry.wavevector.class_u() == 0 {
            continue;
        }
        let q = quadrature_variance(CompositeKind::Local, &teacher_scheme, &c, &grid, |x| {
            local_eigenfunction(&student_scheme, &comps, 1, x)
        });
        assert_close(&format!("local/local mode {comps:?}"), q, assigned);
    }

    let conv_student =
        SpectralDescriptor::power_law(CompositeKind::Convolutional, 2, d, Overlap::Overlapping, 1.0, 1.0)
            .unwrap();
    let conv_spec = enumerate_spectrum(&conv_student, 2.0 * PI).unwrap();
    let conv_coeffs = target_coefficients(&teacher, &conv_spec).unwrap();
    assert!(!conv_coeffs.teacher_representable);
    for (entry, &assigned) in conv_spec.entries().iter().zip(conv_coeffs.variances.iter()) {
        let comps = entry.wavevector.components().to_vec();
        let q = quadrature_variance(CompositeKind::Local, &teacher_scheme, &c, &grid, |x| {
            conv_eigenfunction(&student_scheme, &comps, x)
        });
        assert_close(&format!("local/conv mode {comps:?}"), q, assigned);
    }
}

#[test]
fn quadrature_confirms_nonoverlap_coefficients() {
    // d=4, s=2, t=1, nonoverlapping: admissible modes carry t^2/(s d) lambda.
    let d = 4;
    let teacher = SpectralDescriptor::power_law(
        CompositeKind::Convolutional,
        1,
        d,
        Overlap::NonOverlapping,
        1.0,
        1.0,
    )
    .unwrap();
    let student = SpectralDescriptor::power_law(
        CompositeKind::Convolutional,
        2,
        d,
        Overlap::NonOverlapping,
        1.0,
        1.0,
    )
    .unwrap();
    let spectrum = enumerate_spectrum(&student, 2.0 * PI * 2.0).unwrap();
    let coeffs = target_coefficients(&teacher, &spectrum).unwrap();

    let c = TruncatedConstituent {
        t: 1,
        cutoff: 2,
        alpha: 1.0,
    };
    let teacher_scheme = PatchScheme::new(d, 1, Overlap::NonOverlapping).unwrap();
    let student_scheme = PatchScheme::new(d, 2, Overlap::NonOverlapping).unwrap();
    let grid = grid_points(d, 6);

    for (entry, &assigned) in spectrum.entries().iter().zip(coeffs.variances.iter()) {
        let comps = entry.wavevector.components().to_vec();
        if comps.iter().any(|c| c.abs() > 2) {
            continue; // outside the band-limited exactness window
        }
        let q = quadrature_variance(
            CompositeKind::Convolutional,
            &teacher_scheme,
            &c,
            &grid,
            |x| conv_eigenfunction(&student_scheme, &comps, x),
        );
        assert_close(&format!("nonoverlap mode {comps:?}"), q, assigned);
    }
}

#[test]
fn mercer_reconstruction_matches_patch_sum_within_tail_bound() {
    // Route A: sum of Lambda_k Phi_k(x) conj(Phi_k(y)) over enumerated
    // entries. Route B: patch sum of the directly-summed constituent series
    // at the same truncation. Equal truncations must agree to rounding; a
    // deeper truncation must agree within the omitted spectral mass.
    let d = 3;
    let s = 2;
    let n_trunc = 6i32;
    let c_same = TruncatedConstituent {
        t: s,
        cutoff: n_trunc,
        alpha: 1.0,
    };
    let c_deep = TruncatedConstituent {
        t: s,
        cutoff: 3 * n_trunc,
        alpha: 1.0,
    };
    // Omitted mass between the two truncations bounds the difference.
    let zero = vec![0.0; s];
    let omitted = c_deep.eval(&zero) - c_same.eval(&zero);
    assert!(omitted > 0.0);

    let scheme = PatchScheme::new(d, s, Overlap::Overlapping).unwrap();
    let mut rng = 987u64;
    let mut next = || {
        rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (rng >> 11) as f64 / (1u64 << 53) as f64
    };
    for kind in [CompositeKind::Convolutional, CompositeKind::Local] {
        let desc = SpectralDescriptor::power_law(kind, s, d, Overlap::Overlapping, 1.0, 1.0)
            .unwrap();
        let spectrum = enumerate_spectrum(&desc, 2.0 * PI * n_trunc as f64).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..d).map(|_| next()).collect();
            let y: Vec<f64> = (0..d).map(|_| next()).collect();
            let mut route_a = Complex64::new(0.0, 0.0);
            for entry in spectrum.entries() {
                let comps = entry.wavevector.components();
                match kind {
                    CompositeKind::Convolutional => {
                        let fx = conv_eigenfunction(&scheme, comps, &x);
                        let fy = conv_eigenfunction(&scheme, comps, &y);
                        route_a += fx * fy.conj() * entry.big_lambda;
                    }
                    CompositeKind::Local => {
                        for slot in 0..entry.degeneracy as usize {
                            let fx = local_eigenfunction(&scheme, comps, slot, &x);
                            let fy = local_eigenfunction(&scheme, comps, slot, &y);
                            route_a += fx * fy.conj() * entry.big_lambda;
                        }
                    }
                }
            }
            assert!(route_a.im.abs() < 1e-10);
            let route_b = teacher_eval(kind, &scheme, &c_same, &x, &y);
            assert!(
                (route_a.re - route_b).abs() < 1e-10,
                "{kind:?}: equal-truncation routes differ: {} vs {}",
                route_a.re,
                route_b
            );
            let reference = teacher_eval(kind, &scheme, &c_deep, &x, &y);
            assert!(
                (route_a.re - reference).abs() <= omitted + 1e-10,
                "{kind:?}: reconstruction misses the deep reference by more than the tail bound"
            );
        }
    }
}

#[test]
fn discrete_eigenfunctions_are_orthonormal() {
    let d = 3;
    let s = 2;
    let scheme = PatchScheme::new(d, s, Overlap::Overlapping).unwrap();
    let grid = grid_points(d, 8);
    let m = grid.len() as f64;

    let desc = SpectralDescriptor::power_law(
        CompositeKind::Convolutional,
        s,
        d,
        Overlap::Overlapping,
        1.0,
        1.0,
    )
    .unwrap();
    let spectrum = enumerate_spectrum(&desc, 2.0 * PI * 2.0).unwrap();
    let modes: Vec<Vec<i16>> = spectrum
        .entries()
        .iter()
        .map(|e| e.wavevector.components().to_vec())
        .collect();

    // Convolutional eigenfunctions.
    let conv_vals: Vec<Vec<Complex64>> = modes
        .iter()
        .map(|comps| grid.iter().map(|x| conv_eigenfunction(&scheme, comps, x)).collect())
        .collect();
    for a in 0..modes.len() {
        for b in a..modes.len() {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..grid.len() {
                acc += conv_vals[a][i] * conv_vals[b][i].conj();
            }
            let inner = acc / m;
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!(
                (inner.re - expect).abs() < 1e-10 && inner.im.abs() < 1e-10,
                "conv modes {:?} vs {:?}: inner product {inner}",
                modes[a],
                modes[b]
            );
        }
    }

    // Local eigenfunctions (mode, patch) pairs.
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (i, comps) in modes.iter().enumerate() {
        let copies = if comps.iter().all(|&c| c == 0) { 1 } else { d };
        for slot in 0..copies {
            pairs.push((i, slot));
        }
    }
    let local_vals: Vec<Vec<Complex64>> = pairs
        .iter()
        .map(|&(i, slot)| {
            grid.iter()
                .map(|x| local_eigenfunction(&scheme, &modes[i], slot, x))
                .collect()
        })
        .collect();
    for a in 0..pairs.len() {
        for b in a..pairs.len() {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..grid.len() {
                acc += local_vals[a][i] * local_vals[b][i].conj();
            }
            let inner = acc / m;
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!(
                (inner.re - expect).abs() < 1e-10 && inner.im.abs() < 1e-10,
                "local modes {:?} vs {:?}: inner product {inner}",
                pairs[a],
                pairs[b]
            );
        }
    }
}

#[test]
fn local_tail_sums_are_rescaled_convolutional_ones() {
    // B_local(P) tracks B_conv(P / |patches|): equal slopes within 0.02 and
    // offset ratio B_local(P)/B_conv(P) -> |patches|^beta.
    use patchkern::spectral::{k_max_for_modes, tail_power};
    let d = 4;
    let s = 2;
    let conv = SpectralDescriptor::power_law(
        CompositeKind::Convolutional,
        s,
        d,
        Overlap::Overlapping,
        1.0,
        1.0,
    )
    .unwrap();
    let local =
        SpectralDescriptor::power_law(CompositeKind::Local, s, d, Overlap::Overlapping, 1.0, 1.0)
            .unwrap();
    let conv_spec = enumerate_spectrum(&conv, k_max_for_modes(&conv, 3_000_000)).unwrap();
    let local_spec = enumerate_spectrum(&local, k_max_for_modes(&local, 3_000_000)).unwrap();
    let conv_coeffs = target_coefficients(&conv, &conv_spec).unwrap();
    let local_coeffs = target_coefficients(&conv, &local_spec).unwrap();

    let ps: Vec<usize> = (0..9)
        .map(|i| (1000.0 * 100f64.powf(i as f64 / 8.0)) as usize)
        .collect();
    let slope = |pts: &[(f64, f64)]| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0.ln()).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0.ln() - mx) * (p.1.ln() - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0.ln() - mx) * (p.0.ln() - mx)).sum();
        sxy / sxx
    };
    let conv_pts: Vec<(f64, f64)> = ps
        .iter()
        .map(|&p| (p as f64, tail_power(&conv_coeffs, &conv_spec, p).unwrap()))
        .collect();
    let local_pts: Vec<(f64, f64)> = ps
        .iter()
        .map(|&p| (p as f64, tail_power(&local_coeffs, &local_spec, p).unwrap()))
        .collect();
    let sc = slope(&conv_pts);
    let sl = slope(&local_pts);
    assert!(
        (sc - sl).abs() <= 0.02,
        "conv slope {sc:.4} vs local slope {sl:.4}"
    );
    let beta = -sc;
    let expect_ratio = (d as f64).powf(beta);
    for (c, l) in conv_pts.iter().zip(local_pts.iter()) {
        let ratio = l.1 / c.1;
        assert!(
            (ratio / expect_ratio - 1.0).abs() < 0.25,
            "offset ratio {ratio:.3} should approach |P|^beta = {expect_ratio:.3} at P={}",
            c.0
        );
    }
}

#[test]
fn degeneracy_audit_s_up_to_three() {
    // Every overlapping-convolutional entry must carry exactly the factor
    // (s - u + 1)/d with u recomputed from the components, and the canonical
    // form must have nonzero first and u-th components with zeros after.
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
        let spectrum = enumerate_spectrum(&desc, 2.0 * PI * 3.0).unwrap();
        let mut seen = std::collections::HashSet::new();
        for entry in spectrum.entries() {
            let comps = entry.wavevector.components();
            assert!(seen.insert(comps.to_vec()), "duplicate entry {comps:?}");
            let nonzero: Vec<usize> = comps
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0)
                .map(|(i, _)| i)
                .collect();
            let u = if nonzero.is_empty() {
                0
            } else {
                assert_eq!(nonzero[0], 0, "canonical form starts nonzero: {comps:?}");
                nonzero[nonzero.len() - 1] + 1
            };
            assert_eq!(u, entry.wavevector.class_u());
            let n2: i64 = comps.iter().map(|&c| (c as i64) * (c as i64)).sum();
            let lambda = (1.0 + 4.0 * PI * PI * n2 as f64).powf(-0.5 * (s as f64 + 1.0));
            let expect = if u == 0 {
                lambda
            } else {
                (s - u + 1) as f64 / d as f64 * lambda
            };
            assert!(
                (entry.big_lambda - expect).abs() <= 1e-15 * expect,
                "s={s} mode {comps:?}: Lambda {} vs (s-u+1)/d * lambda {}",
                entry.big_lambda,
                expect
            );
        }
    }
}
