//! C ABI over the patchkern library: opaque handles, status codes, and a
//! thread-local last-error message. All matrices cross the boundary as
//! row-major `double` buffers owned by the caller.

use std::cell::RefCell;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use ndarray::{ArrayView1, ArrayView2};
use patchkern::kernels::{
    CompositeKernel, CompositeKind, ConstituentKernel, Overlap, PatchScheme,
};
use patchkern::regression;
use patchkern::sampling::{self, Domain};
use patchkern::spectral::{
    self, PredictedOutcome, PredictionInput, RidgePolicy, SpectralDescriptor, SpectrumModel,
    TargetCoefficients,
};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PkStatus {
    Ok = 0,
    /// Numerical or state failure at run time.
    RuntimeError = 1,
    /// Invalid argument or configuration.
    InvalidArgument = 2,
    /// A required pointer was null.
    NullPointer = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: PkStatus, msg: impl Into<String>) -> PkStatus {
    set_error(msg);
    status
}

fn from_error(e: patchkern::Error) -> PkStatus {
    let status = if e.exit_code() == 2 {
        PkStatus::InvalidArgument
    } else {
        PkStatus::RuntimeError
    };
    fail(status, e.to_string())
}

/// Copy the last error message (NUL-terminated, truncated to `len`).
/// Returns the number of bytes written, excluding the terminator.
#[no_mangle]
pub extern "C" fn patchkern_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        let n = bytes.len().min(len - 1);
        unsafe {
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        n
    })
}

/// Opaque composite kernel handle.
pub struct PkKernel {
    inner: CompositeKernel,
}

/// Opaque spectrum handle: enumerated eigenvalues, optionally with target
/// coefficient variances attached.
pub struct PkSpectrum {
    model: SpectrumModel,
    coeffs: Option<TargetCoefficients>,
}

fn parse_kind(kind: i32) -> Result<CompositeKind, PkStatus> {
    match kind {
        0 => Ok(CompositeKind::Convolutional),
        1 => Ok(CompositeKind::Local),
        _ => Err(fail(
            PkStatus::InvalidArgument,
            format!("kind must be 0 (conv) or 1 (local), got {kind}"),
        )),
    }
}

fn parse_overlap(overlap: bool) -> Overlap {
    if overlap {
        Overlap::Overlapping
    } else {
        Overlap::NonOverlapping
    }
}

/// Build a composite kernel.
///
/// `constituent`: 0 = Laplacian, 1 = analytic ReLU NTK, 2 = random-feature
/// NTK (uses `h`, `seed`), 3 = power-law spectral (uses `alpha`, `mass`;
/// spectral kernels reject real-space evaluation).
#[no_mangle]
pub extern "C" fn patchkern_kernel_new(
    kind: i32,
    constituent: i32,
    d: usize,
    s: usize,
    overlap: bool,
    alpha: f64,
    mass: f64,
    h: usize,
    seed: u64,
    out: *mut *mut PkKernel,
) -> PkStatus {
    if out.is_null() {
        return fail(PkStatus::NullPointer, "out pointer is null");
    }
    let kind = match parse_kind(kind) {
        Ok(k) => k,
        Err(s) => return s,
    };
    let scheme = match PatchScheme::new(d, s, parse_overlap(overlap)) {
        Ok(sch) => sch,
        Err(e) => return from_error(e),
    };
    let cons = match constituent {
        0 => ConstituentKernel::laplacian(s),
        1 => ConstituentKernel::relu_ntk(s),
        2 => {
            if h == 0 {
                return fail(PkStatus::InvalidArgument, "random-feature width h must be >= 1");
            }
            ConstituentKernel::random_feature_ntk(s, h, seed)
        }
        3 => ConstituentKernel::power_law_spectral(s, alpha, mass),
        other => {
            return fail(
                PkStatus::InvalidArgument,
                format!("constituent must be 0..=3, got {other}"),
            )
        }
    };
    match CompositeKernel::new(kind, cons, scheme) {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(PkKernel { inner })) };
            PkStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Free a kernel handle (null is a no-op).
#[no_mangle]
pub extern "C" fn patchkern_kernel_free(kernel: *mut PkKernel) {
    if !kernel.is_null() {
        drop(unsafe { Box::from_raw(kernel) });
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

/// Evaluate `K(x, y)` on two `d`-vectors.
#[no_mangle]
pub extern "C" fn patchkern_kernel_eval(
    kernel: *const PkKernel,
    x: *const f64,
    y: *const f64,
    d: usize,
    out: *mut f64,
) -> PkStatus {
    let Some(kernel) = (unsafe { kernel.as_ref() }) else {
        return fail(PkStatus::NullPointer, "kernel handle is null");
    };
    if out.is_null() {
        return fail(PkStatus::NullPointer, "out pointer is null");
    }
    let (Some(x), Some(y)) = (unsafe { slice(x, d) }, unsafe { slice(y, d) }) else {
        return fail(PkStatus::NullPointer, "input vector is null");
    };
    match kernel.inner.eval(x, y) {
        Ok(v) => {
            unsafe { *out = v };
            PkStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Fill `out` (p x p, row-major) with the Gram matrix of `points` (p x d).
#[no_mangle]
pub extern "C" fn patchkern_gram(
    kernel: *const PkKernel,
    points: *const f64,
    p: usize,
    d: usize,
    out: *mut f64,
) -> PkStatus {
    let Some(kernel) = (unsafe { kernel.as_ref() }) else {
        return fail(PkStatus::NullPointer, "kernel handle is null");
    };
    let Some(points) = (unsafe { slice(points, p * d) }) else {
        return fail(PkStatus::NullPointer, "points pointer is null");
    };
    if out.is_null() {
        return fail(PkStatus::NullPointer, "out pointer is null");
    }
    let view = match ArrayView2::from_shape((p, d), points) {
        Ok(v) => v,
        Err(e) => return fail(PkStatus::InvalidArgument, e.to_string()),
    };
    match kernel.inner.gram(view) {
        Ok(g) => {
            let flat = g.as_standard_layout();
            let src = flat.as_slice().expect("standard layout");
            unsafe { std::ptr::copy_nonoverlapping(src.as_ptr(), out, p * p) };
            PkStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Draw points on a domain (0 = cube, 1 = sphere, 2 = torus) into `out`
/// (p x d row-major).
#[no_mangle]
pub extern "C" fn patchkern_sample_points(
    domain: i32,
    p: usize,
    d: usize,
    seed: u64,
    out: *mut f64,
) -> PkStatus {
    let domain = match domain {
        0 => Domain::Hypercube01,
        1 => Domain::SphereUnit,
        2 => Domain::Torus01,
        other => {
            return fail(
                PkStatus::InvalidArgument,
                format!("domain must be 0..=2, got {other}"),
            )
        }
    };
    if out.is_null() {
        return fail(PkStatus::NullPointer, "out pointer is null");
    }
    let ds = sampling::sample_points(domain, p, d, seed);
    let flat = ds.points.as_standard_layout();
    let src = flat.as_slice().expect("standard layout");
    unsafe { std::ptr::copy_nonoverlapping(src.as_ptr(), out, p * d) };
    PkStatus::Ok
}

/// Sample the kernel's Gaussian field on `points` (n x d) into `values`.
#[no_mangle]
pub extern "C" fn patchkern_sample_field(
    kernel: *const PkKernel,
    points: *const f64,
    n: usize,
    d: usize,
    seed: u64,
    values: *mut f64,
    jitter_used: *mut f64,
) -> PkStatus {
    let Some(kernel) = (unsafe { kernel.as_ref() }) else {
        return fail(PkStatus::NullPointer, "kernel handle is null");
    };
    let Some(points) = (unsafe { slice(points, n * d) }) else {
        return fail(PkStatus::NullPointer, "points pointer is null");
    };
    if values.is_null() {
        return fail(PkStatus::NullPointer, "values pointer is null");
    }
    let view = match ArrayView2::from_shape((n, d), points) {
        Ok(v) => v,
        Err(e) => return fail(PkStatus::InvalidArgument, e.to_string()),
    };
    let ds = sampling::Dataset {
        points: view.to_owned(),
        domain: Domain::Hypercube01,
        seed,
    };
    match sampling::sample_grf(&kernel.inner, &ds, seed) {
        Ok(grf) => {
            unsafe {
                std::ptr::copy_nonoverlapping(grf.values.as_ptr(), values, n);
                if !jitter_used.is_null() {
                    *jitter_used = grf.jitter;
                }
            }
            PkStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Fit kernel ridge regression (`lambda = 0` for ridgeless) and predict on
/// `x_test` (q x d) into `y_out`.
#[no_mangle]
pub extern "C" fn patchkern_fit_predict(
    kernel: *const PkKernel,
    x_train: *const f64,
    p: usize,
    y_train: *const f64,
    x_test: *const f64,
    q: usize,
    d: usize,
    lambda: f64,
    y_out: *mut f64,
) -> PkStatus {
    let Some(kernel) = (unsafe { kernel.as_ref() }) else {
        return fail(PkStatus::NullPointer, "kernel handle is null");
    };
    let (Some(xtr), Some(ytr), Some(xte)) = (
        unsafe { slice(x_train, p * d) },
        unsafe { slice(y_train, p) },
        unsafe { slice(x_test, q * d) },
    ) else {
        return fail(PkStatus::NullPointer, "input buffer is null");
    };
    if y_out.is_null() {
        return fail(PkStatus::NullPointer, "y_out pointer is null");
    }
    let result = catch_unwind(AssertUnwindSafe(|| {
        let xtr = ArrayView2::from_shape((p, d), xtr).map_err(|e| e.to_string())?;
        let xte = ArrayView2::from_shape((q, d), xte).map_err(|e| e.to_string())?;
        let ytr = ArrayView1::from_shape(p, ytr).map_err(|e| e.to_string())?;
        let predictor =
            regression::fit(&kernel.inner, xtr, ytr, lambda).map_err(|e| e.to_string())?;
        predictor.predict(xte).map_err(|e| e.to_string())
    }));
    match result {
        Ok(Ok(preds)) => {
            unsafe { std::ptr::copy_nonoverlapping(preds.as_ptr(), y_out, q) };
            PkStatus::Ok
        }
        Ok(Err(msg)) => fail(PkStatus::RuntimeError, msg),
        Err(_) => fail(PkStatus::RuntimeError, "panic during fit/predict"),
    }
}

fn spectral_descriptor(
    kind: i32,
    s: usize,
    d: usize,
    overlap: bool,
    alpha: f64,
    mass: f64,
    amplitude: f64,
) -> Result<SpectralDescriptor, PkStatus> {
    let kind = parse_kind(kind)?;
    let mut desc = SpectralDescriptor::power_law(kind, s, d, parse_overlap(overlap), alpha, mass)
        .map_err(|e| from_error(e))?;
    if amplitude > 0.0 {
        desc.amplitude = amplitude;
    }
    Ok(desc)
}

/// Enumerate a composite power-law spectrum up to `k_max` (0 picks a cutoff
/// with at least 100000 modes).
#[no_mangle]
pub extern "C" fn patchkern_spectrum_new(
    kind: i32,
    s: usize,
    d: usize,
    overlap: bool,
    alpha: f64,
    mass: f64,
    amplitude: f64,
    k_max: f64,
    out: *mut *mut PkSpectrum,
) -> PkStatus {
    if out.is_null() {
        return fail(PkStatus::NullPointer, "out pointer is null");
    }
    let desc = match spectral_descriptor(kind, s, d, overlap, alpha, mass, amplitude) {
        Ok(desc) => desc,
        Err(status) => return status,
    };
    let k_max = if k_max > 0.0 {
        k_max
    } else {
        spectral::k_max_for_modes(&desc, 100_000)
    };
    match spectral::enumerate_spectrum(&desc, k_max) {
        Ok(model) => {
            unsafe {
                *out = Box::into_raw(Box::new(PkSpectrum {
                    model,
                    coeffs: None,
                }))
            };
            PkStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

#[no_mangle]
pub extern "C" fn patchkern_spectrum_free(spectrum: *mut PkSpectrum) {
    if !spectrum.is_null() {
        drop(unsafe { Box::from_raw(spectrum) });
    }
}

/// Number of enumerated entries (eigenvalue families).
#[no_mangle]
pub extern "C" fn patchkern_spectrum_len(spectrum: *const PkSpectrum) -> usize {
    unsafe { spectrum.as_ref() }
        .map(|s| s.model.entries().len())
        .unwrap_or(0)
}

/// Number of eigenfunctions counting degeneracy.
#[no_mangle]
pub extern "C" fn patchkern_spectrum_modes(spectrum: *const PkSpectrum) -> u64 {
    unsafe { spectrum.as_ref() }
        .map(|s| s.model.total_modes())
        .unwrap_or(0)
}

/// Read entry `index` (descending eigenvalue order): wavevector modulus,
/// constituent and composite eigenvalues, degeneracy, window class u, and
/// the target variance (0 unless coefficients are attached).
#[no_mangle]
pub extern "C" fn patchkern_spectrum_entry(
    spectrum: *const PkSpectrum,
    index: usize,
    k: *mut f64,
    lambda: *mut f64,
    big_lambda: *mut f64,
    degeneracy: *mut u64,
    class_u: *mut i32,
    target_var: *mut f64,
) -> PkStatus {
    let Some(sp) = (unsafe { spectrum.as_ref() }) else {
        return fail(PkStatus::NullPointer, "spectrum handle is null");
    };
    let Some(entry) = sp.model.entries().get(index) else {
        return fail(
            PkStatus::InvalidArgument,
            format!("index {index} past {} entries", sp.model.entries().len()),
        );
    };
    unsafe {
        if !k.is_null() {
            *k = entry.wavevector.modulus();
        }
        if !lambda.is_null() {
            *lambda = entry.lambda;
        }
        if !big_lambda.is_null() {
            *big_lambda = entry.big_lambda;
        }
        if !degeneracy.is_null() {
            *degeneracy = entry.degeneracy;
        }
        if !class_u.is_null() {
            *class_u = entry.wavevector.class_u() as i32;
        }
        if !target_var.is_null() {
            *target_var = sp
                .coeffs
                .as_ref()
                .map(|c| c.variances[index])
                .unwrap_or(0.0);
        }
    }
    PkStatus::Ok
}

/// Attach teacher coefficient variances to the spectrum (teacher shares the
/// student's d and overlap policy). Returns PK_RUNTIME_ERROR for
/// incompatible schemes.
#[no_mangle]
pub extern "C" fn patchkern_attach_teacher(
    spectrum: *mut PkSpectrum,
    teacher_kind: i32,
    t: usize,
    alpha_t: f64,
    mass_t: f64,
    amplitude_t: f64,
    representable_out: *mut bool,
) -> PkStatus {
    let Some(sp) = (unsafe { spectrum.as_mut() }) else {
        return fail(PkStatus::NullPointer, "spectrum handle is null");
    };
    let Some(student) = sp.model.descriptor().copied() else {
        return fail(PkStatus::RuntimeError, "spectrum has no kernel descriptor");
    };
    let teacher = match spectral_descriptor(
        teacher_kind,
        t,
        student.d,
        student.overlap == Overlap::Overlapping,
        alpha_t,
        mass_t,
        amplitude_t,
    ) {
        Ok(desc) => desc,
        Err(status) => return status,
    };
    match spectral::target_coefficients(&teacher, &sp.model) {
        Ok(coeffs) => {
            unsafe {
                if !representable_out.is_null() {
                    *representable_out = coeffs.teacher_representable;
                }
            }
            sp.coeffs = Some(coeffs);
            PkStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

fn with_coeffs<'a>(sp: &'a PkSpectrum) -> Result<&'a TargetCoefficients, PkStatus> {
    sp.coeffs.as_ref().ok_or_else(|| {
        fail(
            PkStatus::RuntimeError,
            "no teacher attached; call patchkern_attach_teacher first",
        )
    })
}

/// Tail sum B(P): target power past the first `p` eigenmodes.
#[no_mangle]
pub extern "C" fn patchkern_tail_power(
    spectrum: *const PkSpectrum,
    p: usize,
    out: *mut f64,
) -> PkStatus {
    let Some(sp) = (unsafe { spectrum.as_ref() }) else {
        return fail(PkStatus::NullPointer, "spectrum handle is null");
    };
    if out.is_null() {
        return fail(PkStatus::NullPointer, "out pointer is null");
    }
    let coeffs = match with_coeffs(sp) {
        Ok(c) => c,
        Err(status) => return status,
    };
    match spectral::tail_power(coeffs, &sp.model, p) {
        Ok(v) => {
            unsafe { *out = v };
            PkStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Replica estimate of the generalization error at (p, lambda).
#[no_mangle]
pub extern "C" fn patchkern_replica_error(
    spectrum: *const PkSpectrum,
    p: usize,
    lambda: f64,
    out: *mut f64,
) -> PkStatus {
    let Some(sp) = (unsafe { spectrum.as_ref() }) else {
        return fail(PkStatus::NullPointer, "spectrum handle is null");
    };
    if out.is_null() {
        return fail(PkStatus::NullPointer, "out pointer is null");
    }
    let coeffs = match with_coeffs(sp) {
        Ok(c) => c,
        Err(status) => return status,
    };
    match spectral::replica_error(&sp.model, coeffs, p, lambda) {
        Ok(v) => {
            unsafe { *out = v };
            PkStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Decaying-ridge estimate: target power on modes with `Lambda < lambda`.
#[no_mangle]
pub extern "C" fn patchkern_ridge_threshold_sum(
    spectrum: *const PkSpectrum,
    lambda: f64,
    out: *mut f64,
) -> PkStatus {
    let Some(sp) = (unsafe { spectrum.as_ref() }) else {
        return fail(PkStatus::NullPointer, "spectrum handle is null");
    };
    if out.is_null() {
        return fail(PkStatus::NullPointer, "out pointer is null");
    }
    let coeffs = match with_coeffs(sp) {
        Ok(c) => c,
        Err(status) => return status,
    };
    unsafe { *out = spectral::ridge_threshold_sum(coeffs, &sp.model, lambda) };
    PkStatus::Ok
}

/// Modulus of the P-th largest eigenvalue's wavevector.
#[no_mangle]
pub extern "C" fn patchkern_cutoff_modulus(
    spectrum: *const PkSpectrum,
    p: usize,
    out: *mut f64,
) -> PkStatus {
    let Some(sp) = (unsafe { spectrum.as_ref() }) else {
        return fail(PkStatus::NullPointer, "spectrum handle is null");
    };
    if out.is_null() {
        return fail(PkStatus::NullPointer, "out pointer is null");
    }
    match spectral::cutoff_modulus(&sp.model, p) {
        Ok(v) => {
            unsafe { *out = v };
            PkStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Closed-form learning-curve exponent. `ridge_mode`: 0 ridgeless, 1 fixed,
/// 2 decaying. On success `*beta_out` holds the exponent and `*plateau_out`
/// is false; a plateau sets `*plateau_out` and leaves `*beta_out` at 0.
#[no_mangle]
pub extern "C" fn patchkern_predicted_beta(
    alpha_t: f64,
    t: usize,
    alpha_s: f64,
    s: usize,
    student_kind: i32,
    overlap: bool,
    ridge_mode: i32,
    lambda0: f64,
    gamma: f64,
    beta_out: *mut f64,
    plateau_out: *mut bool,
) -> PkStatus {
    if beta_out.is_null() || plateau_out.is_null() {
        return fail(PkStatus::NullPointer, "output pointer is null");
    }
    let student_kind = match parse_kind(student_kind) {
        Ok(k) => k,
        Err(status) => return status,
    };
    let ridge = match ridge_mode {
        0 => RidgePolicy::Ridgeless,
        1 => RidgePolicy::Fixed { lambda0 },
        2 => RidgePolicy::Decaying { lambda0, gamma },
        other => {
            return fail(
                PkStatus::InvalidArgument,
                format!("ridge_mode must be 0..=2, got {other}"),
            )
        }
    };
    let prediction = spectral::predicted_beta(PredictionInput {
        alpha_t,
        t,
        alpha_s,
        s,
        student_kind,
        overlap: parse_overlap(overlap),
        ridge,
    });
    unsafe {
        match prediction.outcome {
            PredictedOutcome::Exponent { beta } => {
                *beta_out = beta;
                *plateau_out = false;
            }
            PredictedOutcome::Plateau { .. } => {
                *beta_out = 0.0;
                *plateau_out = true;
            }
        }
    }
    PkStatus::Ok
}

/// OLS power-law fit of (ps, errs) over the inclusive window
/// [p_low, p_high]: `error ~ P^-beta`.
#[no_mangle]
pub extern "C" fn patchkern_fit_exponent(
    ps: *const f64,
    errs: *const f64,
    n: usize,
    p_low: f64,
    p_high: f64,
    beta_out: *mut f64,
    stderr_out: *mut f64,
) -> PkStatus {
    let (Some(ps), Some(errs)) = (unsafe { slice(ps, n) }, unsafe { slice(errs, n) }) else {
        return fail(PkStatus::NullPointer, "input buffer is null");
    };
    if beta_out.is_null() {
        return fail(PkStatus::NullPointer, "beta_out pointer is null");
    }
    let points: Vec<(f64, f64)> = ps.iter().copied().zip(errs.iter().copied()).collect();
    match patchkern::harness::fit_exponent(&points, (p_low as usize, p_high as usize)) {
        Ok((beta, stderr)) => {
            unsafe {
                *beta_out = beta;
                if !stderr_out.is_null() {
                    *stderr_out = stderr;
                }
            }
            PkStatus::Ok
        }
        Err(e) => from_error(e),
    }
}
