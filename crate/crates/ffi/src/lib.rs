//! C ABI for `doc3`.
//!
//! Matrices are dense, row-major `double` buffers. Every fallible function
//! returns a status code (`DOC3_OK` on success) and stores a message that
//! `doc3_last_error` returns until the next failing call on the same thread.
//! Models are opaque handles released with `doc3_model_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use doc3::complexity::{
    default_gamma_grid, erc_bound_ind, erc_bound_univ, sigma_inf, ClassBudget, FeatureBatch,
};
use doc3::datasets::{Dataset, UniversumSet};
use doc3::duality::{map_to_nu, solve_oneclass_dual};
use doc3::evaluation::auc_roc;
use doc3::models::{decide, FeatureMapSpec, Model, Score};
use doc3::training::{
    train, train_binary_baseline, Hyperparams, OptimizerKind, OptimizerSpec, TrainLoss,
};
use doc3::Error;
use ndarray::ArrayView2;

pub const DOC3_OK: i32 = 0;
/// A required pointer argument was null.
pub const DOC3_ERR_NULL: i32 = 1;
/// Invalid argument, shape or configuration.
pub const DOC3_ERR_INVALID: i32 = 2;
/// Numerical failure: divergence, non-convergence, infeasibility, undefined statistic.
pub const DOC3_ERR_NUMERIC: i32 = 3;
/// File access or model format problem.
pub const DOC3_ERR_IO: i32 = 4;
/// Internal panic caught at the boundary.
pub const DOC3_ERR_PANIC: i32 = 5;

pub const DOC3_OBJECTIVE_DOC: i32 = 0;
pub const DOC3_OBJECTIVE_DOC3: i32 = 1;
pub const DOC3_OBJECTIVE_BINARY: i32 = 2;

pub const DOC3_LOSS_HINGE: i32 = 0;
pub const DOC3_LOSS_SOFTPLUS: i32 = 1;

pub const DOC3_OPTIMIZER_SGD: i32 = 0;
pub const DOC3_OPTIMIZER_ADAM: i32 = 1;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

/// Message of the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn doc3_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Opaque trained model.
pub struct Doc3Model {
    inner: Model,
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidSpec(_)
            | Error::InvalidRange { .. }
            | Error::InvalidParameter(_)
            | Error::DimensionMismatch { .. }
            | Error::NonFinite(_)
            | Error::Config(_) => DOC3_ERR_INVALID,
            Error::Io { .. } | Error::Parse { .. } | Error::ModelFormat { .. } | Error::Report(_) => {
                DOC3_ERR_IO
            }
            _ => DOC3_ERR_NUMERIC,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DOC3_OK,
        Ok(Err(f)) => {
            set_last_error(&f.message);
            f.code
        }
        Err(_) => {
            set_last_error("internal panic");
            DOC3_ERR_PANIC
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(fail(DOC3_ERR_NULL, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must point to `rows * cols` readable doubles.
unsafe fn matrix<'a>(p: *const f64, rows: usize, cols: usize, name: &str) -> Result<ArrayView2<'a, f64>, Failure> {
    non_null(p, name)?;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| fail(DOC3_ERR_INVALID, format!("{name}: size overflow")))?;
    let data = std::slice::from_raw_parts(p, len);
    ArrayView2::from_shape((rows, cols), data).map_err(|e| fail(DOC3_ERR_INVALID, format!("{name}: {e}")))
}

/// # Safety
/// `p` must point to `len` readable doubles.
unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn c_path(p: *const c_char) -> Result<String, Failure> {
    non_null(p, "path")?;
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| fail(DOC3_ERR_INVALID, "path is not valid UTF-8"))
}

/// # Safety
/// `model` must be null or a live handle.
unsafe fn model_ref<'a>(model: *const Doc3Model) -> Result<&'a Model, Failure> {
    non_null(model, "model")?;
    Ok(&(*model).inner)
}

fn into_handle(model: Model, out: *mut *mut Doc3Model) {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(Doc3Model { inner: model })) };
}

/// Loads a model from its text format.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn doc3_model_load(path: *const c_char, out: *mut *mut Doc3Model) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        let model = Model::load(c_path(path)?)?;
        into_handle(model, out);
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn doc3_model_save(model: *const Doc3Model, path: *const c_char) -> i32 {
    guard(|| {
        model_ref(model)?.save(c_path(path)?)?;
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `model` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn doc3_model_free(model: *mut Doc3Model) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input dimension of the model, 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn doc3_model_input_dim(model: *const Doc3Model) -> usize {
    model.as_ref().map_or(0, |m| m.inner.input_dim())
}

/// Decision threshold: 1 for one-class models, 0 for the binary baseline.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn doc3_model_threshold(model: *const Doc3Model, out: *mut f64) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        *out = model_ref(model)?.threshold();
        Ok(())
    })
}

/// Scores `f(x)` of `rows` inputs of width `cols` into `out[rows]`.
///
/// # Safety
/// `x` must hold `rows * cols` doubles and `out` room for `rows`.
#[no_mangle]
pub unsafe extern "C" fn doc3_model_scores(
    model: *const Doc3Model,
    x: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        let s = model_ref(model)?.scores(&matrix(x, rows, cols, "x")?)?;
        std::slice::from_raw_parts_mut(out, rows).copy_from_slice(s.as_slice().expect("contiguous"));
        Ok(())
    })
}

/// Labels (+1 normal, -1 anomaly) of `rows` inputs into `out[rows]`.
///
/// # Safety
/// `x` must hold `rows * cols` doubles and `out` room for `rows`.
#[no_mangle]
pub unsafe extern "C" fn doc3_model_decide(
    model: *const Doc3Model,
    x: *const f64,
    rows: usize,
    cols: usize,
    out: *mut i8,
) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        let m = model_ref(model)?;
        let s = m.scores(&matrix(x, rows, cols, "x")?)?;
        let labels = std::slice::from_raw_parts_mut(out, rows);
        for (l, v) in labels.iter_mut().zip(s.iter()) {
            *l = decide(Score(*v), m.threshold());
        }
        Ok(())
    })
}

/// Training settings. Obtain defaults from `doc3_train_params_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct Doc3TrainParams {
    pub c: f64,
    pub c_u: f64,
    pub delta: f64,
    pub cost_ratio: f64,
    /// `DOC3_LOSS_*`.
    pub loss: i32,
    /// `DOC3_OPTIMIZER_*`.
    pub optimizer: i32,
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_train: usize,
    pub batch_univ: usize,
    pub seed: u64,
    /// Hidden layer widths; empty (null / 0) means the identity map.
    pub hidden_widths: *const usize,
    pub n_hidden: usize,
    pub model_seed: u64,
}

#[no_mangle]
pub extern "C" fn doc3_train_params_default() -> Doc3TrainParams {
    let hp = Hyperparams::default();
    Doc3TrainParams {
        c: hp.c,
        c_u: hp.c_u,
        delta: hp.delta,
        cost_ratio: hp.cost_ratio,
        loss: DOC3_LOSS_HINGE,
        optimizer: DOC3_OPTIMIZER_ADAM,
        learning_rate: 0.01,
        iterations: hp.iterations,
        batch_train: hp.batch_train,
        batch_univ: hp.batch_univ,
        seed: hp.seed,
        hidden_widths: ptr::null(),
        n_hidden: 0,
        model_seed: 0,
    }
}

unsafe fn hyperparams(p: &Doc3TrainParams) -> Result<(Hyperparams, FeatureMapSpec), Failure> {
    let train_loss = match p.loss {
        DOC3_LOSS_HINGE => TrainLoss::Hinge,
        DOC3_LOSS_SOFTPLUS => TrainLoss::Softplus,
        other => return Err(fail(DOC3_ERR_INVALID, format!("unknown loss {other}"))),
    };
    let kind = match p.optimizer {
        DOC3_OPTIMIZER_SGD => OptimizerKind::Sgd,
        DOC3_OPTIMIZER_ADAM => OptimizerKind::Adam,
        other => return Err(fail(DOC3_ERR_INVALID, format!("unknown optimizer {other}"))),
    };
    let optimizer = match kind {
        OptimizerKind::Sgd => OptimizerSpec::sgd(p.learning_rate),
        OptimizerKind::Adam => OptimizerSpec::adam(p.learning_rate),
    };
    let spec = if p.n_hidden == 0 {
        FeatureMapSpec::identity()
    } else {
        non_null(p.hidden_widths, "hidden_widths")?;
        let widths = std::slice::from_raw_parts(p.hidden_widths, p.n_hidden).to_vec();
        FeatureMapSpec::mlp(widths, p.model_seed)
    };
    let hp = Hyperparams {
        c: p.c,
        c_u: p.c_u,
        delta: p.delta,
        cost_ratio: p.cost_ratio,
        train_loss,
        optimizer,
        iterations: p.iterations,
        batch_train: p.batch_train,
        batch_univ: p.batch_univ,
        seed: p.seed,
    };
    Ok((hp, spec))
}

/// Trains a model. `objective` is one of `DOC3_OBJECTIVE_*`; `u` (the
/// universum, or the negative class for the binary baseline) may be null
/// for DOC.
///
/// # Safety
/// `x` must hold `n * d` doubles, `u` null or `m * d` doubles, `params` a
/// valid struct and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn doc3_train(
    objective: i32,
    x: *const f64,
    n: usize,
    u: *const f64,
    m: usize,
    d: usize,
    params: *const Doc3TrainParams,
    out: *mut *mut Doc3Model,
) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        non_null(params, "params")?;
        let (hp, spec) = hyperparams(&*params)?;
        let data = Dataset::new(matrix(x, n, d, "x")?.to_owned())?;
        let univ = if u.is_null() {
            None
        } else {
            Some(UniversumSet::new(matrix(u, m, d, "u")?.to_owned())?)
        };
        let trace = match (objective, &univ) {
            (DOC3_OBJECTIVE_DOC, _) => train(&data, None, &Hyperparams { c_u: 0.0, ..hp }, spec)?,
            (DOC3_OBJECTIVE_DOC3, Some(u)) => {
                if !(hp.c_u > 0.0) {
                    return Err(fail(DOC3_ERR_INVALID, "DOC3 needs c_u > 0"));
                }
                train(&data, Some(u), &hp, spec)?
            }
            (DOC3_OBJECTIVE_BINARY, Some(u)) => train_binary_baseline(&data, u, &hp, spec)?,
            (DOC3_OBJECTIVE_DOC3 | DOC3_OBJECTIVE_BINARY, None) => {
                return Err(fail(DOC3_ERR_NULL, "u is null"))
            }
            (other, _) => return Err(fail(DOC3_ERR_INVALID, format!("unknown objective {other}"))),
        };
        into_handle(trace.model, out);
        Ok(())
    })
}

/// Area under the ROC curve of normal scores `pos` against anomaly scores `neg`.
///
/// # Safety
/// `pos` and `neg` must hold `n_pos` and `n_neg` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn doc3_auc(
    pos: *const f64,
    n_pos: usize,
    neg: *const f64,
    n_neg: usize,
    out: *mut f64,
) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        *out = auc_roc(slice(pos, n_pos, "pos")?, slice(neg, n_neg, "neg")?)?;
        Ok(())
    })
}

unsafe fn batch(z: *const f64, n: usize, u: *const f64, m: usize, p: usize) -> Result<FeatureBatch, Failure> {
    Ok(FeatureBatch::new(
        matrix(z, n, p, "z")?.to_owned(),
        matrix(u, m, p, "u")?.to_owned(),
    )?)
}

/// Train/universum correlation `Σ(∞)` of feature matrices `z` (n×p) and `u` (m×p).
///
/// # Safety
/// `z`, `u` must hold `n * p` and `m * p` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn doc3_sigma_inf(
    z: *const f64,
    n: usize,
    u: *const f64,
    m: usize,
    p: usize,
    out: *mut f64,
) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        *out = sigma_inf(&batch(z, n, u, m, p)?)?;
        Ok(())
    })
}

/// Rademacher-complexity bound of the norm ball `‖w‖ ≤ lambda_cap` on `z`.
///
/// # Safety
/// `z` must hold `n * p` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn doc3_erc_bound_ind(
    z: *const f64,
    n: usize,
    p: usize,
    lambda_cap: f64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        *out = erc_bound_ind(&matrix(z, n, p, "z")?, &ClassBudget::new(lambda_cap, 0.0)?)?;
        Ok(())
    })
}

/// Bound for the universum-restricted class, minimized over the default γ
/// grid. The minimizing γ goes to `out_gamma` when it is non-null.
///
/// # Safety
/// `z`, `u` must hold `n * p` and `m * p` doubles, `out_bound` writable,
/// `out_gamma` null or writable.
#[no_mangle]
pub unsafe extern "C" fn doc3_erc_bound_univ(
    z: *const f64,
    n: usize,
    u: *const f64,
    m: usize,
    p: usize,
    lambda_cap: f64,
    delta: f64,
    out_bound: *mut f64,
    out_gamma: *mut f64,
) -> i32 {
    guard(|| {
        non_null(out_bound, "out_bound")?;
        let budget = ClassBudget::new(lambda_cap, delta)?;
        let (bound, gamma) = erc_bound_univ(&batch(z, n, u, m, p)?, &budget, &default_gamma_grid())?;
        *out_bound = bound;
        if !out_gamma.is_null() {
            *out_gamma = gamma;
        }
        Ok(())
    })
}

/// Solves the linear one-class hinge dual at `c` on `x` (n×d) and maps it to
/// the equivalent ν-SVM: writes `ν`, `ρ` and `ŵ[d]`.
///
/// # Safety
/// `x` must hold `n * d` doubles; `out_nu`, `out_rho` writable and
/// `out_w_hat` room for `d` doubles.
#[no_mangle]
pub unsafe extern "C" fn doc3_dual_to_nu(
    x: *const f64,
    n: usize,
    d: usize,
    c: f64,
    out_nu: *mut f64,
    out_rho: *mut f64,
    out_w_hat: *mut f64,
) -> i32 {
    guard(|| {
        non_null(out_nu, "out_nu")?;
        non_null(out_rho, "out_rho")?;
        non_null(out_w_hat, "out_w_hat")?;
        let data = Dataset::new(matrix(x, n, d, "x")?.to_owned())?;
        let sol = solve_oneclass_dual(&data, c)?;
        let map = map_to_nu(&sol, c, n)?;
        *out_nu = map.nu;
        *out_rho = map.rho;
        std::slice::from_raw_parts_mut(out_w_hat, d).copy_from_slice(map.w_hat.as_slice().expect("contiguous"));
        Ok(())
    })
}
