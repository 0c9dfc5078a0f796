//! C ABI for policy-tree.
//!
//! Objects cross the boundary as opaque handles (`PtRewards`, `PtTree`) that
//! the caller releases with the matching `*_free` function. Every fallible
//! call returns a `PtStatus`; on failure `pt_last_error` returns a message
//! for the calling thread. Matrices are dense, row-major `double` arrays.
//! Panics never unwind into the caller; they surface as `PT_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use policy_tree::estimation::{estimate_rewards, EstimationOptions};
use policy_tree::learner::Method;
use policy_tree::model::{document, Dataset, Hyperparameters, Matrix, PolicyTree, RewardMatrix, TreatmentSpace, Treatments};
use policy_tree::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtStatus {
    Ok = 0,
    NullPointer = 1,
    Input = 2,
    Parse = 3,
    Config = 4,
    Fit = 5,
    Estimation = 6,
    TooLarge = 7,
    Io = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtMethod {
    Greedy = 0,
    Optimal = 1,
    Exhaustive = 2,
}

/// Mirror of the library's tree-size controls.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PtHyperparameters {
    pub max_depth: usize,
    pub alpha: f64,
    pub min_leaf: usize,
    pub restarts: usize,
    pub seed: u64,
}

/// Opaque n × T reward table.
pub struct PtRewards(RewardMatrix);

/// Opaque fitted policy tree.
pub struct PtTree(PolicyTree);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PtStatus {
    match e {
        Error::Input(_) => PtStatus::Input,
        Error::Parse(_) => PtStatus::Parse,
        Error::Config(_) => PtStatus::Config,
        Error::Fit(_) => PtStatus::Fit,
        Error::Estimation(_) => PtStatus::Estimation,
        Error::TooLarge(_) => PtStatus::TooLarge,
        Error::Io(_) => PtStatus::Io,
        Error::Internal(_) => PtStatus::Internal,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, recording any error or panic for `pt_last_error`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PtStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PtStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            PtStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            PtStatus::Internal
        }
    }
}

fn nonnull<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: callers of the public functions promise that non-null pointers
    // are valid for the duration of the call.
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

/// Copies an `rows × cols` row-major array.
unsafe fn matrix(data: *const f64, rows: usize, cols: usize, what: &'static str) -> Result<Matrix, Failure> {
    if data.is_null() {
        return Err(Failure::Null(what));
    }
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Failure::Lib(Error::Input(format!("{what}: {rows} × {cols} overflows"))))?;
    let slice = std::slice::from_raw_parts(data, len);
    Ok(Matrix::new(rows, cols, slice.to_vec())?)
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

/// Message for the last failed call on this thread, or NULL after a
/// success. The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn pt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Library defaults: depth 3, no complexity charge, one row per leaf,
/// 100 restarts, seed 0.
#[no_mangle]
pub extern "C" fn pt_hyperparameters_default() -> PtHyperparameters {
    let d = Hyperparameters::default();
    PtHyperparameters {
        max_depth: d.max_depth,
        alpha: d.alpha,
        min_leaf: d.min_leaf,
        restarts: d.restarts,
        seed: d.seed,
    }
}

/// Wraps an `n × t` row-major reward table (lower is better).
///
/// # Safety
/// `values` must point to `n * t` readable doubles and `out` to writable
/// storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn pt_rewards_new(values: *const f64, n: usize, t: usize, out: *mut *mut PtRewards) -> PtStatus {
    guard(|| {
        let m = matrix(values, n, t, "values")?;
        let r = RewardMatrix::unlabeled(m)?;
        write_out(out, Box::into_raw(Box::new(PtRewards(r))), "out")
    })
}

/// Doubly-robust rewards for discrete treatments with default forest and
/// cross-fitting settings. `treatments[i]` is the zero-based arm of row `i`.
///
/// # Safety
/// `x` must point to `n * p` doubles, `treatments` and `outcomes` to `n`
/// values each, and `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn pt_rewards_doubly_robust(
    x: *const f64,
    n: usize,
    p: usize,
    treatments: *const u32,
    n_treatments: usize,
    outcomes: *const f64,
    seed: u64,
    out: *mut *mut PtRewards,
) -> PtStatus {
    guard(|| {
        let features = matrix(x, n, p, "x")?;
        if treatments.is_null() {
            return Err(Failure::Null("treatments"));
        }
        if outcomes.is_null() {
            return Err(Failure::Null("outcomes"));
        }
        let labels: Vec<usize> = std::slice::from_raw_parts(treatments, n).iter().map(|&z| z as usize).collect();
        let y = std::slice::from_raw_parts(outcomes, n).to_vec();
        let ds = Dataset::unnamed(features, y, Treatments::Discrete { labels, n_treatments })?;
        let space = TreatmentSpace::discrete((0..n_treatments).map(|t| t.to_string()))?;
        let mut opts = EstimationOptions::default();
        opts.forest.seed = seed;
        opts.propensity_forest.seed = seed.wrapping_add(1);
        opts.propensity.seed = seed;
        let (r, _) = estimate_rewards(&ds, &space, &opts)?;
        write_out(out, Box::into_raw(Box::new(PtRewards(r))), "out")
    })
}

/// # Safety
/// `rewards` must point to a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pt_rewards_shape(rewards: *const PtRewards, n: *mut usize, t: *mut usize) -> PtStatus {
    guard(|| {
        let r = &nonnull(rewards, "rewards")?.0;
        write_out(n, r.n_rows(), "n")?;
        write_out(t, r.n_candidates(), "t")
    })
}

/// Copies the table, row-major, into `out` (room for `n * t` doubles).
///
/// # Safety
/// `rewards` must point to a live handle and `out` to `n * t` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pt_rewards_values(rewards: *const PtRewards, out: *mut f64) -> PtStatus {
    guard(|| {
        let r = &nonnull(rewards, "rewards")?.0;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let src = r.values().as_slice();
        ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
        Ok(())
    })
}

/// # Safety
/// `rewards` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pt_rewards_free(rewards: *mut PtRewards) {
    if !rewards.is_null() {
        drop(Box::from_raw(rewards));
    }
}

/// Fits a tree to `rewards` over the `n × p` features `x`.
///
/// # Safety
/// `rewards` must be a live handle, `x` must point to `n * p` doubles, `hp`
/// to one `PtHyperparameters` and `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn pt_fit(
    rewards: *const PtRewards,
    x: *const f64,
    n: usize,
    p: usize,
    method: PtMethod,
    hp: *const PtHyperparameters,
    out: *mut *mut PtTree,
) -> PtStatus {
    guard(|| {
        let r = &nonnull(rewards, "rewards")?.0;
        let features = matrix(x, n, p, "x")?;
        let h = nonnull(hp, "hp")?;
        let hp = Hyperparameters {
            max_depth: h.max_depth,
            alpha: h.alpha,
            min_leaf: h.min_leaf,
            restarts: h.restarts,
            seed: h.seed,
        };
        let m = match method {
            PtMethod::Greedy => Method::Greedy,
            PtMethod::Optimal => Method::Optimal,
            PtMethod::Exhaustive => Method::Exhaustive,
        };
        let tree = m.fit(r, &features, &hp)?;
        write_out(out, Box::into_raw(Box::new(PtTree(tree))), "out")
    })
}

/// Zero-based treatment index for each of the `n` rows of `x`.
///
/// # Safety
/// `tree` must be a live handle, `x` must point to `n * p` doubles and `out`
/// to `n` writable `size_t` values.
#[no_mangle]
pub unsafe extern "C" fn pt_tree_prescribe(
    tree: *const PtTree,
    x: *const f64,
    n: usize,
    p: usize,
    out: *mut usize,
) -> PtStatus {
    guard(|| {
        let t = &nonnull(tree, "tree")?.0;
        let features = matrix(x, n, p, "x")?;
        let presc = t.prescribe_batch(&features)?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        ptr::copy_nonoverlapping(presc.as_ptr(), out, presc.len());
        Ok(())
    })
}

/// Training objective (mean reward of the prescriptions) and the same plus
/// the complexity charge.
///
/// # Safety
/// `tree` must be a live handle; either output may be NULL to skip it.
#[no_mangle]
pub unsafe extern "C" fn pt_tree_objective(tree: *const PtTree, objective: *mut f64, penalized: *mut f64) -> PtStatus {
    guard(|| {
        let t = &nonnull(tree, "tree")?.0;
        if !objective.is_null() {
            objective.write(t.objective_train());
        }
        if !penalized.is_null() {
            penalized.write(t.penalized_objective_train());
        }
        Ok(())
    })
}

/// Number of branch nodes and depth of the tree.
///
/// # Safety
/// `tree` must be a live handle; either output may be NULL to skip it.
#[no_mangle]
pub unsafe extern "C" fn pt_tree_size(tree: *const PtTree, n_branches: *mut usize, depth: *mut usize) -> PtStatus {
    guard(|| {
        let t = &nonnull(tree, "tree")?.0;
        if !n_branches.is_null() {
            n_branches.write(t.n_branches());
        }
        if !depth.is_null() {
            depth.write(t.depth());
        }
        Ok(())
    })
}

/// Serializes the tree as a JSON document; release it with `pt_string_free`.
///
/// # Safety
/// `tree` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pt_tree_to_json(tree: *const PtTree, out: *mut *mut c_char) -> PtStatus {
    guard(|| {
        let t = &nonnull(tree, "tree")?.0;
        let c = CString::new(document::to_string(t)).map_err(|e| Error::Internal(e.to_string()))?;
        write_out(out, c.into_raw(), "out")
    })
}

/// Parses a JSON tree document.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pt_tree_from_json(json: *const c_char, out: *mut *mut PtTree) -> PtStatus {
    guard(|| {
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Error::Parse(format!("tree document is not UTF-8: {e}")))?;
        let tree = document::from_str(text)?;
        write_out(out, Box::into_raw(Box::new(PtTree(tree))), "out")
    })
}

/// # Safety
/// `tree` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pt_tree_free(tree: *mut PtTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
