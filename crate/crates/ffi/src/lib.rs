//! C ABI over the frozen-ansatz library.
//!
//! Instances and models cross the boundary as opaque handles that the caller
//! frees with the matching `*_free` function. Every fallible call returns an
//! [`FaStatus`]; on failure the message is available from
//! [`fa_last_error_message`] on the same thread. Tours are arrays of 1-based
//! city labels.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use frozen_ansatz::ansatz::qubits_for;
use frozen_ansatz::energy::{CostTable, Evaluator, ObjectiveMode};
use frozen_ansatz::perm::{decode, encode, PermIndex, MAX_CITIES};
use frozen_ansatz::pipeline::{reuse, train_on, FrozenModel};
use frozen_ansatz::tsp::{classical_sa_baseline, generate_instance, solve_exact, tour_cost, TspInstance};
use frozen_ansatz::{Error, SaConfig};

/// Opaque TSP instance.
pub struct FaInstance(TspInstance);

/// Opaque frozen model.
pub struct FaModel(FrozenModel);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Malformed = 4,
    VersionMismatch = 5,
    InvariantViolation = 6,
    Computation = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaObjective {
    Sampled = 0,
    Exact = 1,
}

/// Mirror of the library's annealing configuration.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaSaConfig {
    pub t0: f64,
    pub cooling: f64,
    pub t_min: f64,
    pub max_iter: usize,
    pub fitness_runs: usize,
    pub restarts: usize,
    pub n_samples: usize,
    pub n_keep: usize,
    pub shots: u32,
    pub powell_ftol: f64,
    pub powell_max_iter: usize,
    pub line_tol: f64,
    pub objective: FaObjective,
    pub seed: u64,
}

impl From<SaConfig> for FaSaConfig {
    fn from(c: SaConfig) -> Self {
        Self {
            t0: c.t0,
            cooling: c.cooling,
            t_min: c.t_min,
            max_iter: c.max_iter,
            fitness_runs: c.fitness_runs,
            restarts: c.restarts,
            n_samples: c.n_samples,
            n_keep: c.n_keep,
            shots: c.shots,
            powell_ftol: c.powell_ftol,
            powell_max_iter: c.powell_max_iter,
            line_tol: c.line_tol,
            objective: match c.objective {
                ObjectiveMode::Sampled => FaObjective::Sampled,
                ObjectiveMode::Exact => FaObjective::Exact,
            },
            seed: c.seed,
        }
    }
}

impl From<FaSaConfig> for SaConfig {
    fn from(c: FaSaConfig) -> Self {
        Self {
            t0: c.t0,
            cooling: c.cooling,
            t_min: c.t_min,
            max_iter: c.max_iter,
            fitness_runs: c.fitness_runs,
            restarts: c.restarts,
            n_samples: c.n_samples,
            n_keep: c.n_keep,
            shots: c.shots,
            powell_ftol: c.powell_ftol,
            powell_max_iter: c.powell_max_iter,
            line_tol: c.line_tol,
            objective: match c.objective {
                FaObjective::Sampled => ObjectiveMode::Sampled,
                FaObjective::Exact => ObjectiveMode::Exact,
            },
            seed: c.seed,
        }
    }
}

/// One reuse evaluation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FaRunRecord {
    pub n: usize,
    pub instance: u32,
    pub p_opt: f64,
    pub mean_cost: f64,
    pub best_sampled_cost: u64,
    pub exact_cost: u64,
    pub wall_time: f64,
}

/// Shot-based evaluation of a model without re-optimization.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FaEnergy {
    pub mean_cost: f64,
    pub cost_std: f64,
    pub p_opt: f64,
    pub best_cost: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> FaStatus {
    match err {
        Error::Io { .. } => FaStatus::Io,
        Error::Malformed { .. } => FaStatus::Malformed,
        Error::VersionMismatch { .. } => FaStatus::VersionMismatch,
        Error::InvariantViolation(_) => FaStatus::InvariantViolation,
        Error::NonFiniteObjective { .. } => FaStatus::Computation,
        _ => FaStatus::InvalidArgument,
    }
}

enum Failure {
    Status(FaStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn fail(status: FaStatus, msg: impl Into<String>) -> Failure {
    Failure::Status(status, msg.into())
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FaStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic inside frozen-ansatz".into());
            FaStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(FaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(FaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(fail(FaStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(FaStatus::InvalidArgument, "path is not valid UTF-8"))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(FaStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write_tour(order: &[usize], out: *mut usize, len: usize) -> Result<(), Failure> {
    if len < order.len() {
        return Err(fail(
            FaStatus::BufferTooSmall,
            format!("tour needs {} slots, buffer has {len}", order.len()),
        ));
    }
    if out.is_null() {
        return Err(fail(FaStatus::NullPointer, "tour buffer is null"));
    }
    ptr::copy_nonoverlapping(order.as_ptr(), out, order.len());
    Ok(())
}

/// Copy the calling thread's last error message into `buf` (nul-terminated,
/// truncated to `len`). Returns the full message length excluding the nul, or
/// 0 if the last call succeeded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn fa_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn fa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Qubits needed for `n` cities, or 0 when `n` is unsupported.
#[no_mangle]
pub extern "C" fn fa_qubits_for(n: usize) -> usize {
    if (1..=MAX_CITIES).contains(&n) {
        qubits_for(n)
    } else {
        0
    }
}

/// Fill `out` with the reference configuration.
///
/// # Safety
/// `out` must be null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fa_sa_config_default(out: *mut FaSaConfig) -> FaStatus {
    guard(|| {
        *out_ref(out, "out")? = SaConfig::default().into();
        Ok(())
    })
}

/// # Safety
/// `out` must be null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fa_instance_generate(
    n: usize,
    seed: u64,
    index: u32,
    out: *mut *mut FaInstance,
) -> FaStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        let inst = generate_instance(n, seed, index)?;
        *slot = Box::into_raw(Box::new(FaInstance(inst)));
        Ok(())
    })
}

/// Build an instance from a row-major `n × n` matrix.
///
/// # Safety
/// `dist` must point to `n * n` readable values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fa_instance_from_matrix(
    n: usize,
    dist: *const u32,
    seed: u64,
    index: u32,
    out: *mut *mut FaInstance,
) -> FaStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        let cells = n
            .checked_mul(n)
            .ok_or_else(|| fail(FaStatus::InvalidArgument, "matrix too large"))?;
        let flat = slice_arg(dist, cells, "dist")?;
        let rows = flat.chunks(n.max(1)).map(<[u32]>::to_vec).collect();
        let inst = TspInstance::from_rows(rows, seed, index)?;
        *slot = Box::into_raw(Box::new(FaInstance(inst)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a nul-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fa_instance_load(path: *const c_char, out: *mut *mut FaInstance) -> FaStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        let inst = TspInstance::load(path_arg(path)?)?;
        *slot = Box::into_raw(Box::new(FaInstance(inst)));
        Ok(())
    })
}

/// # Safety
/// `inst` must be a live handle; `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fa_instance_save(inst: *const FaInstance, path: *const c_char) -> FaStatus {
    guard(|| {
        deref(inst, "inst")?.0.save(path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `inst` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fa_instance_free(inst: *mut FaInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// City count, or 0 for a null handle.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fa_instance_size(inst: *const FaInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.0.n())
}

/// Distance between 0-based cities `i` and `j`.
///
/// # Safety
/// `inst` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fa_instance_distance(
    inst: *const FaInstance,
    i: usize,
    j: usize,
    out: *mut u32,
) -> FaStatus {
    guard(|| {
        let inst = &deref(inst, "inst")?.0;
        if i >= inst.n() || j >= inst.n() {
            return Err(fail(FaStatus::InvalidArgument, format!("city index out of range for n = {}", inst.n())));
        }
        *out_ref(out, "out")? = inst.dist(i, j);
        Ok(())
    })
}

/// # Safety
/// `order` must point to `len` readable labels; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fa_tour_cost(
    inst: *const FaInstance,
    order: *const usize,
    len: usize,
    out: *mut u64,
) -> FaStatus {
    guard(|| {
        let inst = &deref(inst, "inst")?.0;
        *out_ref(out, "out")? = tour_cost(inst, slice_arg(order, len, "order")?)?;
        Ok(())
    })
}

/// Exhaustive optimum (n <= 10). Writes `n` labels into `order_out`.
///
/// # Safety
/// `order_out` must have room for `len` values; `cost_out` valid.
#[no_mangle]
pub unsafe extern "C" fn fa_solve_exact(
    inst: *const FaInstance,
    order_out: *mut usize,
    len: usize,
    cost_out: *mut u64,
) -> FaStatus {
    guard(|| {
        let inst = &deref(inst, "inst")?.0;
        let cost = out_ref(cost_out, "cost_out")?;
        let tour = solve_exact(inst)?;
        write_tour(&tour.order, order_out, len)?;
        *cost = tour.cost;
        Ok(())
    })
}

/// Classical annealing baseline with the reference schedule.
///
/// # Safety
/// As [`fa_solve_exact`].
#[no_mangle]
pub unsafe extern "C" fn fa_classical_baseline(
    inst: *const FaInstance,
    seed: u64,
    order_out: *mut usize,
    len: usize,
    cost_out: *mut u64,
) -> FaStatus {
    guard(|| {
        let inst = &deref(inst, "inst")?.0;
        let cost = out_ref(cost_out, "cost_out")?;
        let tour = classical_sa_baseline(inst, seed);
        write_tour(&tour.order, order_out, len)?;
        *cost = tour.cost;
        Ok(())
    })
}

/// Unrank `value` into a tour of `n` cities.
///
/// # Safety
/// `order_out` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn fa_perm_decode(value: u64, n: usize, order_out: *mut usize, len: usize) -> FaStatus {
    guard(|| {
        let order = decode(PermIndex::new(value, n)?);
        write_tour(&order, order_out, len)
    })
}

/// # Safety
/// `order` must point to `len` readable labels; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fa_perm_encode(order: *const usize, len: usize, out: *mut u64) -> FaStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        *slot = encode(slice_arg(order, len, "order")?)?.value();
        Ok(())
    })
}

/// Anneal a topology on `inst` and return the frozen model. `cfg` may be null
/// for the reference configuration.
///
/// # Safety
/// `inst` must be a live handle, `cfg` null or valid, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fa_train(
    inst: *const FaInstance,
    cfg: *const FaSaConfig,
    out: *mut *mut FaModel,
) -> FaStatus {
    guard(|| {
        let inst = &deref(inst, "inst")?.0;
        let slot = out_ref(out, "out")?;
        let cfg: SaConfig = cfg.as_ref().map_or_else(SaConfig::default, |c| (*c).into());
        let trained = train_on(inst, &cfg, |_| {})?;
        *slot = Box::into_raw(Box::new(FaModel(trained.model)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a nul-terminated string; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fa_model_load(path: *const c_char, out: *mut *mut FaModel) -> FaStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        let model = FrozenModel::load(path_arg(path)?)?;
        *slot = Box::into_raw(Box::new(FaModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fa_model_save(model: *const FaModel, path: *const c_char) -> FaStatus {
    guard(|| {
        deref(model, "model")?.0.save(path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fa_model_free(model: *mut FaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// City count the model was trained for, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fa_model_cities(model: *const FaModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n())
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fa_model_qubits(model: *const FaModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.spec().qubits)
}

/// Training fitness, or NaN for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fa_model_fitness(model: *const FaModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.0.training().fitness)
}

/// Copy the model's `3 * qubits` angles into `out`.
///
/// # Safety
/// `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fa_model_params(model: *const FaModel, out: *mut f64, len: usize) -> FaStatus {
    guard(|| {
        let params = deref(model, "model")?.0.params().as_slice();
        if len < params.len() {
            return Err(fail(
                FaStatus::BufferTooSmall,
                format!("{} angles, buffer has {len}", params.len()),
            ));
        }
        if out.is_null() {
            return Err(fail(FaStatus::NullPointer, "out is null"));
        }
        ptr::copy_nonoverlapping(params.as_ptr(), out, params.len());
        Ok(())
    })
}

/// Write the block names as a nul-terminated, comma-separated string
/// (e.g. `rz,full,rz,linear,rz`). `needed` receives the byte length
/// including the nul.
///
/// # Safety
/// `buf` must have room for `len` bytes; `needed` null or valid.
#[no_mangle]
pub unsafe extern "C" fn fa_model_blocks(
    model: *const FaModel,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> FaStatus {
    guard(|| {
        let names: Vec<&str> = deref(model, "model")?.0.spec().blocks().iter().map(|b| b.name()).collect();
        let text = names.join(",");
        if let Some(n) = needed.as_mut() {
            *n = text.len() + 1;
        }
        if len < text.len() + 1 {
            return Err(fail(FaStatus::BufferTooSmall, format!("need {} bytes", text.len() + 1)));
        }
        if buf.is_null() {
            return Err(fail(FaStatus::NullPointer, "buf is null"));
        }
        ptr::copy_nonoverlapping(text.as_ptr().cast(), buf, text.len());
        *buf.add(text.len()) = 0;
        Ok(())
    })
}

/// Sample the model's circuit on `inst` with its stored angles.
///
/// # Safety
/// Handles must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fa_model_evaluate(
    model: *const FaModel,
    inst: *const FaInstance,
    shots: u32,
    seed: u64,
    out: *mut FaEnergy,
) -> FaStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let inst = &deref(inst, "inst")?.0;
        let slot = out_ref(out, "out")?;
        if inst.n() != model.n() {
            return Err(Error::CityMismatch {
                model: model.n(),
                instance: inst.n(),
            }
            .into());
        }
        let table = CostTable::solved(inst)?;
        let est = Evaluator::new(*model.spec(), &table)?.estimate(model.params().as_slice(), shots, seed)?;
        *slot = FaEnergy {
            mean_cost: est.mean_cost,
            cost_std: est.cost_std,
            p_opt: est.p_opt,
            best_cost: est.best_tour.cost,
        };
        Ok(())
    })
}

/// Re-optimize the model's angles on `inst` (topology untouched) and report
/// the optimal-tour frequency. `cfg` may be null to reuse the training config.
///
/// # Safety
/// Handles must be live, `cfg` null or valid, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fa_reuse(
    model: *const FaModel,
    inst: *const FaInstance,
    cfg: *const FaSaConfig,
    out: *mut FaRunRecord,
) -> FaStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let inst = &deref(inst, "inst")?.0;
        let slot = out_ref(out, "out")?;
        let cfg: SaConfig = cfg.as_ref().map_or(model.training().config, |c| (*c).into());
        let rec = reuse(model, std::slice::from_ref(inst), &cfg)?.remove(0);
        *slot = FaRunRecord {
            n: rec.n,
            instance: rec.instance,
            p_opt: rec.p_opt,
            mean_cost: rec.mean_cost,
            best_sampled_cost: rec.best_sampled_cost,
            exact_cost: rec.exact_cost,
            wall_time: rec.wall_time,
        };
        Ok(())
    })
}
