//! C ABI for the qctee library.
//!
//! Objects cross the boundary as opaque handles. Constructors such as
//! [`qctee_circuit_from_qasm`] or [`qctee_obfuscate`] write a handle through
//! an out pointer; the matching `*_free` releases it.
//! Every fallible call returns a [`QcteeStatus`]; on failure the message is
//! kept per thread and read with [`qctee_last_error_message`]. Strings and
//! byte buffers handed out by the library are released with
//! [`qctee_string_free`] and [`qctee_bytes_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qctee::analysis::{
    attack_complexity_log2, power_overhead_mw, volume_overhead_pct, AnalysisError, ComplexityParams, OverheadParams,
};
use qctee::backend_sim::{NoiseModel, SwitchModel};
use qctee::circuit::{emit_qasm, parse_qasm, BackendDescriptor, QuantumCircuit};
use qctee::obfuscator::{obfuscate, Level, Obfuscated, ObfuscationConfig};
use qctee::pipeline::{run_in_memory, PipelineRun, RunSettings, Seeds};
use qctee::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcteeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    /// QASM parse errors and circuit/backend validation failures.
    Circuit = 4,
    Obfuscation = 5,
    Bitmap = 6,
    Envelope = 7,
    Engine = 8,
    Recover = 9,
    Analysis = 10,
    Io = 11,
    /// The requested value does not exist for this object.
    Unavailable = 12,
    /// A Rust panic was caught at the boundary.
    Panic = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcteeLevel {
    Quarter = 0,
    Half = 1,
    Max = 2,
}

impl From<QcteeLevel> for Level {
    fn from(l: QcteeLevel) -> Self {
        match l {
            QcteeLevel::Quarter => Level::Quarter,
            QcteeLevel::Half => Level::Half,
            QcteeLevel::Max => Level::Max,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QcteeObfuscationOptions {
    pub level: QcteeLevel,
    pub randomize_output: bool,
    pub identity_conversion: bool,
    pub padding_slots: u32,
    pub seed: u64,
}

/// Settings of a full in-memory run. `epsilon` is the switch leakage
/// amplitude ratio (0 for ideal switches); zero noise rates give a noiseless
/// run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QcteeRunOptions {
    pub obfuscation: QcteeObfuscationOptions,
    pub shots: u64,
    /// Expanded into the obfuscator, TRNG, noise and key seeds.
    pub seed: u64,
    pub epsilon: f64,
    pub p1: f64,
    pub p2: f64,
    pub p_idle: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QcteeComplexityParams {
    pub n_qubits: u64,
    pub n_slot_cx: u64,
    pub n_slot_sq: u64,
    pub n_subslots: u64,
    pub n_subcx_in_slotcx: u64,
    pub n_subslots_in_slotcx: u64,
    pub randomize_output: bool,
}

/// A byte buffer owned by the library.
#[repr(C)]
#[derive(Debug)]
pub struct QcteeBytes {
    pub data: *mut u8,
    pub len: usize,
}

pub struct QcteeBackend(BackendDescriptor);
pub struct QcteeCircuit(QuantumCircuit);
pub struct QcteeObfuscated {
    obf: Obfuscated,
    randomize_output: bool,
}
pub struct QcteeRun(PipelineRun);

struct FfiError {
    status: QcteeStatus,
    message: String,
}

impl FfiError {
    fn new(status: QcteeStatus, message: impl Into<String>) -> Self {
        FfiError { status, message: message.into() }
    }
}

impl From<Error> for FfiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Qasm(_) | Error::Circuit(_) | Error::Validation(_) => QcteeStatus::Circuit,
            Error::Obfuscation(_) => QcteeStatus::Obfuscation,
            Error::Bitmap(_) => QcteeStatus::Bitmap,
            Error::Envelope(_) => QcteeStatus::Envelope,
            Error::Engine(_) => QcteeStatus::Engine,
            Error::Recover(_) => QcteeStatus::Recover,
            Error::Analysis(_) => QcteeStatus::Analysis,
            Error::Io { .. } => QcteeStatus::Io,
            Error::Config(_) => QcteeStatus::InvalidArgument,
        };
        FfiError::new(status, e.to_string())
    }
}

impl From<AnalysisError> for FfiError {
    fn from(e: AnalysisError) -> Self {
        FfiError::new(QcteeStatus::Analysis, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, turning errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), FfiError>) -> QcteeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QcteeStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(e.message);
            e.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            QcteeStatus::Panic
        }
    }
}

unsafe fn arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, FfiError> {
    p.as_ref().ok_or_else(|| FfiError::new(QcteeStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, FfiError> {
    p.as_mut().ok_or_else(|| FfiError::new(QcteeStatus::NullPointer, format!("{name} is null")))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, FfiError> {
    if p.is_null() {
        return Err(FfiError::new(QcteeStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|e| FfiError::new(QcteeStatus::InvalidUtf8, format!("{name}: {e}")))
}

fn c_string(s: String) -> Result<*mut c_char, FfiError> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| FfiError::new(QcteeStatus::InvalidArgument, "string contains a NUL byte"))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

fn obfuscation_config(o: &QcteeObfuscationOptions) -> ObfuscationConfig {
    ObfuscationConfig::new(o.level.into())
        .with_seed(o.seed)
        .with_randomize_output(o.randomize_output)
        .with_identity_conversion(o.identity_conversion)
        .with_padding_slots(o.padding_slots as usize)
}

fn engine_error(e: qctee::backend_sim::EngineError) -> FfiError {
    FfiError::new(QcteeStatus::InvalidArgument, e.to_string())
}

/// Message of the last failed call on this thread, or NULL if none. The
/// pointer stays valid until the next failing call or
/// [`qctee_clear_last_error`] on the same thread.
#[no_mangle]
pub extern "C" fn qctee_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn qctee_clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qctee_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default options: quarter level, everything else off, 1024 shots,
/// ideal switches, no noise.
#[no_mangle]
pub extern "C" fn qctee_run_options_default() -> QcteeRunOptions {
    QcteeRunOptions {
        obfuscation: QcteeObfuscationOptions {
            level: QcteeLevel::Quarter,
            randomize_output: false,
            identity_conversion: false,
            padding_slots: 0,
            seed: 0,
        },
        shots: 1024,
        seed: 0,
        epsilon: 0.0,
        p1: 0.0,
        p2: 0.0,
        p_idle: 0.0,
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qctee_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `bytes` must be NULL-data or a buffer returned by this library, not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn qctee_bytes_free(bytes: QcteeBytes) {
    if !bytes.data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(bytes.data, bytes.len)));
    }
}

/// The built-in 7-qubit Perth descriptor.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qctee_backend_perth(out: *mut *mut QcteeBackend) -> QcteeStatus {
    guard(|| {
        *self::out(out, "out")? = boxed(QcteeBackend(BackendDescriptor::ibm_perth()));
        Ok(())
    })
}

/// Parses a backend descriptor from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qctee_backend_from_json(json: *const c_char, out: *mut *mut QcteeBackend) -> QcteeStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let b = BackendDescriptor::from_json(text(json, "json")?).map_err(Error::from)?;
        *out = boxed(QcteeBackend(b));
        Ok(())
    })
}

/// Number of qubits, or 0 for NULL.
///
/// # Safety
/// `backend` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qctee_backend_n_qubits(backend: *const QcteeBackend) -> usize {
    backend.as_ref().map_or(0, |b| b.0.n_qubits())
}

/// # Safety
/// `backend` must be NULL or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn qctee_backend_free(backend: *mut QcteeBackend) {
    if !backend.is_null() {
        drop(Box::from_raw(backend));
    }
}

/// Parses a circuit from QASM text.
///
/// # Safety
/// `qasm` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qctee_circuit_from_qasm(qasm: *const c_char, out: *mut *mut QcteeCircuit) -> QcteeStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let c = parse_qasm(text(qasm, "qasm")?).map_err(Error::from)?;
        *out = boxed(QcteeCircuit(c));
        Ok(())
    })
}

/// Number of qubits, or 0 for NULL.
///
/// # Safety
/// `circuit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qctee_circuit_n_qubits(circuit: *const QcteeCircuit) -> usize {
    circuit.as_ref().map_or(0, |c| c.0.n_qubits())
}

/// Checks the circuit against the backend's qubits, basis and couplings.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn qctee_circuit_validate(
    circuit: *const QcteeCircuit,
    backend: *const QcteeBackend,
) -> QcteeStatus {
    guard(|| {
        let (c, b) = (arg(circuit, "circuit")?, arg(backend, "backend")?);
        b.0.validate(&c.0).map_err(Error::from)?;
        Ok(())
    })
}

/// # Safety
/// `circuit` must be NULL or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn qctee_circuit_free(circuit: *mut QcteeCircuit) {
    if !circuit.is_null() {
        drop(Box::from_raw(circuit));
    }
}

/// Obfuscates `circuit` for `backend`.
///
/// # Safety
/// Handles and `options` must be valid; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qctee_obfuscate(
    circuit: *const QcteeCircuit,
    backend: *const QcteeBackend,
    options: *const QcteeObfuscationOptions,
    out: *mut *mut QcteeObfuscated,
) -> QcteeStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let (c, b, o) = (arg(circuit, "circuit")?, arg(backend, "backend")?, arg(options, "options")?);
        let obf = obfuscate(&c.0, &b.0, &obfuscation_config(o)).map_err(Error::from)?;
        *out = boxed(QcteeObfuscated { obf, randomize_output: o.randomize_output });
        Ok(())
    })
}

/// The obfuscated circuit as QASM text; free with [`qctee_string_free`].
///
/// # Safety
/// `obf` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qctee_obfuscated_qasm(obf: *const QcteeObfuscated, out: *mut *mut c_char) -> QcteeStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        *out = c_string(emit_qasm(&arg(obf, "obf")?.obf.circuit))?;
        Ok(())
    })
}

/// The plaintext input bitmap in its wire encoding; free with
/// [`qctee_bytes_free`]. Seal it before it leaves the client.
///
/// # Safety
/// `obf` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qctee_obfuscated_bitmap(obf: *const QcteeObfuscated, out: *mut QcteeBytes) -> QcteeStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let bytes = arg(obf, "obf")?.obf.bitmap.to_bytes().into_boxed_slice();
        let len = bytes.len();
        *out = QcteeBytes { data: Box::into_raw(bytes).cast(), len };
        Ok(())
    })
}

/// Number of sub-slot columns, or 0 for NULL.
///
/// # Safety
/// `obf` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qctee_obfuscated_sub_slots(obf: *const QcteeObfuscated) -> usize {
    obf.as_ref().map_or(0, |o| o.obf.sub_slots())
}

/// Number of attenuate bits in the input bitmap, or 0 for NULL.
///
/// # Safety
/// `obf` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qctee_obfuscated_attenuated_bits(obf: *const QcteeObfuscated) -> usize {
    obf.as_ref().map_or(0, |o| o.obf.bitmap.popcount())
}

/// Complexity counts extracted from the obfuscated circuit.
///
/// # Safety
/// `obf` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qctee_obfuscated_complexity(
    obf: *const QcteeObfuscated,
    out: *mut QcteeComplexityParams,
) -> QcteeStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let o = arg(obf, "obf")?;
        let p = ComplexityParams::from_obfuscated(&o.obf, o.randomize_output);
        *out = QcteeComplexityParams {
            n_qubits: p.n_qubits,
            n_slot_cx: p.n_slot_cx,
            n_slot_sq: p.n_slot_sq,
            n_subslots: p.n_subslots,
            n_subcx_in_slotcx: p.n_subcx_in_slotcx,
            n_subslots_in_slotcx: p.n_subslots_in_slotcx,
            randomize_output: p.randomize_output,
        };
        Ok(())
    })
}

/// # Safety
/// `obf` must be NULL or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn qctee_obfuscated_free(obf: *mut QcteeObfuscated) {
    if !obf.is_null() {
        drop(Box::from_raw(obf));
    }
}

/// Runs the whole protocol in memory: obfuscate, seal, execute on the
/// simulated trusted backend, recover, and compare with the baseline.
///
/// # Safety
/// Handles and `options` must be valid; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qctee_run(
    circuit: *const QcteeCircuit,
    backend: *const QcteeBackend,
    options: *const QcteeRunOptions,
    out: *mut *mut QcteeRun,
) -> QcteeStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let (c, b, o) = (arg(circuit, "circuit")?, arg(backend, "backend")?, arg(options, "options")?);
        let shots =
            usize::try_from(o.shots).map_err(|_| FfiError::new(QcteeStatus::InvalidArgument, "shots out of range"))?;
        let mut settings = RunSettings::new(o.obfuscation.level.into(), shots, Seeds::from_base(o.seed));
        settings.obfuscation = obfuscation_config(&o.obfuscation);
        settings.switch = if o.epsilon == 0.0 {
            SwitchModel::ideal()
        } else {
            SwitchModel::with_epsilon(o.epsilon).map_err(engine_error)?
        };
        settings.noise = NoiseModel::new(o.p1, o.p2, o.p_idle).map_err(engine_error)?;
        let run = run_in_memory("circuit", &c.0, &b.0, &settings)?;
        *out = boxed(QcteeRun(run));
        Ok(())
    })
}

/// Variational distance between the recovered and the ideal distribution.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qctee_run_vd(run: *const QcteeRun, out: *mut f64) -> QcteeStatus {
    guard(|| {
        *self::out(out, "out")? = arg(run, "run")?.0.report.vd;
        Ok(())
    })
}

/// Obfuscated over original duration. [`QcteeStatus::Unavailable`] when the
/// original circuit has zero duration.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qctee_run_depth_factor(run: *const QcteeRun, out: *mut f64) -> QcteeStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        *out = arg(run, "run")?
            .0
            .report
            .depth_factor
            .ok_or_else(|| FfiError::new(QcteeStatus::Unavailable, "baseline has zero duration"))?;
        Ok(())
    })
}

/// log2 of the attack complexity of this run's obfuscation.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qctee_run_complexity_log2(run: *const QcteeRun, out: *mut f64) -> QcteeStatus {
    guard(|| {
        *self::out(out, "out")? = arg(run, "run")?.0.report.complexity_log2;
        Ok(())
    })
}

/// The full run report as JSON; free with [`qctee_string_free`].
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qctee_run_report_json(run: *const QcteeRun, out: *mut *mut c_char) -> QcteeStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let json = serde_json::to_string_pretty(&arg(run, "run")?.0.report)
            .map_err(|e| FfiError::new(QcteeStatus::InvalidArgument, e.to_string()))?;
        *out = c_string(json)?;
        Ok(())
    })
}

/// The QASM text the provider received; free with [`qctee_string_free`].
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qctee_run_provider_qasm(run: *const QcteeRun, out: *mut *mut c_char) -> QcteeStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        *out = c_string(arg(run, "run")?.0.provider.obfuscated_qasm.clone())?;
        Ok(())
    })
}

/// # Safety
/// `run` must be NULL or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn qctee_run_free(run: *mut QcteeRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// log2 of the number of candidate circuits an attacker must consider.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qctee_attack_complexity_log2(
    params: *const QcteeComplexityParams,
    out: *mut f64,
) -> QcteeStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let p = arg(params, "params")?;
        *out = attack_complexity_log2(&ComplexityParams {
            n_qubits: p.n_qubits,
            n_slot_cx: p.n_slot_cx,
            n_slot_sq: p.n_slot_sq,
            n_subslots: p.n_subslots,
            n_subcx_in_slotcx: p.n_subcx_in_slotcx,
            n_subslots_in_slotcx: p.n_subslots_in_slotcx,
            randomize_output: p.randomize_output,
        })?;
        Ok(())
    })
}

/// Power drawn by the in-fridge hardware with default parameters, in mW.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qctee_power_overhead_mw(n_switches: u64, out: *mut f64) -> QcteeStatus {
    guard(|| {
        *self::out(out, "out")? = power_overhead_mw(n_switches, &OverheadParams::default())?;
        Ok(())
    })
}

/// Share of the fridge volume taken by the switches with default
/// parameters, in percent.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qctee_volume_overhead_pct(n_switches: u64, out: *mut f64) -> QcteeStatus {
    guard(|| {
        *self::out(out, "out")? = volume_overhead_pct(n_switches, &OverheadParams::default())?;
        Ok(())
    })
}
