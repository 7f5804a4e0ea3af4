use std::ffi::{c_char, CStr, CString};
use std::ptr;

use qctee_ffi::*;

const BELL: &str = r#"OPENQASM 2.0;
include "qelib1.inc";
qreg q[2];
creg c[2];
rz(pi/2) q[0];
sx q[0];
rz(pi/2) q[0];
cx q[0],q[1];
measure q[0] -> c[0];
measure q[1] -> c[1];
"#;

fn last_error() -> String {
    let p = qctee_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn take_string(p: *mut c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { qctee_string_free(p) };
    s
}

struct Fixture {
    backend: *mut QcteeBackend,
    circuit: *mut QcteeCircuit,
}

impl Fixture {
    fn new() -> Self {
        let mut backend = ptr::null_mut();
        let mut circuit = ptr::null_mut();
        let qasm = CString::new(BELL).unwrap();
        unsafe {
            assert_eq!(qctee_backend_perth(&mut backend), QcteeStatus::Ok);
            assert_eq!(qctee_circuit_from_qasm(qasm.as_ptr(), &mut circuit), QcteeStatus::Ok);
        }
        Fixture { backend, circuit }
    }
}

impl Drop for Fixture {
    fn drop(&mut self) {
        unsafe {
            qctee_circuit_free(self.circuit);
            qctee_backend_free(self.backend);
        }
    }
}

#[test]
fn handles_report_their_shape() {
    let f = Fixture::new();
    unsafe {
        assert_eq!(qctee_backend_n_qubits(f.backend), 7);
        assert_eq!(qctee_circuit_n_qubits(f.circuit), 2);
        assert_eq!(qctee_circuit_validate(f.circuit, f.backend), QcteeStatus::Ok);
        assert_eq!(qctee_backend_n_qubits(ptr::null()), 0);
    }
}

#[test]
fn obfuscation_round_trips_through_handles() {
    let f = Fixture::new();
    let opts = QcteeObfuscationOptions {
        level: QcteeLevel::Max,
        randomize_output: true,
        identity_conversion: false,
        padding_slots: 0,
        seed: 5,
    };
    let mut obf = ptr::null_mut();
    unsafe {
        assert_eq!(qctee_obfuscate(f.circuit, f.backend, &opts, &mut obf), QcteeStatus::Ok);
        let mut qasm = ptr::null_mut();
        assert_eq!(qctee_obfuscated_qasm(obf, &mut qasm), QcteeStatus::Ok);
        let text = take_string(qasm);
        assert!(text.contains("qreg q[7];"));
        assert!(!text.contains("barrier"));

        let mut bytes = QcteeBytes { data: ptr::null_mut(), len: 0 };
        assert_eq!(qctee_obfuscated_bitmap(obf, &mut bytes), QcteeStatus::Ok);
        assert!(bytes.len > 0);
        qctee_bytes_free(bytes);

        assert!(qctee_obfuscated_sub_slots(obf) > 0);
        assert!(qctee_obfuscated_attenuated_bits(obf) > 0);

        let mut params = std::mem::zeroed::<QcteeComplexityParams>();
        assert_eq!(qctee_obfuscated_complexity(obf, &mut params), QcteeStatus::Ok);
        assert!(params.randomize_output);
        assert_eq!(params.n_qubits, 7);
        let mut bits = 0.0;
        assert_eq!(qctee_attack_complexity_log2(&params, &mut bits), QcteeStatus::Ok);
        assert!(bits > params.n_qubits as f64);
        qctee_obfuscated_free(obf);
    }
}

#[test]
fn noiseless_run_recovers_the_bell_state() {
    let f = Fixture::new();
    let mut opts = qctee_run_options_default();
    opts.obfuscation.level = QcteeLevel::Half;
    opts.obfuscation.randomize_output = true;
    opts.shots = 256;
    opts.seed = 11;
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(qctee_run(f.circuit, f.backend, &opts, &mut run), QcteeStatus::Ok);
        let mut vd = 1.0;
        assert_eq!(qctee_run_vd(run, &mut vd), QcteeStatus::Ok);
        assert!(vd < 1e-12, "vd {vd}");
        let mut factor = 0.0;
        assert_eq!(qctee_run_depth_factor(run, &mut factor), QcteeStatus::Ok);
        assert!(factor > 1.0);
        let mut report = ptr::null_mut();
        assert_eq!(qctee_run_report_json(run, &mut report), QcteeStatus::Ok);
        let json: serde_json::Value = serde_json::from_str(&take_string(report)).unwrap();
        assert_eq!(json["shots"], 256);
        assert_eq!(json["vd_method"], "exact");
        let mut qasm = ptr::null_mut();
        assert_eq!(qctee_run_provider_qasm(run, &mut qasm), QcteeStatus::Ok);
        assert!(take_string(qasm).starts_with("OPENQASM 2.0;"));
        qctee_run_free(run);
    }
}

#[test]
fn zero_duration_baseline_has_no_depth_factor() {
    let f = Fixture::new();
    let qasm = CString::new("OPENQASM 2.0;\nqreg q[1];\ncreg c[1];\nrz(0.3) q[0];\nmeasure q[0] -> c[0];\n").unwrap();
    let mut circuit = ptr::null_mut();
    let mut run = ptr::null_mut();
    let opts = qctee_run_options_default();
    unsafe {
        assert_eq!(qctee_circuit_from_qasm(qasm.as_ptr(), &mut circuit), QcteeStatus::Ok);
        assert_eq!(qctee_run(circuit, f.backend, &opts, &mut run), QcteeStatus::Ok);
        let mut factor = 0.0;
        assert_eq!(qctee_run_depth_factor(run, &mut factor), QcteeStatus::Unavailable);
        assert!(last_error().contains("zero duration"));
        qctee_run_free(run);
        qctee_circuit_free(circuit);
    }
}

#[test]
fn errors_set_status_and_message() {
    let f = Fixture::new();
    qctee_clear_last_error();
    assert!(qctee_last_error_message().is_null());
    let mut circuit = ptr::null_mut();
    unsafe {
        let bad = CString::new("OPENQASM 2.0;\nqreg q[2];\nfoo q[0];\n").unwrap();
        assert_eq!(qctee_circuit_from_qasm(bad.as_ptr(), &mut circuit), QcteeStatus::Circuit);
        assert!(circuit.is_null());
        assert!(last_error().starts_with("circuit-ir:"));

        assert_eq!(qctee_circuit_from_qasm(ptr::null(), &mut circuit), QcteeStatus::NullPointer);
        assert!(last_error().contains("qasm is null"));

        let invalid = [0xffu8, 0];
        assert_eq!(qctee_circuit_from_qasm(invalid.as_ptr().cast(), &mut circuit), QcteeStatus::InvalidUtf8);

        let uncoupled = CString::new("OPENQASM 2.0;\nqreg q[7];\ncx q[0],q[6];\n").unwrap();
        assert_eq!(qctee_circuit_from_qasm(uncoupled.as_ptr(), &mut circuit), QcteeStatus::Ok);
        assert_eq!(qctee_circuit_validate(circuit, f.backend), QcteeStatus::Circuit);
        qctee_circuit_free(circuit);

        let mut opts = qctee_run_options_default();
        opts.shots = 0;
        let mut run = ptr::null_mut();
        assert_eq!(qctee_run(f.circuit, f.backend, &opts, &mut run), QcteeStatus::InvalidArgument);
        assert!(run.is_null());
        opts.shots = 8;
        opts.epsilon = 2.0;
        assert_eq!(qctee_run(f.circuit, f.backend, &opts, &mut run), QcteeStatus::InvalidArgument);

        let mut bits = 0.0;
        let params = QcteeComplexityParams {
            n_qubits: 2,
            n_slot_cx: 1,
            n_slot_sq: 1,
            n_subslots: 1,
            n_subcx_in_slotcx: 2,
            n_subslots_in_slotcx: 0,
            randomize_output: false,
        };
        assert_eq!(qctee_attack_complexity_log2(&params, &mut bits), QcteeStatus::Analysis);
    }
}

#[test]
fn last_error_is_per_thread() {
    let mut circuit = ptr::null_mut();
    unsafe { qctee_circuit_from_qasm(ptr::null(), &mut circuit) };
    assert!(!qctee_last_error_message().is_null());
    std::thread::spawn(|| assert!(qctee_last_error_message().is_null())).join().unwrap();
}

#[test]
fn overhead_helpers_match_the_library() {
    let mut mw = 0.0;
    let mut pct = 0.0;
    unsafe {
        assert_eq!(qctee_power_overhead_mw(1000, &mut mw), QcteeStatus::Ok);
        assert_eq!(qctee_volume_overhead_pct(1000, &mut pct), QcteeStatus::Ok);
        assert_eq!(qctee_power_overhead_mw(1000, ptr::null_mut()), QcteeStatus::NullPointer);
    }
    assert!((mw - 182.52).abs() < 1e-9, "{mw}");
    assert!(pct > 0.0 && pct < 0.001);
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(qctee_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
