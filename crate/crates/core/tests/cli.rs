use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bell() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/circuits/bell.qasm")
}

fn qctee(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qctee")).args(args).current_dir(dir).output().unwrap()
}

fn ok(args: &[&str], dir: &Path) -> Output {
    let out = qctee(args, dir);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn staged_workflow_recovers_the_circuit() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let circuit = bell();
    let circuit = circuit.to_str().unwrap();
    ok(&["keygen", "--role", "user", "--seed", "1", "--out", "keys"], d);
    ok(&["keygen", "--role", "backend", "--seed", "2", "--out", "keys"], d);
    ok(
        &[
            "obfuscate",
            "--circuit",
            circuit,
            "--level",
            "half",
            "--randomize-output",
            "--user-key",
            "keys/user.key",
            "--backend-pub",
            "keys/backend.pub",
            "--seed",
            "3",
            "--out",
            "client",
        ],
        d,
    );
    for f in ["obfuscated.qasm", "input_bitmap.qcte", "session.key"] {
        assert!(d.join("client").join(f).exists(), "{f}");
    }
    ok(
        &[
            "execute",
            "--circuit",
            "client/obfuscated.qasm",
            "--bitmap",
            "client/input_bitmap.qcte",
            "--backend-key",
            "keys/backend.key",
            "--user-pub",
            "keys/user.pub",
            "--shots",
            "512",
            "--seed",
            "4",
            "--out",
            "provider",
        ],
        d,
    );
    ok(
        &[
            "recover",
            "--job",
            "provider/job.json",
            "--session",
            "client/session.key",
            "--backend-pub",
            "keys/backend.pub",
            "--out",
            "result",
        ],
        d,
    );
    let counts = fs::read_to_string(d.join("result/counts.csv")).unwrap();
    for line in counts.lines().skip(1) {
        let state = line.split(',').next().unwrap();
        assert!(state.ends_with("00") || state.ends_with("11"), "{state}");
    }
    ok(&["vd", "--recovered", "result/recovered.json", "--circuit", circuit, "--out", "result"], d);
    assert!(d.join("result/vd.csv").exists());
}

#[test]
fn pipeline_is_reproducible_and_hides_the_bitmap() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let circuit = bell();
    let args = |out: &'static str| {
        vec![
            "pipeline".to_string(),
            "--circuit".into(),
            circuit.to_str().unwrap().into(),
            "--level".into(),
            "quarter".into(),
            "--randomize-output".into(),
            "--shots".into(),
            "256".into(),
            "--seed".into(),
            "9".into(),
            "--out".into(),
            out.into(),
        ]
    };
    for out in ["a", "b"] {
        let a = args(out);
        ok(&a.iter().map(String::as_str).collect::<Vec<_>>(), d);
    }
    let a = fs::read(d.join("a/report.json")).unwrap();
    assert_eq!(a, fs::read(d.join("b/report.json")).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert!(report["vd"].as_f64().unwrap() < 1e-12);

    let mut provider: Vec<_> =
        fs::read_dir(d.join("a/provider")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    provider.sort();
    assert_eq!(provider, ["input_bitmap.qcte", "obfuscated.qasm", "output_bitmap.qcte", "raw_shots.json"]);
}

#[test]
fn analyze_writes_tables() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let circuit = bell();
    ok(&["analyze", "--circuit", circuit.to_str().unwrap(), "--out", "an"], d);
    let md = fs::read_to_string(d.join("an/overhead.md")).unwrap();
    assert!(md.contains("Condor"));
    let levels = fs::read_to_string(d.join("an/levels.csv")).unwrap();
    assert_eq!(levels.lines().count(), 4);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let tmp = TempDir::new().unwrap();
    let out = qctee(&["pipeline", "--circuit", "missing.qasm", "--seed", "1", "--out", "x"], tmp.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: io: missing.qasm"), "{err}");
}
