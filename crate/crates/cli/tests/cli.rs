use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_orthoclust"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("orthoclust-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn gen_then_recover_round_trip() {
    let dir = scratch("recover");
    let inst = dir.join("inst.json");
    ok(bin()
        .args(["gen", "--n", "256", "--m", "64", "--p", "0.02", "--snr-db", "20", "--seed", "3", "--out"])
        .arg(&inst)
        .output()
        .unwrap());
    for alg in ["oc", "omp-refined"] {
        let est = dir.join(format!("{alg}.json"));
        ok(bin()
            .args(["recover", "--algorithm", alg, "--input"])
            .arg(&inst)
            .arg("--out")
            .arg(&est)
            .output()
            .unwrap());
        let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&est).unwrap()).unwrap();
        assert_eq!(report["estimate"].as_array().unwrap().len(), 256);
        assert!(report["nmse"].as_f64().unwrap().is_finite());
    }
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn sweep_csv_is_reproducible() {
    let dir = scratch("sweep");
    let spec = dir.join("spec.json");
    fs::write(
        &spec,
        r#"{"N": 128, "M": 32, "p": 0.03, "snr_db": [10, 20], "matrix": {"kind": "partial_dft"},
            "prior": "gaussian", "trials": 3, "seed": 9, "algorithms": ["oc", "omp"]}"#,
    )
    .unwrap();
    let run = || String::from_utf8(ok(bin().arg("sweep").arg("--spec").arg(&spec).output().unwrap()).stdout).unwrap();
    let first = run();
    assert_eq!(first, run());
    let mut lines = first.lines();
    assert_eq!(
        lines.next(),
        Some("algorithm,matrix,prior,N,M,p,snr_db,L,trial,seed,nmse,nmse_db,runtime_ms,clusters,hypotheses,error")
    );
    // two coordinates, two algorithms, three trials plus one aggregate each
    assert_eq!(lines.count(), 2 * 2 * (3 + 1));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn oracle_check_passes() {
    let out = ok(bin().args(["oracle-check", "--seed", "4"]).output().unwrap());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 6);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn bad_input_exits_with_code_two() {
    let out = bin()
        .args(["recover", "--input", "/nonexistent/instance.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}
