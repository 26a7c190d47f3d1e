//! End-to-end checks of the command-line surface: exit codes, the golden
//! trace, file round trips and count consistency.

use std::process::Command;

fn revinv(args: &[&str]) -> (String, String, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_revinv"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
        out.status.code().unwrap_or(-1),
    )
}

#[test]
fn trace_matches_published_rows() {
    let (stdout, _, code) = revinv(&["trace", "--prime", "37", "--x", "13"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 38);
    assert_eq!(
        lines[1],
        "0\t10||0100101\t00000|1101|\t1\t0\t37\t0\t13\t1\t0\t4\t0\t0\t0\t0\t0"
    );
    assert_eq!(
        lines[5],
        "4\t10|10|01011\t00000|1101|\t1\t2\t11\t0\t13\t1\t2\t4\t0\t1\t0\t0\t0"
    );
    assert!(lines[33].starts_with("32\tTerminated\tTerminated\t37\t0\t1\t17\t0\t6"));
}

#[test]
fn model_and_circuit_traces_agree() {
    let (model, _, c1) = revinv(&["trace", "--prime", "37", "--x", "13", "--model"]);
    let (circuit, _, c2) = revinv(&["trace", "--prime", "37", "--x", "13", "--circuit"]);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(model, circuit);
    let (alias, _, c3) = revinv(&["model-trace", "--prime", "37", "--x", "13"]);
    assert_eq!(c3, 0);
    assert_eq!(alias, model);
}

#[test]
fn verify_exit_codes() {
    let (stdout, _, code) = revinv(&["verify", "--prime", "37", "--all"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("36/36 pass"));
    let (stdout, _, code) = revinv(&["verify", "--prime", "37", "--x", "13", "--oracle"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("output 20"));
    let (_, stderr, code) = revinv(&["verify", "--prime", "35", "--all"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("not an odd prime"));
    let (_, stderr, code) = revinv(&["verify", "--prime", "8209", "--all"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("capped"));
}

#[test]
fn synth_writes_parseable_circuit_and_manifest() {
    let dir = std::env::temp_dir().join("revinv-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let qc = dir.join("inv37.qc");
    let man = dir.join("inv37.json");
    let (_, stderr, code) = revinv(&[
        "synth",
        "--prime",
        "37",
        "--out",
        qc.to_str().unwrap(),
        "--manifest",
        man.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let text = std::fs::read_to_string(&qc).unwrap();
    let circuit = revinv::ir::Circuit::parse_text(&text).unwrap();
    let layout = revinv::synth::QubitLayout::new(6);
    assert_eq!(circuit.width, layout.total_width());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&man).unwrap()).unwrap();
    assert_eq!(manifest["total_steps"], 36);
    assert_eq!(manifest["inversion_width"], layout.inversion_width());
    // Counting the parsed file matches streaming counts.
    let parsed_counts = circuit.count().unwrap();
    let (stdout, _, code) = revinv(&["count", "--prime", "37"]);
    assert_eq!(code, 0);
    assert!(stdout.contains(&format!("toffoli={}", parsed_counts.toffoli)));
    assert!(stdout.contains(&format!("cnot={}", parsed_counts.cnot)));
}

#[test]
fn synth_rejects_tiny_sizes() {
    let (_, stderr, code) = revinv(&["synth", "--n", "2"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("too small"));
}

#[test]
fn count_per_block_sums() {
    let (stdout, _, code) = revinv(&["count", "--n", "8", "--per-block", "--format", "tsv"]);
    assert_eq!(code, 0);
    let mut total = None;
    let mut sum = 0u64;
    for line in stdout.lines().skip(1) {
        let mut parts = line.split('\t');
        let name = parts.next().unwrap();
        let tof: u64 = parts.next().unwrap().parse().unwrap();
        if name == "total" {
            total = Some(tof);
        } else {
            sum += tof;
        }
    }
    assert_eq!(total, Some(sum));
}

#[test]
fn estimate_values() {
    let (stdout, _, code) = revinv(&["estimate", "--n", "256", "--ecdlp"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("820 qubits"));
    assert!(stdout.contains("1333 qubits"));
    let (stdout, _, code) = revinv(&["estimate", "--n", "224", "--ecdlp"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("1169 qubits"));
    let (_, stderr, code) = revinv(&["estimate", "--n", "4"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("n >= 8"));
}

#[test]
fn simulate_applies_circuit() {
    let dir = std::env::temp_dir().join("revinv-cli-sim");
    std::fs::create_dir_all(&dir).unwrap();
    let qc = dir.join("toy.qc");
    std::fs::write(&qc, "width=3\nx 0\nccx 0 1 2\ncx 0 1\n").unwrap();
    let (stdout, _, code) = revinv(&[
        "simulate",
        "--circuit",
        qc.to_str().unwrap(),
        "--input",
        "010",
    ]);
    assert_eq!(code, 0);
    assert_eq!(stdout.trim(), "101");
}
