use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fdpband(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdpband")).args(args).output().expect("cannot run fdpband")
}

fn json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is not JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_labels(path: &Path, labels: &[i32]) {
    let mut text = String::from("label\tscore\n");
    for (i, l) in labels.iter().enumerate() {
        text.push_str(&format!("{l}\t{}\n", labels.len() - i));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn tdc_on_all_decoys_reports_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("decoys.tsv");
    write_labels(&input, &[-1; 50]);
    let r = json(&fdpband(&["tdc", "--input", s(&input), "--alpha", "0.05"]));
    assert_eq!(r["k"], 0);
    assert_eq!(r["procedure"], "tdc");
    assert_eq!(r["reported_indices"].as_array().unwrap().len(), 0);
}

#[test]
fn krb_bound_after_tdc() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("targets.tsv");
    write_labels(&input, &[1; 100]);
    let report = dir.path().join("tdc.json");
    let out = fdpband(&["tdc", "--input", s(&input), "--alpha", "0.05", "--output", s(&report)]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&fdpband(&["bound", "--input", s(&input), "--method", "krb", "--gamma", "0.05", "--tdc-report", s(&report)]));
    assert_eq!((r["num_targets"].as_u64(), r["num_decoys"].as_u64()), (Some(100), Some(0)));
    let c = -(0.05f64.ln()) / (2.0f64 - 0.05).ln();
    assert!((r["bound"].as_f64().unwrap() - c / 100.0).abs() < 1e-12);
    assert!((r["bound"].as_f64().unwrap() - 0.0449).abs() < 1e-4);
    assert_eq!(r["bound_method"], "tdc-krb");
    // inline TDC gives the same answer
    let inline = json(&fdpband(&["bound", "--input", s(&input), "--method", "krb", "--gamma", "0.05", "--alpha", "0.05"]));
    assert_eq!(inline["bound"], r["bound"]);
}

#[test]
fn precompute_d1_entry() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("t");
    let out = fdpband(&["precompute", "--d0", "1", "--gammas", "0.05", "--samples", "100000", "--out", s(&prefix)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("t.uniform.tbl")).unwrap();
    let record = text.lines().find(|l| l.starts_with("5e-2\t1\t")).unwrap();
    let rho: f64 = record.split('\t').nth(2).unwrap().parse().unwrap();
    assert_eq!(rho, 0.03125);
}

#[test]
fn simulated_files_feed_every_procedure() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("tab");
    assert_eq!(
        fdpband(&["precompute", "--d0", "150", "--gammas", "0.05", "--samples", "20000", "--out", s(&prefix)]).status.code(),
        Some(0)
    );
    for model in [vec!["--model", "spectrum-id"], vec!["--model", "generic-null", "--num-false", "300"]] {
        let data = dir.path().join("data.tsv");
        let mut args = vec!["simulate", "--m", "1500", "--output", s(&data)];
        args.extend(&model);
        assert_eq!(fdpband(&args).status.code(), Some(0));
        let base = ["--input", s(&data), "--alpha", "0.05"];
        let with = |extra: &[&str]| -> Vec<String> { extra.iter().chain(base.iter()).map(|x| x.to_string()).collect() };
        let commands = vec![
            with(&["tdc"]),
            with(&["fdp-sd", "--gamma", "0.05"]),
            with(&["fdp-sd", "--gamma", "0.05", "--randomized"]),
            with(&["fdp-band", "--gamma", "0.05", "--band", "kr"]),
            with(&["fdp-band", "--gamma", "0.05", "--band", "uniform", "--tables", s(&prefix)]),
            with(&["fdp-band", "--gamma", "0.05", "--band", "standardized", "--tables", s(&prefix)]),
            with(&["bound", "--gamma", "0.05", "--method", "ub", "--tables", s(&prefix)]),
            with(&["bound", "--gamma", "0.05", "--method", "sb", "--tables", s(&prefix)]),
        ];
        for c in commands {
            let args: Vec<&str> = c.iter().map(String::as_str).collect();
            let r = json(&fdpband(&args));
            assert_eq!(r["m"], 1500, "{c:?}");
            let fdp = r["fdp"].as_f64().expect("truth column should give an FDP");
            assert!((0.0..=1.0).contains(&fdp));
        }
    }
}

#[test]
fn compete_output_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.tsv");
    std::fs::write(&pairs, "3.0\t1.0\n0.5\t2.0\n4.0\t4.0\n").unwrap();
    let labeled = dir.path().join("labeled.tsv");
    let out = fdpband(&["compete", "--input", s(&pairs), "--output", s(&labeled), "--tie-policy", "drop"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&labeled).unwrap(), "id\tlabel\tscore\n0\t1\t3\n1\t-1\t2\n");
    let r = json(&fdpband(&["tdc", "--input", s(&labeled), "--alpha", "0.5"]));
    assert_eq!(r["m"], 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.tsv");
    write_labels(&good, &[1, 1, -1, 1]);
    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "label\tscore\n2\t1.0\n").unwrap();

    let code = |args: &[&str]| fdpband(args).status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["tdc", "--input", s(&good)]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(code(&["tdc", "--input", s(&good), "--alpha", "1.5"]), Some(2));
    assert_eq!(code(&["tdc", "--input", s(&bad), "--alpha", "0.1"]), Some(3));
    assert_eq!(code(&["tdc", "--input", s(&dir.path().join("missing.tsv")), "--alpha", "0.1"]), Some(3));
    assert_eq!(code(&["fdp-band", "--input", s(&good), "--alpha", "0.1", "--gamma", "0.05", "--band", "uniform"]), Some(4));

    // a table that does not reach d_infinity is a configuration error
    let prefix = dir.path().join("small");
    assert_eq!(code(&["precompute", "--d0", "5", "--gammas", "0.05", "--samples", "5000", "--out", s(&prefix)]), Some(0));
    let big = dir.path().join("big.tsv");
    write_labels(&big, &[1; 2000]);
    let out = fdpband(&[
        "fdp-band", "--input", s(&big), "--alpha", "0.1", "--gamma", "0.05", "--band", "uniform", "--tables", s(&prefix),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("d0=6"), "{err}");
}

#[test]
fn evaluate_writes_summary_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let rows = dir.path().join("rows.csv");
    let r = json(&fdpband(&[
        "evaluate", "--model", "generic-null", "--m", "400", "--num-false", "100", "--alpha", "0.1", "--gamma", "0.1",
        "--replicates", "120", "--procedures", "tdc,fdp-sd", "--bounds", "krb", "--rows", s(&rows),
    ]));
    assert_eq!(r["version"], "fdpband-evaluation v1");
    assert_eq!(r["replicates"], 120);
    assert_eq!(r["procedures"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(&rows).unwrap();
    assert!(csv.starts_with("replicate,procedure,k,T_k,D_k,fdp,bound\n"));
    assert_eq!(csv.lines().count(), 1 + 120 * 3);
    assert_eq!(
        fdpband(&["evaluate", "--model", "generic-null", "--alpha", "0.1", "--gamma", "0.1", "--replicates", "10"])
            .status
            .code(),
        Some(2)
    );
}
