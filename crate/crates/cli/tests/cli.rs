use std::process::{Command, Output};

fn matfun(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matfun")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn codec_roundtrip_prints_tokens_and_value() {
    let o = matfun(&["codec", "roundtrip", "--scheme", "FP15", "--value", "3.14"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "tokens: FP314/-2\nids: 14328\ndecoded: 3.14\n");
    let o = matfun(&["codec", "roundtrip", "--scheme", "P1000", "--value", "-6.02e23"]);
    assert!(stdout(&o).starts_with("tokens: - 602 E21\n"));
    assert!(stdout(&o).ends_with("decoded: -6.02e23\n"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(matfun(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(matfun(&["gen", "--fn", "tan", "--n", "2", "--count", "1", "--out", "x"]).status.code(), Some(2));
    assert_eq!(matfun(&["codec", "roundtrip", "--scheme", "P7", "--value", "1"]).status.code(), Some(2));
}

#[test]
fn module_errors_are_one_line() {
    let o = matfun(&["codec", "roundtrip", "--scheme", "FP15", "--value", "1e30"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error: "));
    assert_eq!(err.lines().count(), 1, "{err}");
}

#[test]
fn gen_writes_dataset_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let o = matfun(&["gen", "--fn", "sign", "--n", "2", "--count", "4", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["command"], "gen");
    assert_eq!(manifest["outputs"][0]["path"], "dataset.jsonl");
    assert_eq!(manifest["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let data = std::fs::read_to_string(out.join("dataset.jsonl")).unwrap();
    assert_eq!(data.lines().count(), 5);
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    let o = matfun(&[
        "train",
        "--arch",
        "mlp3",
        "--fn",
        "exp",
        "--n",
        "1",
        "--samples",
        "200",
        "--epochs",
        "2",
        "--clip",
        "1",
        "--out",
        &p("t"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ckpt = p("t/model.ckpt");
    let o = matfun(&["eval", "--model", &ckpt, "--count", "50", "--taus", "0.5,0.05", "--out", &p("e")]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("e/accuracy.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "function,arch_or_scheme,n,tau,accuracy,n_eval,malformed");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("exp,mlp3,1,0.5,"));
    // A model trained on exp refuses sign data.
    let o = matfun(&["gen", "--fn", "sign", "--n", "1", "--count", "3", "--out", &p("s")]);
    assert!(o.status.success());
    let o = matfun(&["eval", "--model", &ckpt, "--data", &p("s/dataset.jsonl"), "--out", &p("e2")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn encdec_requires_scheme() {
    let o = matfun(&["train", "--arch", "encdec", "--fn", "exp", "--n", "1", "--samples", "10", "--out", "unused"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scheme"));
}

#[test]
fn certify_rejects_non_network() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("x.bin");
    std::fs::write(&bogus, b"not a network").unwrap();
    let o = matfun(&["certify", "--net", bogus.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_experiment_lists_names() {
    let o = matfun(&["repro", "--experiment", "table9", "--out", "unused"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("smoke"));
}

#[test]
fn thread_override_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_matfun"))
        .args(["codec", "roundtrip", "--scheme", "P10", "--value", "1"])
        .env("MATFUN_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
