use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vlmc-cftp"))
}

fn model(name: &str) -> String {
    let p: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("models").join(format!("{name}.vlmc"));
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn validate_prints_canonical_form() {
    let (code, stdout) = run(&["validate", "--model", &model("binary_tree")]);
    assert_eq!(code, 0);
    assert!(stdout.contains("\"1112112\" = [0.5, 0.5]"));
}

#[test]
fn semantic_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.vlmc");
    std::fs::write(&bad, "alphabet = 1 2\nepsilon = 0.2\nw = \"2\"\nell = zero\ndefault = [0.4, 0.5]\n").unwrap();
    assert_eq!(run(&["validate", "--model", bad.to_str().unwrap()]).0, 2);
    std::fs::write(&bad, "alphabet = 1 2\nepsilon = oops\n").unwrap();
    let out = dir.path().join("o");
    assert_eq!(run(&["sample", "--model", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]).0, 2);
}

#[test]
fn aborted_runs_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let renewal = model("renewal");
    let args = ["sample", "--model", &renewal, "--max-back", "0", "--iterations", "50"];
    let (code, _) = run(&[&args[..], &["--out", out.to_str().unwrap()]].concat());
    assert_eq!(code, 3);
    let csv = std::fs::read_to_string(out.join("sample.csv")).unwrap();
    assert!(csv.contains("ABORTED"));
}

#[test]
fn every_subcommand_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let sample = dir.path().join("x.txt");
    std::fs::write(&sample, "2111212\n").unwrap();
    let cases: Vec<(&str, &str, Vec<&str>, &str)> = vec![
        ("sample", "binary_tree", vec!["--window", "-2", "5", "--iterations", "4"], "sample.csv"),
        ("theta-dist", "renewal", vec!["--iterations", "2000"], "theta_dist.csv"),
        ("eps-sweep", "identity", vec!["--iterations", "200", "--grid", "0.5,1.0"], "eps_sweep.csv"),
        ("regen", "renewal", vec!["--sample", sample.to_str().unwrap()], "regen.csv"),
        ("aux-trace", "table_abc", vec!["--horizon", "20", "--seed", "4"], "aux_trace.csv"),
        ("oracle-compare", "renewal", vec!["--iterations", "2000", "--horizon", "8"], "oracle_compare.csv"),
    ];
    for (cmd, m, extra, csv) in cases {
        let out = dir.path().join(cmd);
        let path = model(m);
        let mut args = vec![cmd, "--model", &path, "--out", out.to_str().unwrap()];
        args.extend(extra);
        let (code, stdout) = run(&args);
        assert_eq!(code, 0, "{cmd}");
        assert!(stdout.contains(csv), "{cmd}: {stdout}");
        let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["model_sha256"].as_str().unwrap().len(), 64);
        assert!(std::fs::read_to_string(out.join(csv)).unwrap().lines().count() > 1, "{cmd}");
    }
    assert!(dir.path().join("eps-sweep/eps_sweep.svg").exists());
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("r{k}"));
        let binary_tree = model("binary_tree");
        let args = ["sample", "--model", &binary_tree, "--seed", "9", "--iterations", "50", "--window", "0", "9"];
        assert_eq!(run(&[&args[..], &["--out", out.to_str().unwrap()]].concat()).0, 0);
        outputs.push(std::fs::read(out.join("sample.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
