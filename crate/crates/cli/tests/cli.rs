use std::path::Path;
use std::process::{Command, Output};

use hinsearch::hin::fixtures;

fn hinsearch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hinsearch")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic dataset under `<root>/data`.
fn synth(root: &Path) -> std::path::PathBuf {
    let data = root.join("data");
    let o = hinsearch(&["gen-synth", "--out", s(&data), "--targets", "200", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("planted\tTABC"));
    data
}

const FAST: [&str; 8] = ["--hidden", "8", "--search-epochs", "3", "--max-epochs", "5", "--n-seeds", "2"];

#[test]
fn enumerate_lists_dblp_paths() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("schema.tsv"), fixtures::dblp().to_tsv()).unwrap();
    let o = hinsearch(&["enumerate", "--dataset", s(dir.path()), "--max-hop", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let first: Vec<&str> = out.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(first, ["A", "AP", "APA", "APT", "APV"]);
    assert!(out.lines().nth(2).unwrap().starts_with("APA\t2\t"));
}

#[test]
fn train_consumes_search_output() {
    let root = tempfile::tempdir().unwrap();
    let data = synth(root.path());
    let out = root.path().join("run");
    let mut args = vec!["search", "--dataset", s(&data), "--out", s(&out), "--m", "3"];
    args.extend(FAST);
    let o = hinsearch(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let derived = std::fs::read_to_string(out.join("derived_paths.txt")).unwrap();
    assert_eq!(derived.lines().count(), 3);
    for f in ["search_report.tsv", "search_report.seed0.tsv", "search_report.seed1.tsv", "run_meta.tsv"] {
        assert!(out.join(f).exists(), "{f}");
    }

    args[0] = "train";
    let o = hinsearch(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let used = stdout(&o).lines().next().unwrap().split('\t').nth(1).unwrap().to_string();
    assert_eq!(used, derived.lines().collect::<Vec<_>>().join(","));
    assert!(out.join("checkpoint.hinp").exists());
    assert!(std::fs::read_to_string(out.join("eval.tsv")).unwrap().contains("test\t"));
}

#[test]
fn bad_path_in_list_is_named() {
    let root = tempfile::tempdir().unwrap();
    let data = synth(root.path());
    let list = root.path().join("paths.txt");
    std::fs::write(&list, "TA\nTAX\n").unwrap();
    let out = root.path().join("run");
    let mut args = vec!["train", "--dataset", s(&data), "--out", s(&out), "--paths", s(&list)];
    args.extend(FAST);
    let o = hinsearch(&args);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("TAX"), "{}", stderr(&o));
}

#[test]
fn train_without_search_output_fails() {
    let root = tempfile::tempdir().unwrap();
    let data = synth(root.path());
    let o = hinsearch(&["train", "--dataset", s(&data), "--out", s(&root.path().join("empty"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error\tmissing_artifact\t"), "{}", stderr(&o));
}

#[test]
fn conflicting_flags_are_usage_errors() {
    let o = hinsearch(&["ablate", "--drop", "TA", "--keep", "TABC"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hinsearch(&["search", "--m", "4", "--all-paths"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hinsearch(&["bench"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error\tusage\t"));
}

#[test]
fn flags_override_config_file() {
    let root = tempfile::tempdir().unwrap();
    let data = synth(root.path());
    let cfg = root.path().join("run.cfg");
    std::fs::write(&cfg, format!("# two hops from the file\ndataset = {}\nmax_hop = 2\n", data.display())).unwrap();
    let count = |extra: &[&str]| {
        let mut args = vec!["enumerate", "--config", s(&cfg)];
        args.extend(extra);
        let o = hinsearch(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o).lines().count()
    };
    // T, TA, TD, then TAT, TAB, TDT.
    assert_eq!(count(&[]), 6);
    assert_eq!(count(&["--max-hop", "3"]), 12);

    std::fs::write(&cfg, "max_hop = two\n").unwrap();
    let o = hinsearch(&["enumerate", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run.cfg:1"), "{}", stderr(&o));
}
