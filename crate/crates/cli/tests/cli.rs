use std::path::Path;
use std::process::{Command, Output};

use nfiscsc::experiments::read_csv;

const SMALL: &str = "\
n_tx = 2
n_tz = 2
n_rx = 3
n_rz = 3
users = 2
targets = 1
scatterers = 2
";

fn nfiscsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nfiscsc")).args(args).output().unwrap()
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    std::fs::write(&p, SMALL).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn writes_rows_for_every_seed_and_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("ssr.csv");
    let o = nfiscsc(&["ssr-vs-crb", "--config", &cfg, "--seeds", "0..2", "--grid", "0.5,1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&out).unwrap();
    assert_eq!(rows.len(), 4);
    let mut keys: Vec<(u64, f64)> = rows.iter().map(|r| (r.seed, r.sweep_value)).collect();
    keys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(keys, vec![(0, 0.5), (0, 1.0), (1, 0.5), (1, 1.0)]);
    assert!(rows.iter().all(|r| r.is_ok() && r.metric == "ssr" && r.experiment == "ssr-vs-crb"));
}

#[test]
fn reruns_are_bit_identical_and_no_semantic_differs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let run = |extra: &[&str]| {
        let mut a = vec!["ssr-vs-crb", "--config", &cfg, "--seed", "3", "--grid", "0.8"];
        a.extend_from_slice(extra);
        let o = nfiscsc(&a);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let text = String::from_utf8(o.stdout).unwrap();
        text.lines().nth(1).unwrap().split(',').nth(4).unwrap().to_string()
    };
    let a = run(&[]);
    assert_eq!(a, run(&[]));
    let plain = run(&["--no-semantic"]);
    assert_ne!(a, plain);
}

#[test]
fn stdout_has_the_fixed_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = nfiscsc(&["compute-tradeoff", "--config", &cfg, "--grid", "0.2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "experiment,seed,sweep_value,metric,value,wall_time_s,status");
}

#[test]
fn bad_input_fails_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["no-such-experiment".into()],
        vec!["convergence".into(), "--seeds".into(), "5..5".into()],
        vec!["convergence".into(), "--grid".into(), "a,b".into()],
        vec!["convergence".into(), "--config".into(), dir.path().join("missing.toml").to_str().unwrap().into()],
    ];
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = nfiscsc(&args);
        assert!(!o.status.success(), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "users = 0\n").unwrap();
    let o = nfiscsc(&["ssr-vs-crb", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("users"));
}
