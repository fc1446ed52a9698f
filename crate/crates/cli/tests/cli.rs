use std::path::Path;
use std::process::{Command, Output};

fn sedlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sedlab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn oracle_prints_exponential_in_equality_case() {
    let out = sedlab(&["oracle", "--kind", "envelope-a", "--params", "C=1,c=1,lambda=1,d=0,a0=1,b0=0", "--t", "0,1,2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (t, v) = l.split_once(',').unwrap();
            (t.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 3);
    for (t, v) in rows {
        assert!((v - t.exp()).abs() < 1e-12 * t.exp());
    }
}

#[test]
fn oracle_missing_parameter_fails() {
    let out = sedlab(&["oracle", "--kind", "envelope-b", "--params", "C=1,c=1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing parameter"));
}

#[test]
fn layer_oracle_rejects_small_lambda() {
    let out = sedlab(&["oracle", "--kind", "layer-a", "--params", "alpha=2,lambda=4,beta=1,b=1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "dt = -1\n");
    let out = sedlab(&["simulate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_vlasov_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "tier = vlasov\nT = 0.05\ndt = 0.01\nsnapshots = 2\n\n[particles]\nn = 200\nsamples_per_particle = 2\n\n[grid]\nn = 16\n",
    );
    let out_dir = dir.path().join("run");
    let out = sedlab(&["simulate", "--config", &cfg, "--seed", "3", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.txt", "metrics.csv", "summary.csv", "budget.csv"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let config = std::fs::read_to_string(out_dir.join("config.txt")).unwrap();
    assert!(config.contains("seed = 3"));
    let metrics = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("run_id,t,metric,value"));
}

#[test]
fn check_identities_passes() {
    let out = sedlab(&["check-identities", "--seed", "2"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}
