use std::process::{Command, Output};

fn ecolora(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecolora")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SMALL: &str = "seed = 3\n[data]\nsamples = 200\n[fl]\nnum_clients = 6\nclients_per_round = 3\nrounds = 2\n[ecolora]\nsegments = 3\n";

#[test]
fn run_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    let o = ecolora(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let text = stdout(&o);
    assert!(text.contains("final loss"));
    let csv = std::fs::read_to_string(out.join("rounds.csv")).unwrap();
    assert!(csv.starts_with("round,loss,eval_loss,k_a,k_b,"));
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("summary.json").exists());
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[fl]\nnum_clients = 4\nclients_per_round = 9\n").unwrap();
    let o = ecolora(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("fl.clients_per_round"));
}

#[test]
fn dump_wire_example() {
    let text = stdout(&ecolora(&["dump-wire", "--example"]));
    assert!(text.contains("client 42"), "{text}");
    assert!(text.contains("positions [1, 4, 5, 13]"), "{text}");
}

#[test]
fn constants_prints_bound() {
    let text = stdout(&ecolora(&["constants", "--segments", "4"]));
    assert!(text.contains("bound"));
    assert!(text.contains("valid"));
}

#[test]
fn codec_bench_reports_each_k() {
    let text = stdout(&ecolora(&["codec-bench", "--k", "0.1,0.5", "--samples", "20000"]));
    assert_eq!(text.lines().count(), 3);
}
