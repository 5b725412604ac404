use std::path::Path;

use ecolora::config::RunConfig;
use ecolora::metrics::{read_summary, rounds_csv, write_metrics, ROUNDS_FILE};
use ecolora::netsim::{transfer_time, NetworkScenario};
use ecolora::orchestrator::{run_experiment, Experiment};
use ecolora::protocol::partition;

fn data(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn golden_config() -> RunConfig {
    RunConfig::load(&data("golden.toml")).unwrap()
}

#[test]
fn golden_csv_is_reproduced_byte_for_byte() {
    let (reports, _) = run_experiment(&golden_config()).unwrap();
    let want = std::fs::read(data("golden_rounds.csv")).unwrap();
    assert_eq!(String::from_utf8(rounds_csv(&reports).unwrap()).unwrap(), String::from_utf8(want).unwrap());
}

#[test]
fn rerun_overwrites_with_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = golden_config();
    let (r, s) = run_experiment(&cfg).unwrap();
    write_metrics(dir.path(), &r, &s).unwrap();
    let first = std::fs::read(dir.path().join(ROUNDS_FILE)).unwrap();
    let (r2, s2) = run_experiment(&cfg).unwrap();
    let (_, json) = write_metrics(dir.path(), &r2, &s2).unwrap();
    assert_eq!(std::fs::read(dir.path().join(ROUNDS_FILE)).unwrap(), first);
    assert_eq!(read_summary(&json).unwrap(), s);
}

#[test]
fn accounting_identity_holds() {
    let (reports, s) = run_experiment(&golden_config()).unwrap();
    let dense: u64 = reports
        .iter()
        .flat_map(|r| &r.clients)
        .map(|c| c.upload_dense_scalars)
        .sum();
    assert_eq!(s.upload_params, dense);
    // each participant uploads exactly its assigned segment
    let sizes = partition(s.total_params, 3).unwrap().sizes();
    for c in reports.iter().flat_map(|r| &r.clients) {
        assert_eq!(c.upload_dense_scalars, sizes[c.segment] as u64);
        assert!(c.upload_scalars <= c.upload_dense_scalars);
    }
}

#[test]
fn baseline_moves_the_whole_model_both_ways() {
    let cfg = golden_config().fedavg_baseline();
    let (reports, s) = run_experiment(&cfg).unwrap();
    let total = s.total_params as u64;
    assert_eq!(s.upload_params, 5 * 6 * total);
    assert_eq!(s.upload_sent, s.upload_params);
    // the initial model is not counted, so round 0 downloads nothing
    assert_eq!(s.download_params, 4 * 6 * total);
    for r in &reports {
        for c in &r.clients {
            // 13-byte header, one 12-byte entry per tensor, 4 bytes per value
            assert_eq!(c.upload_bytes, 13 + 12 * 4 + 4 * total);
        }
    }
}

#[test]
fn encoded_size_matches_the_layout_formula() {
    let (reports, _) = run_experiment(&golden_config()).unwrap();
    for r in &reports {
        for c in &r.clients {
            // tensor entries vary with the segment, so bound by the header
            // and the value payload, which must both be present
            assert!(c.upload_bytes >= 13 + 2 * c.upload_scalars);
            // positions cost at most one 32-bit word per dense slot
            assert!(c.upload_bytes <= 13 + 12 * 4 + 2 * c.upload_scalars + 4 * c.upload_dense_scalars);
        }
    }
}

#[test]
fn toggles_reach_the_protocol() {
    let mut cfg = golden_config();
    let (_, full) = run_experiment(&cfg).unwrap();
    cfg.ecolora.segment_sharing = false;
    let (_, whole) = run_experiment(&cfg).unwrap();
    assert_eq!(whole.upload_params, 5 * 6 * whole.total_params as u64);
    assert!(whole.upload_params > 2 * full.upload_params);
}

#[test]
fn compressed_traffic_cuts_communication_time_at_scale() {
    // measured byte ratios, applied to a full-size adapter payload
    let mut cfg = RunConfig::default();
    cfg.fl.rounds = 10;
    cfg.network.compute_seconds = Some(0.0);
    let exp = Experiment::build(&cfg).unwrap();
    let (_, eco) = exp.run(&cfg).unwrap();
    let (_, base) = exp.run(&cfg.fedavg_baseline()).unwrap();
    let up = eco.upload_bytes as f64 / base.upload_bytes as f64;
    let down = eco.download_bytes as f64 / base.download_bytes as f64;

    let payload = 8.0e6;
    let s = NetworkScenario::preset("1/5").unwrap();
    let comm = |u: f64, d: f64| {
        transfer_time((payload * u) as u64, s.uplink_bps, s.latency_s)
            + transfer_time((payload * d) as u64, s.downlink_bps, s.latency_s)
    };
    let reduction = 1.0 - comm(up, down) / comm(1.0, 1.0);
    assert!(reduction >= 0.6, "communication time reduced by only {:.1}%", reduction * 100.0);
}

#[test]
fn time_ratio_equals_byte_ratio_when_latency_is_negligible() {
    let s = NetworkScenario::new("lab", 1e6, 1e6, 1e-6).unwrap();
    let (a, b) = (40_000_000u64, 10_000_000u64);
    let ratio = transfer_time(a, s.uplink_bps, s.latency_s) / transfer_time(b, s.uplink_bps, s.latency_s);
    assert!((ratio - 4.0).abs() < 1e-2);
}

#[test]
fn matrix_b_concentrates_faster_than_a() {
    let (reports, _) = run_experiment(&RunConfig::default()).unwrap();
    let (first, last) = (&reports[0], reports.last().unwrap());
    let grow_a = last.gini_a - first.gini_a;
    let grow_b = last.gini_b - first.gini_b;
    assert!(
        grow_b > grow_a,
        "gini A {:.3} -> {:.3}, gini B {:.3} -> {:.3}",
        first.gini_a,
        last.gini_a,
        first.gini_b,
        last.gini_b
    );
}
