use ceckd_bench::report::{read_rows, COLUMNS};
use ceckd_bench::workload::narrative;
use ceckd_bench::{run, run_concurrent, verify_prefix, visit_scaling, BenchConfig, BenchError, ConfigError};
use ceckd_bench::{EngineKind, QueryMix, RuleSet};

fn small(engine: EngineKind) -> BenchConfig {
    BenchConfig {
        engine,
        events: 300,
        repeats: 1,
        rules: RuleSet::Clinical,
        ..BenchConfig::default()
    }
}

#[test]
fn smoke_run_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ceckd.csv");
    let cfg = BenchConfig {
        output: Some(out.clone()),
        query_mix: QueryMix::UnboundHoldsAt,
        ..small(EngineKind::Ceckd)
    };
    let report = run(&cfg).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert_eq!(report.rows.last().unwrap().event_index, 300);
    assert!(report.summary.final_mvis > 0);
    assert!(report.summary.final_bytes > 0);
    assert_eq!(read_rows(&out).unwrap(), report.rows);
    let header = std::fs::read_to_string(&out).unwrap();
    assert_eq!(header.lines().next().unwrap(), COLUMNS.join(","));
}

#[test]
fn engines_agree_on_alerts_and_sizes() {
    let naive = run(&small(EngineKind::Naive)).unwrap();
    let kd = run(&small(EngineKind::Ceckd)).unwrap();
    assert_eq!(naive.summary.alerts, kd.summary.alerts);
    assert_eq!(naive.summary.final_mvis, kd.summary.final_mvis);
    let mvis = |r: &ceckd_bench::BenchReport| r.rows.iter().map(|x| x.mvis).collect::<Vec<_>>();
    assert_eq!(mvis(&naive), mvis(&kd));
}

#[test]
fn single_thread_concurrent_matches_run() {
    for engine in [EngineKind::Naive, EngineKind::Ceckd] {
        let cfg = small(engine);
        let seq = run(&cfg).unwrap();
        let conc = run_concurrent(&BenchConfig { threads: 1, ..cfg }).unwrap();
        assert_eq!(conc.alerts, seq.summary.alerts, "{engine}");
        assert_eq!(conc.summed_bytes, seq.summary.final_bytes, "{engine}");
    }
}

#[test]
fn concurrent_sums_over_threads() {
    let cfg = BenchConfig { threads: 3, ..small(EngineKind::Ceckd) };
    let r = run_concurrent(&cfg).unwrap();
    assert_eq!(r.threads, 3);
    assert!(r.throughput_eps.mean > 0.0);
    let one = run_concurrent(&BenchConfig { threads: 1, ..cfg }).unwrap();
    assert!(r.summed_bytes > one.summed_bytes);
}

#[test]
fn prefix_verification_passes() {
    verify_prefix(&narrative(400, 9).unwrap()).unwrap();
}

#[test]
fn visits_grow_slower_than_scans() {
    let pts = visit_scaling(&[200, 1600], 200, RuleSet::Observations, 3).unwrap();
    assert_eq!(pts.len(), 2);
    assert!(pts[1].mvis >= 1600);
    let scans = pts[1].naive_scans / pts[0].naive_scans;
    let visits = pts[1].kd_visits / pts[0].kd_visits;
    assert!(scans > 4.0, "{pts:?}");
    assert!(visits < scans / 2.0, "{pts:?}");
}

#[test]
fn bad_configs_are_rejected() {
    let bad = BenchConfig { repeats: 0, ..BenchConfig::default() };
    assert!(matches!(run(&bad), Err(BenchError::Config(ConfigError::NoRepeats))));
    let bad = BenchConfig { events: 10, ..BenchConfig::default() };
    assert!(matches!(run(&bad), Err(BenchError::Config(ConfigError::TooFewEvents(10)))));
    let bad = BenchConfig { threads: 0, ..BenchConfig::default() };
    assert!(matches!(run_concurrent(&bad), Err(BenchError::Config(ConfigError::NoThreads))));
}
