mod common;

use std::path::Path;

use convreuse::orchestrator::{
    build_schedule, read_results, run_schedule, LedgerStatus, Mode, RunOptions, Schedule, TrialKind, TrialNode,
    TrialRecord, LEDGER_FILE, RESULTS_FILE,
};
use convreuse::reuse::ReusePlan;
use convreuse::NetworkConfig;

fn grid() -> Vec<NetworkConfig> {
    let mut out = Vec::new();
    for conv in 1..=3 {
        for hidden in [&[50][..], &[250, 50][..]] {
            out.push(common::config(conv, 3, hidden, 25));
        }
    }
    out
}

fn opts(workers: usize) -> RunOptions {
    RunOptions {
        workers,
        global_seed: 5,
        max_epochs: 2,
        patience: 1,
    }
}

/// Everything except wall-clock time.
fn comparable(records: &[TrialRecord]) -> Vec<String> {
    let mut v: Vec<String> = records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.result.wall_time_seconds = 0.0;
            serde_json::to_string(&r).unwrap()
        })
        .collect();
    v.sort();
    v
}

fn lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn worker_count_does_not_change_results_and_resume_skips_done_trials() {
    let data = common::split(150, 50, 8);
    let schedule = build_schedule(&grid(), Mode::Both, None).unwrap();
    assert_eq!((schedule.baseline_count(), schedule.reuse_count()), (6, 4));

    let serial = tempfile::tempdir().unwrap();
    let parallel = tempfile::tempdir().unwrap();
    let a = run_schedule(&schedule, &data, serial.path(), &opts(1)).unwrap();
    let b = run_schedule(&schedule, &data, parallel.path(), &opts(3)).unwrap();
    assert_eq!(a.records.len(), 10);
    assert!(a.ledger.is_empty() && b.ledger.is_empty());
    assert_eq!(comparable(&a.records), comparable(&b.records));
    // the results stream and the returned records agree
    assert_eq!(
        comparable(&read_results(&serial.path().join(RESULTS_FILE)).unwrap()),
        comparable(&a.records)
    );

    // a torn trailing line from a killed run is tolerated
    let results = serial.path().join(RESULTS_FILE);
    let mut text = std::fs::read_to_string(&results).unwrap();
    text.push_str("{\"key\":\"c3_lr0.0");
    std::fs::write(&results, text).unwrap();
    let again = run_schedule(&schedule, &data, serial.path(), &opts(2)).unwrap();
    assert_eq!(again.resumed, 10);
    assert_eq!(comparable(&again.records), comparable(&a.records));
    assert_eq!(lines(&results), 11);
}

#[test]
fn lost_baseline_weights_are_retrained_on_resume() {
    let data = common::split(100, 40, 9);
    let configs = vec![common::config(1, 3, &[50], 25), common::config(2, 3, &[50], 25)];
    let schedule = build_schedule(&configs, Mode::Both, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_schedule(&schedule, &data, dir.path(), &opts(1)).unwrap();
    std::fs::remove_file(dir.path().join("weights").join(format!("{}.cnnw", configs[0].id()))).unwrap();
    let again = run_schedule(&schedule, &data, dir.path(), &opts(1)).unwrap();
    assert_eq!(again.resumed, 2);
    assert_eq!(again.records.len(), 3);
}

#[test]
fn failed_baseline_skips_its_dependents() {
    let data = common::split(60, 20, 10);
    let bad = common::config(4, 3, &[50], 20); // 4 conv stages do not fit 32x32
    let good = common::config(1, 3, &[50], 20);
    let reuse_target = common::config(5, 3, &[50], 20);
    let plan = ReusePlan {
        target: reuse_target.clone(),
        source: bad.clone(),
        reused_count: 4,
    };
    let schedule = Schedule {
        nodes: vec![
            TrialNode {
                config: bad,
                kind: TrialKind::Baseline,
                deps: vec![],
                auxiliary: false,
            },
            TrialNode {
                config: reuse_target,
                kind: TrialKind::Reuse(plan),
                deps: vec![0],
                auxiliary: false,
            },
            TrialNode {
                config: good,
                kind: TrialKind::Baseline,
                deps: vec![],
                auxiliary: false,
            },
        ],
        warnings: vec![],
    };
    let dir = tempfile::tempdir().unwrap();
    let out = run_schedule(&schedule, &data, dir.path(), &opts(2)).unwrap();
    assert_eq!(out.records.len(), 1);
    assert_eq!((out.failed(), out.skipped()), (1, 1));
    let skipped = out.ledger.iter().find(|e| e.status == LedgerStatus::Skipped).unwrap();
    assert!(skipped.key.as_str().ends_with("+reuse"));
    assert!(skipped.reason.contains("failed"));
    let ledger = std::fs::read_to_string(dir.path().join(LEDGER_FILE)).unwrap();
    assert_eq!(ledger.lines().count(), 3);
    assert!(ledger.contains("skipped") && ledger.contains("failed"));
}

#[test]
fn reuse_mode_runs_from_an_existing_archive() {
    let data = common::split(100, 40, 11);
    let configs = vec![common::config(1, 3, &[50], 25), common::config(2, 3, &[50], 25)];
    let dir = tempfile::tempdir().unwrap();
    let baseline = build_schedule(&configs, Mode::Baseline, None).unwrap();
    run_schedule(&baseline, &data, dir.path(), &opts(1)).unwrap();
    let archive = convreuse::reuse::WeightArchive::open(dir.path().join("weights")).unwrap();
    let reuse = build_schedule(&configs, Mode::Reuse, Some(&archive)).unwrap();
    assert_eq!((reuse.baseline_count(), reuse.reuse_count()), (0, 1));
    let out = run_schedule(&reuse, &data, dir.path(), &opts(1)).unwrap();
    assert_eq!(out.records.len(), 1);
    assert_eq!(out.records[0].result.frozen_prefix, 1);
}
