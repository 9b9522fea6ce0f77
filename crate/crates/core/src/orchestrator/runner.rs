use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crossbeam_channel::unbounded;
use serde::{Deserialize, Serialize};

use super::schedule::{Schedule, TrialKey, TrialKind, TrialNode};
use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::reuse::WeightArchive;
use crate::trainer::{train_trial, TrialResult, TrialSpec, DEFAULT_MAX_EPOCHS, DEFAULT_PATIENCE};

pub const RESULTS_FILE: &str = "results.jsonl";
pub const LEDGER_FILE: &str = "ledger.csv";
pub const ARCHIVE_DIR: &str = "weights";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub workers: usize,
    pub global_seed: u64,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            workers: 1,
            global_seed: 0,
            max_epochs: DEFAULT_MAX_EPOCHS,
            patience: DEFAULT_PATIENCE,
        }
    }
}

/// One line of the results stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub key: TrialKey,
    pub auxiliary: bool,
    pub max_epochs: usize,
    pub result: TrialResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LedgerStatus {
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub key: TrialKey,
    pub status: LedgerStatus,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    /// Completed trials in schedule order, including ones resumed from an
    /// earlier run.
    pub records: Vec<TrialRecord>,
    pub resumed: usize,
    pub ledger: Vec<LedgerEntry>,
}

impl RunOutcome {
    pub fn failed(&self) -> usize {
        self.ledger.iter().filter(|e| e.status == LedgerStatus::Failed).count()
    }

    pub fn skipped(&self) -> usize {
        self.ledger.iter().filter(|e| e.status == LedgerStatus::Skipped).count()
    }
}

/// Reads a results stream, ignoring a torn final line.
pub fn read_results(path: &Path) -> Result<Vec<TrialRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let lines: Vec<String> = BufReader::new(File::open(path)?)
        .lines()
        .collect::<std::io::Result<_>>()?;
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(e) if i == last => log::warn!("ignoring incomplete last line of {}: {e}", path.display()),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

fn spec_for(node: &TrialNode, opts: &RunOptions) -> TrialSpec {
    let spec = match &node.kind {
        TrialKind::Baseline => TrialSpec::baseline(node.config.clone(), opts.global_seed),
        TrialKind::Reuse(plan) => TrialSpec::reusing(plan.clone(), opts.global_seed),
    };
    spec.with_epochs(opts.max_epochs, opts.patience)
}

/// Executes a schedule on a fixed pool of worker threads.
///
/// The calling thread coordinates: it hands ready trials to workers, appends
/// each finished trial to `<out_dir>/results.jsonl`, and releases dependents.
/// Trials already in the results file (and, for baselines, in the weight
/// archive) are not run again. A failed trial marks its dependents skipped
/// and the run carries on.
pub fn run_schedule(schedule: &Schedule, data: &DatasetSplit, out_dir: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    if opts.workers == 0 {
        return Err(Error::invalid("run", "worker count must be at least 1"));
    }
    schedule.topological_order()?;
    std::fs::create_dir_all(out_dir)?;
    let archive = WeightArchive::open(out_dir.join(ARCHIVE_DIR))?;
    let results_path = out_dir.join(RESULTS_FILE);

    let previous: HashMap<TrialKey, TrialRecord> = read_results(&results_path)?
        .into_iter()
        .map(|r| (r.key.clone(), r))
        .collect();
    let mut results_file = OpenOptions::new().create(true).append(true).open(&results_path)?;

    let n = schedule.nodes.len();
    let mut done: Vec<Option<TrialRecord>> = vec![None; n];
    let mut resumed = 0;
    for (i, node) in schedule.nodes.iter().enumerate() {
        if let Some(r) = previous.get(&node.key()) {
            let weights_ok = node.is_reuse() || archive.contains(&node.config.id());
            if weights_ok {
                done[i] = Some(r.clone());
                resumed += 1;
            }
        }
    }

    let mut dependents = vec![Vec::new(); n];
    let mut waiting: Vec<usize> = vec![0; n];
    for (i, node) in schedule.nodes.iter().enumerate() {
        for &d in &node.deps {
            dependents[d].push(i);
            if done[d].is_none() {
                waiting[i] += 1;
            }
        }
    }

    let mut ledger: Vec<LedgerEntry> = Vec::new();
    let mut resolved: HashSet<usize> = (0..n).filter(|&i| done[i].is_some()).collect();
    let ready: Vec<usize> = (0..n).filter(|&i| done[i].is_none() && waiting[i] == 0).collect();
    let started = Instant::now();

    std::thread::scope(|scope| -> Result<()> {
        let (job_tx, job_rx) = unbounded::<(usize, TrialSpec)>();
        let (res_tx, res_rx) = unbounded::<(usize, std::result::Result<TrialResult, String>)>();
        for _ in 0..opts.workers {
            let (job_rx, res_tx, archive) = (job_rx.clone(), res_tx.clone(), &archive);
            scope.spawn(move || {
                for (i, spec) in job_rx {
                    let outcome = catch_unwind(AssertUnwindSafe(|| train_trial(&spec, data, archive)))
                        .unwrap_or_else(|p| {
                            let msg = p
                                .downcast_ref::<String>()
                                .cloned()
                                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                                .unwrap_or_else(|| "panic".into());
                            Err(Error::invalid("trial", format!("worker panicked: {msg}")))
                        })
                        .map_err(|e| e.to_string());
                    if res_tx.send((i, outcome)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(res_tx);

        let mut in_flight = 0usize;
        let dispatch = |i: usize, in_flight: &mut usize| {
            job_tx
                .send((i, spec_for(&schedule.nodes[i], opts)))
                .expect("workers alive");
            *in_flight += 1;
        };
        for i in ready {
            dispatch(i, &mut in_flight);
        }

        while in_flight > 0 {
            let (i, outcome) = res_rx.recv().expect("workers alive while trials in flight");
            in_flight -= 1;
            resolved.insert(i);
            let node = &schedule.nodes[i];
            match outcome {
                Ok(result) => {
                    log::info!(
                        "[{}/{} {:.0}s] {} stop_epoch={} loss={:.4} {:.1}s",
                        resolved.len(),
                        n,
                        started.elapsed().as_secs_f64(),
                        node.key(),
                        result.stop_epoch,
                        result.final_loss(),
                        result.wall_time_seconds
                    );
                    let record = TrialRecord {
                        key: node.key(),
                        auxiliary: node.auxiliary,
                        max_epochs: opts.max_epochs,
                        result,
                    };
                    writeln!(results_file, "{}", serde_json::to_string(&record)?)?;
                    results_file.flush()?;
                    done[i] = Some(record);
                    for &d in &dependents[i] {
                        waiting[d] -= 1;
                        if waiting[d] == 0 && !resolved.contains(&d) {
                            dispatch(d, &mut in_flight);
                        }
                    }
                }
                Err(reason) => {
                    log::error!("{} failed: {reason}", node.key());
                    ledger.push(LedgerEntry {
                        key: node.key(),
                        status: LedgerStatus::Failed,
                        reason,
                    });
                    let mut stack = dependents[i].clone();
                    while let Some(d) = stack.pop() {
                        if resolved.insert(d) {
                            ledger.push(LedgerEntry {
                                key: schedule.nodes[d].key(),
                                status: LedgerStatus::Skipped,
                                reason: format!("dependency {} failed", node.key()),
                            });
                            stack.extend(&dependents[d]);
                        }
                    }
                }
            }
        }
        drop(job_tx);
        Ok(())
    })?;

    write_ledger(&out_dir.join(LEDGER_FILE), &ledger)?;
    Ok(RunOutcome {
        records: done.into_iter().flatten().collect(),
        resumed,
        ledger,
    })
}

fn write_ledger(path: &Path, ledger: &[LedgerEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["trial", "status", "reason"])?;
    for e in ledger {
        let status = match e.status {
            LedgerStatus::Failed => "failed",
            LedgerStatus::Skipped => "skipped",
        };
        w.write_record([e.key.as_str(), status, &e.reason])?;
    }
    w.flush()?;
    Ok(())
}

/// Output directory layout of a run.
pub fn results_path(out_dir: &Path) -> PathBuf {
    out_dir.join(RESULTS_FILE)
}
