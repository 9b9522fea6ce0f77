use std::path::Path;

use serde::{Deserialize, Serialize};

use super::runner::TrialRecord;
use crate::error::{Error, Result};
use crate::model::config_name;

/// Column order of `trials.csv`.
pub const TRIAL_COLUMNS: [&str; 14] = [
    "trial",
    "config_id",
    "reused",
    "frozen_prefix",
    "stop_epoch",
    "epoch_losses",
    "final_loss",
    "final_accuracy",
    "wall_seconds",
    "forward_macs",
    "backward_macs",
    "best_loss",
    "name",
    "auxiliary",
];

/// Five-number summary plus mean. Quartiles interpolate linearly between
/// order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub count: usize,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl DistributionStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() || values.iter().any(|v| v.is_nan()) {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(DistributionStats {
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
            count: v.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestConfig {
    pub config_id: String,
    pub nomenclature: String,
    pub name: String,
    /// Lowest validation loss reached in any epoch.
    pub loss: f64,
    pub epoch_losses: Vec<f64>,
}

/// Totals for one arm over the multi-conv-layer grid configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub trials: usize,
    pub total_seconds: f64,
    pub backward_macs: u64,
    pub early_stopped: usize,
    pub best: Option<BestConfig>,
    pub time: Option<DistributionStats>,
    pub loss: Option<DistributionStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub trials: usize,
    pub auxiliary_trials: usize,
    pub baseline: ArmSummary,
    pub reuse: ArmSummary,
    /// Reuse arm total time over baseline arm total time.
    pub time_ratio: Option<f64>,
    pub seconds_saved: f64,
    /// Best reuse loss over best baseline loss.
    pub loss_ratio: Option<f64>,
}

fn name_of(r: &TrialRecord) -> String {
    r.result
        .config_id
        .parse_config()
        .and_then(|c| config_name(&c, r.result.frozen_prefix))
        .map(|n| n.to_string())
        .unwrap_or_default()
}

fn arm(records: &[&TrialRecord]) -> Result<ArmSummary> {
    let mut best: Option<&TrialRecord> = None;
    for &r in records {
        if best.is_none_or(|b| r.result.best_loss() < b.result.best_loss()) {
            best = Some(r);
        }
    }
    let best = best
        .map(|r| -> Result<BestConfig> {
            Ok(BestConfig {
                config_id: r.result.config_id.to_string(),
                nomenclature: r.result.config_id.parse_config()?.nomenclature(),
                name: name_of(r),
                loss: r.result.best_loss(),
                epoch_losses: r.result.val_losses.clone(),
            })
        })
        .transpose()?;
    let times: Vec<f64> = records.iter().map(|r| r.result.wall_time_seconds).collect();
    let losses: Vec<f64> = records.iter().map(|r| r.result.best_loss()).collect();
    Ok(ArmSummary {
        trials: records.len(),
        total_seconds: times.iter().sum(),
        backward_macs: records.iter().map(|r| r.result.ops.backward_macs).sum(),
        early_stopped: records.iter().filter(|r| r.result.early_stopped(r.max_epochs)).count(),
        best,
        time: DistributionStats::of(&times),
        loss: DistributionStats::of(&losses),
    })
}

/// Compares the two arms over non-auxiliary trials with more than one conv
/// layer, the only configurations that have a reuse counterpart.
pub fn summarize(records: &[TrialRecord]) -> Result<RunSummary> {
    let multi = |reused: bool| -> Result<Vec<&TrialRecord>> {
        let mut out = Vec::new();
        for r in records.iter().filter(|r| !r.auxiliary && r.result.reused == reused) {
            if r.result.config_id.parse_config()?.conv_layers > 1 {
                out.push(r);
            }
        }
        Ok(out)
    };
    let baseline = arm(&multi(false)?)?;
    let reuse = arm(&multi(true)?)?;
    let time_ratio = (baseline.trials > 0 && reuse.trials > 0).then(|| reuse.total_seconds / baseline.total_seconds);
    let loss_ratio = match (&baseline.best, &reuse.best) {
        (Some(b), Some(r)) => Some(r.loss / b.loss),
        _ => None,
    };
    Ok(RunSummary {
        trials: records.len(),
        auxiliary_trials: records.iter().filter(|r| r.auxiliary).count(),
        seconds_saved: if reuse.trials > 0 {
            baseline.total_seconds - reuse.total_seconds
        } else {
            0.0
        },
        baseline,
        reuse,
        time_ratio,
        loss_ratio,
    })
}

fn join_losses(losses: &[f64]) -> String {
    losses.iter().map(|l| format!("{l:.6}")).collect::<Vec<_>>().join(";")
}

/// Writes `trials.csv`, `epoch_curves.csv`, `distribution.csv` and
/// `summary.json` into `out_dir`.
pub fn write_reports(records: &[TrialRecord], out_dir: &Path) -> Result<RunSummary> {
    if records.is_empty() {
        return Err(Error::invalid("report", "no completed trials"));
    }
    std::fs::create_dir_all(out_dir)?;

    let mut w = csv::Writer::from_path(out_dir.join("trials.csv"))?;
    w.write_record(TRIAL_COLUMNS)?;
    for r in records {
        let t = &r.result;
        w.write_record([
            r.key.to_string(),
            t.config_id.to_string(),
            t.reused.to_string(),
            t.frozen_prefix.to_string(),
            t.stop_epoch.to_string(),
            join_losses(&t.val_losses),
            format!("{:.6}", t.final_loss()),
            format!("{:.4}", t.final_accuracy()),
            format!("{:.3}", t.wall_time_seconds),
            t.ops.forward_macs.to_string(),
            t.ops.backward_macs.to_string(),
            format!("{:.6}", t.best_loss()),
            name_of(r),
            r.auxiliary.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out_dir.join("epoch_curves.csv"))?;
    w.write_record(["trial", "name", "epoch", "val_loss", "val_accuracy"])?;
    for r in records {
        let name = name_of(r);
        for (e, (l, a)) in r.result.val_losses.iter().zip(&r.result.val_accuracies).enumerate() {
            w.write_record([
                r.key.to_string(),
                name.clone(),
                (e + 1).to_string(),
                format!("{l:.6}"),
                format!("{a:.4}"),
            ])?;
        }
    }
    w.flush()?;

    let summary = summarize(records)?;
    let mut w = csv::Writer::from_path(out_dir.join("distribution.csv"))?;
    w.write_record(["arm", "metric", "count", "min", "q1", "median", "q3", "max", "mean"])?;
    for (arm_name, arm) in [("baseline", &summary.baseline), ("reuse", &summary.reuse)] {
        for (metric, stats) in [("wall_seconds", arm.time), ("best_loss", arm.loss)] {
            if let Some(s) = stats {
                let mut row = vec![arm_name.to_string(), metric.to_string(), s.count.to_string()];
                row.extend([s.min, s.q1, s.median, s.q3, s.max, s.mean].map(|v| format!("{v:.6}")));
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;

    std::fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}
