//! Single-trial training with optional layer reuse and early stopping.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{batches, validation_batches, DatasetSplit};
use crate::error::{Error, Result};
use crate::model::{build_network, ConfigId, Network, NetworkConfig};
use crate::ops::{softmax_xent, OpCounter};
use crate::reuse::{transplant, RecordMeta, ReusePlan, WeightArchive, WeightRecord};
use crate::seed::{fnv1a, mix};

pub const DEFAULT_MAX_EPOCHS: usize = 5;
pub const DEFAULT_PATIENCE: usize = 1;
/// A loss must beat the running minimum by more than this to count as progress.
pub const EARLY_STOP_TOLERANCE: f64 = 1e-4;
const EVAL_BATCH: usize = 250;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub config: NetworkConfig,
    pub reuse: Option<ReusePlan>,
    pub max_epochs: usize,
    pub patience: usize,
    /// Seeds weight initialization.
    pub seed: u64,
    /// Seeds the per-epoch shuffles. Shared by the baseline and reuse trials
    /// of one configuration so both see the same batches.
    pub shuffle_seed: u64,
}

/// `mix(global, fnv(config id), reuse flag)`.
pub fn trial_seed(global_seed: u64, id: &ConfigId, reuse: bool) -> u64 {
    mix(mix(global_seed, fnv1a(id.as_str().as_bytes())), reuse as u64)
}

fn shuffle_seed(global_seed: u64, id: &ConfigId) -> u64 {
    mix(global_seed ^ 0x0005_4aff_1e00, fnv1a(id.as_str().as_bytes()))
}

impl TrialSpec {
    pub fn baseline(config: NetworkConfig, global_seed: u64) -> Self {
        let id = config.id();
        TrialSpec {
            seed: trial_seed(global_seed, &id, false),
            shuffle_seed: shuffle_seed(global_seed, &id),
            config,
            reuse: None,
            max_epochs: DEFAULT_MAX_EPOCHS,
            patience: DEFAULT_PATIENCE,
        }
    }

    pub fn reusing(plan: ReusePlan, global_seed: u64) -> Self {
        let id = plan.target_id();
        TrialSpec {
            seed: trial_seed(global_seed, &id, true),
            shuffle_seed: shuffle_seed(global_seed, &id),
            config: plan.target.clone(),
            reuse: Some(plan),
            max_epochs: DEFAULT_MAX_EPOCHS,
            patience: DEFAULT_PATIENCE,
        }
    }

    pub fn with_epochs(mut self, max_epochs: usize, patience: usize) -> Self {
        self.max_epochs = max_epochs;
        self.patience = patience;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub config_id: ConfigId,
    pub reused: bool,
    pub frozen_prefix: usize,
    pub val_losses: Vec<f64>,
    pub val_accuracies: Vec<f64>,
    pub stop_epoch: usize,
    pub wall_time_seconds: f64,
    pub ops: OpCounter,
    pub train_examples_seen: u64,
}

impl TrialResult {
    pub fn final_loss(&self) -> f64 {
        *self.val_losses.last().expect("at least one epoch")
    }

    pub fn best_loss(&self) -> f64 {
        self.val_losses.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn final_accuracy(&self) -> f64 {
        *self.val_accuracies.last().expect("at least one epoch")
    }

    pub fn early_stopped(&self, max_epochs: usize) -> bool {
        self.stop_epoch < max_epochs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Stops once the latest `patience` losses have all failed to beat the
/// running minimum by more than [`EARLY_STOP_TOLERANCE`].
pub fn early_stop_check(history: &[f64], patience: usize) -> StopDecision {
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for &loss in history {
        if loss < best - EARLY_STOP_TOLERANCE {
            best = loss;
            stale = 0;
        } else {
            stale += 1;
        }
    }
    if patience > 0 && stale >= patience {
        StopDecision::Stop
    } else {
        StopDecision::Continue
    }
}

/// Epochs actually run when the validation losses come out as `losses`.
pub fn stop_epoch_for(losses: &[f64], max_epochs: usize, patience: usize) -> usize {
    for epoch in 1..=max_epochs.min(losses.len()) {
        if early_stop_check(&losses[..epoch], patience) == StopDecision::Stop {
            return epoch;
        }
    }
    max_epochs.min(losses.len())
}

/// Mean cross-entropy and accuracy over the validation set. Forward only.
pub fn evaluate(net: &mut Network, data: &DatasetSplit, batch_size: usize) -> Result<(f64, f64)> {
    if data.validation.is_empty() {
        return Err(Error::EmptySplit("validation set is empty".into()));
    }
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for batch in validation_batches(data, batch_size) {
        let logits = net.forward(&batch.images)?;
        let (loss, _) = softmax_xent(&logits, &batch.labels)?;
        loss_sum += loss * batch.labels.len() as f64;
        for (row, &label) in logits.data().chunks_exact(logits.shape()[1]).zip(&batch.labels) {
            let argmax = row
                .iter()
                .enumerate()
                .fold(0, |best, (i, &v)| if v > row[best] { i } else { best });
            correct += (argmax == label) as usize;
        }
    }
    let n = data.validation.len() as f64;
    Ok((loss_sum / n, correct as f64 / n))
}

pub struct TrialOutcome {
    pub result: TrialResult,
    pub network: Network,
}

/// Runs one trial and returns the trained network alongside its result.
pub fn run_trial(spec: &TrialSpec, data: &DatasetSplit, archive: &WeightArchive) -> Result<TrialOutcome> {
    if spec.max_epochs == 0 {
        return Err(Error::invalid("train_trial", "max_epochs must be positive"));
    }
    let mut net = build_network(&spec.config, spec.seed)?;
    if let Some(plan) = &spec.reuse {
        if plan.target != spec.config {
            return Err(Error::invalid(
                "train_trial",
                "reuse plan targets a different configuration",
            ));
        }
        let source = plan.source_id();
        let record = archive.load(&source).map_err(|e| match e {
            Error::MissingRecord(id) => Error::MissingDependency(format!("baseline weights for {id}")),
            other => other,
        })?;
        transplant(&record, &mut net, plan.reused_count)?;
    }
    net.reset_counter();

    let lr = spec.config.learning_rate as f32;
    let mut losses = Vec::with_capacity(spec.max_epochs);
    let mut accuracies = Vec::with_capacity(spec.max_epochs);
    let mut seen = 0u64;
    let start = Instant::now();
    for epoch in 0..spec.max_epochs {
        for batch in batches(data, spec.config.batch_size, epoch, spec.shuffle_seed) {
            let logits = net.forward_train(&batch.images)?;
            let (_, dlogits) = softmax_xent(&logits, &batch.labels)?;
            net.backward(&dlogits)?;
            net.sgd_step(lr)?;
            seen += batch.labels.len() as u64;
        }
        let (loss, acc) = evaluate(&mut net, data, EVAL_BATCH)?;
        if !loss.is_finite() {
            return Err(Error::invalid(
                "train_trial",
                format!("validation loss diverged at epoch {}", epoch + 1),
            ));
        }
        losses.push(loss);
        accuracies.push(acc);
        if early_stop_check(&losses, spec.patience) == StopDecision::Stop {
            break;
        }
    }
    let wall = start.elapsed().as_secs_f64();

    let result = TrialResult {
        config_id: spec.config.id(),
        reused: spec.reuse.is_some(),
        frozen_prefix: net.frozen_prefix(),
        stop_epoch: losses.len(),
        val_losses: losses,
        val_accuracies: accuracies,
        wall_time_seconds: wall.max(f64::MIN_POSITIVE),
        ops: net.counter(),
        train_examples_seen: seen,
    };
    if spec.reuse.is_none() && !archive.contains(&result.config_id) {
        let meta = RecordMeta {
            epochs_run: result.stop_epoch,
            final_val_loss: result.final_loss(),
            seed: spec.seed,
        };
        archive.save(&WeightRecord::from_network(&net, meta))?;
    }
    Ok(TrialOutcome { result, network: net })
}

/// Trains one trial. Baseline trials store their weights in `archive`;
/// reuse trials read their source's weights from it.
pub fn train_trial(spec: &TrialSpec, data: &DatasetSplit, archive: &WeightArchive) -> Result<TrialResult> {
    run_trial(spec, data, archive).map(|o| o.result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stop_sequences() {
        let improving = [1.16, 1.03, 0.97, 0.96, 0.90];
        for n in 1..=5 {
            assert_eq!(early_stop_check(&improving[..n], 1), StopDecision::Continue);
        }
        assert_eq!(stop_epoch_for(&improving, 5, 1), 5);
        let plateau = [0.93, 0.85, 0.85, 0.86, 0.87];
        assert_eq!(early_stop_check(&plateau[..2], 1), StopDecision::Continue);
        assert_eq!(early_stop_check(&plateau[..3], 1), StopDecision::Stop);
        assert_eq!(stop_epoch_for(&plateau, 5, 1), 3);
        assert_eq!(early_stop_check(&[0.9], 1), StopDecision::Continue);
    }

    #[test]
    fn tolerance_and_patience() {
        assert_eq!(early_stop_check(&[1.0, 0.99995], 1), StopDecision::Stop);
        assert_eq!(early_stop_check(&[1.0, 0.9998], 1), StopDecision::Continue);
        assert_eq!(early_stop_check(&[1.0, 1.1], 2), StopDecision::Continue);
        assert_eq!(early_stop_check(&[1.0, 1.1, 1.05], 2), StopDecision::Stop);
        assert_eq!(stop_epoch_for(&[0.93, 0.85, 0.85, 0.86, 0.87], 5, 5), 5);
    }

    #[test]
    fn seeds_differ_by_arm_and_config() {
        let a: ConfigId = "c2_lr0.01_f18_k3_h1_u250_b30".parse().unwrap();
        let b: ConfigId = "c3_lr0.01_f18_k3_h1_u250_b30".parse().unwrap();
        assert_ne!(trial_seed(1, &a, false), trial_seed(1, &a, true));
        assert_ne!(trial_seed(1, &a, false), trial_seed(1, &b, false));
        assert_ne!(trial_seed(1, &a, false), trial_seed(2, &a, false));
        assert_eq!(trial_seed(7, &a, true), trial_seed(7, &a, true));
    }
}
