use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::DatasetSplit;
use crate::error::Result;
use crate::model::{shape_plan, ConfigName, NetworkConfig};
use crate::reuse::{ReusePlan, WeightArchive};
use crate::trainer::{train_trial, TrialResult, TrialSpec};

/// Hidden widths used for the first `n` fully connected layers of a named
/// architecture.
pub const NAMED_HIDDEN_UNITS: [usize; 3] = [500, 250, 50];

/// Hyperparameters shared by every architecture in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareBase {
    pub learning_rate: f64,
    pub filters: usize,
    pub filter_size: usize,
    pub batch_size: usize,
}

impl Default for CompareBase {
    fn default() -> Self {
        CompareBase {
            learning_rate: 0.001,
            filters: 18,
            filter_size: 3,
            batch_size: 30,
        }
    }
}

impl CompareBase {
    pub fn config(&self, name: &ConfigName) -> Result<NetworkConfig> {
        let fc = name.fc_layers;
        if fc > NAMED_HIDDEN_UNITS.len() {
            return Err(crate::Error::invalid(
                "compare",
                format!("{name}: at most {} fully connected layers", NAMED_HIDDEN_UNITS.len()),
            ));
        }
        let c = NetworkConfig {
            conv_layers: name.conv_layers,
            learning_rate: self.learning_rate,
            filters: self.filters,
            filter_size: self.filter_size,
            hidden_units: NAMED_HIDDEN_UNITS[..fc].to_vec(),
            batch_size: self.batch_size,
        };
        c.validate()?;
        shape_plan(&c)?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub name: String,
    pub result: TrialResult,
}

/// Trains each named architecture for exactly `epochs` epochs and returns
/// its validation-loss curve. A name with reused layers trains its source
/// (one conv layer fewer) as a baseline first unless `archive` already has it.
pub fn compare(
    names: &[ConfigName],
    base: &CompareBase,
    epochs: usize,
    data: &DatasetSplit,
    archive: &WeightArchive,
    global_seed: u64,
) -> Result<Vec<CurveSeries>> {
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let target = base.config(name)?;
        let spec = if name.reused == 0 {
            TrialSpec::baseline(target, global_seed)
        } else {
            let source = target.with_conv_layers(target.conv_layers - 1);
            let plan = ReusePlan::new(target, source.clone(), name.reused)?;
            if !archive.contains(&source.id()) {
                log::info!("training source baseline {} for {name}", source.id());
                train_trial(
                    &TrialSpec::baseline(source, global_seed).with_epochs(epochs, 0),
                    data,
                    archive,
                )?;
            }
            TrialSpec::reusing(plan, global_seed)
        };
        let result = train_trial(&spec.with_epochs(epochs, 0), data, archive)?;
        log::info!("{name}: {:?}", result.val_losses);
        out.push(CurveSeries {
            name: name.to_string(),
            result,
        });
    }
    Ok(out)
}

/// Long-format curve table, one row per name and epoch.
pub fn write_curves(series: &[CurveSeries], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["name", "epoch", "val_loss", "val_accuracy", "wall_seconds"])?;
    for s in series {
        for (e, (l, a)) in s.result.val_losses.iter().zip(&s.result.val_accuracies).enumerate() {
            w.write_record([
                s.name.clone(),
                (e + 1).to_string(),
                format!("{l:.6}"),
                format!("{a:.4}"),
                format!("{:.3}", s.result.wall_time_seconds),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
