//! Reuse plans, shape compatibility and parameter transplantation.
//!
//! A source network R' with ω conv layers donates its first ζ conv stages to
//! a target R with θ > ω conv layers. The donated stages sit at the start of
//! R, keep their weights and biases bit-for-bit, and are frozen.

mod archive;

pub use archive::{RecordMeta, RecordStage, StageKind, WeightArchive, WeightRecord};

use crate::error::{Error, Result};
use crate::model::{shape_plan, ConfigId, Network, NetworkConfig, ShapePlan, StageShape};

#[derive(Debug, Clone, PartialEq)]
pub struct ReusePlan {
    pub target: NetworkConfig,
    pub source: NetworkConfig,
    /// ζ: how many leading conv stages are copied and frozen.
    pub reused_count: usize,
}

impl ReusePlan {
    /// Validates `ω < θ` and `0 < ζ ≤ ω`, and that the shapes chain.
    pub fn new(target: NetworkConfig, source: NetworkConfig, reused_count: usize) -> Result<Self> {
        let (omega, theta) = (source.conv_layers, target.conv_layers);
        if omega >= theta {
            return Err(Error::invalid(
                "reuse plan",
                format!("source has {omega} conv layers, target only {theta}"),
            ));
        }
        if reused_count == 0 || reused_count > omega {
            return Err(Error::invalid(
                "reuse plan",
                format!("reused count {reused_count} outside 1..={omega}"),
            ));
        }
        check_shape_compat(&shape_plan(&source)?, &target, reused_count)?;
        Ok(ReusePlan {
            target,
            source,
            reused_count,
        })
    }

    pub fn target_id(&self) -> ConfigId {
        self.target.id()
    }

    pub fn source_id(&self) -> ConfigId {
        self.source.id()
    }
}

/// The standard plan: the source is the same configuration with one conv
/// layer fewer, and all of its conv layers are reused.
pub fn plan_reuse(target: &NetworkConfig) -> Result<ReusePlan> {
    if target.conv_layers <= 1 {
        return Err(Error::NoReuse(target.id().to_string()));
    }
    let source = target.with_conv_layers(target.conv_layers - 1);
    let reused = source.conv_layers;
    ReusePlan::new(target.clone(), source, reused)
}

fn conv_shapes(s: &StageShape) -> ([usize; 3], [usize; 3], usize) {
    match *s {
        StageShape::Conv {
            input, output, kernel, ..
        } => (input, output, kernel),
        StageShape::Dense { .. } => unreachable!("conv prefix only"),
    }
}

/// Checks that the first `reused` conv stages of the source fit the target:
/// identical stage geometry for the reused stages, and the last reused output
/// matching the input of the first trainable target stage.
pub fn check_shape_compat(source: &ShapePlan, target: &NetworkConfig, reused: usize) -> Result<()> {
    if reused == 0 {
        return Ok(());
    }
    let target_plan = shape_plan(target)?;
    if reused > source.conv_layers || reused >= target_plan.conv_layers {
        return Err(Error::invalid(
            "check_shape_compat",
            format!(
                "cannot reuse {reused} stages from {} into {} conv layers",
                source.conv_layers, target_plan.conv_layers
            ),
        ));
    }
    for i in 0..reused {
        let (s_in, s_out, s_k) = conv_shapes(&source.stages[i]);
        let (t_in, t_out, t_k) = conv_shapes(&target_plan.stages[i]);
        if s_in != t_in || s_k != t_k || s_out != t_out {
            return Err(Error::IncompatibleShapes {
                source_shape: s_out.to_vec(),
                target_shape: t_out.to_vec(),
            });
        }
    }
    let (_, last_out, _) = conv_shapes(&source.stages[reused - 1]);
    let (next_in, _, _) = conv_shapes(&target_plan.stages[reused]);
    if last_out != next_in {
        return Err(Error::IncompatibleShapes {
            source_shape: last_out.to_vec(),
            target_shape: next_in.to_vec(),
        });
    }
    Ok(())
}

/// Copies conv stages `1..=reused` of `record` into `target` and freezes them.
/// On error `target` is left untouched.
pub fn transplant(record: &WeightRecord, target: &mut Network, reused: usize) -> Result<()> {
    let source_config = record.config_id.parse_config()?;
    check_shape_compat(&shape_plan(&source_config)?, target.config(), reused)?;
    let donated: Vec<_> = record.conv_stages().take(reused).collect();
    if donated.len() != reused {
        return Err(Error::invalid(
            "transplant",
            format!("record {} has only {} conv stages", record.config_id, donated.len()),
        ));
    }
    for (src, dst) in donated.iter().zip(target.conv_stages()) {
        if src.weight.shape() != dst.weight.shape() || src.bias.shape() != dst.bias.shape() {
            return Err(Error::IncompatibleShapes {
                source_shape: src.weight.shape().to_vec(),
                target_shape: dst.weight.shape().to_vec(),
            });
        }
    }
    for (src, dst) in donated.into_iter().zip(target.conv_stages_mut()) {
        dst.weight = src.weight.clone();
        dst.bias = src.bias.clone();
    }
    target.set_frozen_prefix(reused)
}
