use super::NetworkConfig;
use crate::error::{Error, Result};
use crate::ops::conv_output_hw;

pub const INPUT_SHAPE: [usize; 3] = [3, 32, 32];
pub const NUM_CLASSES: usize = 10;

/// Per-example shapes of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageShape {
    /// conv → ReLU → 2x2 max-pool. `conv_out` is the pre-pool shape.
    Conv {
        input: [usize; 3],
        conv_out: [usize; 3],
        output: [usize; 3],
        kernel: usize,
    },
    Dense {
        input: usize,
        output: usize,
    },
}

impl StageShape {
    /// Forward multiply-accumulates for one example.
    pub fn forward_macs(&self) -> u64 {
        match *self {
            StageShape::Conv {
                input,
                conv_out,
                kernel,
                ..
            } => (conv_out[0] * input[0] * kernel * kernel * conv_out[1] * conv_out[2]) as u64,
            StageShape::Dense { input, output } => (input * output) as u64,
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            StageShape::Conv {
                input,
                conv_out,
                kernel,
                ..
            } => conv_out[0] * input[0] * kernel * kernel + conv_out[0],
            StageShape::Dense { input, output } => input * output + output,
        }
    }
}

/// The chain of stage shapes for a configuration on 3x32x32 input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapePlan {
    pub stages: Vec<StageShape>,
    pub conv_layers: usize,
}

/// Computes the shape chain, failing if any intermediate dimension vanishes.
pub fn shape_plan(config: &NetworkConfig) -> Result<ShapePlan> {
    config.validate()?;
    let mut stages = Vec::with_capacity(config.conv_layers + config.hidden_layers() + 1);
    let [mut c, mut h, mut w] = INPUT_SHAPE;
    let k = config.filter_size;
    for i in 0..config.conv_layers {
        let (ho, wo) = conv_output_hw(h, w, k)
            .filter(|&(ho, wo)| ho >= 2 && wo >= 2)
            .ok_or_else(|| Error::Infeasible {
                stage: i + 1,
                detail: format!("a non-positive pooled size from {c}x{h}x{w} with {k}x{k} kernels"),
            })?;
        let output = [config.filters, ho / 2, wo / 2];
        stages.push(StageShape::Conv {
            input: [c, h, w],
            conv_out: [config.filters, ho, wo],
            output,
            kernel: k,
        });
        [c, h, w] = output;
    }
    let mut width = c * h * w;
    for &units in config.hidden_units.iter().chain(std::iter::once(&NUM_CLASSES)) {
        stages.push(StageShape::Dense {
            input: width,
            output: units,
        });
        width = units;
    }
    Ok(ShapePlan {
        stages,
        conv_layers: config.conv_layers,
    })
}

impl ShapePlan {
    pub fn conv_stages(&self) -> &[StageShape] {
        &self.stages[..self.conv_layers]
    }

    pub fn dense_stages(&self) -> &[StageShape] {
        &self.stages[self.conv_layers..]
    }

    /// Width of the flattened conv output feeding the first dense stage.
    pub fn flatten_width(&self) -> usize {
        match self.stages[self.conv_layers] {
            StageShape::Dense { input, .. } => input,
            StageShape::Conv { .. } => unreachable!("dense stages follow conv stages"),
        }
    }

    pub fn param_count(&self) -> usize {
        self.stages.iter().map(StageShape::param_count).sum()
    }

    pub fn forward_macs_per_example(&self) -> u64 {
        self.stages.iter().map(StageShape::forward_macs).sum()
    }

    /// Backward multiply-accumulates for one example with the first `frozen`
    /// conv stages frozen.
    ///
    /// Each trainable stage pays one forward-sized product for its weight
    /// gradient and another for its input gradient, except where the input
    /// needs no gradient: the network input, or the output of a frozen stage.
    pub fn backward_macs_per_example(&self, frozen: usize) -> u64 {
        self.stages
            .iter()
            .enumerate()
            .skip(frozen)
            .map(|(i, s)| {
                let needs_dx = i > frozen;
                s.forward_macs() * if needs_dx { 2 } else { 1 }
            })
            .sum()
    }

    /// Per-example backward work that a frozen prefix of `frozen` conv
    /// stages removes: the weight gradients of stages `1..=frozen` plus the
    /// input gradients of stages `2..=frozen+1`, all of which would only
    /// have flowed into the frozen stages.
    pub fn frozen_backward_macs(&self, frozen: usize) -> u64 {
        let weight_grads: u64 = self.stages[..frozen].iter().map(StageShape::forward_macs).sum();
        let input_grads: u64 = self.stages[1..=frozen].iter().map(StageShape::forward_macs).sum();
        weight_grads + input_grads
    }
}
