use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::plan::{shape_plan, ShapePlan, StageShape, NUM_CLASSES};
use super::NetworkConfig;
use crate::error::{Error, Result};
use crate::ops::{self, OpCounter, PoolIndices};
use crate::tensor::Tensor;

/// Weights and bias of one stage. Conv weights are `[F,C,k,k]`, dense
/// weights `[D,U]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl StageParams {
    fn has_grads(&self) -> bool {
        self.weight.grad.is_some() && self.bias.grad.is_some()
    }
}

struct ConvCache {
    input: Tensor,
    activated: Tensor,
    indices: PoolIndices,
}

struct DenseCache {
    input: Tensor,
    /// Post-ReLU output for hidden layers; `None` for the output layer.
    activated: Option<Tensor>,
}

/// Activations kept by [`Network::forward_train`]. Frozen stages keep nothing.
struct ForwardCache {
    conv: Vec<Option<ConvCache>>,
    dense: Vec<DenseCache>,
    pooled_shape: Vec<usize>,
}

/// A concrete CNN: conv stages (conv → ReLU → max-pool), hidden dense
/// stages with ReLU, and a linear 10-way output stage.
pub struct Network {
    config: NetworkConfig,
    plan: ShapePlan,
    conv: Vec<StageParams>,
    dense: Vec<StageParams>,
    frozen_prefix: usize,
    counter: OpCounter,
    cache: Option<ForwardCache>,
}

/// Builds a network with zero biases and uniform weights drawn in stage
/// order from a ChaCha8 stream seeded with `seed`. Stages followed by a ReLU
/// use the Kaiming bound `sqrt(6 / fan_in)`; the linear output stage uses
/// `sqrt(1 / fan_in)`, which keeps untrained logits near uniform.
pub fn build_network(config: &NetworkConfig, seed: u64) -> Result<Network> {
    let plan = shape_plan(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = |wshape: &[usize], fan_in: usize, units: usize, gain: f64| -> StageParams {
        let bound = (gain / fan_in as f64).sqrt() as f32;
        StageParams {
            weight: Tensor::from_fn(wshape, |_| rng.gen_range(-bound..bound)),
            bias: Tensor::zeros(&[units]),
        }
    };
    let mut conv = Vec::new();
    let mut dense = Vec::new();
    for stage in &plan.stages {
        match *stage {
            StageShape::Conv {
                input,
                conv_out,
                kernel,
                ..
            } => {
                let (f, c) = (conv_out[0], input[0]);
                conv.push(init(&[f, c, kernel, kernel], c * kernel * kernel, f, 6.0));
            }
            StageShape::Dense { input, output } => {
                let gain = if dense.len() + 1 == plan.dense_stages().len() {
                    1.0
                } else {
                    6.0
                };
                dense.push(init(&[input, output], input, output, gain));
            }
        }
    }
    Ok(Network {
        config: config.clone(),
        plan,
        conv,
        dense,
        frozen_prefix: 0,
        counter: OpCounter::default(),
        cache: None,
    })
}

impl Network {
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn plan(&self) -> &ShapePlan {
        &self.plan
    }

    pub fn conv_stages(&self) -> &[StageParams] {
        &self.conv
    }

    pub fn conv_stages_mut(&mut self) -> &mut [StageParams] {
        &mut self.conv
    }

    pub fn dense_stages(&self) -> &[StageParams] {
        &self.dense
    }

    pub fn dense_stages_mut(&mut self) -> &mut [StageParams] {
        &mut self.dense
    }

    pub fn frozen_prefix(&self) -> usize {
        self.frozen_prefix
    }

    /// Freezes the first `prefix` conv stages. The last conv stage can never
    /// be frozen.
    pub fn set_frozen_prefix(&mut self, prefix: usize) -> Result<()> {
        if prefix >= self.config.conv_layers {
            return Err(Error::invalid(
                "set_frozen_prefix",
                format!("prefix {prefix} must be below {} conv layers", self.config.conv_layers),
            ));
        }
        self.frozen_prefix = prefix;
        for stage in &mut self.conv[..prefix] {
            stage.weight.grad = None;
            stage.bias.grad = None;
        }
        Ok(())
    }

    pub fn counter(&self) -> OpCounter {
        self.counter
    }

    pub fn reset_counter(&mut self) {
        self.counter = OpCounter::default();
    }

    pub fn param_count(&self) -> usize {
        self.conv
            .iter()
            .chain(&self.dense)
            .map(|s| s.weight.len() + s.bias.len())
            .sum()
    }

    /// Inference on `[N,3,32,32]`. Every stage runs, frozen or not.
    pub fn forward(&mut self, batch: &Tensor) -> Result<Tensor> {
        self.cache = None;
        self.run_forward(batch, false).map(|(logits, _)| logits)
    }

    /// Forward pass that keeps the activations the next [`backward`] needs.
    ///
    /// [`backward`]: Network::backward
    pub fn forward_train(&mut self, batch: &Tensor) -> Result<Tensor> {
        self.cache = None;
        let (logits, cache) = self.run_forward(batch, true)?;
        self.cache = cache;
        Ok(logits)
    }

    /// Forward through the first `stages` conv stages only, returning the
    /// pooled output of the last one.
    pub fn forward_conv_prefix(&mut self, batch: &Tensor, stages: usize) -> Result<Tensor> {
        if stages > self.conv.len() {
            return Err(Error::invalid(
                "forward_conv_prefix",
                format!("only {} conv stages", self.conv.len()),
            ));
        }
        self.check_input(batch)?;
        let mut x = batch.clone();
        for i in 0..stages {
            x = self.conv_stage(i, &x)?.2;
        }
        Ok(x)
    }

    fn check_input(&self, batch: &Tensor) -> Result<()> {
        let s = batch.shape();
        if s.len() != 4 || s[1..] != super::plan::INPUT_SHAPE {
            return Err(Error::shape("network forward", "[N,3,32,32]", s));
        }
        Ok(())
    }

    /// Returns (conv output after ReLU, pool indices, pooled output).
    fn conv_stage(&mut self, i: usize, x: &Tensor) -> Result<(Tensor, PoolIndices, Tensor)> {
        let p = &self.conv[i];
        let mut z = ops::conv2d_forward(x, &p.weight, &p.bias, &mut self.counter)?;
        z.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        let (pooled, idx) = ops::maxpool2_forward(&z)?;
        Ok((z, idx, pooled))
    }

    fn run_forward(&mut self, batch: &Tensor, keep: bool) -> Result<(Tensor, Option<ForwardCache>)> {
        self.check_input(batch)?;
        let n = batch.shape()[0];
        let mut conv_cache = Vec::with_capacity(self.conv.len());
        let mut x = batch.clone();
        for i in 0..self.conv.len() {
            let (activated, indices, pooled) = self.conv_stage(i, &x)?;
            if keep && i >= self.frozen_prefix {
                conv_cache.push(Some(ConvCache {
                    input: x,
                    activated,
                    indices,
                }));
            } else {
                conv_cache.push(None);
            }
            x = pooled;
        }
        let pooled_shape = x.shape().to_vec();
        let mut x = x.reshape(&[n, self.plan.flatten_width()])?;
        let mut dense_cache = Vec::with_capacity(self.dense.len());
        let last = self.dense.len() - 1;
        for i in 0..self.dense.len() {
            let p = &self.dense[i];
            let mut y = ops::dense_forward(&x, &p.weight, &p.bias, &mut self.counter)?;
            if i < last {
                y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            }
            if keep {
                dense_cache.push(DenseCache {
                    input: x,
                    activated: (i < last).then(|| y.clone()),
                });
            }
            x = y;
        }
        debug_assert_eq!(x.shape(), [n, NUM_CLASSES]);
        let cache = keep.then_some(ForwardCache {
            conv: conv_cache,
            dense: dense_cache,
            pooled_shape,
        });
        Ok((x, cache))
    }

    /// Backpropagates `dlogits` through the trainable stages only, writing
    /// gradients into the parameters' gradient slots.
    ///
    /// Propagation stops at the first trainable conv stage: no input
    /// gradient is formed for it, and frozen stages get no gradient slots.
    pub fn backward(&mut self, dlogits: &Tensor) -> Result<()> {
        let cache = self.cache.take().ok_or(Error::MissingCache)?;
        let n = cache.dense[0].input.shape()[0];
        if dlogits.shape() != [n, NUM_CLASSES] {
            return Err(Error::shape("network backward", [n, NUM_CLASSES], dlogits.shape()));
        }
        let mut dy = dlogits.clone();
        for i in (0..self.dense.len()).rev() {
            let c = &cache.dense[i];
            if let Some(act) = &c.activated {
                dy = ops::relu_backward(act, &dy)?;
            }
            let p = &mut self.dense[i];
            let g = ops::dense_backward(&c.input, &p.weight, &dy, true, &mut self.counter)?;
            p.weight.grad = Some(g.dw.into_data());
            p.bias.grad = Some(g.db.into_data());
            dy = g.dx.expect("dense input gradient requested");
        }
        let mut dy = dy.reshape(&cache.pooled_shape)?;
        for i in (self.frozen_prefix..self.conv.len()).rev() {
            let c = cache.conv[i].as_ref().ok_or(Error::MissingCache)?;
            let d = ops::maxpool2_backward(&c.indices, &dy, c.activated.shape())?;
            let d = ops::relu_backward(&c.activated, &d)?;
            let need_dx = i > self.frozen_prefix;
            let p = &mut self.conv[i];
            let g = ops::conv2d_backward(&c.input, &p.weight, &d, need_dx, &mut self.counter)?;
            p.weight.grad = Some(g.dw.into_data());
            p.bias.grad = Some(g.db.into_data());
            if let Some(dx) = g.dx {
                dy = dx;
            }
        }
        Ok(())
    }

    /// Applies `param -= lr * grad` to every trainable parameter and clears
    /// the consumed gradient slots.
    pub fn sgd_step(&mut self, lr: f32) -> Result<()> {
        let frozen = self.frozen_prefix;
        for stage in self.conv.iter_mut().skip(frozen).chain(self.dense.iter_mut()) {
            for t in [&mut stage.weight, &mut stage.bias] {
                let grad = t.grad.take().ok_or(Error::MissingCache)?;
                ops::sgd_step(t, &grad, lr, &mut self.counter)?;
            }
        }
        Ok(())
    }

    /// True when every trainable stage holds gradients and no frozen stage does.
    pub fn gradients_populated(&self) -> bool {
        let frozen_clear = self.conv[..self.frozen_prefix]
            .iter()
            .all(|s| s.weight.grad.is_none() && s.bias.grad.is_none());
        let trainable_full = self.conv[self.frozen_prefix..]
            .iter()
            .chain(&self.dense)
            .all(StageParams::has_grads);
        frozen_clear && trainable_full
    }
}
