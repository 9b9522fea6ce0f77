//! Network configuration, shape planning and the trainable network itself.

mod config;
mod network;
mod plan;

pub use config::{config_name, ConfigId, ConfigName, NetworkConfig};
pub use network::{build_network, Network, StageParams};
pub use plan::{shape_plan, ShapePlan, StageShape, INPUT_SHAPE, NUM_CLASSES};
