#![allow(dead_code)]

use convreuse::data::{make_split, synthetic, DatasetSplit};
use convreuse::NetworkConfig;

/// `train` + `val` synthetic examples split by a fixed seed.
pub fn split(train: usize, val: usize, seed: u64) -> DatasetSplit {
    let n = train + val;
    let pool = synthetic::examples(n, seed);
    make_split(&pool, train as f64 / n as f64, val as f64 / n as f64, seed).unwrap()
}

pub fn config(conv_layers: usize, filters: usize, hidden: &[usize], batch_size: usize) -> NetworkConfig {
    NetworkConfig {
        conv_layers,
        learning_rate: 0.01,
        filters,
        filter_size: 3,
        hidden_units: hidden.to_vec(),
        batch_size,
    }
}
