//! Deterministic CIFAR-format stand-in data for offline runs and tests.
//!
//! Each class is an oriented colour grating with a class-specific spatial
//! frequency, randomised in phase, contrast and position and buried in
//! per-pixel noise, so a small CNN can learn it but not trivially.

use std::f32::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{serialize_examples, Example, IMAGE_BYTES, RECORDS_PER_FILE, TEST_FILE, TRAIN_FILES};
use crate::error::Result;

const TINTS: [[f32; 3]; 10] = [
    [1.0, 0.3, 0.3],
    [0.3, 1.0, 0.3],
    [0.3, 0.3, 1.0],
    [1.0, 1.0, 0.2],
    [0.2, 1.0, 1.0],
    [1.0, 0.2, 1.0],
    [0.8, 0.6, 0.4],
    [0.4, 0.8, 0.6],
    [0.6, 0.4, 0.8],
    [0.7, 0.7, 0.7],
];

pub fn example(label: u8, rng: &mut impl Rng) -> Example {
    let c = label as usize;
    let angle = (c % 5) as f32 * PI / 5.0 + rng.gen_range(-0.15..0.15);
    let freq = if c < 5 { 2.0 } else { 4.0 } * 2.0 * PI / 32.0;
    let phase = rng.gen_range(0.0..2.0 * PI);
    let contrast = rng.gen_range(35.0..70.0);
    let (cx, cy) = (rng.gen_range(8.0..24.0f32), rng.gen_range(8.0..24.0f32));
    let (dx, dy) = (angle.cos(), angle.sin());
    let mut px = [0u8; IMAGE_BYTES];
    for ch in 0..3 {
        let tint = TINTS[c][ch];
        for y in 0..32 {
            for x in 0..32 {
                let (fx, fy) = (x as f32, y as f32);
                let wave = ((fx * dx + fy * dy) * freq + phase).sin();
                let r2 = (fx - cx).powi(2) + (fy - cy).powi(2);
                let envelope = (-r2 / 200.0).exp();
                let noise = rng.gen_range(-45.0..45.0);
                let v = 128.0 + contrast * tint * wave * (0.4 + envelope) + noise;
                px[ch * 1024 + y * 32 + x] = v.clamp(0.0, 255.0) as u8;
            }
        }
    }
    Example::new(label, px).expect("label < 10")
}

/// `n` examples with labels cycling through the classes.
pub fn examples(n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| example((i % 10) as u8, &mut rng)).collect()
}

/// Writes a complete CIFAR-10-shaped directory: five training files and a
/// test file of 10000 records each. `records_used` limits how many records
/// per file are actually generated; the rest repeat them so file sizes
/// stay valid.
pub fn write_dataset_dir(dir: &Path, records_used: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let used = records_used.clamp(1, RECORDS_PER_FILE);
    for (i, name) in TRAIN_FILES.iter().chain(std::iter::once(&TEST_FILE)).enumerate() {
        let base = examples(used, crate::seed::mix(seed, i as u64));
        let all: Vec<Example> = base.iter().cycle().take(RECORDS_PER_FILE).cloned().collect();
        std::fs::write(dir.join(name), serialize_examples(&all))?;
    }
    Ok(())
}
