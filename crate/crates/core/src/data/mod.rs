//! CIFAR-10 binary loader, seeded splits and mini-batch iteration.
//!
//! Each record in the binary distribution is one label byte followed by
//! 3072 pixel bytes: the red plane, then green, then blue, each 32x32
//! row-major. Pixels are kept as raw bytes and scaled by 1/255 when batched.

pub mod synthetic;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IMAGE_BYTES: usize = 3 * 32 * 32;
pub const RECORD_BYTES: usize = IMAGE_BYTES + 1;
pub const RECORDS_PER_FILE: usize = 10_000;
pub const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const TEST_FILE: &str = "test_batch.bin";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub label: u8,
    pixels: Box<[u8; IMAGE_BYTES]>,
}

impl Example {
    pub fn new(label: u8, pixels: [u8; IMAGE_BYTES]) -> Result<Self> {
        if label > 9 {
            return Err(Error::invalid("example", format!("label {label} > 9")));
        }
        Ok(Example {
            label,
            pixels: Box::new(pixels),
        })
    }

    pub fn raw_pixels(&self) -> &[u8; IMAGE_BYTES] {
        &self.pixels
    }

    /// Pixels scaled into [0, 1], channel-major.
    pub fn pixels(&self) -> impl Iterator<Item = f32> + '_ {
        self.pixels.iter().map(|&b| b as f32 / 255.0)
    }
}

/// Parses a whole CIFAR-10 binary batch file.
pub fn parse_batch_file(bytes: &[u8]) -> Result<Vec<Example>> {
    if !bytes.len().is_multiple_of(RECORD_BYTES) {
        return Err(Error::TruncatedFile {
            offset: bytes.len() / RECORD_BYTES * RECORD_BYTES,
            len: bytes.len(),
        });
    }
    bytes
        .chunks_exact(RECORD_BYTES)
        .enumerate()
        .map(|(index, rec)| {
            let label = rec[0];
            if label > 9 {
                return Err(Error::CorruptRecord {
                    index,
                    offset: index * RECORD_BYTES,
                    label,
                });
            }
            let mut pixels = Box::new([0u8; IMAGE_BYTES]);
            pixels.copy_from_slice(&rec[1..]);
            Ok(Example { label, pixels })
        })
        .collect()
}

/// Inverse of [`parse_batch_file`].
pub fn serialize_examples(examples: &[Example]) -> Vec<u8> {
    let mut out = Vec::with_capacity(examples.len() * RECORD_BYTES);
    for e in examples {
        out.push(e.label);
        out.extend_from_slice(&e.pixels[..]);
    }
    out
}

/// Train and test pools read from a CIFAR-10 binary directory.
#[derive(Debug, Clone)]
pub struct CifarFiles {
    pub train: Vec<Example>,
    pub test: Vec<Example>,
    /// CRC32 over the raw bytes of every file, in load order.
    pub checksum: u32,
}

/// Loads `data_batch_1..5.bin` and `test_batch.bin`, checking each file is
/// exactly 10000 records long before parsing it.
pub fn load_cifar_dir(dir: &Path) -> Result<CifarFiles> {
    let mut hasher = crc32fast::Hasher::new();
    let mut read = |name: &str| -> Result<Vec<Example>> {
        let path = dir.join(name);
        let expected = (RECORDS_PER_FILE * RECORD_BYTES) as u64;
        let found = std::fs::metadata(&path)?.len();
        if found != expected {
            return Err(Error::FileSize { path, expected, found });
        }
        let bytes = std::fs::read(&path)?;
        hasher.update(&bytes);
        parse_batch_file(&bytes)
    };
    let mut train = Vec::with_capacity(TRAIN_FILES.len() * RECORDS_PER_FILE);
    for name in TRAIN_FILES {
        train.extend(read(name)?);
    }
    let test = read(TEST_FILE)?;
    Ok(CifarFiles {
        train,
        test,
        checksum: hasher.finalize(),
    })
}

/// Immutable train/validation split shared by every trial of a run.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<Example>,
    pub validation: Vec<Example>,
    pub checksum: u32,
    pub train_fraction: f64,
    pub val_fraction: f64,
}

fn subset_size(n: usize, fraction: f64, what: &str) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::EmptySplit(format!("{what} fraction {fraction} outside (0, 1]")));
    }
    let k = (n as f64 * fraction).round() as usize;
    if k == 0 {
        return Err(Error::EmptySplit(format!(
            "{what} fraction {fraction} of {n} examples is empty"
        )));
    }
    Ok(k)
}

fn shuffled(examples: &[Example], seed: u64) -> Vec<&Example> {
    let mut refs: Vec<&Example> = examples.iter().collect();
    refs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    refs
}

fn pool_checksum(examples: &[Example]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    for e in examples {
        h.update(&[e.label]);
        h.update(&e.pixels[..]);
    }
    h.finalize()
}

/// Splits one pool: seeded shuffle, then the first `train_fraction` of it
/// for training and the next `val_fraction` for validation.
pub fn make_split(examples: &[Example], train_fraction: f64, val_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    let n = examples.len();
    let n_train = subset_size(n, train_fraction, "train")?;
    let n_val = subset_size(n, val_fraction, "validation")?;
    if n_train + n_val > n {
        return Err(Error::EmptySplit(format!(
            "fractions {train_fraction} + {val_fraction} need {} examples, only {n} available",
            n_train + n_val
        )));
    }
    let order = shuffled(examples, seed);
    Ok(DatasetSplit {
        train: order[..n_train].iter().map(|&e| e.clone()).collect(),
        validation: order[n_train..n_train + n_val].iter().map(|&e| e.clone()).collect(),
        checksum: pool_checksum(examples),
        train_fraction,
        val_fraction,
    })
}

/// Draws seeded subsets from separate train and held-out pools. With both
/// fractions at 1.0 this is the full 50000/10000 protocol.
pub fn split_from_pools(files: &CifarFiles, train_fraction: f64, val_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    let n_train = subset_size(files.train.len(), train_fraction, "train")?;
    let n_val = subset_size(files.test.len(), val_fraction, "validation")?;
    let pick = |pool: &[Example], k: usize, seed: u64| -> Vec<Example> {
        shuffled(pool, seed)[..k].iter().map(|&e| e.clone()).collect()
    };
    Ok(DatasetSplit {
        train: pick(&files.train, n_train, seed),
        validation: pick(&files.test, n_val, seed ^ 0x5eed_0f7e57),
        checksum: files.checksum,
        train_fraction,
        val_fraction,
    })
}

/// A mini-batch of normalized images `[N,3,32,32]` and their labels.
#[derive(Debug, Clone)]
pub struct Batch {
    pub images: Tensor,
    pub labels: Vec<usize>,
}

pub fn make_batch(examples: &[&Example]) -> Batch {
    let mut data = Vec::with_capacity(examples.len() * IMAGE_BYTES);
    for e in examples {
        data.extend(e.pixels());
    }
    Batch {
        images: Tensor::new(&[examples.len(), 3, 32, 32], data).expect("batch shape"),
        labels: examples.iter().map(|e| e.label as usize).collect(),
    }
}

/// Order in which an epoch visits the training set.
pub fn epoch_order(len: usize, epoch: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(crate::seed::mix(seed, epoch as u64)));
    idx
}

/// Shuffled mini-batches over the training set for one epoch. The last
/// batch is short when the set size is not a multiple of `batch_size`.
pub fn batches(split: &DatasetSplit, batch_size: usize, epoch: usize, seed: u64) -> impl Iterator<Item = Batch> + '_ {
    assert!(batch_size >= 1, "batch size must be positive");
    let order = epoch_order(split.train.len(), epoch, seed);
    let chunks: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    chunks
        .into_iter()
        .map(move |c| make_batch(&c.iter().map(|&i| &split.train[i]).collect::<Vec<_>>()))
}

/// Validation set in fixed order, `batch_size` examples at a time.
pub fn validation_batches(split: &DatasetSplit, batch_size: usize) -> impl Iterator<Item = Batch> + '_ {
    split
        .validation
        .chunks(batch_size.max(1))
        .map(|c| make_batch(&c.iter().collect::<Vec<_>>()))
}
