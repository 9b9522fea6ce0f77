//! Binary weight records and the on-disk archive.
//!
//! `<root>/<config_id>.cnnw` layout, all integers little-endian:
//!
//! ```text
//! "CNNW"            4 bytes magic
//! version           u16 (currently 1)
//! tensor count      u32
//! per tensor:
//!   kind            u8  (0 conv weight, 1 conv bias, 2 dense weight, 3 dense bias)
//!   rank            u8
//!   dims            rank x u32
//!   payload         product(dims) x f32
//! crc32             u32 over every preceding byte
//! ```
//!
//! Stages are stored in network order, each as its weight tensor followed by
//! its bias. Training metadata lives next to it in `<config_id>.meta` as
//! `key = value` lines. Both files are written under a temporary name and
//! renamed into place, the `.cnnw` last, so a record is visible only once
//! complete.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{ConfigId, Network, StageParams};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"CNNW";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    Conv,
    Dense,
}

impl StageKind {
    fn tags(self) -> (u8, u8) {
        match self {
            StageKind::Conv => (0, 1),
            StageKind::Dense => (2, 3),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordStage {
    pub kind: StageKind,
    pub params: StageParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordMeta {
    pub epochs_run: usize,
    pub final_val_loss: f64,
    pub seed: u64,
}

/// Trained parameters of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRecord {
    pub config_id: ConfigId,
    pub stages: Vec<RecordStage>,
    pub meta: RecordMeta,
}

impl WeightRecord {
    pub fn from_network(net: &Network, meta: RecordMeta) -> Self {
        let strip = |p: &StageParams| {
            let mut p = p.clone();
            p.weight.grad = None;
            p.bias.grad = None;
            p
        };
        let conv = net.conv_stages().iter().map(|p| RecordStage {
            kind: StageKind::Conv,
            params: strip(p),
        });
        let dense = net.dense_stages().iter().map(|p| RecordStage {
            kind: StageKind::Dense,
            params: strip(p),
        });
        WeightRecord {
            config_id: net.config().id(),
            stages: conv.chain(dense).collect(),
            meta,
        }
    }

    pub fn conv_stages(&self) -> impl Iterator<Item = &StageParams> {
        self.stages
            .iter()
            .filter(|s| s.kind == StageKind::Conv)
            .map(|s| &s.params)
    }

    /// Encodes the parameter tensors; metadata is stored separately.
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(2 * self.stages.len() as u32).to_le_bytes());
        for stage in &self.stages {
            let (wk, bk) = stage.kind.tags();
            for (tag, t) in [(wk, &stage.params.weight), (bk, &stage.params.bias)] {
                buf.push(tag);
                buf.push(t.rank() as u8);
                for &d in t.shape() {
                    buf.extend_from_slice(&(d as u32).to_le_bytes());
                }
                for v in t.data() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    pub fn decode(config_id: ConfigId, bytes: &[u8], meta: RecordMeta) -> Result<Self> {
        let corrupt = |reason: &str| Error::CorruptWeights {
            id: config_id.to_string(),
            reason: reason.to_string(),
        };
        if bytes.len() < MAGIC.len() + 2 + 4 + 4 {
            return Err(corrupt("file too short"));
        }
        if &bytes[..4] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(corrupt("CRC mismatch"));
        }
        let mut r = Reader { buf: body, pos: 4 };
        let version = u16::from_le_bytes(
            r.take(2)
                .ok_or_else(|| corrupt("truncated header"))?
                .try_into()
                .unwrap(),
        );
        if version != VERSION {
            return Err(corrupt(&format!("unsupported version {version}")));
        }
        let count = r.u32().ok_or_else(|| corrupt("truncated header"))? as usize;
        if !count.is_multiple_of(2) {
            return Err(corrupt("odd tensor count"));
        }
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let tag = r.take(1).ok_or_else(|| corrupt("truncated tensor header"))?[0];
            let rank = r.take(1).ok_or_else(|| corrupt("truncated tensor header"))?[0] as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(r.u32().ok_or_else(|| corrupt("truncated dims"))? as usize);
            }
            let n: usize = dims.iter().product();
            let raw = r.take(n * 4).ok_or_else(|| corrupt("truncated payload"))?;
            let data = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            let t = Tensor::new(&dims, data).map_err(|_| corrupt("invalid tensor dims"))?;
            tensors.push((tag, t));
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        let mut stages = Vec::with_capacity(count / 2);
        let mut it = tensors.into_iter();
        while let (Some((wt, weight)), Some((bt, bias))) = (it.next(), it.next()) {
            let kind = match (wt, bt) {
                (0, 1) => StageKind::Conv,
                (2, 3) => StageKind::Dense,
                _ => return Err(corrupt(&format!("unexpected tensor kinds {wt}/{bt}"))),
            };
            stages.push(RecordStage {
                kind,
                params: StageParams { weight, bias },
            });
        }
        Ok(WeightRecord {
            config_id,
            stages,
            meta,
        })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.buf.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
}

fn encode_meta(m: &RecordMeta) -> String {
    format!(
        "epochs_run = {}\nfinal_val_loss = {:?}\nseed = {}\n",
        m.epochs_run, m.final_val_loss, m.seed
    )
}

fn decode_meta(id: &ConfigId, text: &str) -> Result<RecordMeta> {
    let corrupt = |reason: String| Error::CorruptWeights {
        id: id.to_string(),
        reason,
    };
    let mut epochs_run = None;
    let mut final_val_loss = None;
    let mut seed = None;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| corrupt(format!("bad meta line {line:?}")))?;
        let v = v.trim();
        let bad = || corrupt(format!("bad meta value {v:?}"));
        match k.trim() {
            "epochs_run" => epochs_run = Some(v.parse().map_err(|_| bad())?),
            "final_val_loss" => final_val_loss = Some(v.parse().map_err(|_| bad())?),
            "seed" => seed = Some(v.parse().map_err(|_| bad())?),
            other => return Err(corrupt(format!("unknown meta key {other:?}"))),
        }
    }
    match (epochs_run, final_val_loss, seed) {
        (Some(epochs_run), Some(final_val_loss), Some(seed)) => Ok(RecordMeta {
            epochs_run,
            final_val_loss,
            seed,
        }),
        _ => Err(corrupt("incomplete metadata".into())),
    }
}

/// Directory of weight records, written at most once per configuration.
#[derive(Debug, Clone)]
pub struct WeightArchive {
    root: PathBuf,
}

impl WeightArchive {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(WeightArchive { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn weights_path(&self, id: &ConfigId) -> PathBuf {
        self.root.join(format!("{id}.cnnw"))
    }

    fn meta_path(&self, id: &ConfigId) -> PathBuf {
        self.root.join(format!("{id}.meta"))
    }

    pub fn contains(&self, id: &ConfigId) -> bool {
        self.weights_path(id).is_file()
    }

    /// Ids of every complete record, sorted.
    pub fn ids(&self) -> Result<Vec<ConfigId>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            if let Some(stem) = name.strip_suffix(".cnnw") {
                if let Ok(id) = stem.parse::<ConfigId>() {
                    ids.push(id);
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn save(&self, record: &WeightRecord) -> Result<()> {
        let id = &record.config_id;
        if self.contains(id) {
            return Err(Error::DuplicateRecord(id.to_string()));
        }
        write_atomic(&self.meta_path(id), encode_meta(&record.meta).as_bytes())?;
        write_atomic(&self.weights_path(id), &record.encode())
    }

    pub fn load(&self, id: &ConfigId) -> Result<WeightRecord> {
        if !self.contains(id) {
            return Err(Error::MissingRecord(id.to_string()));
        }
        let bytes = fs::read(self.weights_path(id))?;
        let meta = decode_meta(id, &fs::read_to_string(self.meta_path(id))?)?;
        WeightRecord::decode(id.clone(), &bytes, meta)
    }
}

/// Writes to `<path>.tmp`, syncs, then renames over `path`. A stale
/// temporary file left by a crashed writer is overwritten.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = OpenOptions::new().write(true).create(true).truncate(true).open(&tmp)?;
    let written = f.write_all(bytes).and_then(|_| f.sync_all());
    if let Err(e) = written {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_network, NetworkConfig};

    fn record(conv_layers: usize) -> WeightRecord {
        let c = NetworkConfig {
            conv_layers,
            learning_rate: 0.001,
            filters: 6,
            filter_size: 3,
            hidden_units: vec![20, 10],
            batch_size: 10,
        };
        let net = build_network(&c, 3).unwrap();
        WeightRecord::from_network(
            &net,
            RecordMeta {
                epochs_run: 4,
                final_val_loss: 1.2345678901234567,
                seed: u64::MAX - 3,
            },
        )
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let archive = WeightArchive::open(dir.path()).unwrap();
        let rec = record(2);
        archive.save(&rec).unwrap();
        let back = archive.load(&rec.config_id).unwrap();
        assert_eq!(back.meta, rec.meta);
        assert_eq!(back.stages.len(), rec.stages.len());
        for (a, b) in back.stages.iter().zip(&rec.stages) {
            assert_eq!(a.kind, b.kind);
            assert!(a.params.weight.bit_eq(&b.params.weight));
            assert!(a.params.bias.bit_eq(&b.params.bias));
        }
        assert_eq!(archive.ids().unwrap(), vec![rec.config_id.clone()]);
        assert!(!dir.path().join(format!("{}.cnnw.tmp", rec.config_id)).exists());
    }

    #[test]
    fn duplicate_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        let archive = WeightArchive::open(dir.path()).unwrap();
        let rec = record(1);
        archive.save(&rec).unwrap();
        assert!(matches!(archive.save(&rec), Err(Error::DuplicateRecord(_))));
        let other = record(3).config_id;
        assert!(matches!(archive.load(&other), Err(Error::MissingRecord(_))));
    }

    #[test]
    fn header_layout() {
        let bytes = record(1).encode();
        assert_eq!(&bytes[..4], b"CNNW");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 8);
        // first tensor: conv weight [6,3,3,3]
        assert_eq!(bytes[10], 0);
        assert_eq!(bytes[11], 4);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 6);
    }

    #[test]
    fn corruption_detected() {
        let rec = record(2);
        let bytes = rec.encode();
        let meta = rec.meta.clone();
        for pos in [0usize, 5, 40, bytes.len() / 2, bytes.len() - 1] {
            let mut bad = bytes.clone();
            bad[pos] ^= 0x10;
            assert!(
                matches!(
                    WeightRecord::decode(rec.config_id.clone(), &bad, meta.clone()),
                    Err(Error::CorruptWeights { .. })
                ),
                "flip at {pos}"
            );
        }
        assert!(WeightRecord::decode(rec.config_id.clone(), &bytes[..bytes.len() - 9], meta).is_err());
    }

    #[test]
    fn temp_files_are_not_records() {
        let dir = tempfile::tempdir().unwrap();
        let archive = WeightArchive::open(dir.path()).unwrap();
        let rec = record(1);
        fs::write(dir.path().join(format!("{}.cnnw.tmp", rec.config_id)), b"partial").unwrap();
        assert!(!archive.contains(&rec.config_id));
        assert!(archive.ids().unwrap().is_empty());
        archive.save(&rec).unwrap();
        assert!(archive.load(&rec.config_id).is_ok());
    }
}
