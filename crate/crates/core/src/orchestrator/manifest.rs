use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::report::{write_reports, RunSummary};
use super::runner::{run_schedule, RunOptions, RunOutcome, ARCHIVE_DIR};
use super::schedule::{build_schedule, Mode, Schedule};
use crate::data::{load_cifar_dir, split_from_pools, DatasetSplit};
use crate::error::{Error, Result};
use crate::reuse::WeightArchive;
use crate::search::{preset_large, preset_small, GridSpec};

pub const MANIFEST_FILE: &str = "manifest.json";

/// `small`, `large`, or a path to a TOML grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridSource {
    Small,
    Large,
    File(PathBuf),
}

impl FromStr for GridSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "small" => GridSource::Small,
            "large" => GridSource::Large,
            "" => {
                return Err(Error::Parse {
                    what: "grid (small|large|FILE)",
                    input: s.into(),
                })
            }
            path => GridSource::File(path.into()),
        })
    }
}

impl fmt::Display for GridSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSource::Small => f.write_str("small"),
            GridSource::Large => f.write_str("large"),
            GridSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl GridSource {
    pub fn load(&self) -> Result<GridSpec> {
        match self {
            GridSource::Small => Ok(preset_small()),
            GridSource::Large => Ok(preset_large()),
            GridSource::File(p) => GridSpec::from_file(p),
        }
    }
}

/// Everything that determines the outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub grid: GridSource,
    pub mode: Mode,
    pub data_dir: PathBuf,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub out_dir: PathBuf,
    pub options: RunOptions,
}

impl RunManifest {
    pub fn validate(&self) -> Result<()> {
        if self.options.workers == 0 {
            return Err(Error::invalid("manifest", "worker count must be at least 1"));
        }
        if self.options.max_epochs == 0 {
            return Err(Error::invalid("manifest", "max_epochs must be at least 1"));
        }
        Ok(())
    }

    /// Loads the data directory and draws the seeded subsets.
    pub fn load_data(&self) -> Result<DatasetSplit> {
        let files = load_cifar_dir(&self.data_dir)?;
        split_from_pools(&files, self.train_fraction, self.val_fraction, self.options.global_seed)
    }

    /// Fields that must agree before an existing output directory is resumed.
    /// The worker count and output location may change between sessions.
    fn resume_key(&self) -> RunManifest {
        RunManifest {
            out_dir: PathBuf::new(),
            options: RunOptions {
                workers: 1,
                ..self.options.clone()
            },
            ..self.clone()
        }
    }

    /// Writes `manifest.json`, or checks that an existing one describes the
    /// same run so results are never mixed across settings.
    pub fn claim_out_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(MANIFEST_FILE);
        if path.exists() {
            let old: RunManifest = serde_json::from_slice(&std::fs::read(&path)?)?;
            if old.resume_key() != self.resume_key() {
                return Err(Error::invalid(
                    "run",
                    format!(
                        "{} holds results of a different run; choose another --out-dir",
                        self.out_dir.display()
                    ),
                ));
            }
        }
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn schedule(&self) -> Result<Schedule> {
        let grid = self.grid.load()?;
        grid.validate()?;
        let archive = WeightArchive::open(self.out_dir.join(ARCHIVE_DIR))?;
        build_schedule(&grid.enumerate(), self.mode, Some(&archive))
    }
}

pub struct RunReport {
    pub schedule: Schedule,
    pub outcome: RunOutcome,
    pub summary: Option<RunSummary>,
}

/// Runs a whole search: schedule, train, then write reports next to the
/// results stream.
pub fn run(manifest: &RunManifest) -> Result<RunReport> {
    manifest.validate()?;
    let data = manifest.load_data()?;
    run_with_data(manifest, &data)
}

/// As [`run`], with the data split supplied by the caller.
pub fn run_with_data(manifest: &RunManifest, data: &DatasetSplit) -> Result<RunReport> {
    manifest.validate()?;
    manifest.claim_out_dir()?;
    let schedule = manifest.schedule()?;
    let outcome = run_schedule(&schedule, data, &manifest.out_dir, &manifest.options)?;
    let summary = if outcome.records.is_empty() {
        None
    } else {
        Some(write_reports(&outcome.records, &manifest.out_dir)?)
    };
    Ok(RunReport {
        schedule,
        outcome,
        summary,
    })
}

/// Regenerates the report files of `out_dir` from its results stream.
pub fn report(out_dir: &Path) -> Result<RunSummary> {
    let records = super::runner::read_results(&out_dir.join(super::runner::RESULTS_FILE))?;
    write_reports(&records, out_dir)
}
