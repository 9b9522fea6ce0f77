use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use convreuse::data::synthetic::write_dataset_dir;
use convreuse::model::{ConfigName, NetworkConfig};
use convreuse::orchestrator::{
    compare, report, run, write_curves, CompareBase, GridSource, Mode, RunManifest, RunOptions, RunSummary, ARCHIVE_DIR,
};
use convreuse::reuse::WeightArchive;
use convreuse::search::SMALL_GRID_NOTE;
use convreuse::trainer::{DEFAULT_MAX_EPOCHS, DEFAULT_PATIENCE};

#[derive(Parser)]
#[command(
    name = "convreuse",
    version,
    about = "Grid search for small CNNs with frozen conv-layer reuse"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the configurations of a grid and their counts.
    Enumerate {
        #[arg(long, default_value = "small")]
        grid: GridSource,
        /// Print only the counts.
        #[arg(long)]
        counts_only: bool,
    },
    /// Run the search and write results and reports to the output directory.
    Run {
        #[arg(long, default_value = "small")]
        grid: GridSource,
        /// baseline, reuse or both.
        #[arg(long, default_value = "both")]
        mode: Mode,
        #[command(flatten)]
        common: Common,
    },
    /// Train named architectures (CNN_<conv>_<fc>_<reused>) for full epoch curves.
    Compare {
        #[arg(required = true)]
        names: Vec<ConfigName>,
        #[arg(long, default_value_t = 0.001)]
        learning_rate: f64,
        #[arg(long, default_value_t = 18)]
        filters: usize,
        #[arg(long, default_value_t = 3)]
        filter_size: usize,
        #[arg(long, default_value_t = 30)]
        batch_size: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Rebuild the report files from an existing results stream.
    Report {
        #[arg(long, default_value = "runs/latest")]
        out_dir: PathBuf,
    },
    /// Write a synthetic dataset in CIFAR-10 binary layout, for smoke runs
    /// without the real data.
    SynthData {
        #[arg(long)]
        out_dir: PathBuf,
        /// Distinct records generated; files cycle through them.
        #[arg(long, default_value_t = 5000)]
        records: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// Directory holding data_batch_1..5.bin and test_batch.bin.
    #[arg(long, default_value = "data/cifar-10-batches-bin")]
    data_dir: PathBuf,
    #[arg(long, default_value = "runs/latest")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Share of the 50000 training images used for training.
    #[arg(long, default_value_t = 1.0)]
    train_fraction: f64,
    /// Share of the 10000 test images used for validation.
    #[arg(long, default_value_t = 1.0)]
    val_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_EPOCHS)]
    max_epochs: usize,
}

impl Common {
    fn manifest(&self, grid: GridSource, mode: Mode, patience: usize) -> RunManifest {
        RunManifest {
            grid,
            mode,
            data_dir: self.data_dir.clone(),
            train_fraction: self.train_fraction,
            val_fraction: self.val_fraction,
            out_dir: self.out_dir.clone(),
            options: RunOptions {
                workers: self.workers,
                global_seed: self.seed,
                max_epochs: self.max_epochs,
                patience,
            },
        }
    }
}

fn print_summary(s: &RunSummary) {
    for (arm, a) in [("baseline", &s.baseline), ("reuse", &s.reuse)] {
        if a.trials == 0 {
            continue;
        }
        println!(
            "{arm:<8} multi-layer trials {:>4}  total {:>10.1}s  early-stopped {}",
            a.trials, a.total_seconds, a.early_stopped
        );
        if let Some(b) = &a.best {
            println!("{arm:<8} best {}  loss {:.4}  ({})", b.nomenclature, b.loss, b.name);
        }
    }
    if let Some(r) = s.time_ratio {
        println!("reuse/baseline time {r:.3}, saved {:.1}s", s.seconds_saved);
    }
}

fn enumerate(grid: &GridSource, counts_only: bool) -> Result<()> {
    let spec = grid.load()?;
    spec.validate()?;
    let configs: Vec<NetworkConfig> = spec.enumerate();
    if !counts_only {
        for c in &configs {
            println!("{}\t{}", c.id(), c.nomenclature());
        }
    }
    let multi = configs.iter().filter(|c| c.conv_layers > 1).count();
    println!("configurations: {}", configs.len());
    println!("multi-layer (reuse candidates): {multi}");
    if *grid == GridSource::Small {
        println!("{SMALL_GRID_NOTE}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Enumerate { grid, counts_only } => enumerate(&grid, counts_only)?,
        Command::Run { grid, mode, common } => {
            let manifest = common.manifest(grid, mode, DEFAULT_PATIENCE);
            let r = run(&manifest).context("run failed")?;
            for w in &r.schedule.warnings {
                log::warn!("{w}");
            }
            let o = &r.outcome;
            println!(
                "scheduled {} trials: {} completed ({} resumed), {} failed, {} skipped",
                r.schedule.nodes.len(),
                o.records.len(),
                o.resumed,
                o.failed(),
                o.skipped()
            );
            if let Some(s) = &r.summary {
                print_summary(s);
            }
            if o.skipped() > 0 {
                log::warn!("{} trials skipped; see ledger.csv", o.skipped());
            }
            if o.failed() > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Compare {
            names,
            learning_rate,
            filters,
            filter_size,
            batch_size,
            common,
        } => {
            let manifest = common.manifest(GridSource::Small, Mode::Both, 0);
            manifest.validate()?;
            let base = CompareBase {
                learning_rate,
                filters,
                filter_size,
                batch_size,
            };
            let data = manifest.load_data()?;
            std::fs::create_dir_all(&common.out_dir)?;
            let archive = WeightArchive::open(common.out_dir.join(ARCHIVE_DIR))?;
            let series = compare(&names, &base, common.max_epochs, &data, &archive, common.seed)?;
            let path = common.out_dir.join("compare.csv");
            write_curves(&series, &path)?;
            for s in &series {
                let losses: Vec<String> = s.result.val_losses.iter().map(|l| format!("{l:.4}")).collect();
                println!(
                    "{:<12} {}  {:.1}s",
                    s.name,
                    losses.join(" "),
                    s.result.wall_time_seconds
                );
            }
            println!("curves written to {}", path.display());
        }
        Command::Report { out_dir } => {
            if !out_dir.exists() {
                bail!("{} does not exist", out_dir.display());
            }
            print_summary(&report(&out_dir)?);
        }
        Command::SynthData { out_dir, records, seed } => {
            write_dataset_dir(&out_dir, records, seed)?;
            println!("synthetic CIFAR-10 layout written to {}", out_dir.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
