//! Times one baseline trial and its reuse counterpart on synthetic data.
use convreuse::data::{make_split, synthetic};
use convreuse::reuse::{plan_reuse, WeightArchive};
use convreuse::trainer::{train_trial, TrialSpec};
use convreuse::NetworkConfig;

fn main() -> convreuse::Result<()> {
    let conv: usize = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(2);
    let pool = synthetic::examples(5000, 1);
    let split = make_split(&pool, 0.8, 0.2, 1)?;
    let dir = std::env::temp_dir().join(format!("convreuse-timing-{}", std::process::id()));
    let archive = WeightArchive::open(&dir)?;
    let target = NetworkConfig {
        conv_layers: conv,
        learning_rate: 0.01,
        filters: 18,
        filter_size: 3,
        hidden_units: vec![500, 250],
        batch_size: 30,
    };
    for c in 1..=conv {
        let r = train_trial(&TrialSpec::baseline(target.with_conv_layers(c), 0), &split, &archive)?;
        println!(
            "baseline {} {:.2}s losses {:?}",
            r.config_id, r.wall_time_seconds, r.val_losses
        );
    }
    let r = train_trial(&TrialSpec::reusing(plan_reuse(&target)?, 0), &split, &archive)?;
    println!(
        "reuse    {} {:.2}s losses {:?}",
        r.config_id, r.wall_time_seconds, r.val_losses
    );
    std::fs::remove_dir_all(dir)?;
    Ok(())
}
