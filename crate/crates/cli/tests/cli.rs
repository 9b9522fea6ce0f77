use std::path::Path;
use std::process::{Command, Output};

fn convreuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convreuse"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_grid(dir: &Path, conv_layers: &str) -> String {
    let path = dir.join("grid.toml");
    std::fs::write(
        &path,
        format!(
            "conv_layers = {conv_layers}\nlearning_rates = [0.01]\nfilters = [3]\nfilter_sizes = [3]\n\
             hidden_layers = [1]\nhidden_units = [50]\nbatch_sizes = [25]\n"
        ),
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

fn synth(dir: &Path) -> String {
    let data = dir.join("data");
    let o = convreuse(&["synth-data", "--out-dir", data.to_str().unwrap(), "--records", "300"]);
    assert!(o.status.success());
    data.to_str().unwrap().to_string()
}

#[test]
fn enumerate_custom_grid() {
    let dir = tempfile::tempdir().unwrap();
    let grid = write_grid(dir.path(), "[1, 2, 3]");
    let o = convreuse(&["enumerate", "--grid", &grid]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("c2_lr0.01_f3_k3_h1_u50_b25\t2, 0.01, 3, 3, 1, [50], 25"));
    assert!(text.contains("configurations: 3") && text.contains("multi-layer (reuse candidates): 2"));
    assert!(!text.contains("note:"));

    std::fs::write(
        dir.path().join("bad.toml"),
        "conv_layers = [1]\nlearnig_rates = [0.1]\n",
    )
    .unwrap();
    let o = convreuse(&["enumerate", "--grid", dir.path().join("bad.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_report_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let grid = write_grid(dir.path(), "[1, 2]");
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let args = [
        "run",
        "--grid",
        &grid,
        "--data-dir",
        &data,
        "--out-dir",
        out_s,
        "--train-fraction",
        "0.01",
        "--val-fraction",
        "0.01",
        "--max-epochs",
        "2",
        "--workers",
        "2",
    ];
    let o = convreuse(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("scheduled 3 trials: 3 completed (0 resumed), 0 failed, 0 skipped"));
    for f in [
        "trials.csv",
        "summary.json",
        "distribution.csv",
        "epoch_curves.csv",
        "ledger.csv",
        "results.jsonl",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let trials = std::fs::read_to_string(out.join("trials.csv")).unwrap();
    assert!(trials.starts_with("trial,config_id,reused,frozen_prefix,stop_epoch,epoch_losses,final_loss,"));
    assert_eq!(trials.lines().count(), 4);

    let o = convreuse(&args);
    assert!(o.status.success());
    assert!(stdout(&o).contains("3 completed (3 resumed)"));

    std::fs::remove_file(out.join("summary.json")).unwrap();
    let o = convreuse(&["report", "--out-dir", out_s]);
    assert!(o.status.success());
    assert!(out.join("summary.json").is_file());

    // a different seed must not mix into the same directory
    let mut reseeded = args.to_vec();
    reseeded.extend(["--seed", "7"]);
    let o = convreuse(&reseeded);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_trials_give_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    // four conv stages do not fit a 32x32 input
    let grid = write_grid(dir.path(), "[1, 4]");
    let out = dir.path().join("out");
    let o = convreuse(&[
        "run",
        "--grid",
        &grid,
        "--mode",
        "baseline",
        "--data-dir",
        &data,
        "--out-dir",
        out.to_str().unwrap(),
        "--train-fraction",
        "0.01",
        "--val-fraction",
        "0.01",
        "--max-epochs",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("1 completed (0 resumed), 1 failed"));
    let ledger = std::fs::read_to_string(out.join("ledger.csv")).unwrap();
    assert!(ledger.contains("c4_lr0.01_f3_k3_h1_u50_b25,failed,"));
}

#[test]
fn compare_named_architectures() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let out = dir.path().join("cmp");
    let o = convreuse(&[
        "compare",
        "CNN_2_1_0",
        "CNN_2_1_1",
        "--filters",
        "3",
        "--data-dir",
        &data,
        "--out-dir",
        out.to_str().unwrap(),
        "--train-fraction",
        "0.01",
        "--val-fraction",
        "0.01",
        "--max-epochs",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let curves = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 2 * 2);
    assert!(curves.contains("CNN_2_1_1,2,"));

    let o = convreuse(&["compare", "CNN_2_2_2"]);
    assert!(!o.status.success());
    let o = convreuse(&["compare", "CNN_2_x_0"]);
    assert!(!o.status.success());
}

#[test]
fn missing_data_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = convreuse(&[
        "run",
        "--data-dir",
        dir.path().join("nope").to_str().unwrap(),
        "--out-dir",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
}
