use std::fs;
use std::path::Path;
use std::process::Command;

use metric_surgery::parse_config;
use metric_surgery_cli::{cmd_sweep, cmd_train, CliError, SweepAxis};

const BIN: &str = env!("CARGO_BIN_EXE_metric-surgery");

const QUICK: &str = "
dataset.num_classes = 6
dataset.samples_per_class = 4
dataset.input_dim = 8
dataset.holdout_classes = 2
encoder.embed_dim = 4
train.epochs = 4
train.classes_per_batch = 2
train.samples_per_class = 4
eval.ks = 1, 2
";

fn write_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, format!("{QUICK}{extra}")).unwrap();
    path
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader.records().map(Result::unwrap).collect()
}

#[test]
fn two_seeds_share_one_recall_file() {
    let tmp = tempfile::tempdir().unwrap();
    let mut run = parse_config(&format!("{QUICK}run.seeds = 3, 8\n")).unwrap();
    run.output_dir = tmp.path().join("out");
    cmd_train(&run).unwrap();

    let rows = read_csv(&run.output_dir.join("recall.csv"));
    // 2 seeds x 4 epochs x 2 splits x 2 ks
    assert_eq!(rows.len(), 32);
    for seed in ["3", "8"] {
        assert!(rows.iter().any(|r| &r[0] == seed));
    }
    assert_eq!(read_csv(&run.output_dir.join("stats.csv")).len(), 8);
    // 2 seeds x 24 samples
    assert_eq!(read_csv(&run.output_dir.join("diagram.csv")).len(), 48);

    let echo = fs::read_to_string(run.output_dir.join("config.resolved.txt")).unwrap();
    assert_eq!(parse_config(&echo).unwrap(), run);
}

#[test]
fn csv_layout_and_float_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let mut run = parse_config(&format!("{QUICK}run.seeds = 1\n")).unwrap();
    run.output_dir = tmp.path().to_owned();
    let runs = cmd_train(&run).unwrap();
    let log = &runs[0].1.log;

    let text = fs::read_to_string(tmp.path().join("stats.csv")).unwrap();
    assert!(text.starts_with("seed,epoch,mean_s_ap,mean_s_an,lr\n"));
    assert!(text.ends_with('\n') && !text.contains('\r'));
    for (row, rec) in read_csv(&tmp.path().join("stats.csv")).iter().zip(&log.epochs) {
        assert_eq!(row[2].parse::<f64>().unwrap().to_bits(), rec.mean_s_ap.to_bits());
        assert_eq!(row[3].parse::<f64>().unwrap().to_bits(), rec.mean_s_an.to_bits());
        assert_eq!(row[4].parse::<f64>().unwrap().to_bits(), rec.lr.to_bits());
    }
    let header = fs::read_to_string(tmp.path().join("diagram.csv")).unwrap();
    assert!(header.starts_with("seed,split,anchor_id,s_np,s_nn\n"));
    let header = fs::read_to_string(tmp.path().join("recall.csv")).unwrap();
    assert!(header.starts_with("seed,epoch,split,k,recall\n"));
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.seeds = 0, 1\n");
    let out = tmp.path().join("out");
    let snapshot =
        || ["recall.csv", "stats.csv", "diagram.csv", "config.resolved.txt"].map(|f| fs::read(out.join(f)).unwrap());
    let status = Command::new(BIN)
        .args(["train", "--threads", "1", "--output-dir"])
        .arg(&out)
        .arg(&cfg)
        .status();
    assert!(status.unwrap().success());
    let first = snapshot();
    let status = Command::new(BIN)
        .args(["train", "--threads", "3", "--output-dir"])
        .arg(&out)
        .arg(&cfg)
        .status();
    assert!(status.unwrap().success());
    assert_eq!(first, snapshot());
}

#[test]
fn unwritable_output_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = write_config(tmp.path(), "");
    let output = Command::new(BIN)
        .arg("train")
        .arg(&cfg)
        .arg("--output-dir")
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("error:"));

    let mut run = parse_config(QUICK).unwrap();
    run.output_dir = blocker.join("sub");
    assert!(matches!(cmd_train(&run), Err(CliError::Io { .. })));
}

#[test]
fn bad_config_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "train.epochs = 2\nsurgery.direction = diagonal\n").unwrap();
    let output = Command::new(BIN).arg("train").arg(&cfg).output().unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("line 2"));
}

#[test]
fn direction_sweep_has_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let mut run = parse_config(&format!("{QUICK}run.seeds = 0, 1\n")).unwrap();
    run.output_dir = tmp.path().to_owned();
    let values: Vec<String> = ["euclidean", "cosine", "euclidean_orthogonal", "cosine_orthogonal"]
        .map(String::from)
        .to_vec();
    let rows = cmd_sweep(&run, SweepAxis::Direction, &values).unwrap();
    assert_eq!(rows.len(), 4);
    let summary = read_csv(&tmp.path().join("summary.csv"));
    assert_eq!(summary.len(), 4);
    for (record, value) in summary.iter().zip(&values) {
        assert_eq!(&record[0], "direction");
        assert_eq!(&record[1], value.as_str());
        assert_eq!(&record[2], "2");
    }
    let per_value = fs::read_dir(tmp.path().join("runs")).unwrap().count();
    assert_eq!(per_value, 4);
}

#[test]
fn lr_sweep_runs_every_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.seeds = 0, 1, 2, 3, 4\n");
    let out = tmp.path().join("sweep");
    let status = Command::new(BIN)
        .args(["sweep", "--axis", "lr", "--values", "0.1,0.01", "--output-dir"])
        .arg(&out)
        .arg(&cfg)
        .status()
        .unwrap();
    assert!(status.success());
    let mut runs = 0;
    for value_dir in fs::read_dir(out.join("runs")).unwrap() {
        runs += fs::read_dir(value_dir.unwrap().path()).unwrap().count();
    }
    assert_eq!(runs, 10);
    let summary = read_csv(&out.join("summary.csv"));
    assert_eq!(summary.len(), 2);
    for record in &summary {
        let mean: f64 = record[3].parse().unwrap();
        let std: f64 = record[4].parse().unwrap();
        assert!((0.0..=1.0).contains(&mean) && std >= 0.0);
    }
}

#[test]
fn invalid_sweep_value_fails_before_training() {
    let tmp = tempfile::tempdir().unwrap();
    let mut run = parse_config(QUICK).unwrap();
    run.output_dir = tmp.path().join("never");
    let values = vec!["cosine".to_owned(), "sideways".to_owned()];
    assert!(cmd_sweep(&run, SweepAxis::Direction, &values).is_err());
    assert!(!run.output_dir.exists());

    let cfg = write_config(tmp.path(), "");
    let status = Command::new(BIN)
        .args(["sweep", "--axis", "margin", "--values", "1"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert!(!status.success());
}

#[test]
fn verify_exits_zero() {
    let output = Command::new(BIN).arg("verify").output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    for suite in [
        "fd_euclidean",
        "fd_cosine",
        "orthogonality",
        "projection",
        "reduction",
        "masks",
    ] {
        let line = text.lines().find(|l| l.starts_with(suite)).unwrap();
        assert!(line.ends_with("pass"), "{line}");
        // max error column is numeric
        let fields: Vec<&str> = line.split_whitespace().collect();
        assert!(fields[2].parse::<f64>().is_ok(), "{line}");
    }
}
