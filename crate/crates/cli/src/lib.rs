//! Subcommands of the `metric-surgery` binary.
//!
//! Output files are UTF-8 CSV with a header row and `\n` line endings.
//! Floats are written in scientific notation with 17 significant digits,
//! which parses back to the same `f64`.
//!
//! | file          | columns                                        |
//! |---------------|------------------------------------------------|
//! | `recall.csv`  | seed, epoch, split, k, recall                  |
//! | `stats.csv`   | seed, epoch, mean_s_ap, mean_s_an, lr          |
//! | `diagram.csv` | seed, split, anchor_id, s_np, s_nn             |
//! | `summary.csv` | axis, value, runs, mean_recall_at_1, std_recall_at_1 |
//!
//! `config.resolved.txt` echoes every configuration key with the value the
//! run actually used.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use metric_surgery::config::override_key;
use metric_surgery::evaluation::Split;
use metric_surgery::training::{train, TrainOutcome};
use metric_surgery::verify::{run_all, VerifyReport};
use metric_surgery::{parse_config, RunConfig};
use rayon::prelude::*;

pub const RECALL_CSV: &str = "recall.csv";
pub const STATS_CSV: &str = "stats.csv";
pub const DIAGRAM_CSV: &str = "diagram.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const CONFIG_ECHO: &str = "config.resolved.txt";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] metric_surgery::Error),
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot write CSV {path}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{0}")]
    Usage(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

/// `{:.16e}`: one leading digit plus 16 decimals.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn load_config(path: &Path, output_dir: Option<&Path>) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut run = parse_config(&text)?;
    if let Some(dir) = output_dir {
        run.output_dir = dir.to_owned();
    }
    Ok(run)
}

struct CsvFile {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl CsvFile {
    fn create(dir: &Path, name: &str, header: &[&str]) -> CliResult<Self> {
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut out = Self {
            writer: csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(file),
            path,
        };
        out.row(header)?;
        Ok(out)
    }

    fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|source| CliError::Csv {
            path: self.path.clone(),
            source,
        })
    }

    fn finish(mut self) -> CliResult<()> {
        self.writer.flush().map_err(io_err(&self.path))
    }
}

fn prepare_dir(dir: &Path, run: &RunConfig) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let echo = dir.join(CONFIG_ECHO);
    fs::write(&echo, run.to_text()).map_err(io_err(&echo))
}

/// Trains every seed of `run`, in parallel, returned in seed-list order.
pub fn train_seeds(run: &RunConfig) -> CliResult<Vec<(u64, TrainOutcome)>> {
    run.repeat_seeds
        .par_iter()
        .map(|&seed| Ok((seed, train(&run.for_seed(seed))?)))
        .collect()
}

fn splits(outcome: &TrainOutcome) -> Vec<Split> {
    let mut out = vec![Split::Train];
    if outcome.dataset.holdout.iter().any(|&h| h) {
        out.push(Split::Holdout);
    }
    out
}

fn write_recall(dir: &Path, runs: &[(u64, TrainOutcome)]) -> CliResult<()> {
    let mut csv = CsvFile::create(dir, RECALL_CSV, &["seed", "epoch", "split", "k", "recall"])?;
    for (seed, outcome) in runs {
        for rec in &outcome.log.epochs {
            for report in std::iter::once(&rec.train_recall).chain(&rec.holdout_recall) {
                for (k, r) in &report.recall {
                    csv.row([
                        seed.to_string(),
                        rec.epoch.to_string(),
                        report.split.to_string(),
                        k.to_string(),
                        format_float(*r),
                    ])?;
                }
            }
        }
    }
    csv.finish()
}

fn write_stats(dir: &Path, runs: &[(u64, TrainOutcome)]) -> CliResult<()> {
    let mut csv = CsvFile::create(dir, STATS_CSV, &["seed", "epoch", "mean_s_ap", "mean_s_an", "lr"])?;
    for (seed, outcome) in runs {
        for rec in &outcome.log.epochs {
            csv.row([
                seed.to_string(),
                rec.epoch.to_string(),
                format_float(rec.mean_s_ap),
                format_float(rec.mean_s_an),
                format_float(rec.lr),
            ])?;
        }
    }
    csv.finish()
}

fn write_diagram(dir: &Path, runs: &[(u64, TrainOutcome)]) -> CliResult<()> {
    let mut csv = CsvFile::create(dir, DIAGRAM_CSV, &["seed", "split", "anchor_id", "s_np", "s_nn"])?;
    for (seed, outcome) in runs {
        for split in splits(outcome) {
            for row in outcome.diagram(split)? {
                csv.row([
                    seed.to_string(),
                    split.to_string(),
                    row.anchor.to_string(),
                    format_float(row.s_np),
                    format_float(row.s_nn),
                ])?;
            }
        }
    }
    csv.finish()
}

fn write_run(dir: &Path, run: &RunConfig, runs: &[(u64, TrainOutcome)]) -> CliResult<()> {
    prepare_dir(dir, run)?;
    write_recall(dir, runs)?;
    write_stats(dir, runs)?;
    write_diagram(dir, runs)
}

/// Trains each seed and writes `recall.csv`, `stats.csv`, `diagram.csv`
/// and the config echo into `run.output_dir`.
pub fn cmd_train(run: &RunConfig) -> CliResult<Vec<(u64, TrainOutcome)>> {
    run.validate()?;
    // Fail on an unusable directory before spending time on training.
    prepare_dir(&run.output_dir, run)?;
    let runs = train_seeds(run)?;
    write_run(&run.output_dir, run, &runs)?;
    Ok(runs)
}

/// Like [`cmd_train`] but writes only `diagram.csv` and the config echo.
pub fn cmd_diagram(run: &RunConfig) -> CliResult<()> {
    run.validate()?;
    prepare_dir(&run.output_dir, run)?;
    let runs = train_seeds(run)?;
    write_diagram(&run.output_dir, &runs)
}

pub fn cmd_verify() -> VerifyReport {
    run_all()
}

pub fn render_verify(report: &VerifyReport) -> String {
    let mut out = format!(
        "{:<24} {:>7} {:>12} {:>10}  status\n",
        "suite", "cases", "max_error", "tolerance"
    );
    for s in &report.suites {
        out.push_str(&format!(
            "{:<24} {:>7} {:>12.3e} {:>10.0e}  {}\n",
            s.name,
            s.cases,
            s.max_error,
            s.tolerance,
            if s.passed() { "pass" } else { "FAIL" }
        ));
    }
    out.push_str(if report.all_passed() {
        "all suites passed\n"
    } else {
        "verification FAILED\n"
    });
    out
}

/// The configuration dimension a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Direction,
    PairWeight,
    TripletWeight,
    Lr,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Direction => "direction",
            Self::PairWeight => "pair_weight",
            Self::TripletWeight => "triplet_weight",
            Self::Lr => "lr",
        }
    }

    pub fn config_key(self) -> &'static str {
        match self {
            Self::Direction => "surgery.direction",
            Self::PairWeight => "surgery.pair_weight",
            Self::TripletWeight => "surgery.triplet_weight",
            Self::Lr => "train.base_lr",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "direction" => Ok(Self::Direction),
            "pair_weight" => Ok(Self::PairWeight),
            "triplet_weight" => Ok(Self::TripletWeight),
            "lr" => Ok(Self::Lr),
            other => Err(CliError::Usage(format!(
                "unknown sweep axis '{other}' (expected direction, pair_weight, triplet_weight or lr)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    /// Final holdout recall@1 of each seed, in seed-list order.
    pub recalls: Vec<f64>,
}

impl SweepRow {
    pub fn mean(&self) -> f64 {
        self.recalls.iter().sum::<f64>() / self.recalls.len() as f64
    }

    /// Sample standard deviation; NaN for a single run.
    pub fn std(&self) -> f64 {
        let n = self.recalls.len();
        if n < 2 {
            return f64::NAN;
        }
        let mu = self.mean();
        (self.recalls.iter().map(|r| (r - mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

fn value_dir_name(index: usize, value: &str) -> String {
    let safe: String = value
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{index:02}-{safe}")
}

/// One run per (value, seed). Every value is validated before training
/// starts. Each run writes its CSVs to
/// `<output_dir>/runs/<NN-value>/seed-<s>/`; `summary.csv` lands in
/// `output_dir` once all runs finish.
pub fn cmd_sweep(run: &RunConfig, axis: SweepAxis, values: &[String]) -> CliResult<Vec<SweepRow>> {
    run.validate()?;
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    if run.dataset.holdout_classes == 0 || !run.eval_ks.contains(&1) {
        return Err(CliError::Usage(
            "sweep summarizes holdout recall@1: needs dataset.holdout_classes > 0 and 1 in eval.ks".into(),
        ));
    }
    let configs: Vec<RunConfig> = values
        .iter()
        .map(|v| override_key(run, axis.config_key(), v.trim()))
        .collect::<Result<_, _>>()?;
    fs::create_dir_all(&run.output_dir).map_err(io_err(&run.output_dir))?;

    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|i| run.repeat_seeds.iter().map(move |&s| (i, s)))
        .collect();
    let results: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let cfg = configs[i].for_seed(seed);
            let outcome = train(&cfg)?;
            let dir = run
                .output_dir
                .join("runs")
                .join(value_dir_name(i, values[i].trim()))
                .join(format!("seed-{seed}"));
            let single = RunConfig {
                repeat_seeds: vec![seed],
                output_dir: dir.clone(),
                ..cfg
            };
            let runs = [(seed, outcome)];
            write_run(&dir, &single, &runs)?;
            Ok(runs[0].1.final_recall(Split::Holdout, 1).unwrap_or(f64::NAN))
        })
        .collect::<CliResult<_>>()?;

    let rows: Vec<SweepRow> = values
        .iter()
        .enumerate()
        .map(|(i, v)| SweepRow {
            value: v.trim().to_owned(),
            recalls: results[i * run.repeat_seeds.len()..(i + 1) * run.repeat_seeds.len()].to_vec(),
        })
        .collect();

    let mut csv = CsvFile::create(
        &run.output_dir,
        SUMMARY_CSV,
        &["axis", "value", "runs", "mean_recall_at_1", "std_recall_at_1"],
    )?;
    for row in &rows {
        csv.row([
            axis.to_string(),
            row.value.clone(),
            row.recalls.len().to_string(),
            format_float(row.mean()),
            format_float(row.std()),
        ])?;
    }
    csv.finish()?;
    Ok(rows)
}
