//! Run configuration as a flat `dotted.key = value` document.
//!
//! ```text
//! # comments run to end of line
//! dataset.num_classes = 30
//! surgery.direction   = cosine_orthogonal
//! eval.ks             = 1, 2, 4, 8
//! run.seeds           = 0, 1, 2, 3, 4
//! ```
//!
//! Absent keys keep their defaults. [`RunConfig::to_text`] writes every key,
//! and parsing that text gives back the same configuration.

use std::collections::HashSet;
use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::evaluation::Split;
use crate::surgery::SurgeryConfig;
use crate::training::{Aggregate, EncoderSpec, SyntheticSpec, TrainParams};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: SyntheticSpec,
    pub encoder: EncoderSpec,
    pub surgery: SurgeryConfig,
    /// Slack of the relative-similarity sets.
    pub epsilon: f64,
    pub train: TrainParams,
    pub eval_ks: Vec<usize>,
    pub output_dir: PathBuf,
    /// One training run per seed; each overrides `train.seed`.
    pub repeat_seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: SyntheticSpec::default(),
            encoder: EncoderSpec::default(),
            surgery: SurgeryConfig::default(),
            epsilon: 0.1,
            train: TrainParams::default(),
            eval_ks: vec![1, 2, 4, 8],
            output_dir: PathBuf::from("out"),
            repeat_seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.encoder.validate()?;
        self.surgery.validate()?;
        self.train.validate()?;
        let fail = |m: String| Err(Error::Validation(m));
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return fail(format!("mining.epsilon must be >= 0, got {}", self.epsilon));
        }
        if self.repeat_seeds.is_empty() {
            return fail("run.seeds must name at least one seed".into());
        }
        if self.eval_ks.is_empty() {
            return fail("eval.ks must name at least one k".into());
        }
        let d = &self.dataset;
        if d.holdout_classes == 1 {
            return fail("dataset.holdout_classes must be 0 or >= 2 (a split needs two classes)".into());
        }
        if d.samples_per_class < 2 {
            return fail("dataset.samples_per_class must be >= 2 (every sample needs a positive)".into());
        }
        if self.train.batch.classes_per_batch > d.train_classes() {
            return fail(format!(
                "train.classes_per_batch ({}) exceeds the {} training classes",
                self.train.batch.classes_per_batch,
                d.train_classes()
            ));
        }
        if self.train.batch.samples_per_class > d.samples_per_class {
            return fail(format!(
                "train.samples_per_class ({}) exceeds dataset.samples_per_class ({})",
                self.train.batch.samples_per_class, d.samples_per_class
            ));
        }
        for (split, classes) in [(Split::Train, d.train_classes()), (Split::Holdout, d.holdout_classes)] {
            let n = classes * d.samples_per_class;
            if classes == 0 {
                continue;
            }
            if let Some(&k) = self.eval_ks.iter().find(|&&k| k == 0 || k >= n) {
                return fail(format!("eval.ks value {k} must be in [1, {}) for the {split} split", n));
            }
        }
        Ok(())
    }

    /// This configuration with the training seed set to `seed`.
    pub fn for_seed(&self, seed: u64) -> RunConfig {
        let mut run = self.clone();
        run.train.seed = seed;
        run
    }

    /// Every key with its resolved value, in the canonical order.
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let s = &self.surgery;
        let t = &self.train;
        let d = &self.dataset;
        let entries: Vec<(&str, String)> = vec![
            ("dataset.num_classes", d.num_classes.to_string()),
            ("dataset.samples_per_class", d.samples_per_class.to_string()),
            ("dataset.input_dim", d.input_dim.to_string()),
            ("dataset.noise_sigma", d.noise_sigma.to_string()),
            ("dataset.holdout_classes", d.holdout_classes.to_string()),
            ("dataset.seed", d.seed.to_string()),
            ("encoder.kind", self.encoder.kind.to_string()),
            ("encoder.embed_dim", self.encoder.embed_dim.to_string()),
            ("surgery.direction", s.direction.to_string()),
            ("surgery.pair_weight", s.pair_weight.to_string()),
            ("surgery.triplet_weight", s.triplet_weight.to_string()),
            ("surgery.mask", s.mask.to_string()),
            ("surgery.tau", s.tau.to_string()),
            ("surgery.alpha", s.alpha.to_string()),
            ("surgery.beta", s.beta.to_string()),
            ("surgery.lambda", s.lambda.to_string()),
            ("surgery.margin", s.margin.to_string()),
            ("surgery.orthogonalize_anchor", s.orthogonalize_anchor.to_string()),
            ("mining.epsilon", self.epsilon.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.classes_per_batch", t.batch.classes_per_batch.to_string()),
            ("train.samples_per_class", t.batch.samples_per_class.to_string()),
            ("train.base_lr", t.base_lr.to_string()),
            ("train.lr_step_factor", t.lr_step_factor.to_string()),
            ("train.lr_milestone_frac", t.lr_milestone_frac.to_string()),
            ("train.aggregate", t.aggregate.to_string()),
            ("train.steps_per_epoch", t.steps_per_epoch.unwrap_or(0).to_string()),
            ("eval.ks", join(self.eval_ks.iter().map(ToString::to_string).collect())),
            ("output.dir", self.output_dir.display().to_string()),
            (
                "run.seeds",
                join(self.repeat_seeds.iter().map(ToString::to_string).collect()),
            ),
        ];
        entries.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn scalar<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: Display,
{
    value.parse::<T>().map_err(|e| format!("'{value}': {e}"))
}

fn list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: Display,
{
    value.split(',').map(|v| scalar(v.trim())).collect()
}

fn apply(run: &mut RunConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    let s = &mut run.surgery;
    let t = &mut run.train;
    let d = &mut run.dataset;
    match key {
        "dataset.num_classes" => d.num_classes = scalar(value)?,
        "dataset.samples_per_class" => d.samples_per_class = scalar(value)?,
        "dataset.input_dim" => d.input_dim = scalar(value)?,
        "dataset.noise_sigma" => d.noise_sigma = scalar(value)?,
        "dataset.holdout_classes" => d.holdout_classes = scalar(value)?,
        "dataset.seed" => d.seed = scalar(value)?,
        "encoder.kind" => run.encoder.kind = scalar(value)?,
        "encoder.embed_dim" => run.encoder.embed_dim = scalar(value)?,
        "surgery.direction" => s.direction = scalar(value)?,
        "surgery.pair_weight" => s.pair_weight = scalar(value)?,
        "surgery.triplet_weight" => s.triplet_weight = scalar(value)?,
        "surgery.mask" => s.mask = scalar(value)?,
        "surgery.tau" => s.tau = scalar(value)?,
        "surgery.alpha" => s.alpha = scalar(value)?,
        "surgery.beta" => s.beta = scalar(value)?,
        "surgery.lambda" => s.lambda = scalar(value)?,
        "surgery.margin" => s.margin = scalar(value)?,
        "surgery.orthogonalize_anchor" => s.orthogonalize_anchor = scalar(value)?,
        "mining.epsilon" => run.epsilon = scalar(value)?,
        "train.epochs" => t.epochs = scalar(value)?,
        "train.classes_per_batch" => t.batch.classes_per_batch = scalar(value)?,
        "train.samples_per_class" => t.batch.samples_per_class = scalar(value)?,
        "train.base_lr" => t.base_lr = scalar(value)?,
        "train.lr_step_factor" => t.lr_step_factor = scalar(value)?,
        "train.lr_milestone_frac" => t.lr_milestone_frac = scalar(value)?,
        "train.aggregate" => t.aggregate = scalar::<Aggregate>(value)?,
        "train.steps_per_epoch" => {
            t.steps_per_epoch = match scalar::<usize>(value)? {
                0 => None,
                n => Some(n),
            }
        }
        "eval.ks" => run.eval_ks = list(value)?,
        "output.dir" => run.output_dir = PathBuf::from(value),
        "run.seeds" => run.repeat_seeds = list(value)?,
        _ => return Err(format!("unknown key '{key}'")),
    }
    Ok(())
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut run = RunConfig::default();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line, message };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected 'key = value', got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(parse_err(format!("empty value for '{key}'")));
        }
        if !seen.insert(key.to_owned()) {
            return Err(parse_err(format!("duplicate key '{key}'")));
        }
        apply(&mut run, key, value).map_err(parse_err)?;
    }
    run.validate()?;
    Ok(run)
}

/// Sets one key on an existing configuration (used by sweeps) and revalidates.
pub fn override_key(run: &RunConfig, key: &str, value: &str) -> Result<RunConfig> {
    let mut out = run.clone();
    apply(&mut out, key, value).map_err(Error::Validation)?;
    out.validate()?;
    Ok(out)
}
