//! Synthetic data, encoders and the surgical training loop.
//!
//! One step is: sample a `C x N` batch, embed it, mine one easy-positive /
//! hard-negative triplet per anchor, compose each triplet's update, reduce
//! the updates onto the batch samples in triplet order, and pull the result
//! back through the normalization and the encoder.

mod dataset;
mod encoder;

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use dataset::{generate_dataset, Dataset, SyntheticSpec};
pub use encoder::{Encoder, EncoderKind, EncoderSpec, Forwarded};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluation::{recall_at_k, triplet_diagram, DiagramRow, RecallReport, Split};
use crate::geometry::axpy;
use crate::losses::softplus;
use crate::mining::{make_batch, mine_batch, BatchSpec, MiningContext};
use crate::surgery::{compose, relative_stats, SurgeryConfig, TripletUpdate};

/// How per-triplet updates are combined over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregate {
    Mean,
    Sum,
}

impl Aggregate {
    pub fn name(self) -> &'static str {
        match self {
            Aggregate::Mean => "mean",
            Aggregate::Sum => "sum",
        }
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mean" => Ok(Aggregate::Mean),
            "sum" => Ok(Aggregate::Sum),
            other => Err(Error::Validation(format!(
                "unknown aggregate '{other}' (expected mean or sum)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub epochs: usize,
    pub batch: BatchSpec,
    pub base_lr: f64,
    pub lr_step_factor: f64,
    pub lr_milestone_frac: f64,
    pub seed: u64,
    pub aggregate: Aggregate,
    /// Batches per epoch; `None` means one pass over the training split.
    pub steps_per_epoch: Option<usize>,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch: BatchSpec {
                classes_per_batch: 8,
                samples_per_class: 4,
            },
            base_lr: 0.5,
            lr_step_factor: 0.1,
            lr_milestone_frac: 0.6,
            seed: 0,
            aggregate: Aggregate::Mean,
            steps_per_epoch: None,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        self.batch.validate()?;
        let fail = |m: &str| Err(Error::Validation(m.to_owned()));
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return fail("train.base_lr must be > 0");
        }
        if !(self.lr_step_factor > 0.0 && self.lr_step_factor < 1.0) {
            return fail("train.lr_step_factor must be in (0, 1)");
        }
        if !(self.lr_milestone_frac > 0.0 && self.lr_milestone_frac < 1.0) {
            return fail("train.lr_milestone_frac must be in (0, 1)");
        }
        if self.steps_per_epoch == Some(0) {
            return fail("train.steps_per_epoch must be >= 1 (omit it for one pass per epoch)");
        }
        Ok(())
    }

    pub fn milestone(&self) -> usize {
        (self.epochs as f64 * self.lr_milestone_frac).floor() as usize
    }
}

/// Step schedule: `base_lr` until the milestone epoch, then
/// `base_lr * lr_step_factor`.
pub fn lr_at(epoch: usize, params: &TrainParams) -> f64 {
    if epoch < params.milestone() {
        params.base_lr
    } else {
        params.base_lr * params.lr_step_factor
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean NCA triplet loss (at the configured `tau`) of the mined triplets.
    pub mean_loss_proxy: f64,
    pub mean_s_ap: f64,
    pub mean_s_an: f64,
    /// Triplets whose update was skipped because the direction was undefined.
    pub skipped_triplets: usize,
    pub train_recall: RecallReport,
    pub holdout_recall: Option<RecallReport>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: TrainLog,
    pub encoder: Encoder,
    pub dataset: Dataset,
}

impl TrainOutcome {
    pub fn embeddings(&self, split: Split) -> Result<(Vec<usize>, Vec<crate::geometry::Embedding>)> {
        let idx = self.dataset.indices(split);
        let emb = self.encoder.forward(&self.dataset, &idx)?;
        Ok((idx, emb))
    }

    /// Triplet diagram of the final embeddings of `split`.
    pub fn diagram(&self, split: Split) -> Result<Vec<DiagramRow>> {
        let (idx, emb) = self.embeddings(split)?;
        let labels: Vec<usize> = idx.iter().map(|&i| self.dataset.labels[i]).collect();
        let mut rows = triplet_diagram(&emb, &labels)?;
        for r in &mut rows {
            r.anchor = idx[r.anchor];
        }
        Ok(rows)
    }

    pub fn final_recall(&self, split: Split, k: usize) -> Option<f64> {
        let rec = self.log.last()?;
        match split {
            Split::Train => rec.train_recall.at(k),
            Split::Holdout => rec.holdout_recall.as_ref()?.at(k),
        }
    }
}

/// Composes the update for one mined triplet. `Ok(None)` marks a triplet
/// whose unit direction is undefined (coincident pair); it contributes
/// nothing to the step.
pub fn surgical_update(
    cfg: &SurgeryConfig,
    ctx: &MiningContext,
    embeddings: &[crate::geometry::Embedding],
) -> Result<Option<TripletUpdate>> {
    let rel = match cfg.pair_weight.stats_form() {
        Some(form) => relative_stats(form, ctx.sims, &ctx.set_pos, &ctx.set_neg, cfg),
        None => cfg.neutral_stats(),
    };
    match compose(
        cfg,
        &embeddings[ctx.anchor],
        &embeddings[ctx.positive],
        &embeddings[ctx.negative],
        &rel,
    ) {
        Ok(u) => Ok(Some(u)),
        Err(Error::DegenerateTriplet(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

struct StepStats {
    loss: f64,
    s_ap: f64,
    s_an: f64,
    triplets: usize,
    skipped: usize,
}

fn split_recall(encoder: &Encoder, dataset: &Dataset, split: Split, ks: &[usize]) -> Result<Option<RecallReport>> {
    let idx = dataset.indices(split);
    if idx.len() < 2 {
        return Ok(None);
    }
    let emb = encoder.forward(dataset, &idx)?;
    let labels: Vec<usize> = idx.iter().map(|&i| dataset.labels[i]).collect();
    recall_at_k(&emb, &labels, ks, split).map(Some)
}

fn train_step(
    run: &RunConfig,
    dataset: &Dataset,
    encoder: &mut Encoder,
    batch: &[usize],
    lr: f64,
) -> Result<StepStats> {
    let cfg = &run.surgery;
    let forwarded = encoder.forward(dataset, batch)?;
    let labels: Vec<usize> = batch.iter().map(|&i| dataset.labels[i]).collect();
    let contexts = mine_batch(&forwarded, &labels, run.epsilon)?;

    // Composition is order-independent; the reduction below runs in
    // ascending triplet order so any worker count gives identical bits.
    let updates: Vec<Option<TripletUpdate>> = contexts
        .par_iter()
        .with_min_len(64)
        .map(|ctx| surgical_update(cfg, ctx, &forwarded))
        .collect::<Result<_>>()?;

    let dim = encoder.embed_dim();
    let mut grads = vec![vec![0.0; dim]; batch.len()];
    let mut stats = StepStats {
        loss: 0.0,
        s_ap: 0.0,
        s_an: 0.0,
        triplets: contexts.len(),
        skipped: 0,
    };
    for (t, (ctx, update)) in contexts.iter().zip(&updates).enumerate() {
        stats.loss += softplus(cfg.tau * (ctx.sims.s_an - ctx.sims.s_ap));
        stats.s_ap += ctx.sims.s_ap;
        stats.s_an += ctx.sims.s_an;
        let Some(u) = update else {
            stats.skipped += 1;
            continue;
        };
        if !u.is_finite() {
            return Err(Error::NonFiniteGradient {
                triplet: t,
                anchor: batch[ctx.anchor],
            });
        }
        axpy(&mut grads[ctx.anchor], 1.0, &u.g_a);
        axpy(&mut grads[ctx.positive], 1.0, &u.g_p);
        axpy(&mut grads[ctx.negative], 1.0, &u.g_n);
    }
    if run.train.aggregate == Aggregate::Mean && !contexts.is_empty() {
        let inv = 1.0 / contexts.len() as f64;
        for g in &mut grads {
            g.iter_mut().for_each(|x| *x *= inv);
        }
    }
    encoder.apply_updates(dataset, batch, &grads, lr)?;
    Ok(stats)
}

/// Trains one run with `run.train.seed`. Deterministic for a fixed config.
pub fn train(run: &RunConfig) -> Result<TrainOutcome> {
    run.validate()?;
    let dataset = generate_dataset(&run.dataset)?;
    let params = &run.train;

    let mut init_rng = ChaCha8Rng::seed_from_u64(params.seed);
    init_rng.set_stream(1);
    let mut batch_rng = ChaCha8Rng::seed_from_u64(params.seed);
    batch_rng.set_stream(2);

    let mut encoder = Encoder::init(&run.encoder, &dataset, &mut init_rng)?;
    let train_idx = dataset.indices(Split::Train);
    let train_labels: Vec<usize> = train_idx.iter().map(|&i| dataset.labels[i]).collect();
    let steps = params
        .steps_per_epoch
        .unwrap_or_else(|| train_idx.len().div_ceil(params.batch.size()).max(1));

    let mut log = TrainLog::default();
    for epoch in 0..params.epochs {
        let lr = lr_at(epoch, params);
        let mut acc = StepStats {
            loss: 0.0,
            s_ap: 0.0,
            s_an: 0.0,
            triplets: 0,
            skipped: 0,
        };
        for step in 0..steps {
            let wrap = |e: Error| Error::Step {
                epoch,
                step,
                source: Box::new(e),
            };
            let local = make_batch(&train_labels, params.batch, batch_rng.next_u64()).map_err(wrap)?;
            let batch: Vec<usize> = local.iter().map(|&k| train_idx[k]).collect();
            let stats = match train_step(run, &dataset, &mut encoder, &batch, lr) {
                Err(Error::ZeroVector { .. }) if encoder.repair(&mut init_rng) > 0 => {
                    train_step(run, &dataset, &mut encoder, &batch, lr).map_err(wrap)?
                }
                other => other.map_err(wrap)?,
            };
            acc.loss += stats.loss;
            acc.s_ap += stats.s_ap;
            acc.s_an += stats.s_an;
            acc.triplets += stats.triplets;
            acc.skipped += stats.skipped;
        }

        let n = acc.triplets.max(1) as f64;
        log.epochs.push(EpochRecord {
            epoch,
            lr,
            mean_loss_proxy: acc.loss / n,
            mean_s_ap: acc.s_ap / n,
            mean_s_an: acc.s_an / n,
            skipped_triplets: acc.skipped,
            train_recall: split_recall(&encoder, &dataset, Split::Train, &run.eval_ks)?
                .expect("training split has >= 2 samples"),
            holdout_recall: split_recall(&encoder, &dataset, Split::Holdout, &run.eval_ks)?,
        });
    }
    Ok(TrainOutcome { log, encoder, dataset })
}
