//! Batch construction, easy-positive / hard-negative triplet selection and
//! the relative-similarity sets used by the multi-similarity pair weights.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{dot, Embedding, SimilarityPair};

/// `C` classes with `N` samples each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSpec {
    pub classes_per_batch: usize,
    pub samples_per_class: usize,
}

impl BatchSpec {
    pub fn new(classes_per_batch: usize, samples_per_class: usize) -> Result<Self> {
        let spec = Self {
            classes_per_batch,
            samples_per_class,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes_per_batch < 2 || self.samples_per_class < 2 {
            return Err(Error::Validation(format!(
                "batch needs at least 2 classes x 2 samples, got {} x {}",
                self.classes_per_batch, self.samples_per_class
            )));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.classes_per_batch * self.samples_per_class
    }
}

/// Samples `C` distinct classes and `N` samples from each, returning indices
/// into `labels`. The result is a pure function of `(labels, spec, seed)`.
pub fn make_batch(labels: &[usize], spec: BatchSpec, seed: u64) -> Result<Vec<usize>> {
    spec.validate()?;
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let eligible: Vec<&Vec<usize>> = by_class
        .values()
        .filter(|members| members.len() >= spec.samples_per_class)
        .collect();
    if eligible.len() < spec.classes_per_batch {
        return Err(Error::InsufficientData(format!(
            "{} classes with >= {} samples, batch needs {}",
            eligible.len(),
            spec.samples_per_class,
            spec.classes_per_batch
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = index::sample(&mut rng, eligible.len(), spec.classes_per_batch).into_vec();
    chosen.shuffle(&mut rng);
    let mut batch = Vec::with_capacity(spec.size());
    for c in chosen {
        let members = eligible[c];
        for k in index::sample(&mut rng, members.len(), spec.samples_per_class) {
            batch.push(members[k]);
        }
    }
    Ok(batch)
}

/// Full cosine similarity matrix of a set of embeddings.
pub fn similarity_matrix(embeddings: &[Embedding]) -> Vec<Vec<f64>> {
    let n = embeddings.len();
    let mut sims = vec![vec![0.0; n]; n];
    for i in 0..n {
        sims[i][i] = dot(embeddings[i].as_slice(), embeddings[i].as_slice()).clamp(-1.0, 1.0);
        for j in i + 1..n {
            let s = dot(embeddings[i].as_slice(), embeddings[j].as_slice()).clamp(-1.0, 1.0);
            sims[i][j] = s;
            sims[j][i] = s;
        }
    }
    sims
}

pub(crate) fn check_batch_labels(labels: &[usize]) -> Result<()> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in labels {
        *counts.entry(c).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::DegenerateBatch(format!(
            "{} class(es) present, need at least 2",
            counts.len()
        )));
    }
    if let Some((class, _)) = counts.iter().find(|(_, n)| **n < 2) {
        return Err(Error::DegenerateBatch(format!("class {class} is a singleton")));
    }
    Ok(())
}

/// Index of the maximum over `candidates`, lowest index on ties.
fn argmax(row: &[f64], candidates: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for j in candidates {
        match best {
            Some(b) if row[j] <= row[b] => {}
            _ => best = Some(j),
        }
    }
    best
}

/// Easy-positive / hard-negative triplets from a precomputed similarity
/// matrix: one `(anchor, positive, negative)` per anchor, in anchor order.
pub fn ephn_from_similarities(sims: &[Vec<f64>], labels: &[usize]) -> Result<Vec<(usize, usize, usize)>> {
    if sims.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            left: sims.len(),
            right: labels.len(),
        });
    }
    check_batch_labels(labels)?;
    let n = labels.len();
    let triplets = (0..n)
        .map(|a| {
            let row = &sims[a];
            let pos = argmax(row, (0..n).filter(|&j| j != a && labels[j] == labels[a]));
            let neg = argmax(row, (0..n).filter(|&j| labels[j] != labels[a]));
            // both exist: every class has >= 2 members and >= 2 classes are present
            (a, pos.expect("positive"), neg.expect("negative"))
        })
        .collect();
    Ok(triplets)
}

/// Easy-positive / hard-negative mining over a batch of embeddings.
///
/// Each sample anchors exactly one triplet: its most similar same-class
/// sample and its most similar different-class sample.
pub fn ephn_triplets(embeddings: &[Embedding], labels: &[usize]) -> Result<Vec<(usize, usize, usize)>> {
    ephn_from_similarities(&similarity_matrix(embeddings), labels)
}

/// Selects the relative similarities that enter the multi-similarity terms.
///
/// A relative positive is kept when it is below the hardest negative
/// similarity plus `epsilon`; a relative negative is kept when it is above
/// the easiest positive similarity minus `epsilon`. The hardest/easiest
/// values range over the selected pair together with its pool.
pub fn relative_sets(
    sims: SimilarityPair,
    relative_pos: &[f64],
    relative_neg: &[f64],
    epsilon: f64,
) -> (Vec<f64>, Vec<f64>) {
    let hardest_neg = relative_neg.iter().copied().fold(sims.s_an, f64::max);
    let easiest_pos = relative_pos.iter().copied().fold(sims.s_ap, f64::min);
    let set_pos = relative_pos
        .iter()
        .copied()
        .filter(|r| *r < hardest_neg + epsilon)
        .collect();
    let set_neg = relative_neg
        .iter()
        .copied()
        .filter(|r| *r > easiest_pos - epsilon)
        .collect();
    (set_pos, set_neg)
}

/// Everything the composer needs to know about one mined triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct MiningContext {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
    pub sims: SimilarityPair,
    /// Similarities of the anchor to its other in-batch positives.
    pub relative_pos: Vec<f64>,
    /// Similarities of the anchor to its other in-batch negatives.
    pub relative_neg: Vec<f64>,
    pub set_pos: Vec<f64>,
    pub set_neg: Vec<f64>,
}

/// Mines one triplet per anchor and attaches its relative-similarity pools
/// and selected sets. The selected positive and negative are excluded from
/// their own pools.
pub fn mine_batch(embeddings: &[Embedding], labels: &[usize], epsilon: f64) -> Result<Vec<MiningContext>> {
    let sims = similarity_matrix(embeddings);
    let triplets = ephn_from_similarities(&sims, labels)?;
    triplets
        .into_iter()
        .map(|(a, p, n)| {
            let row = &sims[a];
            let pair = SimilarityPair::new(row[p], row[n])?;
            let relative_pos: Vec<f64> = (0..labels.len())
                .filter(|&j| j != a && j != p && labels[j] == labels[a])
                .map(|j| row[j])
                .collect();
            let relative_neg: Vec<f64> = (0..labels.len())
                .filter(|&j| j != n && labels[j] != labels[a])
                .map(|j| row[j])
                .collect();
            let (set_pos, set_neg) = relative_sets(pair, &relative_pos, &relative_neg, epsilon);
            Ok(MiningContext {
                anchor: a,
                positive: p,
                negative: n,
                sims: pair,
                relative_pos,
                relative_neg,
                set_pos,
                set_neg,
            })
        })
        .collect()
}
