//! Recall@K and triplet-diagram data.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::Embedding;
use crate::mining::{check_batch_labels, similarity_matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Holdout,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Holdout => "holdout",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Recall@K for each requested K on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct RecallReport {
    pub split: Split,
    pub recall: BTreeMap<usize, f64>,
}

impl RecallReport {
    pub fn at(&self, k: usize) -> Option<f64> {
        self.recall.get(&k).copied()
    }
}

/// Fraction of queries whose `k` nearest neighbours (cosine similarity,
/// self excluded, ties to the lower index) contain a same-class sample.
pub fn recall_at_k(embeddings: &[Embedding], labels: &[usize], ks: &[usize], split: Split) -> Result<RecallReport> {
    let n = embeddings.len();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            left: n,
            right: labels.len(),
        });
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!("recall needs >= 2 samples, got {n}")));
    }
    for &k in ks {
        if k == 0 {
            return Err(Error::Validation("recall k must be >= 1".into()));
        }
        if k >= n {
            return Err(Error::KTooLarge { k, samples: n });
        }
    }
    let sims = similarity_matrix(embeddings);

    // Rank (0-based) of the best-ranked same-class neighbour of each query.
    let first_hit: Vec<Option<usize>> = (0..n)
        .map(|q| {
            let row = &sims[q];
            let ahead = |j: usize, i: usize| row[j] > row[i] || (row[j] == row[i] && j < i);
            let best = (0..n)
                .filter(|&j| j != q && labels[j] == labels[q])
                .reduce(|b, j| if ahead(j, b) { j } else { b })?;
            Some((0..n).filter(|&j| j != q && ahead(j, best)).count())
        })
        .collect();

    let recall = ks
        .iter()
        .map(|&k| {
            let hits = first_hit
                .iter()
                .filter(|r| matches!(r, Some(rank) if *rank < k))
                .count();
            (k, hits as f64 / n as f64)
        })
        .collect();
    Ok(RecallReport { split, recall })
}

/// One point of a triplet diagram: the anchor's nearest same-class and
/// nearest different-class similarities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagramRow {
    pub anchor: usize,
    pub s_np: f64,
    pub s_nn: f64,
}

impl DiagramRow {
    /// The nearest negative is closer than the nearest positive.
    pub fn is_hard(&self) -> bool {
        self.s_nn > self.s_np
    }
}

pub fn triplet_diagram(embeddings: &[Embedding], labels: &[usize]) -> Result<Vec<DiagramRow>> {
    let n = embeddings.len();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            left: n,
            right: labels.len(),
        });
    }
    check_batch_labels(labels)?;
    let sims = similarity_matrix(embeddings);
    Ok((0..n)
        .map(|a| {
            let row = &sims[a];
            let mut s_np = f64::NEG_INFINITY;
            let mut s_nn = f64::NEG_INFINITY;
            for j in 0..n {
                if j == a {
                    continue;
                }
                if labels[j] == labels[a] {
                    s_np = s_np.max(row[j]);
                } else {
                    s_nn = s_nn.max(row[j]);
                }
            }
            DiagramRow { anchor: a, s_np, s_nn }
        })
        .collect())
}
