use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{dot, norm, normalize, tangent_project, Embedding};

use super::dataset::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncoderKind {
    /// One free parameter vector per sample.
    Table,
    /// A single matrix mapping inputs to embeddings.
    Linear,
}

impl EncoderKind {
    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Table => "table",
            EncoderKind::Linear => "linear",
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "table" => Ok(EncoderKind::Table),
            "linear" => Ok(EncoderKind::Linear),
            other => Err(Error::Validation(format!(
                "unknown encoder kind '{other}' (expected table or linear)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub embed_dim: usize,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self {
            kind: EncoderKind::Linear,
            embed_dim: 8,
        }
    }
}

impl EncoderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim < 2 {
            return Err(Error::Validation(format!(
                "encoder.embed_dim must be >= 2, got {}",
                self.embed_dim
            )));
        }
        Ok(())
    }
}

/// An embedding together with the norm of the vector it was normalized from.
#[derive(Debug, Clone, PartialEq)]
pub struct Forwarded {
    pub embedding: Embedding,
    pub pre_norm: f64,
}

/// The trainable map from samples to the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    /// Row `i` is the (unit-norm) parameter of dataset sample `i`.
    Table { params: Vec<Vec<f64>> },
    /// `embed_dim x input_dim`, row-major.
    Linear { weights: Vec<Vec<f64>> },
}

fn random_unit_row(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if let Ok(e) = normalize(&v) {
            return e.into_inner();
        }
    }
}

impl Encoder {
    /// Table rows start as random unit vectors; linear weights are drawn
    /// from `N(0, 1 / input_dim)`.
    pub fn init(spec: &EncoderSpec, dataset: &Dataset, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        Ok(match spec.kind {
            EncoderKind::Table => Encoder::Table {
                params: (0..dataset.len())
                    .map(|_| random_unit_row(rng, spec.embed_dim))
                    .collect(),
            },
            EncoderKind::Linear => {
                let input_dim = dataset.input_dim();
                let scale = 1.0 / (input_dim as f64).sqrt();
                Encoder::Linear {
                    weights: (0..spec.embed_dim)
                        .map(|_| {
                            (0..input_dim)
                                .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
                                .collect()
                        })
                        .collect(),
                }
            }
        })
    }

    pub fn embed_dim(&self) -> usize {
        match self {
            Encoder::Table { params } => params.first().map_or(0, Vec::len),
            Encoder::Linear { weights } => weights.len(),
        }
    }

    fn raw(&self, dataset: &Dataset, index: usize) -> Result<Vec<f64>> {
        match self {
            Encoder::Table { params } => params
                .get(index)
                .cloned()
                .ok_or_else(|| Error::InsufficientData(format!("no table row for sample {index}"))),
            Encoder::Linear { weights } => {
                let x = dataset
                    .inputs
                    .get(index)
                    .ok_or_else(|| Error::InsufficientData(format!("no input for sample {index}")))?;
                if weights.first().map_or(0, Vec::len) != x.dim() {
                    return Err(Error::DimensionMismatch {
                        left: weights.first().map_or(0, Vec::len),
                        right: x.dim(),
                    });
                }
                Ok(weights.iter().map(|row| dot(row, x.as_slice())).collect())
            }
        }
    }

    /// Embeds the given dataset samples, keeping the pre-normalization norms.
    pub fn forward_with_norms(&self, dataset: &Dataset, indices: &[usize]) -> Result<Vec<Forwarded>> {
        indices
            .iter()
            .map(|&i| {
                let v = self.raw(dataset, i)?;
                let pre_norm = norm(&v);
                Ok(Forwarded {
                    embedding: normalize(&v)?,
                    pre_norm,
                })
            })
            .collect()
    }

    pub fn forward(&self, dataset: &Dataset, indices: &[usize]) -> Result<Vec<Embedding>> {
        Ok(self
            .forward_with_norms(dataset, indices)?
            .into_iter()
            .map(|f| f.embedding)
            .collect())
    }

    /// Re-draws any table row that can no longer be normalized.
    pub fn repair(&mut self, rng: &mut impl Rng) -> usize {
        let mut repaired = 0;
        if let Encoder::Table { params } = self {
            for row in params.iter_mut() {
                if normalize(row).is_err() {
                    *row = random_unit_row(rng, row.len());
                    repaired += 1;
                }
            }
        }
        repaired
    }

    /// One descent step given gradients at the embeddings of `indices`.
    ///
    /// Each gradient is pulled back through the normalization
    /// (`(I - f f^T) g / ||v||`) and then through the encoder. Table rows are
    /// renormalized after the step. `indices` must be distinct.
    pub fn apply_updates(&mut self, dataset: &Dataset, indices: &[usize], grads: &[Vec<f64>], lr: f64) -> Result<()> {
        if indices.len() != grads.len() {
            return Err(Error::DimensionMismatch {
                left: indices.len(),
                right: grads.len(),
            });
        }
        if let Some(k) = grads.iter().position(|g| g.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFiniteGradient {
                triplet: k,
                anchor: indices[k],
            });
        }
        let mut seen = indices.to_vec();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("apply_updates: duplicate sample index".into()));
        }
        if lr == 0.0 {
            return Ok(());
        }

        let forwarded = self.forward_with_norms(dataset, indices)?;
        let pulled: Vec<Vec<f64>> = forwarded
            .iter()
            .zip(grads)
            .map(|(fw, g)| {
                let t = tangent_project(&fw.embedding, g)?;
                Ok(t.into_iter().map(|x| x / fw.pre_norm).collect())
            })
            .collect::<Result<_>>()?;

        match self {
            Encoder::Table { params } => {
                for (&i, p) in indices.iter().zip(&pulled) {
                    let stepped: Vec<f64> = params[i].iter().zip(p).map(|(w, g)| w - lr * g).collect();
                    params[i] = normalize(&stepped)?.into_inner();
                }
            }
            Encoder::Linear { weights } => {
                for (&i, p) in indices.iter().zip(&pulled) {
                    let x = dataset.inputs[i].as_slice();
                    for (row, gr) in weights.iter_mut().zip(p) {
                        if *gr == 0.0 {
                            continue;
                        }
                        for (w, xi) in row.iter_mut().zip(x) {
                            *w -= lr * gr * xi;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
