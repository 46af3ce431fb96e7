//! Pair weights, relative-similarity statistics, triplet weights and the
//! selective-contrastive masks.

use crate::error::{Error, Result};
use crate::geometry::SimilarityPair;

use super::{MaskKind, PairWeightKind, SurgeryConfig, TripletWeightKind};

/// Exponents inside the sigmoid pair weights are clamped to this magnitude.
pub const EXPONENT_CLAMP: f64 = 50.0;

#[inline]
fn guarded_exp(x: f64) -> f64 {
    x.clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP).exp()
}

/// Weights for the anchor-positive (`p_pos`) and anchor-negative (`p_neg`) pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairWeights {
    pub p_pos: f64,
    pub p_neg: f64,
}

/// Which family of multi-similarity statistics a [`RelativeStats`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatsForm {
    Sigmoid,
    Linear,
}

/// Relative-similarity terms of the multi-similarity pair weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeStats {
    pub m_pos: f64,
    pub m_neg: f64,
    pub form: StatsForm,
}

impl RelativeStats {
    /// The statistics of empty relative sets, under which the
    /// multi-similarity weights reduce to their self-similarity forms.
    pub fn neutral(form: StatsForm) -> Self {
        let m = match form {
            StatsForm::Sigmoid => 1.0,
            StatsForm::Linear => 0.0,
        };
        Self {
            m_pos: m,
            m_neg: m,
            form,
        }
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> Option<f64> {
    let len = values.len();
    (len > 0).then(|| values.sum::<f64>() / len as f64)
}

/// Averages the relative-similarity terms over the selected sets.
///
/// Sigmoid form: `m+ = mean exp(alpha (s_ap - R))`, `m- = mean exp(-beta (s_an - R))`.
/// Linear form: `m+ = mean (s_ap - R)`, `m- = mean (s_an - R)`.
/// An empty set yields the neutral value (1 or 0).
pub fn relative_stats(
    form: StatsForm,
    sims: SimilarityPair,
    set_pos: &[f64],
    set_neg: &[f64],
    cfg: &SurgeryConfig,
) -> RelativeStats {
    let neutral = RelativeStats::neutral(form);
    let (m_pos, m_neg) = match form {
        StatsForm::Sigmoid => (
            mean(set_pos.iter().map(|r| guarded_exp(cfg.alpha * (sims.s_ap - r)))),
            mean(set_neg.iter().map(|r| guarded_exp(-cfg.beta * (sims.s_an - r)))),
        ),
        StatsForm::Linear => (
            mean(set_pos.iter().map(|r| sims.s_ap - r)),
            mean(set_neg.iter().map(|r| sims.s_an - r)),
        ),
    };
    RelativeStats {
        m_pos: m_pos.unwrap_or(neutral.m_pos),
        m_neg: m_neg.unwrap_or(neutral.m_neg),
        form,
    }
}

/// Evaluates the pair weights of `kind`; both are clamped at zero.
///
/// `rel` is only consulted by the multi-similarity kinds, which require
/// statistics of the matching form.
pub fn pair_weights(
    kind: PairWeightKind,
    sims: SimilarityPair,
    cfg: &SurgeryConfig,
    rel: &RelativeStats,
) -> Result<PairWeights> {
    let expect = |form: StatsForm, expected: &'static str| {
        if rel.form == form {
            Ok(())
        } else {
            Err(Error::MismatchedStats {
                kind: kind.name(),
                expected,
            })
        }
    };
    let (p_pos, p_neg) = match kind {
        PairWeightKind::Constant => (1.0, 1.0),
        PairWeightKind::Euclidean => (sims.d_ap(), sims.d_an()),
        PairWeightKind::Linear => (1.0 - sims.s_ap, sims.s_an),
        PairWeightKind::Sigmoid => (
            1.0 / (1.0 + guarded_exp(cfg.alpha * (sims.s_ap - cfg.lambda))),
            1.0 / (1.0 + guarded_exp(-cfg.beta * (sims.s_an - cfg.lambda))),
        ),
        PairWeightKind::SigmoidMs => {
            expect(StatsForm::Sigmoid, "sigmoid")?;
            (
                1.0 / (rel.m_pos + guarded_exp(cfg.alpha * (sims.s_ap - cfg.lambda))),
                1.0 / (rel.m_neg + guarded_exp(-cfg.beta * (sims.s_an - cfg.lambda))),
            )
        }
        PairWeightKind::LinearMs => {
            expect(StatsForm::Linear, "linear")?;
            ((1.0 - rel.m_pos) * (1.0 - sims.s_ap), (1.0 + rel.m_neg) * sims.s_an)
        }
    };
    Ok(PairWeights {
        p_pos: p_pos.max(0.0),
        p_neg: p_neg.max(0.0),
    })
}

/// Overall weight of a triplet.
///
/// constant: `0.5`; cosine: `1 / (1 + exp(tau (s_ap - s_an)))`;
/// circle: `1 / (1 + exp(tau (s_ap (2 - s_ap) - s_an^2)))`.
pub fn triplet_weight(kind: TripletWeightKind, sims: SimilarityPair, tau: f64) -> f64 {
    let SimilarityPair { s_ap, s_an } = sims;
    match kind {
        TripletWeightKind::Constant => 0.5,
        TripletWeightKind::Cosine => 1.0 / (1.0 + (tau * (s_ap - s_an)).exp()),
        TripletWeightKind::Circle => 1.0 / (1.0 + (tau * (s_ap * (2.0 - s_ap) - s_an * s_an)).exp()),
    }
}

/// Outcome of a selective-contrastive mask on the positive pair weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskDecision {
    Keep,
    Zero,
}

/// sc1 drops the positive pair when the negative is closer than the
/// positive; sc2 drops it outside the circular boundary
/// `s_ap (2 - s_ap) - s_an^2 > 0.5`.
pub fn positive_mask(kind: MaskKind, sims: SimilarityPair) -> MaskDecision {
    let SimilarityPair { s_ap, s_an } = sims;
    let zero = match kind {
        MaskKind::None => false,
        MaskKind::Sc1 => s_an > s_ap,
        MaskKind::Sc2 => s_ap * (2.0 - s_ap) - s_an * s_an > 0.5,
    };
    if zero {
        MaskDecision::Zero
    } else {
        MaskDecision::Keep
    }
}
