//! Gradient surgery: per-triplet updates assembled from a unit direction,
//! a pair weight and a triplet weight.
//!
//! Instead of differentiating a loss, the update for each member of a
//! triplet is written down directly:
//!
//! ```text
//! g_p = T * P+ * e_p
//! g_n = T * P- * e_n
//! g_a = T * (P+ * e_ap + P- * e_an)
//! ```
//!
//! Choosing `(Euclidean, Euclidean, Constant)` reproduces a quarter of the
//! hinge triplet-loss gradient; `(Cosine, Constant, Cosine)` reproduces the
//! NCA triplet-loss gradient divided by `tau`. Every other combination is a
//! gradient that no simple loss needs to exist for.

mod direction;
mod weights;

use std::fmt;
use std::str::FromStr;

pub use direction::{unit_directions, DirectionSet};
pub use weights::{
    pair_weights, positive_mask, relative_stats, triplet_weight, MaskDecision, PairWeights, RelativeStats, StatsForm,
    EXPONENT_CLAMP,
};

use crate::error::{Error, Result};
use crate::geometry::{axpy, check_dims, Embedding, SimilarityPair};

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Validation(format!(
                        "unknown {} '{}' (expected one of: {})",
                        stringify!($name),
                        other,
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }
    };
}

named_enum! {
    /// Unit gradient direction.
    DirectionKind {
        Euclidean => "euclidean",
        Cosine => "cosine",
        EuclideanOrthogonal => "euclidean_orthogonal",
        CosineOrthogonal => "cosine_orthogonal",
    }
}

impl DirectionKind {
    pub fn is_euclidean(self) -> bool {
        matches!(self, Self::Euclidean | Self::EuclideanOrthogonal)
    }

    pub fn is_orthogonal(self) -> bool {
        matches!(self, Self::EuclideanOrthogonal | Self::CosineOrthogonal)
    }
}

named_enum! {
    /// Pair weight applied separately to the positive and negative pair.
    PairWeightKind {
        Constant => "constant",
        Euclidean => "euclidean",
        Linear => "linear",
        Sigmoid => "sigmoid",
        SigmoidMs => "sigmoid_ms",
        LinearMs => "linear_ms",
    }
}

impl PairWeightKind {
    /// The relative-statistics form a multi-similarity kind consumes.
    pub fn stats_form(self) -> Option<StatsForm> {
        match self {
            Self::SigmoidMs => Some(StatsForm::Sigmoid),
            Self::LinearMs => Some(StatsForm::Linear),
            _ => None,
        }
    }
}

named_enum! {
    /// Weight applied to the whole triplet.
    TripletWeightKind {
        Constant => "constant",
        Cosine => "cosine",
        Circle => "circle",
    }
}

named_enum! {
    /// Selective-contrastive mask on the positive pair weight.
    MaskKind {
        None => "none",
        Sc1 => "sc1",
        Sc2 => "sc2",
    }
}

/// A point in the component space, plus the scalars the components use.
#[derive(Debug, Clone, PartialEq)]
pub struct SurgeryConfig {
    pub direction: DirectionKind,
    pub pair_weight: PairWeightKind,
    pub triplet_weight: TripletWeightKind,
    pub mask: MaskKind,
    /// Scale inside the cosine and circle triplet weights.
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    /// Only used by the reference hinge loss.
    pub margin: f64,
    /// Whether the orthogonal directions also project the anchor's
    /// negative-pair component.
    pub orthogonalize_anchor: bool,
}

impl Default for SurgeryConfig {
    fn default() -> Self {
        Self {
            direction: DirectionKind::Cosine,
            pair_weight: PairWeightKind::Constant,
            triplet_weight: TripletWeightKind::Constant,
            mask: MaskKind::None,
            tau: 1.0,
            alpha: 2.0,
            beta: 10.0,
            lambda: 0.5,
            margin: 0.2,
            orthogonalize_anchor: true,
        }
    }
}

impl SurgeryConfig {
    pub fn with_components(
        direction: DirectionKind,
        pair_weight: PairWeightKind,
        triplet_weight: TripletWeightKind,
    ) -> Self {
        Self {
            direction,
            pair_weight,
            triplet_weight,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Validation(what.to_owned()))
            }
        };
        check(self.tau > 0.0 && self.tau.is_finite(), "surgery.tau must be > 0")?;
        check(self.alpha > 0.0 && self.alpha.is_finite(), "surgery.alpha must be > 0")?;
        check(self.beta > 0.0 && self.beta.is_finite(), "surgery.beta must be > 0")?;
        check((0.0..=1.0).contains(&self.lambda), "surgery.lambda must be in [0, 1]")?;
        check(
            self.margin >= 0.0 && self.margin.is_finite(),
            "surgery.margin must be >= 0",
        )?;
        Ok(())
    }

    /// Neutral statistics of the form this config's pair weight expects.
    pub fn neutral_stats(&self) -> RelativeStats {
        RelativeStats::neutral(self.pair_weight.stats_form().unwrap_or(StatsForm::Linear))
    }
}

/// The strongest combination found by the isolated-component study:
/// orthogonal cosine direction, linear multi-similarity pair weight and the
/// circle triplet weight.
pub fn best_combination_preset() -> SurgeryConfig {
    SurgeryConfig::with_components(
        DirectionKind::CosineOrthogonal,
        PairWeightKind::LinearMs,
        TripletWeightKind::Circle,
    )
}

/// Gradient-sense updates for the three members of one triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletUpdate {
    pub g_a: Vec<f64>,
    pub g_p: Vec<f64>,
    pub g_n: Vec<f64>,
}

impl TripletUpdate {
    pub fn is_finite(&self) -> bool {
        [&self.g_a, &self.g_p, &self.g_n]
            .iter()
            .all(|g| g.iter().all(|x| x.is_finite()))
    }
}

/// Assembles the update for one triplet.
///
/// ```
/// use metric_surgery::geometry::normalize;
/// use metric_surgery::surgery::{compose, SurgeryConfig};
///
/// let a = normalize(&[1.0, 0.0, 0.0]).unwrap();
/// let p = normalize(&[0.0, 1.0, 0.0]).unwrap();
/// let n = normalize(&[0.0, 0.0, 1.0]).unwrap();
/// let cfg = SurgeryConfig::default(); // cosine / constant / constant
/// let u = compose(&cfg, &a, &p, &n, &cfg.neutral_stats()).unwrap();
/// assert_eq!(u.g_p, vec![-0.5, 0.0, 0.0]);
/// assert_eq!(u.g_n, vec![0.5, 0.0, 0.0]);
/// assert_eq!(u.g_a, vec![0.0, -0.5, 0.5]);
/// ```
pub fn compose(
    cfg: &SurgeryConfig,
    f_a: &Embedding,
    f_p: &Embedding,
    f_n: &Embedding,
    rel: &RelativeStats,
) -> Result<TripletUpdate> {
    check_dims(f_a.as_slice(), f_p.as_slice())?;
    check_dims(f_a.as_slice(), f_n.as_slice())?;
    let sims = SimilarityPair::of(f_a, f_p, f_n)?;
    let dirs = unit_directions(cfg.direction, f_a, f_p, f_n, cfg.orthogonalize_anchor)?;
    let t = triplet_weight(cfg.triplet_weight, sims, cfg.tau);
    let mut w = pair_weights(cfg.pair_weight, sims, cfg, rel)?;
    if positive_mask(cfg.mask, sims) == MaskDecision::Zero {
        w.p_pos = 0.0;
    }

    let dim = f_a.dim();
    let mut g_p = vec![0.0; dim];
    let mut g_n = vec![0.0; dim];
    let mut g_a = vec![0.0; dim];
    axpy(&mut g_p, t * w.p_pos, &dirs.e_p);
    axpy(&mut g_n, t * w.p_neg, &dirs.e_n);
    axpy(&mut g_a, t * w.p_pos, &dirs.e_ap);
    axpy(&mut g_a, t * w.p_neg, &dirs.e_an);
    Ok(TripletUpdate { g_a, g_p, g_n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dot, norm, normalize, sub};
    use crate::losses::{numeric_gradient, ReferenceLoss, TripletMember};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Embedding {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        normalize(&v).unwrap()
    }

    fn rel_err(got: &[f64], want: &[f64]) -> f64 {
        norm(&sub(got, want)) / norm(want).max(1e-12)
    }

    fn pick(u: &TripletUpdate, m: TripletMember) -> &[f64] {
        match m {
            TripletMember::Anchor => &u.g_a,
            TripletMember::Positive => &u.g_p,
            TripletMember::Negative => &u.g_n,
        }
    }

    #[test]
    fn names_round_trip() {
        for k in DirectionKind::ALL {
            assert_eq!(k.name().parse::<DirectionKind>().unwrap(), *k);
        }
        for k in PairWeightKind::ALL {
            assert_eq!(k.to_string().parse::<PairWeightKind>().unwrap(), *k);
        }
        assert!("cosin".parse::<DirectionKind>().is_err());
        assert_eq!("sc2".parse::<MaskKind>().unwrap(), MaskKind::Sc2);
    }

    #[test]
    fn preset_components() {
        let p = best_combination_preset();
        assert_eq!(p.direction, DirectionKind::CosineOrthogonal);
        assert_eq!(p.pair_weight, PairWeightKind::LinearMs);
        assert_eq!(p.triplet_weight, TripletWeightKind::Circle);
        assert_eq!(p.mask, MaskKind::None);
        assert_eq!((p.alpha, p.beta, p.lambda), (2.0, 10.0, 0.5));
    }

    #[test]
    fn validate_ranges() {
        assert!(SurgeryConfig::default().validate().is_ok());
        let bad = SurgeryConfig {
            lambda: 1.5,
            ..SurgeryConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SurgeryConfig {
            tau: 0.0,
            ..SurgeryConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn directions_are_unit_and_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for i in 0..1000 {
            let d = [3, 8, 32][i % 3];
            let (a, p, n) = (
                random_unit(&mut rng, d),
                random_unit(&mut rng, d),
                random_unit(&mut rng, d),
            );
            let axis = sub(a.as_slice(), p.as_slice());
            for kind in DirectionKind::ALL {
                let s = unit_directions(*kind, &a, &p, &n, true).unwrap();
                for e in [&s.e_p, &s.e_n, &s.e_ap, &s.e_an] {
                    assert!((norm(e) - 1.0).abs() < 1e-9);
                }
                if kind.is_orthogonal() {
                    assert!(dot(&s.e_n, &axis).abs() < 1e-9);
                    assert!(dot(&s.e_an, &axis).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn euclidean_composition_is_quarter_hinge_gradient() {
        let cfg = SurgeryConfig::with_components(
            DirectionKind::Euclidean,
            PairWeightKind::Euclidean,
            TripletWeightKind::Constant,
        );
        let loss = ReferenceLoss::Euclidean { margin: cfg.margin };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut checked = 0;
        while checked < 300 {
            let (a, p, n) = (
                random_unit(&mut rng, 16),
                random_unit(&mut rng, 16),
                random_unit(&mut rng, 16),
            );
            let sims = SimilarityPair::of(&a, &p, &n).unwrap();
            if sims.d_ap().powi(2) - sims.d_an().powi(2) + cfg.margin <= 1e-3 {
                continue;
            }
            let u = compose(&cfg, &a, &p, &n, &cfg.neutral_stats()).unwrap();
            for m in TripletMember::ALL {
                let fd = numeric_gradient(loss, [a.as_slice(), p.as_slice(), n.as_slice()], m, 1e-5).unwrap();
                let quarter: Vec<f64> = fd.iter().map(|x| x / 4.0).collect();
                assert!(rel_err(pick(&u, m), &quarter) < 1e-4);
            }
            checked += 1;
        }
    }

    #[test]
    fn cosine_composition_is_nca_gradient_over_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for tau in [1.0, 5.0] {
            let cfg = SurgeryConfig {
                tau,
                ..SurgeryConfig::with_components(
                    DirectionKind::Cosine,
                    PairWeightKind::Constant,
                    TripletWeightKind::Cosine,
                )
            };
            for _ in 0..300 {
                let (a, p, n) = (
                    random_unit(&mut rng, 8),
                    random_unit(&mut rng, 8),
                    random_unit(&mut rng, 8),
                );
                let u = compose(&cfg, &a, &p, &n, &cfg.neutral_stats()).unwrap();
                for m in TripletMember::ALL {
                    let fd = numeric_gradient(
                        ReferenceLoss::Cosine { tau },
                        [a.as_slice(), p.as_slice(), n.as_slice()],
                        m,
                        1e-5,
                    )
                    .unwrap();
                    let scaled: Vec<f64> = fd.iter().map(|x| x / tau).collect();
                    assert!(rel_err(pick(&u, m), &scaled) < 1e-4);
                }
            }
        }
    }

    #[test]
    fn masks_zero_positive_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut hits = [0usize; 2];
        for _ in 0..2000 {
            let (a, p, n) = (
                random_unit(&mut rng, 3),
                random_unit(&mut rng, 3),
                random_unit(&mut rng, 3),
            );
            let sims = SimilarityPair::of(&a, &p, &n).unwrap();
            for (slot, mask) in [MaskKind::Sc1, MaskKind::Sc2].into_iter().enumerate() {
                let masked = SurgeryConfig {
                    mask,
                    ..SurgeryConfig::default()
                };
                let open = SurgeryConfig::default();
                let um = compose(&masked, &a, &p, &n, &masked.neutral_stats()).unwrap();
                let uo = compose(&open, &a, &p, &n, &open.neutral_stats()).unwrap();
                assert_eq!(um.g_n, uo.g_n);
                if positive_mask(mask, sims) == MaskDecision::Zero {
                    hits[slot] += 1;
                    assert!(um.g_p.iter().all(|x| *x == 0.0));
                } else {
                    assert_eq!(um.g_p, uo.g_p);
                }
            }
        }
        assert!(hits.iter().all(|h| *h > 0));
    }

    #[test]
    fn degenerate_triplet_propagates() {
        let a = normalize(&[1.0, 0.0, 0.0]).unwrap();
        let n = normalize(&[0.0, 1.0, 0.0]).unwrap();
        let cfg = SurgeryConfig {
            direction: DirectionKind::Euclidean,
            ..SurgeryConfig::default()
        };
        assert!(matches!(
            compose(&cfg, &a, &a, &n, &cfg.neutral_stats()),
            Err(Error::DegenerateTriplet(_))
        ));
    }
}
