//! Unit-sphere primitives.
//!
//! Every feature the library touches lives on the unit sphere `S^{d-1}`.
//! [`Embedding`] carries that invariant; the free functions here are the
//! handful of vector operations the gradient formulas need, plus the
//! projection-length analysis that explains why Euclidean and cosine
//! directions behave differently near coincident pairs.

use crate::error::{Error, Result};

/// Norms at or below this value are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

/// A pair is considered coincident once its similarity reaches `1 - COINCIDENT_EPS`.
pub const COINCIDENT_EPS: f64 = 1e-12;

/// An L2-normalized feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// The selected anchor-positive and anchor-negative similarities of a triplet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityPair {
    pub s_ap: f64,
    pub s_an: f64,
}

impl SimilarityPair {
    pub fn new(s_ap: f64, s_an: f64) -> Result<Self> {
        for s in [s_ap, s_an] {
            if !(-1.0..=1.0).contains(&s) {
                return Err(Error::OutOfRange(s));
            }
        }
        Ok(Self { s_ap, s_an })
    }

    pub fn of(f_a: &Embedding, f_p: &Embedding, f_n: &Embedding) -> Result<Self> {
        Ok(Self {
            s_ap: cosine_similarity(f_a, f_p)?,
            s_an: cosine_similarity(f_a, f_n)?,
        })
    }

    /// Euclidean distance of the positive pair, `sqrt(2 - 2 s_ap)`.
    pub fn d_ap(&self) -> f64 {
        distance_from_similarity(self.s_ap)
    }

    pub fn d_an(&self) -> f64 {
        distance_from_similarity(self.s_an)
    }
}

/// The two metrics whose gradient directions are compared on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Euclidean,
    Cosine,
}

/// Which member of a triplet a pair quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairRole {
    Positive,
    Negative,
}

pub(crate) fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[inline]
pub(crate) fn scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|x| x * k).collect()
}

/// `acc += k * a`
#[inline]
pub(crate) fn axpy(acc: &mut [f64], k: f64, a: &[f64]) {
    for (y, x) in acc.iter_mut().zip(a) {
        *y += k * x;
    }
}

fn clamp_unit(s: f64) -> f64 {
    s.clamp(-1.0, 1.0)
}

fn distance_from_similarity(s: f64) -> f64 {
    (2.0 - 2.0 * clamp_unit(s)).max(0.0).sqrt()
}

/// Scales `v` to unit length.
///
/// ```
/// use metric_surgery::geometry::normalize;
/// let e = normalize(&[3.0, 4.0, 0.0]).unwrap();
/// assert_eq!(e.as_slice(), &[0.6, 0.8, 0.0]);
/// ```
pub fn normalize(v: &[f64]) -> Result<Embedding> {
    let n = norm(v);
    if !(n > ZERO_NORM) || !n.is_finite() {
        return Err(Error::ZeroVector { norm: n });
    }
    Ok(Embedding(v.iter().map(|x| x / n).collect()))
}

/// Dot product of two embeddings, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &Embedding, v: &Embedding) -> Result<f64> {
    check_dims(&u.0, &v.0)?;
    Ok(clamp_unit(dot(&u.0, &v.0)))
}

/// `||u - v||`, computed as `sqrt(2 - 2 cos(u, v))` on the sphere.
pub fn euclidean_distance(u: &Embedding, v: &Embedding) -> Result<f64> {
    Ok(distance_from_similarity(cosine_similarity(u, v)?))
}

/// Removes the component of `g` along the unit vector `f`: `g - (f.g) f`.
pub fn tangent_project(f: &Embedding, g: &[f64]) -> Result<Vec<f64>> {
    check_dims(&f.0, g)?;
    let radial = dot(&f.0, g);
    let mut out = g.to_vec();
    axpy(&mut out, -radial, &f.0);
    Ok(out)
}

/// Length of a unit gradient direction projected onto the tangent plane at
/// the moved feature, as a function of the pair similarity `s`.
///
/// Only this component changes the angle between the two features.
/// Euclidean: `sqrt((1 + s) / 2)`; cosine: `sqrt(1 - s^2)`.
pub fn effective_strength(kind: MetricKind, s: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&s) {
        return Err(Error::OutOfRange(s));
    }
    Ok(match kind {
        MetricKind::Euclidean => ((1.0 + s) / 2.0).sqrt(),
        MetricKind::Cosine => (1.0 - s * s).max(0.0).sqrt(),
    })
}

/// Signed length of a unit gradient direction along the moved feature
/// itself (the radial part that normalization discards).
///
/// | kind      | positive                 | negative                 |
/// |-----------|--------------------------|--------------------------|
/// | euclidean | `(1 - s) / sqrt(2 - 2s)` | `(s - 1) / sqrt(2 - 2s)` |
/// | cosine    | `-s`                     | `s`                      |
pub fn parallel_length(kind: MetricKind, role: PairRole, s: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&s) {
        return Err(Error::OutOfRange(s));
    }
    match kind {
        MetricKind::Euclidean => {
            if s >= 1.0 - COINCIDENT_EPS {
                return Err(Error::Degenerate(s));
            }
            let d = (2.0 - 2.0 * s).sqrt();
            Ok(match role {
                PairRole::Positive => (1.0 - s) / d,
                PairRole::Negative => (s - 1.0) / d,
            })
        }
        MetricKind::Cosine => Ok(match role {
            PairRole::Positive => -s,
            PairRole::Negative => s,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn unit(v: &[f64]) -> Embedding {
        normalize(v).unwrap()
    }

    fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Embedding {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        normalize(&v).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(unit(&[3.0, 4.0, 0.0]).as_slice(), &[0.6, 0.8, 0.0]);
        assert_eq!(unit(&[1.0, 0.0, 0.0]).as_slice(), &[1.0, 0.0, 0.0]);
        assert!(matches!(normalize(&[0.0, 0.0, 0.0]), Err(Error::ZeroVector { .. })));
        assert!(normalize(&[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn cosine_examples() {
        let x = unit(&[1.0, 0.0, 0.0]);
        let y = unit(&[0.0, 1.0, 0.0]);
        assert_eq!(cosine_similarity(&x, &y).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&x, &x).unwrap(), 1.0);
        let a = unit(&[1.0, 0.0]);
        let b = unit(&[-1.0, 0.0]);
        assert_eq!(cosine_similarity(&a, &b).unwrap(), -1.0);
        assert!(matches!(
            cosine_similarity(&a, &x),
            Err(Error::DimensionMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn distance_examples() {
        let x = unit(&[1.0, 0.0, 0.0]);
        let y = unit(&[0.0, 1.0, 0.0]);
        assert_eq!(euclidean_distance(&x, &x).unwrap(), 0.0);
        assert!((euclidean_distance(&x, &y).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        let a = unit(&[1.0, 0.0]);
        let b = unit(&[-1.0, 0.0]);
        assert_eq!(euclidean_distance(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn tangent_projection_examples() {
        let f = unit(&[1.0, 0.0, 0.0]);
        assert_eq!(tangent_project(&f, &[1.0, 1.0, 0.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(tangent_project(&f, &[2.5, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(tangent_project(&f, &[0.0, 3.0, -1.0]).unwrap(), vec![0.0, 3.0, -1.0]);
        assert!(tangent_project(&f, &[1.0]).is_err());
    }

    #[test]
    fn strength_examples() {
        use MetricKind::*;
        assert_eq!(effective_strength(Euclidean, 1.0).unwrap(), 1.0);
        assert_eq!(effective_strength(Cosine, 1.0).unwrap(), 0.0);
        assert!((effective_strength(Euclidean, 0.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(effective_strength(Cosine, 0.0).unwrap(), 1.0);
        // (1+s)/2 = 1-s^2  <=>  2s^2 + s - 1 = 0  <=>  s = 1/2
        let crossing = 3f64.sqrt() / 2.0;
        assert!((effective_strength(Euclidean, 0.5).unwrap() - crossing).abs() < 1e-12);
        assert!((effective_strength(Cosine, 0.5).unwrap() - crossing).abs() < 1e-12);
        assert!(matches!(effective_strength(Cosine, 1.5), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn parallel_length_examples() {
        use MetricKind::*;
        use PairRole::*;
        assert!((parallel_length(Euclidean, Positive, 0.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(parallel_length(Cosine, Positive, 0.3).unwrap(), -0.3);
        assert_eq!(parallel_length(Cosine, Negative, 0.3).unwrap(), 0.3);
        assert!(matches!(
            parallel_length(Euclidean, Negative, 1.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn parallel_length_matches_direction_dot_feature() {
        // l_par is e.f for the moved feature: check against explicit vectors.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = random_unit(&mut rng, 5);
            let p = random_unit(&mut rng, 5);
            let s = cosine_similarity(&a, &p).unwrap();
            let diff = sub(p.as_slice(), a.as_slice());
            let e = scale(&diff, 1.0 / norm(&diff));
            let l = dot(&e, p.as_slice());
            let got = parallel_length(MetricKind::Euclidean, PairRole::Positive, s).unwrap();
            assert!((l - got).abs() < 1e-9);
        }
    }

    #[test]
    fn distance_identity_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2, 8, 64] {
            for _ in 0..1000 {
                let u = random_unit(&mut rng, d);
                let v = random_unit(&mut rng, d);
                let dist = euclidean_distance(&u, &v).unwrap();
                let direct = norm(&sub(u.as_slice(), v.as_slice()));
                let s = cosine_similarity(&u, &v).unwrap();
                assert!((dist * dist - (2.0 - 2.0 * s)).abs() < 1e-9);
                assert!((direct - dist).abs() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn projection_lengths_are_complementary(s in -1.0f64..(1.0 - 1e-6)) {
            for kind in [MetricKind::Euclidean, MetricKind::Cosine] {
                let strength = effective_strength(kind, s).unwrap();
                for role in [PairRole::Positive, PairRole::Negative] {
                    let l = parallel_length(kind, role, s).unwrap();
                    prop_assert!((l * l + strength * strength - 1.0).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn euclidean_stronger_above_one_half(s in -1.0f64..=1.0) {
            let e = effective_strength(MetricKind::Euclidean, s).unwrap();
            let c = effective_strength(MetricKind::Cosine, s).unwrap();
            if s > 0.5 + 1e-9 {
                prop_assert!(e > c);
            } else if s < 0.5 - 1e-9 && s > -1.0 {
                prop_assert!(e < c);
            }
        }

        #[test]
        fn tangent_output_is_orthogonal(
            v in proptest::collection::vec(-1.0f64..1.0, 6),
            g in proptest::collection::vec(-10.0f64..10.0, 6),
        ) {
            prop_assume!(norm(&v) > 1e-3);
            let f = normalize(&v).unwrap();
            let t = tangent_project(&f, &g).unwrap();
            prop_assert!(dot(&t, f.as_slice()).abs() < 1e-12);
        }

        #[test]
        fn normalized_has_unit_norm(v in proptest::collection::vec(-100.0f64..100.0, 2..32)) {
            prop_assume!(norm(&v) > 1e-6);
            let e = normalize(&v).unwrap();
            prop_assert!((norm(e.as_slice()) - 1.0).abs() < 1e-9);
        }
    }
}
