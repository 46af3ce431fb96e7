use crate::error::{Error, Result};
use crate::geometry::{check_dims, dot, norm, scale, sub, Embedding, COINCIDENT_EPS, ZERO_NORM};

use super::DirectionKind;

/// Unit motion directions for one triplet.
///
/// `e_p` moves the positive, `e_n` the negative; the anchor moves along the
/// weighted sum of `e_ap` (its positive-pair part) and `e_an` (its
/// negative-pair part). All four are in gradient sense: features move
/// opposite to them.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    pub e_p: Vec<f64>,
    pub e_n: Vec<f64>,
    pub e_ap: Vec<f64>,
    pub e_an: Vec<f64>,
}

/// Computes the direction set for `kind`.
///
/// `orthogonalize_anchor` controls whether the orthogonal kinds also project
/// the anchor's negative-pair component; it has no effect on the base kinds.
pub fn unit_directions(
    kind: DirectionKind,
    f_a: &Embedding,
    f_p: &Embedding,
    f_n: &Embedding,
    orthogonalize_anchor: bool,
) -> Result<DirectionSet> {
    let (a, p, n) = (f_a.as_slice(), f_p.as_slice(), f_n.as_slice());
    check_dims(a, p)?;
    check_dims(a, n)?;

    let mut set = if kind.is_euclidean() {
        if dot(a, p) >= 1.0 - COINCIDENT_EPS {
            return Err(Error::DegenerateTriplet("anchor and positive coincide"));
        }
        if dot(a, n) >= 1.0 - COINCIDENT_EPS {
            return Err(Error::DegenerateTriplet("anchor and negative coincide"));
        }
        let e_p = unit(sub(p, a)).ok_or(Error::DegenerateTriplet("anchor and positive coincide"))?;
        let e_n = unit(sub(a, n)).ok_or(Error::DegenerateTriplet("anchor and negative coincide"))?;
        DirectionSet {
            e_ap: scale(&e_p, -1.0),
            e_an: scale(&e_n, -1.0),
            e_p,
            e_n,
        }
    } else {
        DirectionSet {
            e_p: scale(a, -1.0),
            e_n: a.to_vec(),
            e_ap: scale(p, -1.0),
            e_an: n.to_vec(),
        }
    };

    if kind.is_orthogonal() {
        let axis = sub(a, p);
        let axis_norm = norm(&axis);
        // With f_a == f_p every vector already satisfies e_n . (f_a - f_p) = 0.
        if axis_norm > ZERO_NORM {
            let axis = scale(&axis, 1.0 / axis_norm);
            set.e_n = orthogonal_unit(&set.e_n, &axis);
            if orthogonalize_anchor {
                set.e_an = orthogonal_unit(&set.e_an, &axis);
            }
        }
    }
    Ok(set)
}

fn unit(v: Vec<f64>) -> Option<Vec<f64>> {
    let n = norm(&v);
    (n > ZERO_NORM).then(|| scale(&v, 1.0 / n))
}

/// Component of `v` orthogonal to the unit `axis`, renormalized; the zero
/// vector if `v` is parallel to `axis`.
fn orthogonal_unit(v: &[f64], axis: &[f64]) -> Vec<f64> {
    let along = dot(v, axis);
    let mut rest = v.to_vec();
    for (r, x) in rest.iter_mut().zip(axis) {
        *r -= along * x;
    }
    unit(rest).unwrap_or_else(|| vec![0.0; v.len()])
}
