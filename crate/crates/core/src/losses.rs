//! Reference triplet losses and a central-difference gradient oracle.
//!
//! These are never used to train. They exist so that every closed-form
//! gradient component in [`crate::surgery`] can be checked against the loss
//! it is supposed to reproduce. Inputs are raw slices: the oracle perturbs
//! features off the sphere, and similarities are then plain dot products.

use crate::error::{Error, Result};
use crate::geometry::{check_dims, dot};

/// Member of a triplet with respect to which a gradient is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TripletMember {
    Anchor,
    Positive,
    Negative,
}

impl TripletMember {
    pub const ALL: [TripletMember; 3] = [Self::Anchor, Self::Positive, Self::Negative];
}

/// Margin and scale of the two reference losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    pub margin: f64,
    pub tau: f64,
}

impl LossParams {
    pub fn new(margin: f64, tau: f64) -> Result<Self> {
        if !(margin >= 0.0) {
            return Err(Error::Validation(format!("margin must be >= 0, got {margin}")));
        }
        if !(tau > 0.0) {
            return Err(Error::Validation(format!("tau must be > 0, got {tau}")));
        }
        Ok(Self { margin, tau })
    }
}

/// One of the two reference losses, with its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceLoss {
    /// Hinge on squared Euclidean distances.
    Euclidean { margin: f64 },
    /// Softmax (NCA) over the two cosine similarities.
    Cosine { tau: f64 },
}

impl ReferenceLoss {
    pub fn evaluate(&self, f_a: &[f64], f_p: &[f64], f_n: &[f64]) -> Result<f64> {
        match *self {
            Self::Euclidean { margin } => triplet_loss_euclidean(f_a, f_p, f_n, margin),
            Self::Cosine { tau } => triplet_loss_cosine(f_a, f_p, f_n, tau),
        }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `max(||a - p||^2 - ||a - n||^2 + margin, 0)`
pub fn triplet_loss_euclidean(f_a: &[f64], f_p: &[f64], f_n: &[f64], margin: f64) -> Result<f64> {
    check_dims(f_a, f_p)?;
    check_dims(f_a, f_n)?;
    Ok((squared_distance(f_a, f_p) - squared_distance(f_a, f_n) + margin).max(0.0))
}

/// `log(1 + exp(x))` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `-log(exp(tau s_ap) / (exp(tau s_ap) + exp(tau s_an)))`, evaluated as
/// `softplus(tau (s_an - s_ap))`.
pub fn triplet_loss_cosine(f_a: &[f64], f_p: &[f64], f_n: &[f64], tau: f64) -> Result<f64> {
    check_dims(f_a, f_p)?;
    check_dims(f_a, f_n)?;
    Ok(softplus(tau * (dot(f_a, f_n) - dot(f_a, f_p))))
}

/// Central-difference gradient of `loss` with respect to one triplet member.
pub fn numeric_gradient(loss: ReferenceLoss, triplet: [&[f64]; 3], wrt: TripletMember, h: f64) -> Result<Vec<f64>> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::Validation(format!("step h = {h} outside [1e-7, 1e-3]")));
    }
    let [a, p, n] = triplet;
    check_dims(a, p)?;
    check_dims(a, n)?;
    let mut work = [a.to_vec(), p.to_vec(), n.to_vec()];
    let slot = match wrt {
        TripletMember::Anchor => 0,
        TripletMember::Positive => 1,
        TripletMember::Negative => 2,
    };
    let dim = a.len();
    let mut grad = Vec::with_capacity(dim);
    for k in 0..dim {
        let original = work[slot][k];
        work[slot][k] = original + h;
        let plus = loss.evaluate(&work[0], &work[1], &work[2])?;
        work[slot][k] = original - h;
        let minus = loss.evaluate(&work[0], &work[1], &work[2])?;
        work[slot][k] = original;
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}
