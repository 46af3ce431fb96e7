use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::evaluation::Split;
use crate::geometry::{normalize, Embedding};

/// Class-clustered points on the unit sphere.
///
/// Each sample is `normalize(prototype + noise)` with independent
/// per-coordinate noise of standard deviation `noise_sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub input_dim: usize,
    pub noise_sigma: f64,
    /// The last `holdout_classes` classes are never trained on.
    pub holdout_classes: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 30,
            samples_per_class: 8,
            input_dim: 32,
            noise_sigma: 0.35,
            holdout_classes: 10,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if self.input_dim < 2 {
            return fail(format!("dataset.input_dim must be >= 2, got {}", self.input_dim));
        }
        if self.num_classes < 2 {
            return fail(format!("dataset.num_classes must be >= 2, got {}", self.num_classes));
        }
        if self.holdout_classes >= self.num_classes {
            return fail(format!(
                "dataset.holdout_classes ({}) must be < dataset.num_classes ({})",
                self.holdout_classes, self.num_classes
            ));
        }
        if self.samples_per_class < 1 {
            return fail("dataset.samples_per_class must be >= 1".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!("dataset.noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        Ok(())
    }

    pub fn train_classes(&self) -> usize {
        self.num_classes - self.holdout_classes
    }
}

/// Generated inputs with class labels and split flags, stored class-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Embedding>,
    pub labels: Vec<usize>,
    pub holdout: Vec<bool>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, Embedding::dim)
    }

    /// Indices of the samples in `split`, ascending.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        let want = split == Split::Holdout;
        (0..self.len()).filter(|&i| self.holdout[i] == want).collect()
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize, std: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

pub fn generate_dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.input_dim;
    let first_holdout = spec.num_classes - spec.holdout_classes;

    let mut inputs = Vec::with_capacity(spec.num_classes * spec.samples_per_class);
    let mut labels = Vec::with_capacity(inputs.capacity());
    let mut holdout = Vec::with_capacity(inputs.capacity());
    for class in 0..spec.num_classes {
        let prototype = loop {
            if let Ok(p) = normalize(&gaussian_vec(&mut rng, d, 1.0)) {
                break p;
            }
        };
        for _ in 0..spec.samples_per_class {
            let sample = loop {
                let noise = gaussian_vec(&mut rng, d, spec.noise_sigma);
                let raw: Vec<f64> = prototype.as_slice().iter().zip(&noise).map(|(p, e)| p + e).collect();
                if let Ok(s) = normalize(&raw) {
                    break s;
                }
            };
            inputs.push(sample);
            labels.push(class);
            holdout.push(class >= first_holdout);
        }
    }
    Ok(Dataset {
        inputs,
        labels,
        holdout,
    })
}
