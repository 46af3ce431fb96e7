//! Direct gradient surgery for triplet metric learning on the unit
//! hypersphere.
//!
//! Rather than differentiating a loss, each triplet's update is assembled
//! from three interchangeable parts: a unit direction ([`surgery::DirectionKind`]),
//! a pair weight ([`surgery::PairWeightKind`]) and a triplet weight
//! ([`surgery::TripletWeightKind`]). Two corners of that space reproduce the
//! hinge and NCA triplet-loss gradients exactly; the rest are new gradients.
//!
//! ```
//! use metric_surgery::geometry::normalize;
//! use metric_surgery::surgery::{best_combination_preset, compose};
//!
//! let a = normalize(&[1.0, 0.2, 0.0]).unwrap();
//! let p = normalize(&[0.8, 0.0, 0.4]).unwrap();
//! let n = normalize(&[0.9, 0.5, 0.0]).unwrap();
//! let cfg = best_combination_preset();
//! let update = compose(&cfg, &a, &p, &n, &cfg.neutral_stats()).unwrap();
//! assert!(update.is_finite());
//! ```
//!
//! Module map: [`geometry`] (sphere primitives and the projection analysis),
//! [`losses`] (reference losses and finite differences), [`surgery`]
//! (components and composition), [`mining`] (batches and easy-positive /
//! hard-negative mining), [`training`] (synthetic data, encoders, the
//! training loop), [`evaluation`] (Recall@K, triplet diagrams), [`config`]
//! and [`verify`].

pub mod config;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod losses;
pub mod mining;
pub mod surgery;
pub mod training;
pub mod verify;

pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};

// Keeps the guide's code blocks compiling and passing.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/directions.md")]
    mod directions {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/equivalence.md")]
    mod equivalence {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
