//! Geometry-aware resampling for imbalanced multi-class datasets.
//!
//! The crate combines two geometric resamplers with the plumbing needed to
//! benchmark them against classic baselines:
//!
//! * [`undersample`] — angular undersampling: per-cluster sorting of points
//!   by angle to the cluster medoid, rejecting near-angle points that share
//!   an orthant with an already-kept point.
//! * [`oversample`] — boundary-respecting oversampling: synthetic points are
//!   interpolated between same-class neighbors, skipping "no man's land"
//!   sub-intervals where other-class boundaries cross the segment.
//! * [`baselines`] — SMOTE, ADASYN, random over-/under-sampling.
//! * [`gmr`] — a Gaussian-mixture-regression classifier (joint GMM over
//!   features and a scalar class value, posterior-mean prediction).
//! * [`evaluate`] — macro metrics, stratified cross-validation that resamples
//!   training folds only, and a PCA nearest-neighbor margin probe.
//!
//! All randomized operations take an explicit seed and are bitwise
//! reproducible, including under parallel execution (see [`seeding`]).

pub mod baselines;
pub mod clustering;
pub mod dataset;
mod error;
pub mod evaluate;
pub mod geometry;
pub mod gmr;
pub mod oversample;
pub mod seeding;
pub mod undersample;

pub use error::{Error, Result};

// Keep the book's code examples compiling; each chapter is a doctest module.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/undersampling.md")]
    mod undersampling {}
    #[doc = include_str!("../../../book/src/oversampling.md")]
    mod oversampling {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/regression_classifier.md")]
    mod regression_classifier {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
}
