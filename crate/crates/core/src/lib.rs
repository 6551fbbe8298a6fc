//! Voice quality assessment from sustained vowels.
//!
//! Acoustic parameter extraction (jitter, shimmer, HNR, zero-crossing rate),
//! colored and babble noise augmentation, from-scratch regressors (random
//! forest, KNN, epsilon-SVR, small neural heads over external embeddings) and
//! evaluation of CAPE-V attribute predictions.

pub mod audio;
pub mod augment;
pub mod classical;
pub mod eval;
pub mod features;
pub mod neural;
pub mod pipeline;
