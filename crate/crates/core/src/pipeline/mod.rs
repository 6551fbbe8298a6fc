//! Dataset manifests, feature tables, experiment orchestration and model
//! artifacts.

mod artifact;
mod augmented;
mod config;
mod dataset;
mod embed;
mod experiment;
mod manifest;
mod synth;

pub use artifact::{ArtifactModel, ModelArtifact, ARTIFACT_VERSION};
pub use augmented::augment_manifest;
pub use config::{parse_pairs, Family, GridChoice, RunConfig};
pub use dataset::{
    build_dataset, read_features_csv, write_failures_csv, write_features_csv, DatasetBuild,
    FailureRow, FeatureRow, FEATURES_HEADER,
};
pub use embed::{spectral_embedding, SPECTRAL_BANDS, SPECTRAL_SOURCE};
pub use experiment::{
    audit_run, evaluate_artifacts, rebuild_report, run_experiment, train_artifacts, AuditSummary,
    ExperimentOutcome,
};
pub use manifest::{DatasetManifest, ManifestRow, MANIFEST_HEADER};
pub use synth::{generate_synthetic_dataset, SynthConfig};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::AudioError;
use crate::augment::AugmentError;
use crate::classical::ClassicalError;
use crate::eval::EvalError;
use crate::features::FeatureError;
use crate::neural::NeuralError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid manifest: {0}")]
    ManifestInvalid(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no usable rows: {0}")]
    NoUsableRows(String),
    #[error("leakage detected: {0}")]
    Leakage(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// True for problems with the user's inputs rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            PipelineError::ManifestInvalid(_)
                | PipelineError::ConfigInvalid(_)
                | PipelineError::InvalidInput(_)
        )
    }
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Seed for a named sub-task, independent of execution order.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
