//! Fitted per-attribute models persisted as JSON.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classical::ClassicalModel;
use crate::neural::{EmbeddingMatrix, Head};

use super::{sha256_hex, PipelineError};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ArtifactModel {
    Classical(ClassicalModel),
    Neural(Head),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub version: u32,
    pub family: String,
    pub attribute: String,
    pub seed: u64,
    /// SHA-256 over the sorted training ids, one per line.
    pub training_digest: String,
    pub train_ids: Vec<String>,
    /// Input column names; for embedding heads, the embedding source tag.
    pub feature_names: Vec<String>,
    /// Raw model outputs are multiplied by this to give a 0..100 score.
    pub target_scale: f64,
    /// Hyperparameters chosen by grid search, `name=value` pairs.
    pub selected: Vec<String>,
    pub model: ArtifactModel,
}

pub(crate) fn training_digest(ids: &[String]) -> String {
    let mut sorted: Vec<&str> = ids.iter().map(String::as_str).collect();
    sorted.sort_unstable();
    let mut text = String::new();
    for id in sorted {
        text.push_str(id);
        text.push('\n');
    }
    sha256_hex(text.as_bytes())
}

impl ModelArtifact {
    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let bytes = fs::read(path).map_err(|e| {
            PipelineError::InvalidInput(format!("cannot read {}: {e}", path.display()))
        })?;
        let a: Self = serde_json::from_slice(&bytes).map_err(|e| {
            PipelineError::InvalidInput(format!("{}: not a model artifact: {e}", path.display()))
        })?;
        if a.version != ARTIFACT_VERSION {
            return Err(PipelineError::InvalidInput(format!(
                "{}: artifact version {} (supported: {ARTIFACT_VERSION})",
                path.display(),
                a.version
            )));
        }
        Ok(a)
    }

    pub fn is_neural(&self) -> bool {
        matches!(self.model, ArtifactModel::Neural(_))
    }

    pub fn predict_features(&self, x: &[f64]) -> Result<f64, PipelineError> {
        match &self.model {
            ArtifactModel::Classical(m) => Ok(m.predict(x)? * self.target_scale),
            ArtifactModel::Neural(_) => Err(PipelineError::InvalidInput(format!(
                "{} model for {} takes embeddings, not acoustic features",
                self.family, self.attribute
            ))),
        }
    }

    pub fn predict_embedding(&self, e: &EmbeddingMatrix) -> Result<f64, PipelineError> {
        match &self.model {
            ArtifactModel::Neural(h) => Ok(h.predict(e)? * self.target_scale),
            ArtifactModel::Classical(_) => Err(PipelineError::InvalidInput(format!(
                "{} model for {} takes acoustic features, not embeddings",
                self.family, self.attribute
            ))),
        }
    }
}
