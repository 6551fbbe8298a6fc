//! Splitting, metrics and reports for CAPE-V attribute predictions.

mod metrics;
mod plot;
mod report;
mod split;

pub use metrics::{pearson, rmse};
pub use plot::scatter_svg;
pub use report::{
    correlation_table, evaluate_predictions, export_scatter, render_report, report_csv,
    report_text, AttributeResult, CorrelationTable, EvalReport, ImportanceTable,
    CORRELATION_PARAMETERS,
};
pub use split::{
    balanced_split, balanced_split_indices, quantile_bins, stratified_folds, SplitIndices,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("constant input: correlation undefined")]
    ConstantInput,
    #[error("too few samples: need {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("report is empty")]
    EmptyReport,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The six CAPE-V attributes, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attribute {
    Severity,
    Breathiness,
    Pitch,
    Loudness,
    Roughness,
    Strain,
}

impl Attribute {
    pub const ALL: [Attribute; 6] = [
        Attribute::Severity,
        Attribute::Breathiness,
        Attribute::Pitch,
        Attribute::Loudness,
        Attribute::Roughness,
        Attribute::Strain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Severity => "severity",
            Attribute::Breathiness => "breathiness",
            Attribute::Pitch => "pitch",
            Attribute::Loudness => "loudness",
            Attribute::Roughness => "roughness",
            Attribute::Strain => "strain",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
    }
}

/// Six attribute scores, each on 0..=100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapevScores([f64; 6]);

impl CapevScores {
    pub fn new(values: [f64; 6]) -> Result<Self, EvalError> {
        for (a, v) in Attribute::ALL.iter().zip(values) {
            if !(0.0..=100.0).contains(&v) {
                return Err(EvalError::Invalid(format!(
                    "{} score {v} outside 0..100",
                    a.name()
                )));
            }
        }
        Ok(Self(values))
    }

    pub fn get(&self, a: Attribute) -> f64 {
        self.0[a.index()]
    }

    pub fn values(&self) -> [f64; 6] {
        self.0
    }
}
