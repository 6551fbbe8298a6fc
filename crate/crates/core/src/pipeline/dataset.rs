//! Feature table construction and its CSV form.
//!
//! Header: `id,zcr,jitter,jitter_abs,shimmer,hnr,sex,age,severity,breathiness,pitch,loudness,roughness,strain`.
//! Floats are written in shortest round-trip form so a table read back is
//! bit-identical to the one written.

use std::path::Path;

use rayon::prelude::*;

use crate::audio::{self, AudioClip};
use crate::eval::CapevScores;
use crate::features::{extract_feature_vector, FeatureVector};

use super::manifest::DatasetManifest;
use super::PipelineError;

pub const FEATURES_HEADER: [&str; 14] = [
    "id",
    "zcr",
    "jitter",
    "jitter_abs",
    "shimmer",
    "hnr",
    "sex",
    "age",
    "severity",
    "breathiness",
    "pitch",
    "loudness",
    "roughness",
    "strain",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    pub features: FeatureVector,
    pub scores: CapevScores,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureRow {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBuild {
    pub rows: Vec<FeatureRow>,
    pub failures: Vec<FailureRow>,
    /// Common length after resampling, in samples at the working rate.
    pub target_len: usize,
}

/// Reads, resamples, length-normalizes and featurizes every manifest row.
///
/// Rows whose audio cannot be read or whose features cannot be extracted are
/// reported in `failures`; the rest proceed. Output order follows the
/// manifest regardless of thread count.
pub fn build_dataset(
    manifest: &DatasetManifest,
    working_rate: u32,
) -> Result<DatasetBuild, PipelineError> {
    let loaded: Vec<Result<AudioClip, String>> = manifest
        .rows
        .par_iter()
        .map(|r| {
            let clip = audio::read_wav(&r.wav_path).map_err(|e| e.to_string())?;
            audio::resample(&clip, working_rate).map_err(|e| e.to_string())
        })
        .collect();

    let ok: Vec<&AudioClip> = loaded.iter().filter_map(|c| c.as_ref().ok()).collect();
    if ok.is_empty() {
        return Err(PipelineError::NoUsableRows(
            "no audio file could be read".into(),
        ));
    }
    let target_len = audio::mean_length(ok.iter().copied())?;

    let extracted: Vec<Result<FeatureRow, FailureRow>> = manifest
        .rows
        .par_iter()
        .zip(loaded.par_iter())
        .map(|(r, clip)| {
            let fail = |reason: String| FailureRow {
                id: r.id.clone(),
                reason,
            };
            let clip = clip.as_ref().map_err(|e| fail(e.clone()))?;
            let clip =
                audio::normalize_length(clip, target_len).map_err(|e| fail(e.to_string()))?;
            let features =
                extract_feature_vector(&clip, r.age, r.sex).map_err(|e| fail(e.to_string()))?;
            Ok(FeatureRow {
                id: r.id.clone(),
                features,
                scores: r.scores,
            })
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for e in extracted {
        match e {
            Ok(r) => rows.push(r),
            Err(f) => failures.push(f),
        }
    }
    Ok(DatasetBuild {
        rows,
        failures,
        target_len,
    })
}

pub fn write_features_csv(rows: &[FeatureRow], path: &Path) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(FEATURES_HEADER)?;
    for r in rows {
        let mut rec = vec![r.id.clone()];
        rec.extend(r.features.to_array().iter().map(|v| v.to_string()));
        rec.extend(r.scores.values().iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureRow>, PipelineError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| PipelineError::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != FEATURES_HEADER {
        return Err(PipelineError::InvalidInput(format!(
            "{}: expected header {}",
            path.display(),
            FEATURES_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| {
            PipelineError::InvalidInput(format!("{} line {}: {what}", path.display(), i + 2))
        };
        let nums: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("unparseable number"))?;
        if nums.len() != 13 {
            return Err(bad("wrong field count"));
        }
        let mut f = [0.0; 7];
        f.copy_from_slice(&nums[..7]);
        let mut s = [0.0; 6];
        s.copy_from_slice(&nums[7..]);
        let scores = CapevScores::new(s).map_err(|e| bad(&e.to_string()))?;
        rows.push(FeatureRow {
            id: rec[0].to_string(),
            features: FeatureVector::from_array(f),
            scores,
        });
    }
    if rows.is_empty() {
        return Err(PipelineError::NoUsableRows(format!(
            "{} has no rows",
            path.display()
        )));
    }
    Ok(rows)
}

pub fn write_failures_csv(failures: &[FailureRow], path: &Path) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "reason"])?;
    for f in failures {
        w.write_record([&f.id, &f.reason])?;
    }
    w.flush()?;
    Ok(())
}
