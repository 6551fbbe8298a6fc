//! Dataset manifest CSV.
//!
//! Columns: `id,wav_path,age,sex,severity,breathiness,pitch,loudness,roughness,strain,embedding_path`.
//! `sex` is `M` or `F`; scores are pre-averaged rater scores in 0..=100;
//! `embedding_path` may be empty. Relative paths resolve against the
//! manifest's directory. An optional `source_id` column marks augmented rows
//! with the id they were derived from.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::eval::CapevScores;
use crate::features::Sex;

use super::PipelineError;

pub const MANIFEST_HEADER: [&str; 11] = [
    "id",
    "wav_path",
    "age",
    "sex",
    "severity",
    "breathiness",
    "pitch",
    "loudness",
    "roughness",
    "strain",
    "embedding_path",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub id: String,
    pub wav_path: PathBuf,
    pub age: f64,
    pub sex: Sex,
    pub scores: CapevScores,
    pub embedding_path: Option<PathBuf>,
    pub source_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
    /// Raw file bytes, kept for digests.
    pub digest: String,
}

fn invalid(line: usize, msg: impl std::fmt::Display) -> PipelineError {
    PipelineError::ManifestInvalid(format!("line {line}: {msg}"))
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let bytes = fs::read(path).map_err(|e| {
            PipelineError::ManifestInvalid(format!("cannot read {}: {e}", path.display()))
        })?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::parse(&bytes, &base)
    }

    pub fn parse(bytes: &[u8], base: &Path) -> Result<Self, PipelineError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(bytes);
        let headers = reader
            .headers()
            .map_err(|e| PipelineError::ManifestInvalid(e.to_string()))?
            .clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let mut idx = Vec::new();
        for name in &MANIFEST_HEADER[..10] {
            idx.push(
                col(name).ok_or_else(|| {
                    PipelineError::ManifestInvalid(format!("missing column {name}"))
                })?,
            );
        }
        let emb_col = col("embedding_path");
        let src_col = col("source_id");

        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| invalid(line, e))?;
            let field = |k: usize| rec.get(idx[k]).unwrap_or("");
            let id = field(0).to_string();
            if id.is_empty() {
                return Err(invalid(line, "empty id"));
            }
            if !seen.insert(id.clone()) {
                return Err(invalid(line, format!("duplicate id {id}")));
            }
            let wav = field(1);
            if wav.is_empty() {
                return Err(invalid(line, "empty wav_path"));
            }
            let age: f64 = field(2)
                .parse()
                .map_err(|_| invalid(line, format!("bad age {:?}", field(2))))?;
            if !(age.is_finite() && age > 0.0) {
                return Err(invalid(line, format!("age must be positive, got {age}")));
            }
            let sex = match field(3) {
                "M" | "m" => Sex::Male,
                "F" | "f" => Sex::Female,
                other => return Err(invalid(line, format!("sex must be M or F, got {other:?}"))),
            };
            let mut s = [0.0; 6];
            for (k, v) in s.iter_mut().enumerate() {
                let raw = field(4 + k);
                *v = raw.parse().map_err(|_| {
                    invalid(
                        line,
                        format!("bad {} score {raw:?}", MANIFEST_HEADER[4 + k]),
                    )
                })?;
            }
            let scores = CapevScores::new(s).map_err(|e| invalid(line, e))?;
            let opt_path = |c: Option<usize>| {
                c.and_then(|c| rec.get(c))
                    .filter(|v| !v.is_empty())
                    .map(|v| base.join(v))
            };
            rows.push(ManifestRow {
                id,
                wav_path: base.join(wav),
                age,
                sex,
                scores,
                embedding_path: opt_path(emb_col),
                source_id: src_col
                    .and_then(|c| rec.get(c))
                    .filter(|v| !v.is_empty())
                    .map(str::to_string),
            });
        }
        if rows.is_empty() {
            return Err(PipelineError::ManifestInvalid("no rows".into()));
        }
        Ok(Self {
            rows,
            digest: super::sha256_hex(bytes),
        })
    }

    /// Checks that referenced files exist.
    pub fn check_files(&self, need_embeddings: bool) -> Result<(), PipelineError> {
        for r in &self.rows {
            if need_embeddings {
                match &r.embedding_path {
                    None => {
                        return Err(PipelineError::ManifestInvalid(format!(
                            "{}: no embedding_path",
                            r.id
                        )))
                    }
                    Some(p) if !p.exists() => {
                        return Err(PipelineError::ManifestInvalid(format!(
                            "{}: missing {}",
                            r.id,
                            p.display()
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

/// Writes a manifest with paths relative to `base` where possible.
pub(crate) fn write_manifest(
    rows: &[ManifestRow],
    path: &Path,
    with_source: bool,
) -> Result<(), PipelineError> {
    let base = path.parent().unwrap_or(Path::new("."));
    let rel = |p: &Path| {
        p.strip_prefix(base)
            .unwrap_or(p)
            .to_string_lossy()
            .into_owned()
    };
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = MANIFEST_HEADER.to_vec();
    if with_source {
        header.push("source_id");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.id.clone(),
            rel(&r.wav_path),
            r.age.to_string(),
            match r.sex {
                Sex::Male => "M".into(),
                Sex::Female => "F".into(),
            },
        ];
        rec.extend(r.scores.values().iter().map(|v| v.to_string()));
        rec.push(r.embedding_path.as_deref().map(rel).unwrap_or_default());
        if with_source {
            rec.push(r.source_id.clone().unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
