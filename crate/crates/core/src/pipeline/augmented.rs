//! Noise-augmented copies of a manifest's clips.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::audio::{self, AudioClip};
use crate::augment::{augment_sample, NoiseKind, NoiseSource, NoiseSpec, WeightPair};
use crate::neural::{write_embedding_matrix, EmbeddingMatrix};

use super::embed::spectral_embedding;
use super::manifest::{write_manifest, ManifestRow};
use super::{derive_seed, PipelineError};

/// The five colored kinds plus `babble1.wav` and `babble2.wav` from `noise_dir`.
pub(crate) fn noise_bank(noise_dir: &Path) -> Result<Vec<NoiseSpec>, PipelineError> {
    let mut bank: Vec<NoiseSpec> = NoiseKind::COLORED
        .iter()
        .map(|&k| NoiseSpec::colored(k, 0))
        .collect();
    for (kind, file) in [
        (NoiseKind::Babble1, "babble1.wav"),
        (NoiseKind::Babble2, "babble2.wav"),
    ] {
        let p = noise_dir.join(file);
        if !p.is_file() {
            return Err(PipelineError::InvalidInput(format!(
                "missing babble recording {}",
                p.display()
            )));
        }
        bank.push(NoiseSpec {
            kind,
            source: NoiseSource::Clip(audio::read_wav(&p)?),
        });
    }
    Ok(bank)
}

pub(crate) fn augmented_id(id: &str, kind: NoiseKind, pair: usize) -> String {
    format!("{id}__{}_p{pair}", kind.name())
}

/// The 14 noisy versions of one row's clip at `rate`, with their ids.
pub(crate) fn augment_row(
    row: &ManifestRow,
    bank: &[NoiseSpec],
    pairs: &[WeightPair],
    seed: u64,
    rate: u32,
) -> Result<Vec<(String, AudioClip)>, PipelineError> {
    let clip = audio::resample(&audio::read_wav(&row.wav_path)?, rate)?;
    let out = augment_sample(
        &clip,
        bank,
        pairs,
        derive_seed(seed, &format!("augment/{}", row.id)),
    )?;
    Ok(out
        .into_iter()
        .map(|a| (augmented_id(&row.id, a.kind, a.pair_index), a.clip))
        .collect())
}

/// Writes 14 augmented WAVs per row under `out_dir/wav` (at `rate`) and an
/// `augmented_manifest.csv` whose rows carry their `source_id`. With `embed`,
/// stand-in embeddings are written under `out_dir/emb`.
///
/// Returns the manifest path.
pub fn augment_manifest(
    rows: &[ManifestRow],
    pairs: &[WeightPair],
    noise_dir: &Path,
    out_dir: &Path,
    seed: u64,
    rate: u32,
    embed: bool,
) -> Result<PathBuf, PipelineError> {
    let bank = noise_bank(noise_dir)?;
    fs::create_dir_all(out_dir.join("wav"))?;
    if embed {
        fs::create_dir_all(out_dir.join("emb"))?;
    }
    let produced: Vec<Vec<ManifestRow>> = rows
        .par_iter()
        .map(|row| -> Result<Vec<ManifestRow>, PipelineError> {
            let mut out = Vec::with_capacity(14);
            for (id, clip) in augment_row(row, &bank, pairs, seed, rate)? {
                let wav_path = out_dir.join("wav").join(format!("{id}.wav"));
                audio::write_wav_i16(&wav_path, &clip)?;
                let embedding_path = if embed {
                    let p = out_dir.join("emb").join(format!("{id}.emb"));
                    let stored = audio::read_wav(&wav_path)?;
                    write_embedding_matrix(&spectral_embedding(&stored)?, &p)?;
                    Some(p)
                } else {
                    None
                };
                out.push(ManifestRow {
                    id,
                    wav_path,
                    embedding_path,
                    source_id: Some(row.id.clone()),
                    ..row.clone()
                });
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;
    let all: Vec<ManifestRow> = produced.into_iter().flatten().collect();
    let path = out_dir.join("augmented_manifest.csv");
    write_manifest(&all, &path, true)?;
    Ok(path)
}

/// Stand-in embeddings of the augmented versions of `row`, computed in memory.
pub(crate) fn augmented_embeddings(
    row: &ManifestRow,
    bank: &[NoiseSpec],
    pairs: &[WeightPair],
    seed: u64,
    rate: u32,
) -> Result<Vec<(String, EmbeddingMatrix)>, PipelineError> {
    augment_row(row, bank, pairs, seed, rate)?
        .into_iter()
        .map(|(id, clip)| Ok((id, spectral_embedding(&clip)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{generate_synthetic_dataset, DatasetManifest, SynthConfig};

    #[test]
    fn fourteen_per_row_with_sources() {
        let dir = tempfile::tempdir().unwrap();
        let config = SynthConfig {
            n_clips: 2,
            babble: true,
            ..Default::default()
        };
        let m = DatasetManifest::load(&generate_synthetic_dataset(dir.path(), &config).unwrap())
            .unwrap();
        let out = dir.path().join("aug");
        let p = augment_manifest(
            &m.rows,
            &WeightPair::defaults(),
            &dir.path().join("noise"),
            &out,
            1,
            8000,
            true,
        )
        .unwrap();
        let aug = DatasetManifest::load(&p).unwrap();
        assert_eq!(aug.rows.len(), 28);
        assert!(aug.rows[..14]
            .iter()
            .all(|r| r.source_id.as_deref() == Some("syn000")));
        assert_eq!(aug.rows[0].id, "syn000__white_p0");
        assert!(aug
            .rows
            .iter()
            .all(|r| r.wav_path.exists() && r.embedding_path.as_ref().unwrap().exists()));

        let again = dir.path().join("aug2");
        let p2 = augment_manifest(
            &m.rows,
            &WeightPair::defaults(),
            &dir.path().join("noise"),
            &again,
            1,
            8000,
            false,
        )
        .unwrap();
        let aug2 = DatasetManifest::load(&p2).unwrap();
        for (a, b) in aug.rows.iter().zip(&aug2.rows) {
            assert_eq!(
                fs::read(&a.wav_path).unwrap(),
                fs::read(&b.wav_path).unwrap()
            );
        }
    }
}
