//! Desk-scale synthetic dataset with a known link between voice perturbation
//! and perceptual scores.
//!
//! Each clip is a sustained harmonic vowel synthesized cycle by cycle. Period
//! lengths and cycle peak amplitudes are drawn i.i.d. Gaussian around their
//! means, with standard deviations chosen so that the expected local jitter
//! and shimmer equal the drawn targets. Severity follows
//! `100 (1 - exp(-20 jitter)) + N(0, 5)`, clipped to 0..=100; aspiration noise
//! grows with jitter so that HNR falls as severity rises. The other five
//! attributes are noisy functions of severity.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::audio::{self, AudioClip};
use crate::eval::CapevScores;
use crate::features::Sex;
use crate::neural::write_embedding_matrix;

use super::embed::spectral_embedding;
use super::manifest::{write_manifest, ManifestRow};
use super::{derive_seed, PipelineError};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_clips: usize,
    pub sample_rate: u32,
    pub seed: u64,
    /// Also write stand-in embeddings and reference them from the manifest.
    pub embeddings: bool,
    /// Also write two babble recordings under `noise/`.
    pub babble: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_clips: 200,
            sample_rate: 16000,
            seed: 0,
            embeddings: false,
            babble: false,
        }
    }
}

const HARMONICS: usize = 6;

fn clip100(v: f64) -> f64 {
    v.clamp(0.0, 100.0)
}

/// Cycle-by-cycle harmonic vowel; `amp_sd` is relative to a unit mean.
fn vowel(
    rng: &mut ChaCha8Rng,
    rate: u32,
    n: usize,
    f0: f64,
    period_sd: f64,
    amp_sd: f64,
    noise_rms: f64,
) -> Vec<f64> {
    let t0 = 1.0 / f0;
    let periods = Normal::new(t0, period_sd).expect("finite sd");
    let amps = Normal::new(1.0, amp_sd).expect("finite sd");
    let noise = Normal::new(0.0, noise_rms.max(0.0)).expect("finite sd");
    let dt = 1.0 / rate as f64;
    let mut out = Vec::with_capacity(n);
    let mut start = 0.0;
    let mut period = periods.sample(rng).clamp(0.5 * t0, 1.5 * t0);
    let mut amp = amps.sample(rng).max(0.1);
    for i in 0..n {
        let t = i as f64 * dt;
        while t >= start + period {
            start += period;
            period = periods.sample(rng).clamp(0.5 * t0, 1.5 * t0);
            amp = amps.sample(rng).max(0.1);
        }
        let phase = 2.0 * PI * (t - start) / period;
        let v: f64 = (1..=HARMONICS)
            .map(|h| (h as f64 * phase).sin() / (h * h) as f64)
            .sum();
        out.push(amp * v + noise.sample(rng));
    }
    out
}

fn peak_normalize(mut s: Vec<f64>, peak: f64) -> Vec<f64> {
    let m = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        s.iter_mut().for_each(|v| *v *= peak / m);
    }
    s
}

/// Overlapping synthetic talkers with syllable-rate envelopes and gliding
/// pitch.
fn babble(seed: u64, rate: u32, secs: f64, talkers: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (secs * rate as f64) as usize;
    let mut out = vec![0.0; n];
    for _ in 0..talkers {
        let f0 = rng.random_range(90.0..250.0);
        let glide = rng.random_range(0.5..2.0);
        let syll = rng.random_range(3.0..6.0);
        let off = rng.random_range(0.0..2.0 * PI);
        let mut phase = 0.0;
        for (i, o) in out.iter_mut().enumerate() {
            let t = i as f64 / rate as f64;
            let f = f0 * (1.0 + 0.15 * (2.0 * PI * glide * t + off).sin());
            phase += 2.0 * PI * f / rate as f64;
            let env = (0.5 + 0.5 * (2.0 * PI * syll * t + off).sin()).powi(2);
            let v: f64 = (1..=8).map(|h| (h as f64 * phase).sin() / h as f64).sum();
            *o += env * v;
        }
    }
    peak_normalize(out, 0.7)
}

struct SynthClip {
    row: ManifestRow,
    samples: Vec<f64>,
}

fn synth_clip(i: usize, config: &SynthConfig, dir: &Path) -> SynthClip {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &format!("synth/{i}")));
    let sex = if rng.random_bool(0.5) {
        Sex::Male
    } else {
        Sex::Female
    };
    let f0 = match sex {
        Sex::Male => rng.random_range(95.0..150.0),
        Sex::Female => rng.random_range(170.0..260.0),
    };
    let age = rng.random_range(20.0f64..85.0).round();
    let secs = rng.random_range(0.8..1.2);
    let jitter = rng.random_range(0.0..0.08);
    let shimmer = rng.random_range(0.01..0.08);
    // Mean |x1 - x2| of two i.i.d. N(m, s^2) draws is 2 s / sqrt(pi).
    let half_sqrt_pi = PI.sqrt() / 2.0;
    let period_sd = jitter * half_sqrt_pi / f0;
    let amp_sd = shimmer * half_sqrt_pi;
    let noise_rms = 0.01 + 1.5 * jitter;
    let n = (secs * config.sample_rate as f64) as usize;
    let samples = peak_normalize(
        vowel(
            &mut rng,
            config.sample_rate,
            n,
            f0,
            period_sd,
            amp_sd,
            noise_rms,
        ),
        0.7,
    );

    let z = Normal::new(0.0, 1.0).expect("unit normal");
    let severity = clip100(100.0 * (1.0 - (-20.0 * jitter).exp()) + 5.0 * z.sample(&mut rng));
    let mut scores = [severity; 6];
    for (slot, (w, sd)) in scores[1..].iter_mut().zip([
        (0.8, 8.0),
        (0.4, 10.0),
        (0.3, 10.0),
        (0.7, 10.0),
        (0.5, 10.0),
    ]) {
        *slot = clip100(w * severity + sd * z.sample(&mut rng));
    }
    let id = format!("syn{i:03}");
    SynthClip {
        row: ManifestRow {
            wav_path: dir.join("wav").join(format!("{id}.wav")),
            embedding_path: config
                .embeddings
                .then(|| dir.join("emb").join(format!("{id}.emb"))),
            id,
            age,
            sex,
            scores: CapevScores::new(scores).expect("clipped to range"),
            source_id: None,
        },
        samples,
    }
}

/// Writes `wav/`, optional `emb/` and `noise/`, and `manifest.csv` under
/// `dir`; returns the manifest path.
pub fn generate_synthetic_dataset(
    dir: &Path,
    config: &SynthConfig,
) -> Result<PathBuf, PipelineError> {
    if config.n_clips == 0 || config.sample_rate < 8000 {
        return Err(PipelineError::ConfigInvalid(
            "need at least one clip at >= 8000 Hz".into(),
        ));
    }
    fs::create_dir_all(dir.join("wav"))?;
    if config.embeddings {
        fs::create_dir_all(dir.join("emb"))?;
    }
    let clips: Vec<SynthClip> = (0..config.n_clips)
        .into_par_iter()
        .map(|i| synth_clip(i, config, dir))
        .collect();
    clips
        .par_iter()
        .try_for_each(|c| -> Result<(), PipelineError> {
            let clip = AudioClip::new(c.samples.clone(), config.sample_rate)?;
            audio::write_wav_i16(&c.row.wav_path, &clip)?;
            if let Some(p) = &c.row.embedding_path {
                // Embed what the pipeline will see: the 16-bit file at the working rate.
                let stored = audio::read_wav(&c.row.wav_path)?;
                let working = audio::resample(&stored, audio::WORKING_RATE)?;
                write_embedding_matrix(&spectral_embedding(&working)?, p)?;
            }
            Ok(())
        })?;
    if config.babble {
        fs::create_dir_all(dir.join("noise"))?;
        for (k, talkers) in [(1, 4), (2, 7)] {
            let s = babble(
                derive_seed(config.seed, &format!("babble/{k}")),
                config.sample_rate,
                2.0,
                talkers,
            );
            audio::write_wav_i16(
                dir.join("noise").join(format!("babble{k}.wav")),
                &AudioClip::new(s, config.sample_rate)?,
            )?;
        }
    }
    let rows: Vec<ManifestRow> = clips.into_iter().map(|c| c.row).collect();
    let path = dir.join("manifest.csv");
    write_manifest(&rows, &path, false)?;
    Ok(path)
}
