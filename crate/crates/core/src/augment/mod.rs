//! Noise augmentation: colored noise synthesis, weighted mixing and the
//! 7 noise kinds x 2 weight pairs expansion of a clip.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{num_complex::Complex, FftPlanner};
use thiserror::Error;

use crate::audio::{self, AudioClip, AudioError};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("noise length must be positive")]
    BadLength,
    #[error("sample rates differ: clip {clip} Hz, noise {noise} Hz")]
    RateMismatch { clip: u32, noise: u32 },
    #[error("babble noise file not found: {0}")]
    MissingBabbleFile(PathBuf),
    #[error("invalid noise bank: {0}")]
    InvalidBank(String),
    #[error("invalid weight pair ({0}, {1})")]
    InvalidWeights(f64, f64),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

/// Noise kinds in their fixed enumeration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoiseKind {
    White,
    Blue,
    Violet,
    Brown,
    Pink,
    Babble1,
    Babble2,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 7] = [
        NoiseKind::White,
        NoiseKind::Blue,
        NoiseKind::Violet,
        NoiseKind::Brown,
        NoiseKind::Pink,
        NoiseKind::Babble1,
        NoiseKind::Babble2,
    ];

    pub const COLORED: [NoiseKind; 5] = [
        NoiseKind::White,
        NoiseKind::Blue,
        NoiseKind::Violet,
        NoiseKind::Brown,
        NoiseKind::Pink,
    ];

    /// Exponent of the power spectral density, PSD ~ f^beta. `None` for babble.
    pub fn spectral_exponent(self) -> Option<f64> {
        match self {
            NoiseKind::White => Some(0.0),
            NoiseKind::Blue => Some(1.0),
            NoiseKind::Violet => Some(2.0),
            NoiseKind::Brown => Some(-2.0),
            NoiseKind::Pink => Some(-1.0),
            NoiseKind::Babble1 | NoiseKind::Babble2 => None,
        }
    }

    pub fn is_colored(self) -> bool {
        self.spectral_exponent().is_some()
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Blue => "blue",
            NoiseKind::Violet => "violet",
            NoiseKind::Brown => "brown",
            NoiseKind::Pink => "pink",
            NoiseKind::Babble1 => "babble1",
            NoiseKind::Babble2 => "babble2",
        }
    }

    fn index(self) -> u64 {
        NoiseKind::ALL.iter().position(|k| *k == self).unwrap() as u64
    }
}

/// Where a noise instance comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSource {
    /// Seed for a synthesized colored noise.
    Seed(u64),
    /// WAV file with recorded background speech.
    File(PathBuf),
    /// Already loaded background recording.
    Clip(AudioClip),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub source: NoiseSource,
}

impl NoiseSpec {
    pub fn colored(kind: NoiseKind, seed: u64) -> Self {
        Self {
            kind,
            source: NoiseSource::Seed(seed),
        }
    }

    pub fn babble(kind: NoiseKind, path: impl Into<PathBuf>) -> Self {
        Self {
            kind,
            source: NoiseSource::File(path.into()),
        }
    }

    fn validate(&self) -> Result<(), AugmentError> {
        let ok = match (&self.source, self.kind.is_colored()) {
            (NoiseSource::Seed(_), true) => true,
            (NoiseSource::File(p), false) => {
                if !p.exists() {
                    return Err(AugmentError::MissingBabbleFile(p.clone()));
                }
                true
            }
            (NoiseSource::Clip(_), false) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(AugmentError::InvalidBank(format!(
                "{} noise cannot use source {:?}",
                self.kind.name(),
                self.source
            )))
        }
    }
}

/// Mixing weights for signal and noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightPair {
    w_signal: f64,
    w_noise: f64,
}

impl WeightPair {
    pub fn new(w_signal: f64, w_noise: f64) -> Result<Self, AugmentError> {
        if !(w_signal > 0.0 && w_signal <= 1.0 && (0.0..1.0).contains(&w_noise)) {
            return Err(AugmentError::InvalidWeights(w_signal, w_noise));
        }
        Ok(Self { w_signal, w_noise })
    }

    pub fn w_signal(&self) -> f64 {
        self.w_signal
    }

    pub fn w_noise(&self) -> f64 {
        self.w_noise
    }

    /// (0.9, 0.1) and (0.7, 0.3).
    pub fn defaults() -> [WeightPair; 2] {
        [
            WeightPair {
                w_signal: 0.9,
                w_noise: 0.1,
            },
            WeightPair {
                w_signal: 0.7,
                w_noise: 0.3,
            },
        ]
    }
}

/// Gaussian noise with PSD proportional to f^beta, normalized to unit RMS.
///
/// White Gaussian samples are transformed, every bin is scaled by
/// f^(beta/2) with DC removed, and the result is transformed back.
pub fn generate_colored_noise(
    kind: NoiseKind,
    length: usize,
    rate: u32,
    seed: u64,
) -> Result<AudioClip, AugmentError> {
    let beta = kind.spectral_exponent().ok_or_else(|| {
        AugmentError::InvalidBank(format!("{} is not a colored noise", kind.name()))
    })?;
    if length == 0 {
        return Err(AugmentError::BadLength);
    }
    if rate == 0 {
        return Err(AudioError::Invalid("sample rate must be positive".into()).into());
    }
    if length == 1 {
        return Ok(AudioClip::new(vec![1.0], rate)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf: Vec<Complex<f64>> = (0..length)
        .map(|_| Complex::new(StandardNormal.sample(&mut rng), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(length).process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    for k in 1..=length / 2 {
        let f = k as f64 * rate as f64 / length as f64;
        let gain = f.powf(beta / 2.0);
        buf[k] *= gain;
        if k != length - k {
            buf[length - k] *= gain;
        }
    }
    planner.plan_fft_inverse(length).process(&mut buf);
    let mut samples: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let rms = (samples.iter().map(|v| v * v).sum::<f64>() / length as f64).sqrt();
    if rms > 0.0 {
        samples.iter_mut().for_each(|v| *v /= rms);
    }
    Ok(AudioClip::new(samples, rate)?)
}

const PEAK_LIMIT: f64 = 1.0;
const PEAK_TARGET: f64 = 0.9;

/// `w_signal * clip + w_noise * noise`, with the noise looped or cut to the
/// clip length. A result peaking above 1.0 is rescaled to a 0.9 peak.
pub fn mix_at_weights(
    clip: &AudioClip,
    noise: &AudioClip,
    weights: WeightPair,
) -> Result<AudioClip, AugmentError> {
    if clip.sample_rate() != noise.sample_rate() {
        return Err(AugmentError::RateMismatch {
            clip: clip.sample_rate(),
            noise: noise.sample_rate(),
        });
    }
    let noise = audio::normalize_length(noise, clip.len())?;
    let mut out: Vec<f64> = clip
        .samples()
        .iter()
        .zip(noise.samples())
        .map(|(c, n)| weights.w_signal * c + weights.w_noise * n)
        .collect();
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > PEAK_LIMIT {
        let g = PEAK_TARGET / peak;
        out.iter_mut().for_each(|v| *v *= g);
    }
    Ok(AudioClip::new(out, clip.sample_rate())?)
}

/// One output of [`augment_sample`].
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedClip {
    pub kind: NoiseKind,
    pub pair_index: usize,
    pub weights: WeightPair,
    pub clip: AudioClip,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed used for the colored noise of (kind, pair) under a run seed.
pub fn derived_noise_seed(seed: u64, kind: NoiseKind, pair_index: usize) -> u64 {
    seed ^ splitmix64((kind.index() << 16) | pair_index as u64)
}

fn load_babble(spec: &NoiseSpec, rate: u32) -> Result<AudioClip, AugmentError> {
    let clip = match &spec.source {
        NoiseSource::File(path) => {
            if !path.exists() {
                return Err(AugmentError::MissingBabbleFile(path.clone()));
            }
            audio::read_wav(path)?
        }
        NoiseSource::Clip(c) => c.clone(),
        NoiseSource::Seed(_) => unreachable!("validated"),
    };
    if clip.sample_rate() == rate {
        Ok(clip)
    } else {
        Ok(audio::resample(&clip, rate)?)
    }
}

/// Expands `clip` into one noisy copy per (noise kind, weight pair).
///
/// Outputs are ordered by kind (white, blue, violet, brown, pink, babble1,
/// babble2), then by pair. Colored noise for (kind, pair) is seeded with the
/// noise source's seed xor [`derived_noise_seed`], so results do not depend on call
/// order.
pub fn augment_sample(
    clip: &AudioClip,
    noise_bank: &[NoiseSpec],
    pairs: &[WeightPair],
    seed: u64,
) -> Result<Vec<AugmentedClip>, AugmentError> {
    if pairs.len() != 2 {
        return Err(AugmentError::InvalidBank(format!(
            "expected 2 weight pairs, got {}",
            pairs.len()
        )));
    }
    let mut ordered = Vec::with_capacity(NoiseKind::ALL.len());
    for kind in NoiseKind::ALL {
        let mut found = noise_bank.iter().filter(|s| s.kind == kind);
        let spec = found
            .next()
            .ok_or_else(|| AugmentError::InvalidBank(format!("no {} noise", kind.name())))?;
        if found.next().is_some() {
            return Err(AugmentError::InvalidBank(format!(
                "duplicate {} noise",
                kind.name()
            )));
        }
        spec.validate()?;
        ordered.push(spec);
    }
    if noise_bank.len() != NoiseKind::ALL.len() {
        return Err(AugmentError::InvalidBank(format!(
            "expected 7 noise specs, got {}",
            noise_bank.len()
        )));
    }

    let mut out = Vec::with_capacity(14);
    for spec in ordered {
        let babble = if spec.kind.is_colored() {
            None
        } else {
            Some(load_babble(spec, clip.sample_rate())?)
        };
        for (pair_index, &weights) in pairs.iter().enumerate() {
            let noise = match (&babble, &spec.source) {
                (Some(b), _) => b.clone(),
                (None, NoiseSource::Seed(s)) => generate_colored_noise(
                    spec.kind,
                    clip.len(),
                    clip.sample_rate(),
                    s ^ derived_noise_seed(seed, spec.kind, pair_index),
                )?,
                (None, _) => unreachable!("validated"),
            };
            out.push(AugmentedClip {
                kind: spec.kind,
                pair_index,
                weights,
                clip: mix_at_weights(clip, &noise, weights)?,
            });
        }
    }
    Ok(out)
}

/// A bank of the five colored kinds (seed 0) plus two in-memory babble clips.
pub fn bank_with_babble(babble1: AudioClip, babble2: AudioClip) -> Vec<NoiseSpec> {
    let mut bank: Vec<NoiseSpec> = NoiseKind::COLORED
        .iter()
        .map(|&k| NoiseSpec::colored(k, 0))
        .collect();
    bank.push(NoiseSpec {
        kind: NoiseKind::Babble1,
        source: NoiseSource::Clip(babble1),
    });
    bank.push(NoiseSpec {
        kind: NoiseKind::Babble2,
        source: NoiseSource::Clip(babble2),
    });
    bank
}
