//! Mono audio clips, WAV I/O, resampling and length normalization.

mod resample;
mod wav;

pub use resample::{resample, KAISER_BETA, TAPS_PER_PHASE};
pub use wav::{read_wav, read_wav_bytes, write_wav_f32, write_wav_i16};

use thiserror::Error;

/// Working sample rate for all analysis.
pub const WORKING_RATE: u32 = 8000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed WAV: {0}")]
    MalformedWav(String),
    #[error("unsupported WAV encoding: format tag {format}, {bits} bits")]
    UnsupportedEncoding { format: u16, bits: u16 },
    #[error("clip is empty")]
    EmptyClip,
    #[error("no clips given")]
    EmptyCollection,
    #[error("clips have mixed sample rates ({0} Hz and {1} Hz)")]
    MixedSampleRates(u32, u32),
    #[error("invalid clip: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mono waveform with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Builds a clip, rejecting a zero rate, no samples or non-finite samples.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::Invalid("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(AudioError::EmptyClip);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::Invalid(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Truncates or tiles `clip` to exactly `target_len` samples.
///
/// Longer clips keep their first `target_len` samples. Shorter clips are
/// repeated end to end until they reach the target, then cut.
pub fn normalize_length(clip: &AudioClip, target_len: usize) -> Result<AudioClip, AudioError> {
    if target_len == 0 {
        return Err(AudioError::Invalid("target length must be positive".into()));
    }
    let src = clip.samples();
    if src.is_empty() {
        return Err(AudioError::EmptyClip);
    }
    let out: Vec<f64> = src.iter().copied().cycle().take(target_len).collect();
    AudioClip::new(out, clip.sample_rate())
}

/// Floor of the mean clip length, in samples.
pub fn mean_length<'a, I>(clips: I) -> Result<usize, AudioError>
where
    I: IntoIterator<Item = &'a AudioClip>,
{
    let mut rate = None;
    let mut total: u128 = 0;
    let mut count: u128 = 0;
    for clip in clips {
        match rate {
            None => rate = Some(clip.sample_rate()),
            Some(r) if r != clip.sample_rate() => {
                return Err(AudioError::MixedSampleRates(r, clip.sample_rate()))
            }
            _ => {}
        }
        total += clip.len() as u128;
        count += 1;
    }
    if count == 0 {
        return Err(AudioError::EmptyCollection);
    }
    Ok((total / count) as usize)
}
