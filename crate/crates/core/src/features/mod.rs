//! Acoustic voice parameters: jitter, absolute jitter, shimmer, HNR and
//! zero-crossing rate, assembled with demographics into a [`FeatureVector`].

mod pitch;

pub use pitch::{
    analyze_frames, detect_periods, FrameAnalysis, PeriodTrack, DEFAULT_F0_MAX, DEFAULT_F0_MIN,
    FRAME_SECONDS, HOP_SECONDS, VOICING_THRESHOLD,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioClip;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no voiced frames (fewer than 3 pitch periods detected)")]
    NoVoicedFrames,
    #[error("need at least 2 periods, got {0}")]
    TooFewPeriods(usize),
    #[error("mean peak amplitude is zero")]
    ZeroMeanAmplitude,
    #[error("clip is empty")]
    EmptyClip,
    #[error("{0}")]
    Invalid(String),
    #[error("feature extraction failed for {parameter}: {source}")]
    FeatureExtractionFailed {
        parameter: &'static str,
        #[source]
        source: Box<FeatureError>,
    },
}

/// Binary sex indicator: 0 = male, 1 = female.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn indicator(self) -> f64 {
        match self {
            Sex::Male => 0.0,
            Sex::Female => 1.0,
        }
    }
}

/// The seven predictors, in fixed order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    /// Zero crossings per second.
    pub zcr: f64,
    /// Local jitter (ratio).
    pub jitter: f64,
    /// Absolute jitter in seconds.
    pub jitter_abs: f64,
    /// Local shimmer (ratio).
    pub shimmer: f64,
    /// Harmonics-to-noise ratio in dB.
    pub hnr: f64,
    /// 0 = male, 1 = female.
    pub sex: f64,
    /// Years.
    pub age: f64,
}

impl FeatureVector {
    pub const LEN: usize = 7;
    pub const NAMES: [&'static str; 7] = [
        "zcr",
        "jitter",
        "jitter_abs",
        "shimmer",
        "hnr",
        "sex",
        "age",
    ];

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.zcr,
            self.jitter,
            self.jitter_abs,
            self.shimmer,
            self.hnr,
            self.sex,
            self.age,
        ]
    }

    pub fn from_array(v: [f64; 7]) -> Self {
        Self {
            zcr: v[0],
            jitter: v[1],
            jitter_abs: v[2],
            shimmer: v[3],
            hnr: v[4],
            sex: v[5],
            age: v[6],
        }
    }
}

/// Cycle-to-cycle perturbation measures of a period track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub jitter: f64,
    pub jitter_abs: f64,
    pub shimmer: f64,
}

fn mean_abs_successive_diff(v: &[f64]) -> f64 {
    v.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (v.len() - 1) as f64
}

/// Local jitter, absolute jitter and local shimmer.
pub fn perturbation_measures(track: &PeriodTrack) -> Result<Perturbation, FeatureError> {
    let periods = track.periods();
    let amps = track.peak_amps();
    if periods.len() < 2 {
        return Err(FeatureError::TooFewPeriods(periods.len()));
    }
    let n = periods.len() as f64;
    let jitter_abs = mean_abs_successive_diff(periods);
    let mean_period = periods.iter().sum::<f64>() / n;
    let mean_amp = amps.iter().sum::<f64>() / n;
    if mean_amp <= 0.0 {
        return Err(FeatureError::ZeroMeanAmplitude);
    }
    Ok(Perturbation {
        jitter: jitter_abs / mean_period,
        jitter_abs,
        shimmer: mean_abs_successive_diff(amps) / mean_amp,
    })
}

const HNR_CLAMP: f64 = 1e-6;

/// Mean per-frame harmonics-to-noise ratio in dB, within [-60, 60].
///
/// Each frame contributes 10 log10(r / (1 - r)) where r is its peak
/// normalized autocorrelation in the pitch-lag range. Voiced frames are
/// averaged; when no frame passes the voicing threshold the average runs over
/// every frame carrying energy, so strongly aperiodic clips still get a (low)
/// value. Only a clip with no energy at all is rejected.
pub fn harmonic_noise_ratio(
    clip: &AudioClip,
    f0_min: f64,
    f0_max: f64,
) -> Result<f64, FeatureError> {
    let frames = analyze_frames(clip, f0_min, f0_max)?;
    let frame_hnr = |f: &FrameAnalysis| {
        let r = f.strength.clamp(HNR_CLAMP, 1.0 - HNR_CLAMP);
        10.0 * (r / (1.0 - r)).log10()
    };
    let voiced: Vec<f64> = frames.iter().filter(|f| f.voiced).map(frame_hnr).collect();
    let pool = if voiced.is_empty() {
        frames
            .iter()
            .filter(|f| f.has_energy)
            .map(frame_hnr)
            .collect()
    } else {
        voiced
    };
    if pool.is_empty() {
        return Err(FeatureError::NoVoicedFrames);
    }
    Ok(pool.iter().sum::<f64>() / pool.len() as f64)
}

/// Sign changes per second; zero counts as positive.
pub fn zero_crossing_rate(clip: &AudioClip) -> Result<f64, FeatureError> {
    let x = clip.samples();
    if x.is_empty() {
        return Err(FeatureError::EmptyClip);
    }
    let crossings = x
        .windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count();
    Ok(crossings as f64 / clip.duration())
}

/// Computes the full feature vector with the default 60-400 Hz pitch range.
pub fn extract_feature_vector(
    clip: &AudioClip,
    age: f64,
    sex: Sex,
) -> Result<FeatureVector, FeatureError> {
    extract_feature_vector_with_range(clip, age, sex, DEFAULT_F0_MIN, DEFAULT_F0_MAX)
}

pub fn extract_feature_vector_with_range(
    clip: &AudioClip,
    age: f64,
    sex: Sex,
    f0_min: f64,
    f0_max: f64,
) -> Result<FeatureVector, FeatureError> {
    if !(age.is_finite() && age > 0.0) {
        return Err(FeatureError::Invalid(format!(
            "age must be positive, got {age}"
        )));
    }
    let failed = |parameter: &'static str| {
        move |e: FeatureError| FeatureError::FeatureExtractionFailed {
            parameter,
            source: Box::new(e),
        }
    };
    let track = detect_periods(clip, f0_min, f0_max).map_err(failed("jitter"))?;
    let p = perturbation_measures(&track).map_err(failed("shimmer"))?;
    let hnr = harmonic_noise_ratio(clip, f0_min, f0_max).map_err(failed("hnr"))?;
    let zcr = zero_crossing_rate(clip).map_err(failed("zcr"))?;
    Ok(FeatureVector {
        zcr,
        jitter: p.jitter,
        jitter_abs: p.jitter_abs,
        shimmer: p.shimmer,
        hnr,
        sex: sex.indicator(),
        age,
    })
}
