//! Frame-wise autocorrelation pitch analysis and glottal cycle marking.

use crate::audio::AudioClip;

use super::FeatureError;

pub const DEFAULT_F0_MIN: f64 = 60.0;
pub const DEFAULT_F0_MAX: f64 = 400.0;
pub const FRAME_SECONDS: f64 = 0.040;
pub const HOP_SECONDS: f64 = 0.010;
pub const VOICING_THRESHOLD: f64 = 0.45;

/// Among autocorrelation peaks, the shortest lag reaching this fraction of the
/// strongest one is taken as the period. Keeps multiples of the period from
/// winning on near-ties.
const OCTAVE_TOLERANCE: f64 = 0.97;
/// Search window for the next cycle peak, as fractions of the local period.
const CYCLE_WINDOW: (f64, f64) = (0.7, 1.3);

/// Analysis result for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameAnalysis {
    pub start: usize,
    pub len: usize,
    /// Period estimate in (fractional) samples; meaningful when voiced.
    pub lag: f64,
    /// Peak normalized autocorrelation over the pitch-lag range.
    pub strength: f64,
    pub voiced: bool,
    /// False for frames with no energy after mean removal.
    pub has_energy: bool,
}

/// Consecutive pitch periods (seconds) with the peak absolute amplitude of
/// each cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodTrack {
    periods: Vec<f64>,
    peak_amps: Vec<f64>,
}

impl PeriodTrack {
    pub fn new(periods: Vec<f64>, peak_amps: Vec<f64>) -> Result<Self, FeatureError> {
        if periods.len() != peak_amps.len() {
            return Err(FeatureError::Invalid(format!(
                "{} periods but {} amplitudes",
                periods.len(),
                peak_amps.len()
            )));
        }
        if periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(FeatureError::Invalid("periods must be positive".into()));
        }
        if peak_amps.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(FeatureError::Invalid(
                "amplitudes must be non-negative".into(),
            ));
        }
        Ok(Self { periods, peak_amps })
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn peak_amps(&self) -> &[f64] {
        &self.peak_amps
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }
}

pub(crate) fn check_range(f0_min: f64, f0_max: f64) -> Result<(), FeatureError> {
    if !(f0_min > 0.0 && f0_min < f0_max && f0_max.is_finite()) {
        return Err(FeatureError::Invalid(format!(
            "need 0 < f0_min < f0_max, got {f0_min}..{f0_max}"
        )));
    }
    Ok(())
}

/// Normalized autocorrelation of `x` at `lag`, using only the overlapping part.
fn normalized_acf(x: &[f64], lag: usize) -> f64 {
    if lag >= x.len() {
        return 0.0;
    }
    let (mut cross, mut e0, mut e1) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(&x[lag..]) {
        cross += a * b;
        e0 += a * a;
        e1 += b * b;
    }
    let denom = (e0 * e1).sqrt();
    if denom > 0.0 {
        cross / denom
    } else {
        0.0
    }
}

/// Vertex of the parabola through three equally spaced points: (offset, value).
fn parabolic_peak(left: f64, mid: f64, right: f64) -> (f64, f64) {
    let curvature = left - 2.0 * mid + right;
    if curvature >= 0.0 {
        return (0.0, mid);
    }
    let delta = (0.5 * (left - right) / curvature).clamp(-0.5, 0.5);
    (delta, mid - 0.25 * (left - right) * delta)
}

fn analyze_frame(frame: &[f64], lag_min: usize, lag_max: usize) -> (f64, f64, bool) {
    let mean = frame.iter().sum::<f64>() / frame.len() as f64;
    let x: Vec<f64> = frame.iter().map(|v| v - mean).collect();
    let energy: f64 = x.iter().map(|v| v * v).sum();
    if energy <= f64::MIN_POSITIVE || lag_min >= x.len() {
        return (0.0, 0.0, energy > f64::MIN_POSITIVE);
    }
    let hi = lag_max.min(x.len() - 2);
    if hi < lag_min {
        return (0.0, 0.0, true);
    }
    // r[i] holds lag lag_min - 1 + i
    let r: Vec<f64> = (lag_min - 1..=hi + 1)
        .map(|l| normalized_acf(&x, l))
        .collect();
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 1..r.len() - 1 {
        if r[i] > r[i - 1] && r[i] >= r[i + 1] && r[i] > 0.0 {
            let (d, v) = parabolic_peak(r[i - 1], r[i], r[i + 1]);
            peaks.push(((lag_min - 1 + i) as f64 + d, v));
        }
    }
    if peaks.is_empty() {
        let (i, v) =
            r[1..r.len() - 1]
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
                );
        return ((lag_min + i) as f64, v.max(0.0), true);
    }
    let best = peaks.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let chosen = peaks
        .iter()
        .find(|p| p.1 >= OCTAVE_TOLERANCE * best)
        .copied()
        .unwrap_or(peaks[0]);
    (chosen.0, best, true)
}

/// Runs the autocorrelation analysis over 40 ms frames with a 10 ms hop.
pub fn analyze_frames(
    clip: &AudioClip,
    f0_min: f64,
    f0_max: f64,
) -> Result<Vec<FrameAnalysis>, FeatureError> {
    check_range(f0_min, f0_max)?;
    let fs = clip.sample_rate() as f64;
    let x = clip.samples();
    let frame_len = ((FRAME_SECONDS * fs).round() as usize).clamp(1, x.len());
    let hop = ((HOP_SECONDS * fs).round() as usize).max(1);
    let lag_min = ((fs / f0_max).floor() as usize).max(2);
    let lag_max = (fs / f0_min).ceil() as usize;

    let mut frames = Vec::new();
    let mut start = 0;
    while start + frame_len <= x.len() {
        let (lag, strength, has_energy) =
            analyze_frame(&x[start..start + frame_len], lag_min, lag_max);
        frames.push(FrameAnalysis {
            start,
            len: frame_len,
            lag,
            strength,
            voiced: has_energy && strength >= VOICING_THRESHOLD,
            has_energy,
        });
        start += hop;
    }
    Ok(frames)
}

fn argmax(y: &[f64], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for i in lo..=hi {
        if y[i] > y[best] {
            best = i;
        }
    }
    best
}

/// Sub-sample position of the peak at `i`.
fn refine(y: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= y.len() {
        return i as f64;
    }
    i as f64 + parabolic_peak(y[i - 1], y[i], y[i + 1]).0
}

/// Detects consecutive glottal cycles over the voiced parts of `clip`.
///
/// Voiced runs of frames give a local period; within each run the waveform
/// peaks are followed cycle by cycle, searching 0.7..1.3 local periods past
/// the previous peak. Periods from all runs are concatenated.
pub fn detect_periods(
    clip: &AudioClip,
    f0_min: f64,
    f0_max: f64,
) -> Result<PeriodTrack, FeatureError> {
    let frames = analyze_frames(clip, f0_min, f0_max)?;
    let fs = clip.sample_rate() as f64;
    let x = clip.samples();
    let min_period = fs / f0_max;
    let max_period = fs / f0_min;

    let mut periods = Vec::new();
    let mut amps = Vec::new();

    let mut i = 0;
    while i < frames.len() {
        if !frames[i].voiced {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < frames.len() && frames[j + 1].voiced {
            j += 1;
        }
        let run = &frames[i..=j];
        i = j + 1;

        let seg_start = run[0].start;
        // a run reaching the last frame also owns the unframed tail
        let seg_end = if i == frames.len() {
            x.len()
        } else {
            run[run.len() - 1].start + run[run.len() - 1].len
        };
        let local_period = |pos: usize| -> f64 {
            run.iter()
                .min_by_key(|f| (f.start + f.len / 2).abs_diff(pos))
                .map(|f| f.lag)
                .unwrap_or(run[0].lag)
        };

        // follow the dominant polarity so every marker sits on the same phase
        let peak_idx = argmax(
            &x.iter().map(|v| v.abs()).collect::<Vec<_>>(),
            seg_start,
            seg_end - 1,
        );
        let polarity = if x[peak_idx] < 0.0 { -1.0 } else { 1.0 };
        let y: Vec<f64> = x.iter().map(|v| v * polarity).collect();

        let first_span = local_period(seg_start).ceil() as usize;
        if seg_start + first_span + 1 >= seg_end {
            continue;
        }
        let mut anchor = argmax(&y, seg_start, seg_start + first_span - 1);
        let mut marks = vec![anchor];
        loop {
            let p = local_period(anchor);
            let lo = anchor + ((CYCLE_WINDOW.0 * p).ceil().max(min_period.ceil())) as usize;
            let hi = anchor + ((CYCLE_WINDOW.1 * p).floor().min(max_period.floor())) as usize;
            if lo > hi || lo >= seg_end {
                break;
            }
            let truncated = hi >= seg_end;
            let next = argmax(&y, lo, hi.min(seg_end - 1));
            // a cut-off window only counts if it still holds a real peak
            let is_peak = next + 1 < y.len() && y[next] > y[next - 1] && y[next] >= y[next + 1];
            if truncated && !is_peak {
                break;
            }
            marks.push(next);
            anchor = next;
        }
        let fine: Vec<f64> = marks.iter().map(|&m| refine(&y, m)).collect();
        for w in 0..marks.len().saturating_sub(1) {
            let period = ((fine[w + 1] - fine[w]) / fs).clamp(min_period / fs, max_period / fs);
            let amp = x[marks[w]..marks[w + 1]]
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            periods.push(period);
            amps.push(amp);
        }
    }

    if periods.len() < 3 {
        return Err(FeatureError::NoVoicedFrames);
    }
    PeriodTrack::new(periods, amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, amp: f64, secs: f64) -> AudioClip {
        let n = (8000.0 * secs) as usize;
        AudioClip::new(
            (0..n)
                .map(|i| amp * (2.0 * PI * freq * i as f64 / 8000.0).sin())
                .collect(),
            8000,
        )
        .unwrap()
    }

    fn impulse_train(period: usize, len: usize, offset: usize) -> AudioClip {
        let s = (0..len)
            .map(|i| {
                if i >= offset && (i - offset).is_multiple_of(period) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        AudioClip::new(s, 8000).unwrap()
    }

    #[test]
    fn impulse_train_recovers_every_period() {
        let clip = impulse_train(80, 8000, 0);
        let track = detect_periods(&clip, DEFAULT_F0_MIN, DEFAULT_F0_MAX).unwrap();
        // 100 impulses, 99 periods between them
        assert_eq!(track.len(), 99);
        for &p in track.periods() {
            assert!((p - 0.01).abs() <= 1.0 / 8000.0, "period {p}");
        }
    }

    #[test]
    fn sine_periods_and_amplitudes() {
        let clip = sine(200.0, 0.6, 1.0);
        let track = detect_periods(&clip, DEFAULT_F0_MIN, DEFAULT_F0_MAX).unwrap();
        assert!(track.len() > 150);
        for (&p, &a) in track.periods().iter().zip(track.peak_amps()) {
            assert!((p - 0.005).abs() <= 1.0 / 8000.0);
            assert!((a - 0.6).abs() < 1e-3);
        }
    }

    #[test]
    fn silence_has_no_voiced_frames() {
        let clip = AudioClip::new(vec![0.0; 8000], 8000).unwrap();
        assert!(matches!(
            detect_periods(&clip, DEFAULT_F0_MIN, DEFAULT_F0_MAX),
            Err(FeatureError::NoVoicedFrames)
        ));
    }

    #[test]
    fn rejects_inverted_range() {
        let clip = sine(200.0, 1.0, 0.2);
        assert!(detect_periods(&clip, 400.0, 60.0).is_err());
    }

    #[test]
    fn low_pitch_is_not_halved() {
        // 100 Hz pulse-like wave with strong harmonics
        let n = 8000;
        let s: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / 8000.0;
                (1..=6)
                    .map(|h| (2.0 * PI * 100.0 * h as f64 * t).sin() / h as f64)
                    .sum()
            })
            .collect();
        let track = detect_periods(&AudioClip::new(s, 8000).unwrap(), 60.0, 400.0).unwrap();
        let mean = track.periods().iter().sum::<f64>() / track.len() as f64;
        assert!((mean - 0.01).abs() < 1e-4, "mean period {mean}");
    }

    #[test]
    fn track_lengths_must_agree() {
        assert!(PeriodTrack::new(vec![0.01, 0.01], vec![1.0]).is_err());
    }
}
