//! Log band-energy frames used as a stand-in embedding when no pre-trained
//! speech model output is available (synthetic data, smoke tests).

use rustfft::{num_complex::Complex, FftPlanner};

use crate::audio::AudioClip;
use crate::neural::{EmbeddingMatrix, NeuralError};

pub const SPECTRAL_BANDS: usize = 16;
pub const SPECTRAL_SOURCE: &str = "logspec16";
const FRAME: usize = 256;

/// One row per non-overlapping 256-sample Hann frame, 16 equal-width bands of
/// log10 power.
pub fn spectral_embedding(clip: &AudioClip) -> Result<EmbeddingMatrix, NeuralError> {
    let s = clip.samples();
    let n_frames = (s.len() / FRAME).max(1);
    let mut fft = FftPlanner::<f64>::new();
    let plan = fft.plan_fft_forward(FRAME);
    let window: Vec<f64> = (0..FRAME)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / FRAME as f64).cos())
        .collect();
    let bins = FRAME / 2;
    let per_band = bins / SPECTRAL_BANDS;
    let mut values = Vec::with_capacity(n_frames * SPECTRAL_BANDS);
    let mut buf = vec![Complex::new(0.0, 0.0); FRAME];
    for f in 0..n_frames {
        for (i, slot) in buf.iter_mut().enumerate() {
            let v = s.get(f * FRAME + i).copied().unwrap_or(0.0);
            *slot = Complex::new(v * window[i], 0.0);
        }
        plan.process(&mut buf);
        for b in 0..SPECTRAL_BANDS {
            let p: f64 = buf[b * per_band..(b + 1) * per_band]
                .iter()
                .map(|c| c.norm_sqr())
                .sum();
            values.push((p / per_band as f64 + 1e-10).log10());
        }
    }
    EmbeddingMatrix::new(n_frames, SPECTRAL_BANDS, values, SPECTRAL_SOURCE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tone_lands_in_its_band() {
        let rate = 8000;
        let s: Vec<f64> = (0..2048)
            .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / rate as f64).sin())
            .collect();
        let e = spectral_embedding(&AudioClip::new(s, rate).unwrap()).unwrap();
        assert_eq!(e.shape(), (8, SPECTRAL_BANDS));
        // 1000 Hz is bin 32 of 128, band 4 of 16.
        let row = e.row(3);
        let best = (0..SPECTRAL_BANDS)
            .max_by(|&a, &b| row[a].total_cmp(&row[b]))
            .unwrap();
        assert_eq!(best, 4);
    }
}
