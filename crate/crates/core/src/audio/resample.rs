//! Band-limited resampling with a Kaiser-windowed sinc kernel.

use std::f64::consts::PI;

use super::{AudioClip, AudioError};

/// Kaiser window shape parameter.
pub const KAISER_BETA: f64 = 8.6;
/// Kernel length measured in samples of the lower of the two rates.
pub const TAPS_PER_PHASE: usize = 64;
/// Cutoff as a fraction of the lower rate.
const CUTOFF_FRACTION: f64 = 0.45;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Resamples `clip` to `target_rate`.
///
/// Output length is `round(len * target_rate / rate)`. Each output sample is a
/// weighted sum of input samples under a windowed sinc with cutoff at
/// 0.45 x min(rate, target_rate); weights are renormalized to unit sum so DC
/// is preserved exactly, including near the edges.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::Invalid("target rate must be positive".into()));
    }
    let input = clip.samples();
    if input.is_empty() {
        return Err(AudioError::EmptyClip);
    }
    let in_rate = clip.sample_rate();
    if in_rate == target_rate {
        return Ok(clip.clone());
    }
    let in_rate_f = in_rate as f64;
    let out_rate_f = target_rate as f64;
    let out_len = ((input.len() as f64) * out_rate_f / in_rate_f).round() as usize;
    if out_len == 0 {
        return Err(AudioError::EmptyClip);
    }

    let low_rate = in_rate_f.min(out_rate_f);
    // cutoff in cycles per input sample
    let cutoff = CUTOFF_FRACTION * low_rate / in_rate_f;
    let half_width = (TAPS_PER_PHASE as f64 / 2.0) * in_rate_f / low_rate;
    let i0_beta = bessel_i0(KAISER_BETA);

    // Output m sits at input position m * in / out = base + phase / out.
    // Only out / gcd distinct fractional phases exist, so kernels are tabulated.
    let (num, den) = (in_rate as u64, target_rate as u64);
    let g = gcd(num, den);
    let phases = (den / g) as usize;
    let j_min = -(half_width.ceil() as i64);
    let j_max = half_width.ceil() as i64 + 1;
    let table: Vec<Vec<f64>> = (0..phases)
        .map(|p| {
            let frac = (p as u64 * g) as f64 / den as f64;
            (j_min..=j_max)
                .map(|j| {
                    let t = j as f64 - frac;
                    if t.abs() > half_width {
                        return 0.0;
                    }
                    let r = t / half_width;
                    let window = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                    2.0 * cutoff * sinc(2.0 * cutoff * t) * window
                })
                .collect()
        })
        .collect();

    let n_in = input.len() as i64;
    let out: Vec<f64> = (0..out_len as u64)
        .map(|m| {
            let pos = m * num;
            let base = (pos / den) as i64;
            let kernel = &table[((pos % den) / g) as usize];
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for (w, j) in kernel.iter().zip(j_min..=j_max) {
                let k = base + j;
                if k < 0 || k >= n_in {
                    continue;
                }
                acc += w * input[k as usize];
                wsum += w;
            }
            if wsum.abs() > 1e-12 {
                acc / wsum
            } else {
                0.0
            }
        })
        .collect();
    AudioClip::new(out, target_rate)
}
