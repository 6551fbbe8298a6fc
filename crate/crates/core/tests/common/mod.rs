//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rustfft::{num_complex::Complex, FftPlanner};

/// Welch power spectral density: Hann window, 50% overlap.
/// Returns (frequency Hz, power) for bins 1..seg/2.
pub fn welch_psd(x: &[f64], rate: f64, seg: usize) -> Vec<(f64, f64)> {
    let window: Vec<f64> = (0..seg)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / seg as f64).cos())
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let mut acc = vec![0.0; seg / 2];
    let mut count = 0;
    let mut start = 0;
    while start + seg <= x.len() {
        let mut buf: Vec<Complex<f64>> = x[start..start + seg]
            .iter()
            .zip(&window)
            .map(|(v, w)| Complex::new(v * w, 0.0))
            .collect();
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += buf[k].norm_sqr();
        }
        count += 1;
        start += seg / 2;
    }
    (1..seg / 2)
        .map(|k| (k as f64 * rate / seg as f64, acc[k] / count as f64))
        .collect()
}

/// Least-squares slope of log10(power) against log10(frequency) over [lo, hi] Hz.
pub fn log_log_slope(psd: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    let pts: Vec<(f64, f64)> = psd
        .iter()
        .filter(|(f, _)| *f >= lo && *f <= hi)
        .map(|(f, p)| (f.log10(), p.log10()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Two-pass Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Exhaustive best single split: every feature, every midpoint between
/// consecutive distinct values, two-pass child SSE. Earlier candidates win
/// ties within `1e-10 * parent_sse`. Returns (feature, threshold, score).
pub fn brute_force_split(x: &[Vec<f64>], y: &[f64]) -> Option<(usize, f64, f64)> {
    let sse = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|a| (a - m) * (a - m)).sum::<f64>()
    };
    if y.iter().all(|&v| v == y[0]) {
        return None;
    }
    let tol = 1e-10 * sse(y);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let left: Vec<f64> = x
                .iter()
                .zip(y)
                .filter(|(r, _)| r[f] <= t)
                .map(|(_, v)| *v)
                .collect();
            let right: Vec<f64> = x
                .iter()
                .zip(y)
                .filter(|(r, _)| r[f] > t)
                .map(|(_, v)| *v)
                .collect();
            let score = sse(&left) + sse(&right);
            if best.is_none_or(|b| score < b.2 - tol) {
                best = Some((f, t, score));
            }
        }
    }
    best
}

/// Indices of the k nearest rows by full sort on (squared distance, index).
pub fn brute_force_neighbors(x: &[Vec<f64>], q: &[f64], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = x
        .iter()
        .enumerate()
        .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum(), i))
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, i)| i).collect()
}
