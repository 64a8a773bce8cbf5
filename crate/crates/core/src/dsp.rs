//! Shared frequency-domain helpers: FFT transfer functions and rational
//! resampling. All operations are circular over the full buffer.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Frequency of FFT bin `i` for an `n`-point transform at `fs`, in Hz,
/// mapped to (-fs/2, fs/2].
pub fn bin_frequency(i: usize, n: usize, fs: f64) -> f64 {
    let i = i as f64;
    let n = n as f64;
    if i <= n / 2.0 {
        i * fs / n
    } else {
        (i - n) * fs / n
    }
}

/// Apply a frequency response H(f) in place via FFT.
pub fn apply_transfer(samples: &mut [Complex64], sample_rate: f64, h: impl Fn(f64) -> Complex64) {
    let n = samples.len();
    if n == 0 {
        return;
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    fft.process(samples);
    for (i, s) in samples.iter_mut().enumerate() {
        *s *= h(bin_frequency(i, n, sample_rate));
    }
    ifft.process(samples);
    let scale = 1.0 / n as f64;
    for s in samples.iter_mut() {
        *s *= scale;
    }
}

/// Resample to `new_len` samples by spectral truncation / zero padding.
/// Band-limiting on downsampling acts as an ideal brick-wall filter.
pub fn resample(samples: &[Complex64], new_len: usize) -> Vec<Complex64> {
    let old_len = samples.len();
    if new_len == old_len {
        return samples.to_vec();
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(old_len);
    let ifft = planner.plan_fft_inverse(new_len);
    let mut spec = samples.to_vec();
    fft.process(&mut spec);
    let mut out = vec![Complex64::new(0.0, 0.0); new_len];
    let keep = old_len.min(new_len);
    let pos = keep / 2 + 1; // bins 0..pos from the low end
    let neg = keep - pos; // bins from the high end
    out[..pos.min(new_len)].copy_from_slice(&spec[..pos.min(new_len)]);
    for i in 0..neg {
        out[new_len - 1 - i] = spec[old_len - 1 - i];
    }
    ifft.process(&mut out);
    let scale = 1.0 / old_len as f64;
    for s in out.iter_mut() {
        *s *= scale;
    }
    out
}

/// Mean power of a complex sequence.
pub fn mean_power(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}
