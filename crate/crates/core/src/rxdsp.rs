//! Coherent receiver DSP: resampling to 2 samples/symbol, chromatic
//! dispersion compensation, frequency-offset recovery, and a pilot-aided
//! 2x2 MIMO LMS equalizer with an embedded first-order digital PLL.

use crate::channel::{self, CdSign, LinkConfig};
use crate::dsp;
use crate::txfront::Waveform;
use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RxError {
    #[error("equalizer tap count must be odd, got {0}")]
    EvenTaps(usize),
    #[error("pilot ratio must be in (0, 0.5), got {0}")]
    BadPilotRatio(f64),
    #[error("preconvergence length {precon} must be at least the tap count {taps}")]
    ShortPreconvergence { precon: usize, taps: usize },
    #[error("no dominant spectral peak for frequency recovery")]
    FrequencyAmbiguous,
    #[error("frame sync correlation peak below threshold ({0:.3})")]
    SyncFailed(f64),
    #[error("input too short for the configured equalizer")]
    InputTooShort,
}

#[derive(Debug, Clone, Copy)]
pub struct EqualizerConfig {
    /// Half-symbol-spaced tap count (odd).
    pub taps: usize,
    /// LMS step during preconvergence; tracking uses a tenth of this.
    pub step_size: f64,
    pub pilot_ratio: f64,
    pub preconvergence_symbols: usize,
    /// First-order PLL gain (normalized to the symbol rate).
    pub pll_gain: f64,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        Self {
            taps: 121,
            step_size: 1e-3,
            pilot_ratio: 0.03,
            preconvergence_symbols: 5000,
            pll_gain: 0.02,
        }
    }
}

impl EqualizerConfig {
    pub fn validate(&self) -> Result<(), RxError> {
        if self.taps % 2 == 0 {
            return Err(RxError::EvenTaps(self.taps));
        }
        if !(self.pilot_ratio > 0.0 && self.pilot_ratio < 0.5) {
            return Err(RxError::BadPilotRatio(self.pilot_ratio));
        }
        if self.preconvergence_symbols < self.taps {
            return Err(RxError::ShortPreconvergence {
                precon: self.preconvergence_symbols,
                taps: self.taps,
            });
        }
        Ok(())
    }

    /// Symbol stride between pilots after preconvergence.
    pub fn pilot_stride(&self) -> usize {
        (1.0 / self.pilot_ratio).floor() as usize
    }
}

/// Equalizer output: symbol-rate dense-constellation estimates per
/// polarization. Symbols [0, start) and [end, n) of the transmitted stream
/// are discarded as filter edge transients.
#[derive(Debug, Clone)]
pub struct SymbolEstimates {
    pub start: usize,
    pub pols: Vec<Vec<Complex64>>,
    /// PLL phase trace per polarization, one entry per estimated symbol.
    pub phases: Vec<Vec<f64>>,
    pub converged: bool,
    /// Mean squared error over the last stretch of preconvergence.
    pub preconvergence_mse: f64,
    /// Converged butterfly taps, indexed [out_pol][in_pol][tap].
    pub taps: Vec<Vec<Vec<Complex64>>>,
}

impl SymbolEstimates {
    pub fn len(&self) -> usize {
        self.pols.first().map_or(0, |p| p.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Absolute transmitted-symbol index of estimate `i`.
    pub fn symbol_index(&self, i: usize) -> usize {
        self.start + i
    }
}

/// LMS reference source. The equalizer asks for a known reference during
/// preconvergence and at pilots; between pilots it falls back to a
/// decision-directed reference computed from the current estimate (for the
/// legitimate receiver this is the key-aided 4-candidate decision
/// re-encrypted to a dense point).
pub trait ReferenceProvider {
    fn known(&self, pol: usize, t: usize) -> Option<Complex64>;
    fn decide(&self, pol: usize, t: usize, estimate: Complex64) -> Complex64;
}

/// Receiver-side dispersion compensation for the configured link.
pub fn cdc(w: &Waveform, link: &LinkConfig) -> Waveform {
    channel::apply_cd(
        w,
        link.total_dispersion_ps_nm(),
        link.span.wavelength_m(),
        CdSign::Inverse,
    )
    .expect("valid waveform")
}

/// Resample to an arbitrary rate (used for 80 GSa/s -> 2 samples/symbol).
pub fn resample_to(w: &Waveform, new_rate: f64) -> Waveform {
    let new_len = (w.len() as f64 * new_rate / w.sample_rate).round() as usize;
    let mut out = w.clone();
    for pol in out.pols.iter_mut() {
        *pol = dsp::resample(pol, new_len);
    }
    out.sample_rate = new_rate;
    out
}

/// Fourth-power frequency-offset estimate and de-rotation. Returns the
/// corrected waveform, the estimate in Hz, and a lock flag (false when the
/// fourth-power spectrum has no dominant peak).
pub fn freq_recover(w: &Waveform) -> (Waveform, f64, bool) {
    let sps = w.samples_per_symbol().round() as usize;
    let symbols: Vec<Complex64> = w.pols[0].iter().step_by(sps.max(1)).copied().collect();
    let n = symbols.len();
    let mut spec: Vec<Complex64> = symbols.iter().map(|s| s * s * s * s).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut spec);
    let mags: Vec<f64> = spec.iter().map(|s| s.norm()).collect();
    let peak = (0..n)
        .max_by(|&a, &b| mags[a].partial_cmp(&mags[b]).unwrap())
        .unwrap();
    let mean = mags.iter().sum::<f64>() / n as f64;
    let locked = mags[peak] > 8.0 * mean;
    // Parabolic interpolation around the peak bin.
    let fs_sym = w.symbol_rate;
    let prev = mags[(peak + n - 1) % n];
    let next = mags[(peak + 1) % n];
    let denom = prev - 2.0 * mags[peak] + next;
    let frac = if denom.abs() > 1e-30 {
        0.5 * (prev - next) / denom
    } else {
        0.0
    };
    let mut bin = peak as f64 + frac;
    if bin > n as f64 / 2.0 {
        bin -= n as f64;
    }
    let f_est = bin * fs_sym / n as f64 / 4.0;
    // De-rotate the full-rate waveform.
    let mut out = w.clone();
    let dt = 1.0 / w.sample_rate;
    for pol in out.pols.iter_mut() {
        for (i, s) in pol.iter_mut().enumerate() {
            *s *= Complex64::from_polar(
                1.0,
                -2.0 * std::f64::consts::PI * f_est * i as f64 * dt,
            );
        }
    }
    (out, f_est, locked)
}

/// Pilot-aided NxN MIMO LMS equalizer (N = polarization count) with an
/// embedded per-polarization first-order digital PLL. Input must be at
/// 2 samples/symbol. The equalizer is a sequential stateful loop; run
/// independent trials in parallel, not this function.
pub fn mimo_lms_pll(
    w: &Waveform,
    refs: &dyn ReferenceProvider,
    cfg: &EqualizerConfig,
) -> Result<SymbolEstimates, RxError> {
    cfg.validate()?;
    let npol = w.pol_count();
    let taps = cfg.taps;
    let half = taps / 2;
    let n_samples = w.len();
    let n_symbols = n_samples / 2;
    let start = half / 2 + 1;
    let end = n_symbols.saturating_sub(half / 2 + 1);
    if end <= start + cfg.preconvergence_symbols {
        return Err(RxError::InputTooShort);
    }
    // Butterfly taps: weights[out][in][tap], center-tap identity init.
    let zero = Complex64::new(0.0, 0.0);
    let mut weights = vec![vec![vec![zero; taps]; npol]; npol];
    for (p, w_out) in weights.iter_mut().enumerate() {
        w_out[p][half] = Complex64::new(1.0, 0.0);
    }
    let mut phases = vec![0.0f64; npol];
    let mut out_pols = vec![Vec::with_capacity(end - start); npol];
    let mut out_phases = vec![Vec::with_capacity(end - start); npol];
    let pilot_stride = cfg.pilot_stride();
    let mut mse_acc = 0.0f64;
    let mut mse_count = 0usize;
    let mse_window = 500.min(cfg.preconvergence_symbols / 2);

    // Training revisits the preconvergence block in several epochs with a
    // decreasing step so the taps settle near the Wiener solution before
    // decision-directed tracking starts; tracking then runs with a small
    // step to keep the excess (gradient-noise) MSE low. Only the final
    // preconvergence epoch is recorded so the output stream stays dense.
    let p_end = start + cfg.preconvergence_symbols;
    let mu0 = cfg.step_size;
    let schedule: [(std::ops::Range<usize>, f64, bool, bool); 4] = [
        (start..p_end, 4.0 * mu0, true, false),
        (start..p_end, 2.0 * mu0, true, false),
        (start..p_end, mu0, true, true),
        (p_end..end, 0.1 * mu0, false, true),
    ];
    let mut regressors: Vec<&[Complex64]> = Vec::with_capacity(npol);
    for (range, mu, training, record) in schedule {
        for t in range {
            let center = 2 * t;
            let lo = center - half;
            regressors.clear();
            for pol in w.pols.iter() {
                regressors.push(&pol[lo..lo + taps]);
            }
            let rel = t - start;
            for out_pol in 0..npol {
                let mut y = zero;
                for (in_pol, reg) in regressors.iter().enumerate() {
                    let wrow = &weights[out_pol][in_pol];
                    let mut acc = zero;
                    for (wt, x) in wrow.iter().zip(reg.iter()) {
                        acc += wt * x;
                    }
                    y += acc;
                }
                let rot = Complex64::from_polar(1.0, -phases[out_pol]);
                let y_hat = y * rot;
                let is_pilot = training || rel % pilot_stride == 0;
                let d = if is_pilot {
                    refs.known(out_pol, t)
                        .unwrap_or_else(|| refs.decide(out_pol, t, y_hat))
                } else {
                    refs.decide(out_pol, t, y_hat)
                };
                let err = d - y_hat;
                // Tap update in the unrotated domain.
                let err_unrot = err * rot.conj();
                for (in_pol, reg) in regressors.iter().enumerate() {
                    let wrow = &mut weights[out_pol][in_pol];
                    for (wt, x) in wrow.iter_mut().zip(reg.iter()) {
                        *wt += mu * err_unrot * x.conj();
                    }
                }
                // First-order PLL on the residual rotation.
                let pd = (y_hat * d.conj()).arg();
                phases[out_pol] += cfg.pll_gain * pd;
                if !record {
                    continue;
                }
                if training && rel + mse_window >= cfg.preconvergence_symbols {
                    mse_acc += err.norm_sqr();
                    mse_count += 1;
                }
                out_pols[out_pol].push(y_hat);
                out_phases[out_pol].push(phases[out_pol]);
            }
        }
    }
    let mse = if mse_count > 0 {
        mse_acc / mse_count as f64
    } else {
        f64::NAN
    };
    Ok(SymbolEstimates {
        start,
        pols: out_pols,
        phases: out_phases,
        converged: mse.is_finite() && mse < 0.3,
        preconvergence_mse: mse,
        taps: weights,
    })
}

/// Converged-tap dump for diagnostics is handled by the harness; the raw
/// estimate stream is what downstream decryption consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncResult {
    /// Symbol lag of the estimates relative to the preamble.
    pub offset: usize,
    /// True when the polarizations arrive swapped.
    pub swapped: bool,
}

/// Cross-correlation frame sync of equalized estimates against the known
/// dense preamble. Resolves integer symbol offset and polarization
/// permutation; fails when the normalized correlation peak is weak.
pub fn synchronize(
    est: &SymbolEstimates,
    preamble: &[Vec<Complex64>],
    max_lag: usize,
) -> Result<SyncResult, RxError> {
    let npol = est.pols.len();
    assert_eq!(preamble.len(), npol);
    let plen = preamble[0].len();
    let best_corr = |a: &[Complex64], b: &[Complex64]| -> (usize, f64) {
        let eb: f64 = b.iter().map(|s| s.norm_sqr()).sum();
        let mut best = (0usize, 0.0f64);
        for lag in 0..=max_lag.min(a.len().saturating_sub(plen)) {
            let mut c = Complex64::new(0.0, 0.0);
            let mut ea = 0.0f64;
            for (i, p) in b.iter().enumerate() {
                let s = a[lag + i];
                c += s * p.conj();
                ea += s.norm_sqr();
            }
            let norm = c.norm() / (ea.sqrt() * eb.sqrt()).max(1e-30);
            if norm > best.1 {
                best = (lag, norm);
            }
        }
        best
    };
    let (lag_direct, corr_direct) = best_corr(&est.pols[0], &preamble[0]);
    if npol == 1 {
        if corr_direct < 0.5 {
            return Err(RxError::SyncFailed(corr_direct));
        }
        return Ok(SyncResult {
            offset: lag_direct,
            swapped: false,
        });
    }
    let (lag_swapped, corr_swapped) = best_corr(&est.pols[0], &preamble[1]);
    if corr_direct.max(corr_swapped) < 0.5 {
        return Err(RxError::SyncFailed(corr_direct.max(corr_swapped)));
    }
    if corr_direct >= corr_swapped {
        Ok(SyncResult {
            offset: lag_direct,
            swapped: false,
        })
    } else {
        Ok(SyncResult {
            offset: lag_swapped,
            swapped: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::txfront::{modulate_plain16, plain16_level_amplitude, DacModel};
    use crate::PlainSymbol;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// Test reference provider: knows the whole transmitted plain-16QAM
    /// sequence per polarization.
    struct KnownRefs {
        pols: Vec<Vec<Complex64>>,
    }

    impl ReferenceProvider for KnownRefs {
        fn known(&self, pol: usize, t: usize) -> Option<Complex64> {
            Some(self.pols[pol][t])
        }
        fn decide(&self, pol: usize, t: usize, _e: Complex64) -> Complex64 {
            self.pols[pol][t]
        }
    }

    fn plain_waveform_2sps(n_sym: usize, seed: u64) -> (Waveform, Vec<Complex64>) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let syms: Vec<PlainSymbol> = (0..n_sym)
            .map(|_| PlainSymbol::new(rng.gen_range(0..16)))
            .collect();
        let refs: Vec<Complex64> = syms
            .iter()
            .map(|s| {
                let (i, q) = s.levels();
                Complex64::new(plain16_level_amplitude(i), plain16_level_amplitude(q))
            })
            .collect();
        let w4 = modulate_plain16(&syms, &DacModel::default());
        let w2 = resample_to(&w4, 44e9);
        (w2, refs)
    }

    fn demap16(s: Complex64) -> u8 {
        let level = |x: f64| -> u8 {
            let u = 2.0 / 10f64.sqrt();
            ((x / u + 1.5).round().clamp(0.0, 3.0)) as u8
        };
        PlainSymbol::from_levels(level(s.re), level(s.im)).bits
    }

    #[test]
    fn identity_channel_noiseless_converges() {
        let n_sym = 12_000;
        let (w, refs) = plain_waveform_2sps(n_sym, 1);
        let w2 = Waveform {
            pols: vec![w.pols[0].clone(), w.pols[0].clone()],
            ..w.clone()
        };
        let provider = KnownRefs {
            pols: vec![refs.clone(), refs.clone()],
        };
        let cfg = EqualizerConfig::default();
        let est = mimo_lms_pll(&w2, &provider, &cfg).unwrap();
        assert!(est.converged, "mse = {}", est.preconvergence_mse);
        // Zero bit errors after preconvergence.
        let mut errors = 0usize;
        for (i, s) in est.pols[0].iter().enumerate().skip(cfg.preconvergence_symbols) {
            let t = est.symbol_index(i);
            if demap16(*s) != demap16(refs[t]) {
                errors += 1;
            }
        }
        assert_eq!(errors, 0);
    }

    #[test]
    fn swapped_polarizations_are_separated() {
        // Receiver sees x/y swapped; the butterfly learns the permutation.
        let n_sym = 12_000;
        let (wx, rx_refs) = plain_waveform_2sps(n_sym, 2);
        let (wy, ry_refs) = plain_waveform_2sps(n_sym, 3);
        let swapped = Waveform {
            pols: vec![wy.pols[0].clone(), wx.pols[0].clone()],
            ..wx.clone()
        };
        let provider = KnownRefs {
            pols: vec![rx_refs.clone(), ry_refs.clone()],
        };
        let cfg = EqualizerConfig::default();
        let est = mimo_lms_pll(&swapped, &provider, &cfg).unwrap();
        assert!(est.converged);
        let mut errors = 0usize;
        let mut counted = 0usize;
        for (i, s) in est.pols[0].iter().enumerate().skip(cfg.preconvergence_symbols) {
            let t = est.symbol_index(i);
            counted += 1;
            if demap16(*s) != demap16(rx_refs[t]) {
                errors += 1;
            }
        }
        assert!(counted > 5000);
        assert_eq!(errors, 0, "x-pol not recovered through the swap");
    }

    #[test]
    fn freq_recover_zero_offset() {
        let (w, _) = plain_waveform_2sps(8192, 4);
        let (_, f_est, _) = freq_recover(&w);
        let bin = w.symbol_rate / 8192.0 / 4.0;
        assert!(f_est.abs() <= bin, "f_est = {f_est}");
    }

    #[test]
    fn freq_recover_300mhz() {
        let (w, _) = plain_waveform_2sps(1 << 14, 5);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let (shifted, _) = channel::lo_impairments(&w, 300e6, 0.0, &mut rng);
        let (_, f_est, locked) = freq_recover(&shifted);
        assert!(locked);
        assert!((f_est - 300e6).abs() < 5e6, "f_est = {f_est}");
        // Estimate invariant to a global phase rotation.
        let mut rotated = shifted.clone();
        for pol in rotated.pols.iter_mut() {
            for s in pol.iter_mut() {
                *s *= Complex64::from_polar(1.0, 1.234);
            }
        }
        let (_, f_rot, _) = freq_recover(&rotated);
        assert!((f_rot - f_est).abs() < 5e6);
    }

    #[test]
    fn synchronize_constructed_cases() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let seq: Vec<Complex64> = (0..4000)
            .map(|_| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
            .collect();
        let seq_y: Vec<Complex64> = (0..4000)
            .map(|_| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
            .collect();
        let preamble = vec![seq[..512].to_vec(), seq_y[..512].to_vec()];
        let mk = |pols: Vec<Vec<Complex64>>| SymbolEstimates {
            start: 0,
            phases: vec![vec![]; pols.len()],
            converged: true,
            preconvergence_mse: 0.0,
            taps: vec![],
            pols,
        };
        // Zero offset.
        let est = mk(vec![seq.clone(), seq_y.clone()]);
        let sync = synchronize(&est, &preamble, 1000).unwrap();
        assert_eq!(sync, SyncResult { offset: 0, swapped: false });
        // Delayed by 777 symbols.
        let delayed: Vec<Complex64> = (0..4000)
            .map(|i| seq[(i + 4000 - 777) % 4000])
            .collect();
        let delayed_y: Vec<Complex64> = (0..4000)
            .map(|i| seq_y[(i + 4000 - 777) % 4000])
            .collect();
        let est = mk(vec![delayed, delayed_y]);
        let sync = synchronize(&est, &preamble, 1000).unwrap();
        assert_eq!(sync.offset, 777);
        assert!(!sync.swapped);
        // Swapped polarizations.
        let est = mk(vec![seq_y.clone(), seq.clone()]);
        let sync = synchronize(&est, &preamble, 1000).unwrap();
        assert!(sync.swapped);
        // Garbage input fails loudly.
        let noise: Vec<Complex64> = (0..4000)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let noise_y: Vec<Complex64> = (0..4000)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let est = mk(vec![noise, noise_y]);
        assert!(synchronize(&est, &preamble, 1000).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = EqualizerConfig::default();
        cfg.taps = 120;
        assert!(cfg.validate().is_err());
        cfg = EqualizerConfig::default();
        cfg.pilot_ratio = 0.6;
        assert!(cfg.validate().is_err());
        cfg = EqualizerConfig::default();
        cfg.preconvergence_symbols = 50;
        assert!(cfg.validate().is_err());
        assert_eq!(EqualizerConfig::default().pilot_stride(), 33);
    }
}
