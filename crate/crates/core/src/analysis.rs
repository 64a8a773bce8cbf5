//! Security and performance analytics: closed-form and Monte Carlo
//! eavesdropper error rates, legitimate-receiver BER accounting,
//! required-OSNR extraction, and net-rate computation.

use crate::cipher::{self, PlainSymbol, TemplateConfig};
use crate::constants::{dbm_to_watts, optical_frequency, H_PLANCK, OSNR_REF_BANDWIDTH};
use crate::keystream::RunningKey;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least 1e4 trials, got {0}")]
    TooFewTrials(u64),
    #[error("bit streams differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("BER threshold {0} not bracketed by the curve")]
    ThresholdNotBracketed(f64),
    #[error("curve needs at least two points")]
    CurveTooShort,
}

/// Gaussian tail probability Q(x) = 0.5 erfc(x / sqrt(2)).
pub fn q_function(x: f64) -> f64 {
    assert!(x.is_finite());
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Exact Gray-coded 16-QAM bit error ratio at per-quadrature distance
/// ratio gamma = u / sigma (u = half the level spacing).
pub fn qam16_ber(gamma: f64) -> f64 {
    0.75 * q_function(gamma) + 0.5 * q_function(3.0 * gamma) - 0.25 * q_function(5.0 * gamma)
}

/// gamma for a given per-symbol SNR (Es/N0, linear) of unit-energy 16-QAM.
pub fn qam16_gamma_from_snr(snr_linear: f64) -> f64 {
    (snr_linear / 5.0).sqrt()
}

/// Symbol-rate SNR (dB) from OSNR (dB) in the 12.5 GHz reference bandwidth.
pub fn osnr_to_snr_db(osnr_db: f64, symbol_rate: f64) -> f64 {
    osnr_db - 10.0 * (symbol_rate / OSNR_REF_BANDWIDTH).log10()
}

pub fn snr_to_osnr_db(snr_db: f64, symbol_rate: f64) -> f64 {
    snr_db + 10.0 * (symbol_rate / OSNR_REF_BANDWIDTH).log10()
}

/// Detection parameters for the eavesdropper's intradyne receiver.
#[derive(Debug, Clone, Copy)]
pub struct SecurityBudget {
    pub power_dbm: f64,
    pub symbol_rate: f64,
    pub wavelength_m: f64,
    /// Levels per quadrature.
    pub levels: u32,
    /// Extra Gaussian variance per quadrature in photon units.
    pub extra_noise_var: f64,
}

impl SecurityBudget {
    pub fn mean_photons(&self) -> f64 {
        dbm_to_watts(self.power_dbm)
            / (H_PLANCK * optical_frequency(self.wavelength_m) * self.symbol_rate)
    }

    /// Per-quadrature noise standard deviation in photon units.
    pub fn sigma(&self) -> f64 {
        (0.5 + self.extra_noise_var).sqrt()
    }

    /// Fine-level spacing in photon units.
    pub fn delta_photons(&self) -> f64 {
        let lf = self.levels as f64;
        (6.0 * self.mean_photons() / (lf * lf - 1.0)).sqrt()
    }
}

/// Closed-form eavesdropper SER for nearest-fine-level detection:
/// per quadrature P = 2 (1 - 1/L) Q(delta / 2 sigma), combined over both
/// quadratures.
pub fn eve_ser_theory(budget: &SecurityBudget) -> f64 {
    let lf = budget.levels as f64;
    if budget.levels <= 1 {
        return 0.0;
    }
    let p_quad =
        2.0 * (1.0 - 1.0 / lf) * q_function(budget.delta_photons() / (2.0 * budget.sigma()));
    1.0 - (1.0 - p_quad) * (1.0 - p_quad)
}

/// Monte Carlo / counted error-rate result with a 95% binomial CI.
#[derive(Debug, Clone, Copy)]
pub struct RateReport {
    pub value: f64,
    pub errors: u64,
    pub trials: u64,
    pub ci95: f64,
}

impl RateReport {
    pub fn from_counts(errors: u64, trials: u64) -> Self {
        let p = errors as f64 / trials as f64;
        Self {
            value: p,
            errors,
            trials,
            ci95: 1.96 * (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }

    /// One binomial standard error.
    pub fn std_error(&self) -> f64 {
        (self.value * (1.0 - self.value) / self.trials as f64).sqrt()
    }
}

pub type SerReport = RateReport;
pub type BerReport = RateReport;

/// Joint Monte Carlo of Eve's SER (nearest dense level) and BER (decryption
/// with an independent random keystream) at a tap point described by
/// `budget`. Trials are chunked with position-derived seeds, so results are
/// identical for any parallelism.
pub fn eve_montecarlo(
    budget: &SecurityBudget,
    template: &TemplateConfig,
    trials: u64,
    seed: u64,
) -> Result<(SerReport, BerReport), AnalysisError> {
    if trials < 10_000 {
        return Err(AnalysisError::TooFewTrials(trials));
    }
    assert_eq!(budget.levels, template.levels());
    const CHUNK: u64 = 1 << 16;
    let n_chunks = trials.div_ceil(CHUNK);
    let results: Vec<(u64, u64, u64)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let chunk_trials = CHUNK.min(trials - chunk * CHUNK);
            let mut rng = ChaCha12Rng::seed_from_u64(seed ^ (chunk.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
            let scale = budget.mean_photons().sqrt();
            let noise = Normal::new(0.0, budget.sigma()).unwrap();
            let mut ser_errors = 0u64;
            let mut bit_errors = 0u64;
            for _ in 0..chunk_trials {
                let plain = PlainSymbol::new(rng.gen_range(0..16));
                let rk = RunningKey {
                    r_i: rng.gen_range(0..4),
                    r_q: rng.gen_range(0..4),
                    k_i: rng.gen_range(0..template.bases()),
                    k_q: rng.gen_range(0..template.bases()),
                };
                let pt = cipher::encrypt_symbol(plain, &rk, template);
                let (a_i, a_q) = cipher::point_amplitudes(pt, template);
                // Photon-unit observation, then back to normalized units for
                // the level decision.
                let obs_i = (a_i * scale + noise.sample(&mut rng)) / scale;
                let obs_q = (a_q * scale + noise.sample(&mut rng)) / scale;
                let hat_i = cipher::eve_nearest_level(obs_i, template);
                let hat_q = cipher::eve_nearest_level(obs_q, template);
                if hat_i != pt.l_i || hat_q != pt.l_q {
                    ser_errors += 1;
                }
                // Eve decrypts with an independent random running key.
                let guess_rk = RunningKey {
                    r_i: rng.gen_range(0..4),
                    r_q: rng.gen_range(0..4),
                    k_i: rng.gen_range(0..template.bases()),
                    k_q: rng.gen_range(0..template.bases()),
                };
                let guess = cipher::decrypt_symbol(
                    cipher::level_amplitude(hat_i, template),
                    cipher::level_amplitude(hat_q, template),
                    &guess_rk,
                    template,
                );
                bit_errors += (guess.bits ^ plain.bits).count_ones() as u64;
            }
            (ser_errors, bit_errors, chunk_trials)
        })
        .collect();
    let ser_errors: u64 = results.iter().map(|r| r.0).sum();
    let bit_errors: u64 = results.iter().map(|r| r.1).sum();
    let total: u64 = results.iter().map(|r| r.2).sum();
    Ok((
        RateReport::from_counts(ser_errors, total),
        RateReport::from_counts(bit_errors, total * 4),
    ))
}

/// Eve SER only.
pub fn eve_ser_montecarlo(
    budget: &SecurityBudget,
    template: &TemplateConfig,
    trials: u64,
    seed: u64,
) -> Result<SerReport, AnalysisError> {
    eve_montecarlo(budget, template, trials, seed).map(|(ser, _)| ser)
}

/// Eve BER only.
pub fn eve_ber_montecarlo(
    budget: &SecurityBudget,
    template: &TemplateConfig,
    trials: u64,
    seed: u64,
) -> Result<BerReport, AnalysisError> {
    eve_montecarlo(budget, template, trials, seed).map(|(_, ber)| ber)
}

/// Bit-error ratio of aligned decrypted vs transmitted bits.
pub fn bob_ber(tx_bits: &[u8], rx_bits: &[u8]) -> Result<BerReport, AnalysisError> {
    if tx_bits.len() != rx_bits.len() {
        return Err(AnalysisError::LengthMismatch(tx_bits.len(), rx_bits.len()));
    }
    let errors = tx_bits
        .iter()
        .zip(rx_bits)
        .filter(|(a, b)| a != b)
        .count() as u64;
    Ok(RateReport::from_counts(errors, tx_bits.len() as u64))
}

/// Required OSNR (or SNR) at a BER threshold by log-linear interpolation of
/// log10(BER) against the abscissa.
pub fn required_osnr(curve: &[(f64, f64)], threshold: f64) -> Result<f64, AnalysisError> {
    if curve.len() < 2 {
        return Err(AnalysisError::CurveTooShort);
    }
    let mut pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|(_, ber)| *ber > 0.0)
        .copied()
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let log_t = threshold.log10();
    for pair in pts.windows(2) {
        let (x0, b0) = pair[0];
        let (x1, b1) = pair[1];
        let (l0, l1) = (b0.log10(), b1.log10());
        if (l0 - log_t) * (l1 - log_t) <= 0.0 {
            if (l1 - l0).abs() < 1e-15 {
                return Ok(x0);
            }
            return Ok(x0 + (log_t - l0) * (x1 - x0) / (l1 - l0));
        }
    }
    Err(AnalysisError::ThresholdNotBracketed(threshold))
}

/// Net information rate: baud * bits * polarizations / (1 + overheads).
pub fn net_rate(
    baud: f64,
    bits_per_symbol: u32,
    polarizations: u32,
    fec_overhead: f64,
    pilot_overhead: f64,
) -> f64 {
    assert!(fec_overhead >= 0.0 && pilot_overhead >= 0.0);
    baud * bits_per_symbol as f64 * polarizations as f64 / (1.0 + fec_overhead + pilot_overhead)
}
