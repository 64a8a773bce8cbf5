//! Transmitter model: cipher levels to DAC words to two-segment modulator
//! drive to complex baseband samples, plus PDM emulation.
//!
//! Two modes ship. Ideal mode places each symbol exactly on the template
//! amplitudes with rectangular pulses (4 samples/symbol, no shaping). Hardware
//! mode splits each 16-bit level word across two 8-bit DACs driving the two
//! modulator segments, with the first segment at 6 dB higher RF power.

use crate::cipher::{self, CipherPoint, PlainSymbol, TemplateConfig};
use crate::dsp;
use num_complex::Complex64;
use thiserror::Error;

/// Samples per symbol at generation (88 GSa/s over 22 GBaud).
pub const SAMPLES_PER_SYMBOL: usize = 4;

#[derive(Debug, Error)]
pub enum TxError {
    #[error("hardware mode requires a 16-bit-per-quadrature template, got {0}")]
    HardwareNeeds16Bits(u32),
    #[error("delay of {delay} symbols exceeds stream length {len}")]
    DelayTooLong { delay: usize, len: usize },
}

/// 8-bit DAC with uniform output levels spanning [-full_scale, +full_scale].
#[derive(Debug, Clone, Copy)]
pub struct DacModel {
    pub resolution_bits: u32,
    pub sample_rate: f64,
    pub full_scale: f64,
    pub memory_samples: Option<usize>,
}

impl Default for DacModel {
    fn default() -> Self {
        Self {
            resolution_bits: 8,
            sample_rate: 88e9,
            full_scale: 2.0,
            memory_samples: None,
        }
    }
}

impl DacModel {
    /// Output voltage for an 8-bit word.
    pub fn level(&self, word: u8) -> f64 {
        let max = (1u32 << self.resolution_bits) as f64 - 1.0;
        -self.full_scale + word as f64 * 2.0 * self.full_scale / max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transfer {
    Linear,
    Sinusoidal,
}

/// Two-segment modulator: segment 1 is driven at `segment_gain_ratio_db`
/// higher RF power than segment 2 and the segment phases add.
#[derive(Debug, Clone, Copy)]
pub struct ModulatorConfig {
    pub v_pi: f64,
    pub segment_gain_ratio_db: f64,
    pub transfer: Transfer,
}

impl Default for ModulatorConfig {
    fn default() -> Self {
        Self {
            v_pi: 6.0,
            // 6 dB nominal: stored exactly as a voltage factor of 2 so the
            // MSB segment contributes precisely one extra drive bit.
            segment_gain_ratio_db: 20.0 * 2f64.log10(),
            transfer: Transfer::Linear,
        }
    }
}

impl ModulatorConfig {
    /// Voltage ratio between the segments: 2.0 at the 6-dB default.
    pub fn voltage_ratio(&self) -> f64 {
        10f64.powf(self.segment_gain_ratio_db / 20.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxMode {
    Ideal,
    Hardware,
}

/// Complex baseband sample streams per polarization with rate and noise
/// bookkeeping. `noise_psd_rel` is accumulated noise PSD per polarization
/// relative to per-polarization signal power, in 1/Hz; samples are kept at
/// unit mean signal power per polarization.
#[derive(Debug, Clone)]
pub struct Waveform {
    pub pols: Vec<Vec<Complex64>>,
    pub sample_rate: f64,
    pub symbol_rate: f64,
    pub power_dbm: f64,
    pub noise_psd_rel: f64,
}

impl Waveform {
    pub fn pol_count(&self) -> usize {
        self.pols.len()
    }

    pub fn len(&self) -> usize {
        self.pols.first().map_or(0, |p| p.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn samples_per_symbol(&self) -> f64 {
        self.sample_rate / self.symbol_rate
    }
}

/// Split a 16-bit word into even-indexed bits (b16 b14 ... b2, MSB-first)
/// and odd-indexed bits (b15 b13 ... b1, MSB-first), with b16 the MSB.
pub fn split_even_odd(word16: u16) -> (u8, u8) {
    let mut w1 = 0u8;
    let mut w2 = 0u8;
    for j in 0..8 {
        // b16 is bit 15 counted from the LSB; even-indexed bits are the
        // odd bit positions 15, 13, ..., 1.
        w1 = (w1 << 1) | (((word16 >> (15 - 2 * j)) & 1) as u8);
        w2 = (w2 << 1) | (((word16 >> (14 - 2 * j)) & 1) as u8);
    }
    (w1, w2)
}

/// Inverse of `split_even_odd`.
pub fn merge_even_odd(w1: u8, w2: u8) -> u16 {
    let mut word = 0u16;
    for j in 0..8 {
        word |= (((w1 >> (7 - j)) & 1) as u16) << (15 - 2 * j);
        word |= (((w2 >> (7 - j)) & 1) as u16) << (14 - 2 * j);
    }
    word
}

fn hardware_quadrature(level: u32, dac: &DacModel, modc: &ModulatorConfig) -> f64 {
    let (w1, w2) = split_even_odd(level as u16);
    let g = modc.voltage_ratio();
    let v_eff = g * dac.level(w1) + dac.level(w2);
    let v_max = (g + 1.0) * dac.full_scale;
    match modc.transfer {
        Transfer::Linear => v_eff / v_max,
        Transfer::Sinusoidal => {
            let num = (std::f64::consts::PI * v_eff / (2.0 * modc.v_pi)).sin();
            let den = (std::f64::consts::PI * v_max / (2.0 * modc.v_pi)).sin();
            num / den
        }
    }
}

/// Modulate a cipher-point stream into a single-polarization waveform at
/// 4 samples/symbol. The output is normalized to unit mean power; the raw
/// mean-square field is folded into `power_dbm` relative bookkeeping by the
/// caller (harness) which sets the absolute transmit power.
pub fn modulate(
    points: &[CipherPoint],
    template: &TemplateConfig,
    mode: TxMode,
    dac: &DacModel,
    modc: &ModulatorConfig,
) -> Result<Waveform, TxError> {
    if mode == TxMode::Hardware && template.bits_per_quadrature() != 16 {
        return Err(TxError::HardwareNeeds16Bits(template.bits_per_quadrature()));
    }
    let mut samples = Vec::with_capacity(points.len() * SAMPLES_PER_SYMBOL);
    for pt in points {
        let (i, q) = match mode {
            TxMode::Ideal => cipher::point_amplitudes(*pt, template),
            TxMode::Hardware => (
                hardware_quadrature(pt.l_i, dac, modc),
                hardware_quadrature(pt.l_q, dac, modc),
            ),
        };
        let s = Complex64::new(i, q);
        for _ in 0..SAMPLES_PER_SYMBOL {
            samples.push(s);
        }
    }
    let mut w = Waveform {
        pols: vec![samples],
        sample_rate: dac.sample_rate,
        symbol_rate: dac.sample_rate / SAMPLES_PER_SYMBOL as f64,
        power_dbm: 0.0,
        noise_psd_rel: 0.0,
    };
    if mode == TxMode::Hardware {
        // Hardware field values are non-uniform; renormalize to unit power
        // so downstream noise accounting is mode-independent.
        let p = dsp::mean_power(&w.pols[0]);
        if p > 0.0 {
            let scale = 1.0 / p.sqrt();
            for s in w.pols[0].iter_mut() {
                *s *= scale;
            }
        }
    }
    Ok(w)
}

/// Modulate plain (unencrypted) 16-QAM at unit symbol energy, ideal pulses.
pub fn modulate_plain16(symbols: &[PlainSymbol], dac: &DacModel) -> Waveform {
    let u = 1.0 / 10f64.sqrt();
    let mut samples = Vec::with_capacity(symbols.len() * SAMPLES_PER_SYMBOL);
    for sym in symbols {
        let (p_i, p_q) = sym.levels();
        let s = Complex64::new(
            (p_i as f64 - 1.5) * 2.0 * u,
            (p_q as f64 - 1.5) * 2.0 * u,
        );
        for _ in 0..SAMPLES_PER_SYMBOL {
            samples.push(s);
        }
    }
    Waveform {
        pols: vec![samples],
        sample_rate: dac.sample_rate,
        symbol_rate: dac.sample_rate / SAMPLES_PER_SYMBOL as f64,
        power_dbm: 0.0,
        noise_psd_rel: 0.0,
    }
}

/// Amplitude of a plain 16-QAM level at unit symbol energy.
pub fn plain16_level_amplitude(level: u8) -> f64 {
    (level as f64 - 1.5) * 2.0 / 10f64.sqrt()
}

/// PDM emulation: the y polarization is the x stream circularly delayed by
/// `delay_symbols`, matching a fiber-delay PDM emulator.
pub fn pdm_delayed_copy(x: &Waveform, delay_symbols: usize) -> Result<Waveform, TxError> {
    let sps = x.samples_per_symbol().round() as usize;
    let delay_samples = delay_symbols * sps;
    let n = x.len();
    if delay_samples > n {
        return Err(TxError::DelayTooLong {
            delay: delay_symbols,
            len: n / sps,
        });
    }
    let xs = &x.pols[0];
    let mut ys = Vec::with_capacity(n);
    ys.extend_from_slice(&xs[n - delay_samples..]);
    ys.extend_from_slice(&xs[..n - delay_samples]);
    Ok(Waveform {
        pols: vec![xs.clone(), ys],
        ..x.clone()
    })
}

/// PDM with independently generated data on the second polarization.
pub fn pdm_independent(x: &Waveform, y: &Waveform) -> Waveform {
    assert_eq!(x.len(), y.len(), "polarization streams must match in length");
    assert_eq!(x.sample_rate, y.sample_rate);
    Waveform {
        pols: vec![x.pols[0].clone(), y.pols[0].clone()],
        ..x.clone()
    }
}
