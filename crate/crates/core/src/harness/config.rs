//! Experiment configuration: a single TOML document with one block per
//! pipeline stage. Every block has defaults matching the reference setup, so
//! a preset only overrides what it sweeps. Validation is total: nothing runs
//! until the whole document checks out.

use crate::analysis::AnalysisError;
use crate::channel::{ChannelError, LinkConfig, NoiseBudget, SpanConfig};
use crate::cipher::CipherError;
use crate::keystream::{KeystreamError, SeedKey};
use crate::rxdsp::{EqualizerConfig, RxError};
use crate::txfront::{DacModel, ModulatorConfig, Transfer, TxError, TxMode, SAMPLES_PER_SYMBOL};
use crate::TemplateConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("override `{key}` is not settable: {reason}")]
    BadOverride { key: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Keystream(#[from] KeystreamError),
    #[error(transparent)]
    Cipher(#[from] CipherError),
    #[error(transparent)]
    Tx(#[from] TxError),
    #[error(transparent)]
    Rx(#[from] RxError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

fn default_seed() -> String {
    "0000000000000000000000000000000000000000000000000000000000000001".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    /// Free-form experiment label; used in output file names.
    pub label: String,
    /// Master seed, 64 hex characters.
    pub seed: String,
    /// Monte Carlo trials for symbol-level sweeps.
    pub trials: u64,
    /// Transmitted symbols per equalized pipeline run.
    pub n_symbols: usize,
    /// Rayon worker threads; 0 keeps the global default.
    pub parallel: usize,
    pub dump_waveforms: bool,
    pub dump_taps: bool,
}

impl Default for RunBlock {
    fn default() -> Self {
        Self {
            label: "run".into(),
            seed: default_seed(),
            trials: 200_000,
            n_symbols: 60_016,
            parallel: 0,
            dump_waveforms: false,
            dump_taps: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateBlock {
    pub bits_per_quadrature: u32,
}

impl Default for TemplateBlock {
    fn default() -> Self {
        Self {
            bits_per_quadrature: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxModeCfg {
    Ideal,
    Hardware,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferCfg {
    Linear,
    Sinusoidal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TxBlock {
    pub mode: TxModeCfg,
    pub transfer: TransferCfg,
    /// Transmitter output power, dBm (tap point A).
    pub power_dbm: f64,
    pub dac_bits: u32,
    pub dac_sample_rate: f64,
    pub dac_full_scale: f64,
    pub v_pi: f64,
    pub segment_gain_ratio_db: f64,
}

impl Default for TxBlock {
    fn default() -> Self {
        Self {
            mode: TxModeCfg::Ideal,
            transfer: TransferCfg::Linear,
            power_dbm: -16.5,
            dac_bits: 8,
            dac_sample_rate: 88e9,
            dac_full_scale: 2.0,
            v_pi: 6.0,
            segment_gain_ratio_db: 20.0 * 2f64.log10(),
        }
    }
}

impl TxBlock {
    pub fn mode(&self) -> TxMode {
        match self.mode {
            TxModeCfg::Ideal => TxMode::Ideal,
            TxModeCfg::Hardware => TxMode::Hardware,
        }
    }

    pub fn dac(&self) -> DacModel {
        DacModel {
            resolution_bits: self.dac_bits,
            sample_rate: self.dac_sample_rate,
            full_scale: self.dac_full_scale,
            memory_samples: None,
        }
    }

    pub fn modulator(&self) -> ModulatorConfig {
        ModulatorConfig {
            v_pi: self.v_pi,
            segment_gain_ratio_db: self.segment_gain_ratio_db,
            transfer: match self.transfer {
                TransferCfg::Linear => Transfer::Linear,
                TransferCfg::Sinusoidal => Transfer::Sinusoidal,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdmMode {
    /// Single polarization, no emulation.
    Single,
    /// Second polarization is a delay-decorrelated copy of the first.
    DelayedCopy,
    /// Independently generated data per polarization.
    Independent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdmBlock {
    pub mode: PdmMode,
    pub delay_symbols: usize,
}

impl Default for PdmBlock {
    fn default() -> Self {
        Self {
            mode: PdmMode::DelayedCopy,
            delay_symbols: 1199,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsetReplayConfig {
    pub enabled: bool,
    /// DAC pattern memory depth in samples.
    pub pattern_length_samples: usize,
}

impl Default for SubsetReplayConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            pattern_length_samples: 1 << 18,
        }
    }
}

impl SubsetReplayConfig {
    pub fn unique_symbols(&self) -> usize {
        self.pattern_length_samples / SAMPLES_PER_SYMBOL
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBlock {
    /// When false the run is back-to-back: no fiber, no amplifiers.
    pub enabled: bool,
    pub n_spans: u32,
    pub span_length_km: f64,
    pub attenuation_db_per_km: f64,
    pub dispersion_ps_nm_km: f64,
    pub wavelength_nm: f64,
    pub amp_noise_figure_db: f64,
    pub launch_power_dbm: f64,
    pub ase: bool,
}

impl Default for LinkBlock {
    fn default() -> Self {
        let link = LinkConfig::default();
        Self {
            enabled: false,
            n_spans: link.n_spans,
            span_length_km: link.span.length_km,
            attenuation_db_per_km: link.span.attenuation_db_per_km,
            dispersion_ps_nm_km: link.span.dispersion_ps_nm_km,
            wavelength_nm: link.span.wavelength_nm,
            amp_noise_figure_db: link.amp_noise_figure_db,
            launch_power_dbm: link.launch_power_dbm,
            ase: link.ase,
        }
    }
}

impl LinkBlock {
    pub fn to_link(&self, tx_power_dbm: f64) -> LinkConfig {
        LinkConfig {
            span: SpanConfig {
                length_km: self.span_length_km,
                attenuation_db_per_km: self.attenuation_db_per_km,
                dispersion_ps_nm_km: self.dispersion_ps_nm_km,
                wavelength_nm: self.wavelength_nm,
            },
            n_spans: self.n_spans,
            amp_noise_figure_db: self.amp_noise_figure_db,
            tx_power_dbm,
            launch_power_dbm: self.launch_power_dbm,
            ase: self.ase,
        }
    }

    pub fn wavelength_m(&self) -> f64 {
        self.wavelength_nm * 1e-9
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoBlock {
    pub freq_offset_hz: f64,
    /// Per-laser linewidth; transmit and LO contributions add.
    pub linewidth_hz: f64,
}

impl Default for LoBlock {
    fn default() -> Self {
        Self {
            freq_offset_hz: 300e6,
            linewidth_hz: 1e3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RxBlock {
    pub adc_bits: u32,
    pub adc_sample_rate: f64,
    pub rx_bandwidth_hz: f64,
    /// Equalizer input rate, 2 samples/symbol.
    pub dsp_sample_rate: f64,
    pub eq_taps: usize,
    pub eq_step_size: f64,
    pub pilot_ratio: f64,
    pub preconvergence_symbols: usize,
    pub pll_gain: f64,
    pub max_sync_lag: usize,
    /// Extra per-quadrature detection noise in photon units (thermal / TIA /
    /// quantization beyond the modeled ADC); also applied to Eve.
    pub extra_noise_var: f64,
}

impl Default for RxBlock {
    fn default() -> Self {
        let eq = EqualizerConfig::default();
        Self {
            adc_bits: 8,
            adc_sample_rate: 80e9,
            rx_bandwidth_hz: 32e9,
            dsp_sample_rate: 44e9,
            eq_taps: eq.taps,
            eq_step_size: eq.step_size,
            pilot_ratio: eq.pilot_ratio,
            preconvergence_symbols: eq.preconvergence_symbols,
            pll_gain: eq.pll_gain,
            max_sync_lag: 8,
            extra_noise_var: 0.0,
        }
    }
}

impl RxBlock {
    pub fn equalizer(&self) -> EqualizerConfig {
        EqualizerConfig {
            taps: self.eq_taps,
            step_size: self.eq_step_size,
            pilot_ratio: self.pilot_ratio,
            preconvergence_symbols: self.preconvergence_symbols,
            pll_gain: self.pll_gain,
        }
    }

    pub fn budget(&self, power_dbm: f64, symbol_rate: f64, wavelength_m: f64) -> NoiseBudget {
        NoiseBudget {
            power_dbm,
            symbol_rate,
            wavelength_m,
            extra_noise_var: self.extra_noise_var,
            adc_bits: self.adc_bits,
            rx_bandwidth_hz: self.rx_bandwidth_hz,
            adc_sample_rate: self.adc_sample_rate,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    /// OSNR loading targets, dB in 0.1 nm. Empty means no loading.
    pub osnr_db: Vec<f64>,
    /// Per-quadrature template widths to sweep.
    pub template_bits: Vec<u32>,
    /// Detection powers to sweep, dBm.
    pub powers_dbm: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunBlock,
    pub template: TemplateBlock,
    pub tx: TxBlock,
    pub pdm: PdmBlock,
    pub subset_replay: SubsetReplayConfig,
    pub link: LinkBlock,
    pub lo: LoBlock,
    pub rx: RxBlock,
    pub sweep: SweepBlock,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, HarnessError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn seed_key(&self) -> Result<SeedKey, HarnessError> {
        Ok(SeedKey::from_hex(&self.run.seed)?)
    }

    pub fn template_config(&self) -> Result<TemplateConfig, HarnessError> {
        Ok(TemplateConfig::new(self.template.bits_per_quadrature)?)
    }

    pub fn pol_count(&self) -> usize {
        match self.pdm.mode {
            PdmMode::Single => 1,
            _ => 2,
        }
    }

    pub fn symbol_rate(&self) -> f64 {
        self.tx.dac_sample_rate / SAMPLES_PER_SYMBOL as f64
    }

    /// Validate every block before any computation starts.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.seed_key()?;
        self.template_config()?;
        self.rx.equalizer().validate()?;
        let inv = |msg: String| Err(HarnessError::Invalid(msg));
        if self.run.n_symbols == 0 || self.run.n_symbols % 11 != 0 {
            return inv(format!(
                "run.n_symbols = {} must be a positive multiple of 11 \
                 (integer 88 -> 80 -> 44 GSa/s resampling)",
                self.run.n_symbols
            ));
        }
        let edge = self.rx.eq_taps / 4 + 1;
        if self.run.n_symbols <= self.rx.preconvergence_symbols + 2 * edge + 1000 {
            return inv(format!(
                "run.n_symbols = {} leaves no symbols to count after \
                 preconvergence ({}) and edge discard",
                self.run.n_symbols, self.rx.preconvergence_symbols
            ));
        }
        if self.run.trials < 10_000 {
            return inv(format!("run.trials = {} below minimum 10000", self.run.trials));
        }
        if self.tx.dac_sample_rate <= 0.0 || self.rx.adc_sample_rate <= 0.0 {
            return inv("sample rates must be positive".into());
        }
        if self.rx.dsp_sample_rate != 2.0 * self.symbol_rate() {
            return inv(format!(
                "rx.dsp_sample_rate = {} must be 2 samples/symbol ({})",
                self.rx.dsp_sample_rate,
                2.0 * self.symbol_rate()
            ));
        }
        if self.tx.mode == TxModeCfg::Hardware && self.template.bits_per_quadrature != 16 {
            return inv("tx.mode = hardware requires template.bits_per_quadrature = 16".into());
        }
        if self.pdm.mode == PdmMode::DelayedCopy && self.pdm.delay_symbols >= self.run.n_symbols {
            return inv(format!(
                "pdm.delay_symbols = {} must be below run.n_symbols",
                self.pdm.delay_symbols
            ));
        }
        if self.subset_replay.enabled && self.subset_replay.unique_symbols() == 0 {
            return inv(format!(
                "subset_replay.pattern_length_samples = {} holds less than one symbol",
                self.subset_replay.pattern_length_samples
            ));
        }
        if self.link.enabled {
            if self.link.n_spans == 0 || self.link.span_length_km <= 0.0 {
                return inv("link.n_spans and link.span_length_km must be positive".into());
            }
            if self.link.wavelength_nm <= 0.0 {
                return inv("link.wavelength_nm must be positive".into());
            }
            if self.link.launch_power_dbm < self.tx.power_dbm {
                return inv(format!(
                    "link.launch_power_dbm = {} below tx.power_dbm = {}: boost gain < 1",
                    self.link.launch_power_dbm, self.tx.power_dbm
                ));
            }
        }
        if self.lo.linewidth_hz < 0.0 {
            return inv("lo.linewidth_hz must be >= 0".into());
        }
        if self.rx.extra_noise_var < 0.0 {
            return inv("rx.extra_noise_var must be >= 0".into());
        }
        for &osnr in &self.sweep.osnr_db {
            if !(osnr >= -10.0) {
                return inv(format!("sweep.osnr_db entry {osnr} below -10 dB"));
            }
        }
        for &bits in &self.sweep.template_bits {
            TemplateConfig::new(bits)?;
        }
        Ok(())
    }

    /// Apply `--set key=value` overrides by round-tripping through the TOML
    /// document model. Unknown key paths are rejected before execution.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self, HarnessError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = toml::Value::try_from(self).map_err(HarnessError::Serialize)?;
        for (key, raw) in overrides {
            set_config_path(&mut doc, key, raw)?;
        }
        Ok(doc.try_into()?)
    }
}

/// Set a dotted key path in a TOML document to a value parsed from `raw`.
/// Existing leaves only: a missing intermediate table or leaf is an unknown
/// key, reported with the full offending path.
pub fn set_config_path(
    doc: &mut toml::Value,
    key: &str,
    raw: &str,
) -> Result<(), HarnessError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(HarnessError::BadOverride {
            key: key.into(),
            reason: "empty path segment".into(),
        });
    }
    let mut node = doc;
    for part in &parts[..parts.len() - 1] {
        node = node
            .get_mut(*part)
            .ok_or_else(|| HarnessError::UnknownKey(key.into()))?;
    }
    let leaf = parts[parts.len() - 1];
    let slot = node
        .get_mut(leaf)
        .ok_or_else(|| HarnessError::UnknownKey(key.into()))?;
    // Parse the raw text as a TOML value; bare words fall back to strings so
    // enum variants can be written without quotes.
    let parsed: toml::Value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(table) => table["v"].clone(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    // Keep integer slots integral when given integers, but allow widening an
    // integer literal into a float slot (e.g. `--set rx.extra_noise_var=1`).
    *slot = match (&*slot, &parsed) {
        (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
        _ => parsed,
    };
    Ok(())
}
