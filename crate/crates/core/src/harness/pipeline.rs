//! The end-to-end transmission pipeline: data generation, encryption,
//! modulation, PDM emulation, channel, receiver front end, DSP, and bit
//! error counting. Every random stage draws from a seed derived from the
//! master seed and a stage label, so a run is reproducible bit for bit.

use super::config::{ExperimentConfig, HarnessError, PdmMode, SubsetReplayConfig, TxModeCfg};
use super::derive_rng;
use crate::analysis::{BerReport, RateReport};
use crate::channel::{
    load_osnr, lo_impairments, measure_osnr, propagate_link, rx_frontend,
};
use crate::cipher;
use crate::keystream::{running_keys, RunningKey};
use crate::rxdsp::{cdc, freq_recover, mimo_lms_pll, resample_to, synchronize, ReferenceProvider, SyncResult};
use crate::txfront::{
    modulate, modulate_plain16, pdm_delayed_copy, pdm_independent, plain16_level_amplitude,
    TxMode, Waveform, SAMPLES_PER_SYMBOL,
};
use crate::{CipherPoint, PlainSymbol, TemplateConfig};
use num_complex::Complex64;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    /// Unencrypted 16-QAM reference signal.
    Plain16,
    /// Dense-template encrypted signal.
    Encrypted,
}

impl SignalKind {
    pub fn name(self) -> &'static str {
        match self {
            SignalKind::Plain16 => "plain",
            SignalKind::Encrypted => "encrypted",
        }
    }
}

/// Everything a sweep point needs from one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub kind: SignalKind,
    /// Bookkept OSNR at the receiver input, dB (infinite when noiseless).
    pub osnr_db: f64,
    pub ber: BerReport,
    pub freq_est_hz: f64,
    pub freq_locked: bool,
    pub converged: bool,
    pub preconvergence_mse: f64,
    pub sync: SyncResult,
    /// First transmitted-symbol index covered by the estimates.
    pub start: usize,
    /// PLL phase per polarization, one entry per estimated symbol.
    pub pll_phases: Vec<Vec<f64>>,
    /// Injected Wiener laser phase sampled once per estimated symbol
    /// (frequency-offset ramp excluded; reconstruct it from `freq_est_hz`).
    pub injected_phase: Vec<f64>,
    /// Equalized symbol estimates per polarization (dense coordinates).
    pub est_pols: Vec<Vec<Complex64>>,
    /// Converged butterfly taps, [out_pol][in_pol][tap].
    pub taps: Vec<Vec<Vec<Complex64>>>,
    /// Transmitted waveform, kept only when run.dump_waveforms is set.
    pub tx_waveform: Option<Waveform>,
}

/// Finite-DAC-memory emulation: the first `pattern_length_samples / 4`
/// symbols form the replay pattern, tiled cyclically to the input length.
/// Disabled config is the identity.
pub fn subset_replay(points: &[CipherPoint], cfg: &SubsetReplayConfig) -> Vec<CipherPoint> {
    if !cfg.enabled {
        return points.to_vec();
    }
    tile(points, cfg.unique_symbols())
}

fn tile<T: Copy>(v: &[T], unique: usize) -> Vec<T> {
    let u = unique.clamp(1, v.len().max(1));
    (0..v.len()).map(|i| v[i % u]).collect()
}

fn circular_shift<T: Copy>(v: &[T], delay: usize) -> Vec<T> {
    let n = v.len();
    let d = delay % n.max(1);
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&v[n - d..]);
    out.extend_from_slice(&v[..n - d]);
    out
}

fn random_plaintexts(rng: &mut impl Rng, n: usize) -> Vec<PlainSymbol> {
    (0..n).map(|_| PlainSymbol::new(rng.gen_range(0..16))).collect()
}

/// Key-aided reference provider for the encrypted signal: pilots return the
/// true dense point; between pilots the estimate is decrypted with the
/// running key and re-encrypted to the nearest consistent dense point.
struct DenseRefs {
    points: Vec<Vec<Complex64>>,
    keys: Vec<Vec<RunningKey>>,
    template: TemplateConfig,
}

impl ReferenceProvider for DenseRefs {
    fn known(&self, pol: usize, t: usize) -> Option<Complex64> {
        self.points.get(pol).and_then(|p| p.get(t)).copied()
    }

    fn decide(&self, pol: usize, t: usize, estimate: Complex64) -> Complex64 {
        match self.keys.get(pol).and_then(|k| k.get(t)) {
            Some(rk) => {
                let plain =
                    cipher::decrypt_symbol(estimate.re, estimate.im, rk, &self.template);
                let pt = cipher::encrypt_symbol(plain, rk, &self.template);
                let (i, q) = cipher::point_amplitudes(pt, &self.template);
                Complex64::new(i, q)
            }
            None => {
                let l_i = cipher::eve_nearest_level(estimate.re, &self.template);
                let l_q = cipher::eve_nearest_level(estimate.im, &self.template);
                let (i, q) =
                    cipher::point_amplitudes(CipherPoint { l_i, l_q }, &self.template);
                Complex64::new(i, q)
            }
        }
    }
}

/// Reference provider for the plain 16-QAM signal: hard nearest-point
/// decisions between pilots.
struct Plain16Refs {
    points: Vec<Vec<Complex64>>,
}

fn nearest16_level(a: f64) -> u8 {
    let u = 1.0 / 10f64.sqrt();
    (a / (2.0 * u) + 1.5).round().clamp(0.0, 3.0) as u8
}

fn nearest16(estimate: Complex64) -> Complex64 {
    Complex64::new(
        plain16_level_amplitude(nearest16_level(estimate.re)),
        plain16_level_amplitude(nearest16_level(estimate.im)),
    )
}

impl ReferenceProvider for Plain16Refs {
    fn known(&self, pol: usize, t: usize) -> Option<Complex64> {
        self.points.get(pol).and_then(|p| p.get(t)).copied()
    }

    fn decide(&self, _pol: usize, _t: usize, estimate: Complex64) -> Complex64 {
        nearest16(estimate)
    }
}

struct TxStreams {
    plain: Vec<Vec<PlainSymbol>>,
    keys: Vec<Vec<RunningKey>>,
    refs: Vec<Vec<Complex64>>,
    waveform: Waveform,
}

fn build_tx(
    cfg: &ExperimentConfig,
    kind: SignalKind,
    template: &TemplateConfig,
) -> Result<TxStreams, HarnessError> {
    let master = cfg.seed_key()?;
    let n = cfg.run.n_symbols;
    let dac = cfg.tx.dac();
    let modc = cfg.tx.modulator();
    let replay = &cfg.subset_replay;
    let tile_opt = |v: Vec<PlainSymbol>| {
        if replay.enabled {
            tile(&v, replay.unique_symbols())
        } else {
            v
        }
    };
    let tile_keys = |v: Vec<RunningKey>| {
        if replay.enabled {
            tile(&v, replay.unique_symbols())
        } else {
            v
        }
    };

    let mut rng = derive_rng(&master, "plaintext", 0);
    let plain0 = tile_opt(random_plaintexts(&mut rng, n));
    let all_keys = running_keys(&master, template, 2, n)?;

    let (plain, keys): (Vec<Vec<PlainSymbol>>, Vec<Vec<RunningKey>>) = match cfg.pdm.mode {
        PdmMode::Single => (vec![plain0], vec![tile_keys(all_keys[0].clone())]),
        PdmMode::DelayedCopy => {
            let d = cfg.pdm.delay_symbols;
            let k0 = tile_keys(all_keys[0].clone());
            let p1 = circular_shift(&plain0, d);
            let k1 = circular_shift(&k0, d);
            (vec![plain0, p1], vec![k0, k1])
        }
        PdmMode::Independent => {
            let mut rng1 = derive_rng(&master, "plaintext", 1);
            let p1 = tile_opt(random_plaintexts(&mut rng1, n));
            (
                vec![plain0, p1],
                vec![
                    tile_keys(all_keys[0].clone()),
                    tile_keys(all_keys[1].clone()),
                ],
            )
        }
    };

    let (refs, waveform) = match kind {
        SignalKind::Encrypted => {
            let dense: Vec<Vec<CipherPoint>> = plain
                .iter()
                .zip(&keys)
                .map(|(ps, ks)| {
                    ps.iter()
                        .zip(ks)
                        .map(|(p, k)| cipher::encrypt_symbol(*p, k, template))
                        .collect()
                })
                .collect();
            let refs: Vec<Vec<Complex64>> = dense
                .iter()
                .map(|pts| {
                    pts.iter()
                        .map(|pt| {
                            let (i, q) = cipher::point_amplitudes(*pt, template);
                            Complex64::new(i, q)
                        })
                        .collect()
                })
                .collect();
            let w0 = modulate(&dense[0], template, TxMode::Ideal, &dac, &modc)?;
            let w = match cfg.pdm.mode {
                PdmMode::Single => w0,
                PdmMode::DelayedCopy => pdm_delayed_copy(&w0, cfg.pdm.delay_symbols)?,
                PdmMode::Independent => {
                    let w1 = modulate(&dense[1], template, TxMode::Ideal, &dac, &modc)?;
                    pdm_independent(&w0, &w1)
                }
            };
            (refs, w)
        }
        SignalKind::Plain16 => {
            let refs: Vec<Vec<Complex64>> = plain
                .iter()
                .map(|ps| {
                    ps.iter()
                        .map(|p| {
                            let (li, lq) = p.levels();
                            Complex64::new(
                                plain16_level_amplitude(li),
                                plain16_level_amplitude(lq),
                            )
                        })
                        .collect()
                })
                .collect();
            let w0 = modulate_plain16(&plain[0], &dac);
            let w = match cfg.pdm.mode {
                PdmMode::Single => w0,
                PdmMode::DelayedCopy => pdm_delayed_copy(&w0, cfg.pdm.delay_symbols)?,
                PdmMode::Independent => {
                    let w1 = modulate_plain16(&plain[1], &dac);
                    pdm_independent(&w0, &w1)
                }
            };
            (refs, w)
        }
    };
    Ok(TxStreams {
        plain,
        keys,
        refs,
        waveform,
    })
}

/// One full transmit-channel-receive run. `osnr_db` is an optional noise
/// loading target applied at the receiver input; `variant` decorrelates the
/// channel noise between sweep points under the same master seed.
pub fn run_pipeline(
    cfg: &ExperimentConfig,
    kind: SignalKind,
    osnr_db: Option<f64>,
    variant: u64,
) -> Result<PipelineOutcome, HarnessError> {
    cfg.validate()?;
    if cfg.tx.mode == TxModeCfg::Hardware {
        return Err(HarnessError::Invalid(
            "tx.mode = hardware is for transmitter characterization; \
             equalized runs use tx.mode = ideal"
                .into(),
        ));
    }
    let master = cfg.seed_key()?;
    let template = cfg.template_config()?;
    let n = cfg.run.n_symbols;
    let symbol_rate = cfg.symbol_rate();
    let lambda = cfg.link.wavelength_m();

    let tx = build_tx(cfg, kind, &template)?;
    let mut w = tx.waveform.clone();
    w.power_dbm = cfg.tx.power_dbm;
    let tx_waveform = cfg.run.dump_waveforms.then(|| w.clone());

    let link = cfg.link.to_link(cfg.tx.power_dbm);
    if cfg.link.enabled {
        let mut rng = derive_rng(&master, "link", variant);
        w = propagate_link(&w, &link, &mut rng);
    }
    if let Some(target) = osnr_db {
        if target.is_finite() {
            let mut rng = derive_rng(&master, "osnr", variant);
            w = load_osnr(&w, target, &mut rng)?;
        }
    }
    let osnr_measured = measure_osnr(&w);

    let mut rng_lo = derive_rng(&master, "lo", variant);
    let (w_lo, phase88) =
        lo_impairments(&w, cfg.lo.freq_offset_hz, cfg.lo.linewidth_hz, &mut rng_lo);

    let budget = cfg.rx.budget(w_lo.power_dbm, symbol_rate, lambda);
    let mut w_rx = rx_frontend(&w_lo, &budget);
    w_rx = resample_to(&w_rx, cfg.rx.dsp_sample_rate);
    if cfg.link.enabled {
        w_rx = cdc(&w_rx, &link);
    }
    let (w_fr, freq_est_hz, freq_locked) = freq_recover(&w_rx);

    let eq = cfg.rx.equalizer();
    let refs: Box<dyn ReferenceProvider> = match kind {
        SignalKind::Encrypted => Box::new(DenseRefs {
            points: tx.refs.clone(),
            keys: tx.keys.clone(),
            template,
        }),
        SignalKind::Plain16 => Box::new(Plain16Refs {
            points: tx.refs.clone(),
        }),
    };
    let est = mimo_lms_pll(&w_fr, refs.as_ref(), &eq)?;

    // Frame sync over a post-convergence window: the first symbols carry the
    // adaptation transient and would blur the correlation peak.
    let plen = 512.min(est.len());
    let sync_from = eq
        .preconvergence_symbols
        .min(est.len().saturating_sub(plen + cfg.rx.max_sync_lag + 1));
    let sync_view = crate::rxdsp::SymbolEstimates {
        start: est.start + sync_from,
        pols: est
            .pols
            .iter()
            .map(|p| p[sync_from..].to_vec())
            .collect(),
        phases: vec![Vec::new(); est.pols.len()],
        converged: est.converged,
        preconvergence_mse: est.preconvergence_mse,
        taps: Vec::new(),
    };
    let preamble: Vec<Vec<Complex64>> = tx
        .refs
        .iter()
        .map(|p| p[sync_view.start..sync_view.start + plen].to_vec())
        .collect();
    let sync = synchronize(&sync_view, &preamble, cfg.rx.max_sync_lag)?;

    // Count bit errors over decision symbols: preconvergence, pilots, and
    // anything outside the transmitted stream are excluded.
    let stride = eq.pilot_stride();
    let npol = est.pols.len();
    let mut errors = 0u64;
    let mut bits = 0u64;
    for i in 0..est.len() {
        if i < eq.preconvergence_symbols || i % stride == 0 {
            continue;
        }
        let sym = est.symbol_index(i);
        if sym < sync.offset {
            continue;
        }
        let t = sym - sync.offset;
        if t >= n {
            continue;
        }
        for pol in 0..npol {
            let tx_pol = if sync.swapped { npol - 1 - pol } else { pol };
            let y = est.pols[pol][i];
            let hat = match kind {
                SignalKind::Encrypted => {
                    cipher::decrypt_symbol(y.re, y.im, &tx.keys[tx_pol][t], &template).bits
                }
                SignalKind::Plain16 => {
                    PlainSymbol::from_levels(nearest16_level(y.re), nearest16_level(y.im))
                        .bits
                }
            };
            errors += (hat ^ tx.plain[tx_pol][t].bits).count_ones() as u64;
            bits += 4;
        }
    }
    // Injected Wiener phase once per estimated symbol (mid-symbol sample at
    // the DAC rate).
    let injected_phase: Vec<f64> = (0..est.len())
        .map(|i| {
            let t = est.symbol_index(i).min(n - 1);
            phase88[(SAMPLES_PER_SYMBOL * t + 1).min(phase88.len() - 1)]
        })
        .collect();

    Ok(PipelineOutcome {
        kind,
        osnr_db: osnr_measured,
        ber: RateReport::from_counts(errors, bits.max(1)),
        freq_est_hz,
        freq_locked,
        converged: est.converged,
        preconvergence_mse: est.preconvergence_mse,
        sync,
        start: est.start,
        pll_phases: est.phases.clone(),
        injected_phase,
        est_pols: est.pols,
        taps: est.taps,
        tx_waveform,
    })
}
