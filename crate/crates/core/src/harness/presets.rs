//! Built-in experiment presets and their CSV emission.

use super::config::{ExperimentConfig, HarnessError};
use super::io::{dump_taps, dump_waveform, emit_csv, fmt_float, write_manifest, CsvTable};
use super::pipeline::{run_pipeline, PipelineOutcome, SignalKind};
use super::derive_u64;
use crate::analysis::{eve_montecarlo, eve_ser_theory, SecurityBudget};
use crate::channel::TapPoint;
use crate::TemplateConfig;
use rayon::prelude::*;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Closed-form eavesdropper SER vs template width at two powers.
    Fig1b,
    /// Back-to-back BER vs loaded OSNR, plain vs encrypted.
    Fig5B2b,
    /// Full-link transmission run with ASE, plain vs encrypted.
    Fig5Tx,
    /// Monte Carlo eavesdropper SER/BER vs template size at both taps.
    Fig6,
}

pub const PRESET_NAMES: [&str; 4] = ["fig1b", "fig5_b2b", "fig5_tx", "fig6"];

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1b => "fig1b",
            Preset::Fig5B2b => "fig5_b2b",
            Preset::Fig5Tx => "fig5_tx",
            Preset::Fig6 => "fig6",
        }
    }

    pub fn from_name(s: &str) -> Result<Self, HarnessError> {
        match s {
            "fig1b" => Ok(Preset::Fig1b),
            "fig5_b2b" => Ok(Preset::Fig5B2b),
            "fig5_tx" => Ok(Preset::Fig5Tx),
            "fig6" => Ok(Preset::Fig6),
            other => Err(HarnessError::UnknownPreset(other.into())),
        }
    }
}

pub fn list_presets() -> &'static [&'static str] {
    &PRESET_NAMES
}

/// The default configuration for a preset; callers layer overrides on top.
pub fn preset_config(preset: Preset) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.run.label = preset.name().into();
    match preset {
        Preset::Fig1b => {
            cfg.sweep.powers_dbm = vec![-10.0, -2.0];
            cfg.sweep.template_bits = (4..=16).collect();
        }
        Preset::Fig5B2b => {
            cfg.sweep.osnr_db = (15..=26).map(f64::from).collect();
        }
        Preset::Fig5Tx => {
            cfg.link.enabled = true;
            cfg.sweep.osnr_db = vec![18.0, 20.0, 22.0, 24.0, 26.0, 28.0];
        }
        Preset::Fig6 => {
            cfg.sweep.template_bits = (4..=16).collect();
        }
    }
    cfg
}

/// Security budget seen by the eavesdropper at a tap point: tap A carries
/// the transmitter output power; tap B carries the launch power plus the
/// boost amplifier's ASE as extra quadrature variance.
pub fn tap_budget(cfg: &ExperimentConfig, tap: TapPoint, levels: u32) -> SecurityBudget {
    let link = cfg.link.to_link(cfg.tx.power_dbm);
    let (power_dbm, extra) = match tap {
        TapPoint::A => (cfg.tx.power_dbm, cfg.rx.extra_noise_var),
        TapPoint::B => (
            link.launch_power_dbm,
            cfg.rx.extra_noise_var + link.boost_amp().ase_photon_variance(),
        ),
    };
    SecurityBudget {
        power_dbm,
        symbol_rate: cfg.symbol_rate(),
        wavelength_m: cfg.link.wavelength_m(),
        levels,
        extra_noise_var: extra,
    }
}

fn pipeline_columns() -> CsvTable {
    CsvTable::new(&[
        "signal",
        "osnr_target_db",
        "osnr_measured_db",
        "ber",
        "bit_errors",
        "bits",
        "ci95",
        "converged",
        "freq_locked",
        "freq_est_hz",
    ])
}

fn pipeline_row(target: Option<f64>, out: &PipelineOutcome) -> Vec<String> {
    vec![
        out.kind.name().into(),
        target.map_or_else(|| "none".into(), fmt_float),
        fmt_float(out.osnr_db),
        fmt_float(out.ber.value),
        out.ber.errors.to_string(),
        out.ber.trials.to_string(),
        fmt_float(out.ber.ci95),
        out.converged.to_string(),
        out.freq_locked.to_string(),
        fmt_float(out.freq_est_hz),
    ]
}

fn run_ber_sweep(
    cfg: &ExperimentConfig,
    targets: &[Option<f64>],
    out_dir: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<CsvTable, HarnessError> {
    let points: Vec<(usize, SignalKind, Option<f64>)> = [SignalKind::Plain16, SignalKind::Encrypted]
        .iter()
        .flat_map(|&kind| targets.iter().map(move |&t| (kind, t)))
        .enumerate()
        .map(|(i, (kind, t))| (i, kind, t))
        .collect();
    let results: Vec<Result<PipelineOutcome, HarnessError>> = points
        .par_iter()
        .map(|&(i, kind, target)| run_pipeline(cfg, kind, target, i as u64))
        .collect();
    let mut table = pipeline_columns();
    for (&(i, kind, target), result) in points.iter().zip(results) {
        let out = result?;
        table.push(pipeline_row(target, &out));
        if cfg.run.dump_taps {
            let path = out_dir.join(format!("taps_{}_{i}.csv", kind.name()));
            dump_taps(&out.taps, &path)?;
            written.push(path);
        }
        if let Some(w) = &out.tx_waveform {
            let path = out_dir.join(format!("tx_{}_{i}.bin", kind.name()));
            dump_waveform(w, &path)?;
            written.push(path);
        }
    }
    Ok(table)
}

/// Run a preset to completion: validates, computes, and writes the result
/// CSV plus a manifest with the fully resolved configuration and seed.
/// Returns the written file paths, CSV first.
pub fn run_preset(
    preset: Preset,
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let master = cfg.seed_key()?;
    let mut written = Vec::new();

    let table = match preset {
        Preset::Fig1b => {
            let mut table = CsvTable::new(&[
                "power_dbm",
                "bits_per_quadrature",
                "levels_per_quadrature",
                "total_template_bits",
                "ser",
            ]);
            for &power in &cfg.sweep.powers_dbm {
                for &bits in &cfg.sweep.template_bits {
                    let budget = SecurityBudget {
                        power_dbm: power,
                        symbol_rate: cfg.symbol_rate(),
                        wavelength_m: cfg.link.wavelength_m(),
                        levels: 1u32 << bits,
                        extra_noise_var: cfg.rx.extra_noise_var,
                    };
                    table.push(vec![
                        fmt_float(power),
                        bits.to_string(),
                        (1u64 << bits).to_string(),
                        (2 * bits).to_string(),
                        fmt_float(eve_ser_theory(&budget)),
                    ]);
                }
            }
            table
        }
        Preset::Fig5B2b => {
            let targets: Vec<Option<f64>> = cfg.sweep.osnr_db.iter().map(|&o| Some(o)).collect();
            run_ber_sweep(cfg, &targets, out_dir, &mut written)?
        }
        Preset::Fig5Tx => {
            // The unloaded point reports the link's own OSNR; further points
            // load additional noise down to each sweep target.
            let mut targets: Vec<Option<f64>> = vec![None];
            targets.extend(cfg.sweep.osnr_db.iter().map(|&o| Some(o)));
            run_ber_sweep(cfg, &targets, out_dir, &mut written)?
        }
        Preset::Fig6 => {
            let mut table = CsvTable::new(&[
                "tap",
                "power_dbm",
                "bits_per_quadrature",
                "total_template_bits",
                "ser",
                "ser_ci95",
                "ber",
                "ber_ci95",
                "trials",
            ]);
            let mut index = 0u64;
            for tap in [TapPoint::A, TapPoint::B] {
                for &bits in &cfg.sweep.template_bits {
                    let template = TemplateConfig::new(bits)?;
                    let budget = tap_budget(cfg, tap, template.levels());
                    let seed = derive_u64(&master, "fig6", index);
                    let (ser, ber) =
                        eve_montecarlo(&budget, &template, cfg.run.trials, seed)?;
                    table.push(vec![
                        format!("{tap:?}"),
                        fmt_float(budget.power_dbm),
                        bits.to_string(),
                        (2 * bits).to_string(),
                        fmt_float(ser.value),
                        fmt_float(ser.ci95),
                        fmt_float(ber.value),
                        fmt_float(ber.ci95),
                        ser.trials.to_string(),
                    ]);
                    index += 1;
                }
            }
            table
        }
    };

    let csv_path = out_dir.join(format!("{}.csv", preset.name()));
    emit_csv(&table, &csv_path)?;
    let manifest_path = out_dir.join("manifest.toml");
    write_manifest(cfg, preset.name(), &manifest_path)?;
    let mut files = vec![csv_path, manifest_path];
    files.append(&mut written);
    Ok(files)
}
