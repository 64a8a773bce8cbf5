use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use y00sim_core::harness::{
    list_presets, preset_config, run_preset, ExperimentConfig, Preset,
};

#[derive(Parser)]
#[command(name = "y00sim", version, about = "Y-00 stream cipher link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in preset and write its CSV results and manifest.
    Run {
        /// Preset name; see `list-presets`.
        preset: String,
        /// Override a config key, e.g. --set tx.power_dbm=-10 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Master seed as 64 hex characters.
        #[arg(long, value_name = "HEX")]
        seed: Option<String>,
        /// Output directory (default results/<preset>).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Monte Carlo trials per sweep point.
        #[arg(long, value_name = "N")]
        trials: Option<u64>,
        /// Worker threads (0 = all cores).
        #[arg(long, value_name = "N")]
        parallel: Option<usize>,
    },
    /// Parse and validate a config file without running anything.
    Validate {
        /// Path to a TOML experiment config.
        config: PathBuf,
    },
    /// List the built-in presets.
    ListPresets,
}

fn parse_overrides(set: &[String]) -> Result<Vec<(String, String)>, String> {
    set.iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| format!("--set expects KEY=VALUE, got `{kv}`"))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run {
            preset,
            set,
            seed,
            out,
            trials,
            parallel,
        } => {
            let preset = Preset::from_name(&preset).map_err(|e| e.to_string())?;
            let mut cfg = preset_config(preset);
            if let Some(seed) = seed {
                cfg.run.seed = seed;
            }
            if let Some(trials) = trials {
                cfg.run.trials = trials;
            }
            if let Some(parallel) = parallel {
                cfg.run.parallel = parallel;
            }
            let overrides = parse_overrides(&set)?;
            let cfg = cfg.with_overrides(&overrides).map_err(|e| e.to_string())?;
            cfg.validate().map_err(|e| e.to_string())?;
            if cfg.run.parallel > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(cfg.run.parallel)
                    .build_global()
                    .map_err(|e| e.to_string())?;
            }
            let out_dir = out.unwrap_or_else(|| PathBuf::from("results").join(preset.name()));
            let files = run_preset(preset, &cfg, &out_dir).map_err(|e| e.to_string())?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::from_file(&config).map_err(|e| e.to_string())?;
            cfg.validate().map_err(|e| e.to_string())?;
            println!("ok: {}", config.display());
            Ok(())
        }
        Command::ListPresets => {
            for name in list_presets() {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
