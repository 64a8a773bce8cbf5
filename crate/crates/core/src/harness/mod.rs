//! Experiment orchestration: configuration, deterministic seeding, figure
//! presets, the end-to-end transmission pipeline, and result emission.

mod config;
mod io;
mod pipeline;
mod presets;

pub use config::{
    set_config_path, ExperimentConfig, HarnessError, LinkBlock, LoBlock, PdmBlock, PdmMode,
    RunBlock, RxBlock, SubsetReplayConfig, TemplateBlock, TxBlock,
};
pub use io::{dump_taps, dump_waveform, emit_csv, read_waveform, write_manifest, CsvTable};
pub use pipeline::{run_pipeline, subset_replay, PipelineOutcome, SignalKind};
pub use presets::{list_presets, preset_config, run_preset, tap_budget, Preset, PRESET_NAMES};

use crate::keystream::SeedKey;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Position-based seed derivation: sha256(master || label || index).
/// Scheduling-independent, so parallel runs reproduce exactly.
pub fn derive_seed(master: &SeedKey, label: &str, index: u64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(master.as_bytes());
    hasher.update(label.as_bytes());
    hasher.update(index.to_le_bytes());
    hasher.finalize().into()
}

pub fn derive_rng(master: &SeedKey, label: &str, index: u64) -> ChaCha12Rng {
    use rand::SeedableRng;
    ChaCha12Rng::from_seed(derive_seed(master, label, index))
}

pub fn derive_u64(master: &SeedKey, label: &str, index: u64) -> u64 {
    let bytes = derive_seed(master, label, index);
    u64::from_le_bytes(bytes[..8].try_into().unwrap())
}
