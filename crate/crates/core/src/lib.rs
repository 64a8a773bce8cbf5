//! Simulation toolkit for a Y-00 stream-cipher coherent optical link.
//!
//! The pipeline runs plaintext 16-QAM symbols through keystream expansion,
//! ultra-dense QAM encryption, a transmitter front-end model, a linear fiber
//! channel with ASE/shot noise, coherent receiver DSP, and amplitude-subtraction
//! decryption. The `analysis` module holds the closed-form and Monte Carlo
//! security metrics; `harness` wires everything into reproducible experiments.

pub mod analysis;
pub mod channel;
pub mod cipher;
pub mod constants;
pub mod dsp;
pub mod harness;
pub mod keystream;
pub mod rxdsp;
pub mod txfront;

pub use channel::{AmplifierConfig, LinkConfig, NoiseBudget, SpanConfig, TapPoint};
pub use cipher::{CipherPoint, PlainSymbol, TemplateConfig};
pub use keystream::{RunningKey, SeedKey, StreamId};
pub use rxdsp::{EqualizerConfig, SymbolEstimates};
pub use txfront::{DacModel, ModulatorConfig, Waveform};
