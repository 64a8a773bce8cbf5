//! Result emission: deterministic CSV tables, run manifests, and binary
//! waveform / equalizer-tap dumps. All numeric formatting is fixed so
//! identical runs produce byte-identical files.

use super::config::{ExperimentConfig, HarnessError};
use crate::txfront::Waveform;
use num_complex::Complex64;
use std::io::{BufWriter, Read as _, Write as _};
use std::path::Path;

/// Fixed float formatting for CSV bodies: round-trippable scientific
/// notation, independent of locale and value magnitude.
pub fn fmt_float(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// An in-memory CSV document; rows are emitted in insertion order.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            header: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn to_string_body(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Write a CSV table: header row plus data rows, deterministic bytes.
pub fn emit_csv(table: &CsvTable, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, table.to_string_body()).map_err(|e| HarnessError::io(path, e))
}

/// Run manifest: the full resolved configuration (seed included) plus the
/// preset name, as a TOML document next to the result CSVs.
pub fn write_manifest(
    cfg: &ExperimentConfig,
    preset: &str,
    path: &Path,
) -> Result<(), HarnessError> {
    let body = format!("preset = {preset:?}\n\n{}", cfg.to_toml_string()?);
    std::fs::write(path, body).map_err(|e| HarnessError::io(path, e))
}

const WAVEFORM_MAGIC: &[u8; 4] = b"Y00W";
const WAVEFORM_VERSION: u32 = 1;

/// Binary waveform dump. Layout (all little-endian):
/// magic "Y00W", version u32, pol count u32, samples per pol u64,
/// sample_rate f64, symbol_rate f64, power_dbm f64, noise_psd_rel f64,
/// then per polarization the samples as interleaved (re f64, im f64).
pub fn dump_waveform(w: &Waveform, path: &Path) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| HarnessError::io(path, e);
    out.write_all(WAVEFORM_MAGIC).map_err(io)?;
    out.write_all(&WAVEFORM_VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&(w.pol_count() as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&(w.len() as u64).to_le_bytes()).map_err(io)?;
    for v in [w.sample_rate, w.symbol_rate, w.power_dbm, w.noise_psd_rel] {
        out.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for pol in &w.pols {
        for s in pol {
            out.write_all(&s.re.to_le_bytes()).map_err(io)?;
            out.write_all(&s.im.to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// Read back a waveform dump (inverse of `dump_waveform`).
pub fn read_waveform(path: &Path) -> Result<Waveform, HarnessError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| HarnessError::io(path, e))?;
    let bad = |msg: &str| HarnessError::Invalid(format!("{}: {msg}", path.display()));
    if bytes.len() < 4 + 4 + 4 + 8 + 4 * 8 || &bytes[..4] != WAVEFORM_MAGIC {
        return Err(bad("not a waveform dump"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(4) != WAVEFORM_VERSION {
        return Err(bad("unsupported version"));
    }
    let npol = u32_at(8) as usize;
    let n = u64_at(12) as usize;
    let header = 20 + 4 * 8;
    if bytes.len() != header + npol * n * 16 {
        return Err(bad("truncated sample payload"));
    }
    let mut pols = Vec::with_capacity(npol);
    let mut off = header;
    for _ in 0..npol {
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            samples.push(Complex64::new(f64_at(off), f64_at(off + 8)));
            off += 16;
        }
        pols.push(samples);
    }
    Ok(Waveform {
        pols,
        sample_rate: f64_at(20),
        symbol_rate: f64_at(28),
        power_dbm: f64_at(36),
        noise_psd_rel: f64_at(44),
    })
}

/// Diagnostics dump of converged butterfly taps as CSV with columns
/// out_pol,in_pol,tap,re,im.
pub fn dump_taps(taps: &[Vec<Vec<Complex64>>], path: &Path) -> Result<(), HarnessError> {
    let mut table = CsvTable::new(&["out_pol", "in_pol", "tap", "re", "im"]);
    for (op, row) in taps.iter().enumerate() {
        for (ip, w) in row.iter().enumerate() {
            for (k, c) in w.iter().enumerate() {
                table.push(vec![
                    op.to_string(),
                    ip.to_string(),
                    k.to_string(),
                    fmt_float(c.re),
                    fmt_float(c.im),
                ]);
            }
        }
    }
    emit_csv(&table, path)
}
