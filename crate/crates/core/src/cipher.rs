//! Y-00 encryption of 16-QAM plaintext onto an ultra-dense QAM template and
//! key-based amplitude-subtraction decryption.
//!
//! Per quadrature the plaintext dibit p is XORed with the running-key dibit r,
//! then the basis index k places it on the fine grid:
//!
//!   l = k + M * ((p ^ r + k) mod 4),   M = L / 4.
//!
//! For fixed k the four data levels sit M fine steps apart, so the legitimate
//! receiver decides over a quarter-range distance while an eavesdropper faces
//! the fine spacing delta.

use crate::keystream::RunningKey;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CipherError {
    #[error("bits per quadrature must be in [4, 16], got {0}")]
    BadTemplateBits(u32),
}

/// Cipher template geometry: L = 2^n levels per quadrature, M = L/4 bases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemplateConfig {
    n: u32,
    l: u32,
    m: u32,
    delta: f64,
}

impl TemplateConfig {
    pub fn new(bits_per_quadrature: u32) -> Result<Self, CipherError> {
        if !(4..=16).contains(&bits_per_quadrature) {
            return Err(CipherError::BadTemplateBits(bits_per_quadrature));
        }
        let l = 1u32 << bits_per_quadrature;
        let lf = l as f64;
        // Unit average symbol energy over both quadratures for uniform levels.
        let delta = (6.0 / (lf * lf - 1.0)).sqrt();
        Ok(Self {
            n: bits_per_quadrature,
            l,
            m: l / 4,
            delta,
        })
    }

    pub fn bits_per_quadrature(&self) -> u32 {
        self.n
    }

    /// Levels per quadrature, L = 2^n.
    pub fn levels(&self) -> u32 {
        self.l
    }

    /// Number of bases, M = L/4.
    pub fn bases(&self) -> u32 {
        self.m
    }

    /// Fine-level spacing in normalized amplitude units.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Total template size in bits (both quadratures).
    pub fn total_bits(&self) -> u32 {
        2 * self.n
    }
}

/// One 16-QAM plaintext symbol: 4 bits, I dibit in the high pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlainSymbol {
    pub bits: u8,
}

// Reflected Gray code per quadrature: bits 00,01,11,10 -> levels 0,1,2,3.
// The table is its own inverse.
const GRAY: [u8; 4] = [0, 1, 3, 2];

impl PlainSymbol {
    pub fn new(bits: u8) -> Self {
        assert!(bits < 16, "plaintext symbol is 4 bits, got {bits}");
        Self { bits }
    }

    /// Gray-coded (I, Q) levels in {0..3}.
    pub fn levels(&self) -> (u8, u8) {
        (GRAY[(self.bits >> 2) as usize], GRAY[(self.bits & 3) as usize])
    }

    pub fn from_levels(p_i: u8, p_q: u8) -> Self {
        assert!(p_i < 4 && p_q < 4);
        Self {
            bits: (GRAY[p_i as usize] << 2) | GRAY[p_q as usize],
        }
    }
}

/// An encrypted symbol: one fine-level index per quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CipherPoint {
    pub l_i: u32,
    pub l_q: u32,
}

/// Encrypt one quadrature: dibit + XOR dibit + basis index -> level index.
#[inline]
pub fn encrypt_quadrature(p: u8, r: u8, k: u32, template: &TemplateConfig) -> u32 {
    assert!(p < 4, "plaintext dibit out of range");
    assert!(r < 4, "xor dibit out of range");
    assert!(k < template.bases(), "basis index out of range");
    let p_xored = (p ^ r) as u32;
    k + template.bases() * ((p_xored + k) % 4)
}

/// Amplitude of fine level `l` in normalized units, symmetric about zero.
#[inline]
pub fn level_amplitude(l: u32, template: &TemplateConfig) -> f64 {
    assert!(l < template.levels(), "level index out of range");
    template.delta() * (l as f64 - (template.levels() as f64 - 1.0) / 2.0)
}

/// Eavesdropper's decision: nearest fine level, clamped to [0, L).
/// Ties round half-up which means the lower index wins on the negative side;
/// the clamp makes edge decisions one-sided.
#[inline]
pub fn eve_nearest_level(a_hat: f64, template: &TemplateConfig) -> u32 {
    assert!(a_hat.is_finite());
    let lf = template.levels() as f64;
    let idx = (a_hat / template.delta() + (lf - 1.0) / 2.0).round();
    idx.clamp(0.0, lf - 1.0) as u32
}

/// Decrypt one quadrature by amplitude subtraction: pick the closest of the
/// four candidate levels {k + M*m} and undo the cyclic shift and XOR.
#[inline]
pub fn decrypt_quadrature(a_hat: f64, r: u8, k: u32, template: &TemplateConfig) -> u8 {
    assert!(a_hat.is_finite(), "non-finite amplitude estimate");
    assert!(r < 4 && k < template.bases());
    let mut best_m = 0u32;
    let mut best_dist = f64::INFINITY;
    for m in 0..4u32 {
        let c = level_amplitude(k + template.bases() * m, template);
        let d = (a_hat - c).abs();
        // Ties go to the smaller m.
        if d < best_dist {
            best_dist = d;
            best_m = m;
        }
    }
    let p_xored = (best_m + 4 - (k % 4)) % 4;
    (p_xored as u8) ^ r
}

/// Encrypt a full symbol: quadratures are handled independently.
pub fn encrypt_symbol(plain: PlainSymbol, rk: &RunningKey, template: &TemplateConfig) -> CipherPoint {
    let (p_i, p_q) = plain.levels();
    CipherPoint {
        l_i: encrypt_quadrature(p_i, rk.r_i, rk.k_i, template),
        l_q: encrypt_quadrature(p_q, rk.r_q, rk.k_q, template),
    }
}

/// Decrypt from per-quadrature amplitude estimates.
pub fn decrypt_symbol(
    a_i: f64,
    a_q: f64,
    rk: &RunningKey,
    template: &TemplateConfig,
) -> PlainSymbol {
    let p_i = decrypt_quadrature(a_i, rk.r_i, rk.k_i, template);
    let p_q = decrypt_quadrature(a_q, rk.r_q, rk.k_q, template);
    PlainSymbol::from_levels(p_i, p_q)
}

/// Amplitudes of a cipher point.
pub fn point_amplitudes(point: CipherPoint, template: &TemplateConfig) -> (f64, f64) {
    (
        level_amplitude(point.l_i, template),
        level_amplitude(point.l_q, template),
    )
}
