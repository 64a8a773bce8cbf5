//! Seekable keystream generation for the two cipher streams.
//!
//! A single 256-bit seed drives two independent streams: one supplies the
//! 2-bit XOR overlay per quadrature, the other the basis indices. Both are
//! ChaCha20 (RFC 8439) keystreams with key = seed, block counter starting at
//! zero, and a 96-bit nonce of (0, 0, stream tag) so the streams are distinct.
//! Bits are taken MSB-first from successive keystream bytes.

use crate::cipher::TemplateConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KeystreamError {
    #[error("seed must be 64 hex characters, got {0}")]
    BadSeedHex(usize),
    #[error("invalid hex digit in seed")]
    BadHexDigit,
    #[error("polarization count must be 1 or 2, got {0}")]
    BadPolCount(usize),
}

/// 256-bit seed key. All values are legal.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SeedKey {
    bytes: [u8; 32],
}

impl SeedKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self { bytes }
    }

    /// Parse the CLI/config representation: exactly 64 hex characters.
    pub fn from_hex(s: &str) -> Result<Self, KeystreamError> {
        let s = s.trim();
        if s.len() != 64 {
            return Err(KeystreamError::BadSeedHex(s.len()));
        }
        let mut bytes = [0u8; 32];
        for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
            let hi = (chunk[0] as char)
                .to_digit(16)
                .ok_or(KeystreamError::BadHexDigit)?;
            let lo = (chunk[1] as char)
                .to_digit(16)
                .ok_or(KeystreamError::BadHexDigit)?;
            bytes[i] = ((hi << 4) | lo) as u8;
        }
        Ok(Self { bytes })
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.bytes
    }

    pub fn to_hex(&self) -> String {
        self.bytes.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl std::fmt::Debug for SeedKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SeedKey({})", self.to_hex())
    }
}

/// The two keystreams expanded from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamId {
    /// Feeds the XOR overlay on the plaintext dibits.
    XorStream,
    /// Feeds the basis indices for amplitude-level randomization.
    BasisStream,
}

impl StreamId {
    fn nonce_tag(self) -> u32 {
        match self {
            StreamId::XorStream => 0,
            StreamId::BasisStream => 1,
        }
    }
}

/// Per-symbol, per-polarization key material.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunningKey {
    /// XOR dibit for the in-phase quadrature.
    pub r_i: u8,
    /// XOR dibit for the quadrature component.
    pub r_q: u8,
    /// Basis index for I, in [0, M).
    pub k_i: u32,
    /// Basis index for Q, in [0, M).
    pub k_q: u32,
}

// --- ChaCha20 block function (RFC 8439) ---

#[inline(always)]
fn quarter_round(state: &mut [u32; 16], a: usize, b: usize, c: usize, d: usize) {
    state[a] = state[a].wrapping_add(state[b]);
    state[d] = (state[d] ^ state[a]).rotate_left(16);
    state[c] = state[c].wrapping_add(state[d]);
    state[b] = (state[b] ^ state[c]).rotate_left(12);
    state[a] = state[a].wrapping_add(state[b]);
    state[d] = (state[d] ^ state[a]).rotate_left(8);
    state[c] = state[c].wrapping_add(state[d]);
    state[b] = (state[b] ^ state[c]).rotate_left(7);
}

/// One 64-byte ChaCha20 keystream block.
pub fn chacha20_block(key: &[u8; 32], counter: u32, nonce: &[u8; 12]) -> [u8; 64] {
    let mut state = [0u32; 16];
    state[0] = 0x6170_7865;
    state[1] = 0x3320_646e;
    state[2] = 0x7962_2d32;
    state[3] = 0x6b20_6574;
    for i in 0..8 {
        state[4 + i] = u32::from_le_bytes(key[4 * i..4 * i + 4].try_into().unwrap());
    }
    state[12] = counter;
    for i in 0..3 {
        state[13 + i] = u32::from_le_bytes(nonce[4 * i..4 * i + 4].try_into().unwrap());
    }
    let mut working = state;
    for _ in 0..10 {
        quarter_round(&mut working, 0, 4, 8, 12);
        quarter_round(&mut working, 1, 5, 9, 13);
        quarter_round(&mut working, 2, 6, 10, 14);
        quarter_round(&mut working, 3, 7, 11, 15);
        quarter_round(&mut working, 0, 5, 10, 15);
        quarter_round(&mut working, 1, 6, 11, 12);
        quarter_round(&mut working, 2, 7, 8, 13);
        quarter_round(&mut working, 3, 4, 9, 14);
    }
    let mut out = [0u8; 64];
    for i in 0..16 {
        let word = working[i].wrapping_add(state[i]);
        out[4 * i..4 * i + 4].copy_from_slice(&word.to_le_bytes());
    }
    out
}

fn stream_nonce(stream: StreamId) -> [u8; 12] {
    let mut nonce = [0u8; 12];
    nonce[8..12].copy_from_slice(&stream.nonce_tag().to_le_bytes());
    nonce
}

/// Fill `out` with keystream bytes starting at an arbitrary byte offset.
pub fn keystream_bytes(seed: &SeedKey, stream: StreamId, byte_offset: u64, out: &mut [u8]) {
    let nonce = stream_nonce(stream);
    let mut written = 0usize;
    let mut pos = byte_offset;
    while written < out.len() {
        let block_idx = pos / 64;
        let in_block = (pos % 64) as usize;
        let block = chacha20_block(seed.as_bytes(), block_idx as u32, &nonce);
        let take = (64 - in_block).min(out.len() - written);
        out[written..written + take].copy_from_slice(&block[in_block..in_block + take]);
        written += take;
        pos += take as u64;
    }
}

/// Random-access bit extraction, MSB-first within each keystream byte.
/// Pure function of (seed, stream, offset); any offset yields the same bits
/// as sequential generation.
pub fn keystream_bits(seed: &SeedKey, stream: StreamId, offset_bits: u64, count: usize) -> Vec<u8> {
    let mut cursor = BitCursor::new(*seed, stream);
    cursor.seek(offset_bits);
    (0..count).map(|_| cursor.read_bits(1) as u8).collect()
}

/// Sequential bit reader over one keystream. Single-owner.
pub struct BitCursor {
    seed: SeedKey,
    nonce: [u8; 12],
    bit_pos: u64,
    block: [u8; 64],
    block_idx: u64,
}

impl BitCursor {
    pub fn new(seed: SeedKey, stream: StreamId) -> Self {
        let nonce = stream_nonce(stream);
        let block = chacha20_block(seed.as_bytes(), 0, &nonce);
        Self {
            seed,
            nonce,
            bit_pos: 0,
            block,
            block_idx: 0,
        }
    }

    pub fn seek(&mut self, bit_pos: u64) {
        self.bit_pos = bit_pos;
        let block_idx = bit_pos / 8 / 64;
        if block_idx != self.block_idx {
            self.block = chacha20_block(self.seed.as_bytes(), block_idx as u32, &self.nonce);
            self.block_idx = block_idx;
        }
    }

    /// Current position in bits consumed.
    pub fn position(&self) -> u64 {
        self.bit_pos
    }

    /// Read up to 32 bits as a big-endian word.
    pub fn read_bits(&mut self, n: u32) -> u32 {
        debug_assert!(n <= 32);
        let mut word = 0u32;
        for _ in 0..n {
            let byte_idx = self.bit_pos / 8;
            let block_idx = byte_idx / 64;
            if block_idx != self.block_idx {
                self.block = chacha20_block(self.seed.as_bytes(), block_idx as u32, &self.nonce);
                self.block_idx = block_idx;
            }
            let byte = self.block[(byte_idx % 64) as usize];
            let bit = (byte >> (7 - (self.bit_pos % 8))) & 1;
            word = (word << 1) | bit as u32;
            self.bit_pos += 1;
        }
        word
    }
}

/// Expand running keys for `n_symbols` symbols on `pol_count` polarizations.
///
/// Layout is pol-major within each symbol: for symbol t the XOR stream yields
/// x-pol (r_i, r_q) then y-pol (r_i, r_q); the basis stream likewise yields
/// (k_i, k_q) as consecutive (n-2)-bit big-endian words. Consumes exactly
/// pol_count * n_symbols * 4 XOR bits and pol_count * n_symbols * 2(n-2)
/// basis bits.
pub fn running_keys(
    seed: &SeedKey,
    template: &TemplateConfig,
    pol_count: usize,
    n_symbols: usize,
) -> Result<Vec<Vec<RunningKey>>, KeystreamError> {
    if pol_count == 0 || pol_count > 2 {
        return Err(KeystreamError::BadPolCount(pol_count));
    }
    let basis_bits = template.bits_per_quadrature() - 2;
    let mut xor = BitCursor::new(*seed, StreamId::XorStream);
    let mut basis = BitCursor::new(*seed, StreamId::BasisStream);
    let mut out = vec![Vec::with_capacity(n_symbols); pol_count];
    for _ in 0..n_symbols {
        for keys in out.iter_mut() {
            let r_i = xor.read_bits(2) as u8;
            let r_q = xor.read_bits(2) as u8;
            let k_i = basis.read_bits(basis_bits);
            let k_q = basis.read_bits(basis_bits);
            keys.push(RunningKey { r_i, r_q, k_i, k_q });
        }
    }
    debug_assert_eq!(xor.position(), (pol_count * n_symbols * 4) as u64);
    debug_assert_eq!(
        basis.position(),
        (pol_count * n_symbols * 2 * basis_bits as usize) as u64
    );
    Ok(out)
}
