//! GF(2)-linear channel code with soft-input decoding, plus CRC error
//! detection that survives the XOR of collided messages.
//!
//! The default code is a zero-terminated rate-1/2 convolutional code with
//! constraint length 7 and generators 133/171 (octal), decoded by a
//! soft-input Viterbi. Any linear code preserves the protocol property the
//! receiver relies on: the XOR of codewords is the codeword of the XOR of
//! messages.
//!
//! The CRC register must be zero-initialized with no final XOR-out,
//! otherwise the append/check pipeline stops being GF(2)-linear.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FecError {
    #[error("expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid code parameter: {0}")]
    BadParameter(&'static str),
}

/// Convolutional code memory (constraint length 7).
const MEMORY: usize = 6;
const N_STATES: usize = 1 << MEMORY;
/// Generators 133 and 171 octal, constraint length 7.
const GENERATORS: [u32; 2] = [0o133, 0o171];

/// Rate-1/2 convolutional code over a configurable blocklength.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeSpec {
    /// Information bits per codeword.
    pub info_bits: usize,
}

impl Default for CodeSpec {
    fn default() -> Self {
        Self { info_bits: 744 }
    }
}

impl CodeSpec {
    pub fn new(info_bits: usize) -> Result<Self, FecError> {
        if info_bits == 0 {
            return Err(FecError::BadParameter("info_bits must be positive"));
        }
        Ok(Self { info_bits })
    }

    /// Code bits per codeword, termination included.
    pub fn code_bits(&self) -> usize {
        2 * (self.info_bits + MEMORY)
    }

    pub fn rate(&self) -> f64 {
        self.info_bits as f64 / self.code_bits() as f64
    }
}

#[inline]
fn parity(x: u32) -> u8 {
    (x.count_ones() & 1) as u8
}

/// Output bit pair for input `bit` in `state` (state = last 6 input bits,
/// most recent in the high position).
#[inline]
fn branch_output(state: usize, bit: u8) -> (u8, u8) {
    let reg = ((bit as u32) << MEMORY) | state as u32;
    (parity(reg & GENERATORS[0]), parity(reg & GENERATORS[1]))
}

#[inline]
fn next_state(state: usize, bit: u8) -> usize {
    (state >> 1) | ((bit as usize) << (MEMORY - 1))
}

/// Zero-terminated convolutional encoding; output length is
/// `spec.code_bits()`.
pub fn encode(u: &[u8], spec: &CodeSpec) -> Result<Vec<u8>, FecError> {
    if u.len() != spec.info_bits {
        return Err(FecError::LengthMismatch {
            expected: spec.info_bits,
            got: u.len(),
        });
    }
    let mut out = Vec::with_capacity(spec.code_bits());
    let mut state = 0usize;
    for &b in u.iter().chain(std::iter::repeat(&0u8).take(MEMORY)) {
        let (c0, c1) = branch_output(state, b & 1);
        out.push(c0);
        out.push(c1);
        state = next_state(state, b & 1);
    }
    Ok(out)
}

/// Soft-input Viterbi decoding. LLR sign convention: positive means code
/// bit 1. Always returns a candidate; validity is judged by the CRC.
pub fn decode_soft(llrs: &[f64], spec: &CodeSpec) -> Result<(Vec<u8>, f64), FecError> {
    if llrs.len() != spec.code_bits() {
        return Err(FecError::LengthMismatch {
            expected: spec.code_bits(),
            got: llrs.len(),
        });
    }
    let steps = spec.info_bits + MEMORY;
    let mut metric = vec![f64::NEG_INFINITY; N_STATES];
    metric[0] = 0.0;
    // decisions[step] holds, per destination state, the low bit of the
    // winning predecessor (the input bit is the high bit of the
    // destination state itself)
    let mut decisions = vec![0u64; steps];
    let mut next = vec![f64::NEG_INFINITY; N_STATES];

    for step in 0..steps {
        let (l0, l1) = (llrs[2 * step], llrs[2 * step + 1]);
        next.iter_mut().for_each(|m| *m = f64::NEG_INFINITY);
        let termination = step >= spec.info_bits;
        for state in 0..N_STATES {
            let m = metric[state];
            if m == f64::NEG_INFINITY {
                continue;
            }
            let bits: &[u8] = if termination { &[0] } else { &[0, 1] };
            for &bit in bits {
                let (c0, c1) = branch_output(state, bit);
                let bm = c0 as f64 * l0 + c1 as f64 * l1;
                let ns = next_state(state, bit);
                let cand = m + bm;
                if cand > next[ns] {
                    next[ns] = cand;
                    if state & 1 == 1 {
                        decisions[step] |= 1 << ns;
                    } else {
                        decisions[step] &= !(1u64 << ns);
                    }
                }
            }
        }
        std::mem::swap(&mut metric, &mut next);
    }

    // terminated trellis ends in state 0; trace back
    let mut state = 0usize;
    let mut bits = vec![0u8; steps];
    for step in (0..steps).rev() {
        bits[step] = (state >> (MEMORY - 1)) as u8;
        let prev_low = ((decisions[step] >> state) & 1) as usize;
        state = ((state << 1) & (N_STATES - 1)) | prev_low;
    }
    let u: Vec<u8> = bits[..spec.info_bits].to_vec();
    let best_metric = metric[0];
    Ok((u, best_metric))
}

/// CRC parameters; default CRC-16/XMODEM polynomial 0x1021, zero init,
/// zero XOR-out (both required for linearity).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrcSpec {
    pub polynomial: u32,
    pub width: usize,
}

impl Default for CrcSpec {
    fn default() -> Self {
        Self {
            polynomial: 0x1021,
            width: 16,
        }
    }
}

/// Remainder of `u(x) * x^width` modulo the CRC polynomial, MSB-first.
fn crc_remainder(bits: &[u8], spec: &CrcSpec) -> u32 {
    let top = 1u32 << (spec.width - 1);
    let mask = (1u64 << spec.width) as u32 - 1;
    let mut reg = 0u32;
    for &b in bits {
        let fb = ((reg & top) != 0) as u8 ^ (b & 1);
        reg = (reg << 1) & mask;
        if fb == 1 {
            reg ^= spec.polynomial & mask;
        }
    }
    reg
}

/// Append the CRC field (MSB-first) so that `crc_check` passes.
pub fn crc_append(u: &[u8], spec: &CrcSpec) -> Vec<u8> {
    let rem = crc_remainder(u, spec);
    let mut out = u.to_vec();
    for i in (0..spec.width).rev() {
        out.push(((rem >> i) & 1) as u8);
    }
    out
}

/// True when the trailing CRC field matches the message.
pub fn crc_check(v: &[u8], spec: &CrcSpec) -> bool {
    if v.len() < spec.width {
        return false;
    }
    crc_remainder(v, spec) == 0
}

/// Noiseless LLRs for a codeword (positive for bit 1).
pub fn ideal_llrs(codeword: &[u8], magnitude: f64) -> Vec<f64> {
    codeword
        .iter()
        .map(|&b| if b == 1 { magnitude } else { -magnitude })
        .collect()
}

pub fn xor_bits(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(rng: &mut impl Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.gen_range(0..2u8)).collect()
    }

    #[test]
    fn encode_zero_is_zero() {
        let spec = CodeSpec::new(40).unwrap();
        let cw = encode(&vec![0; 40], &spec).unwrap();
        assert_eq!(cw, vec![0; spec.code_bits()]);
    }

    #[test]
    fn encode_is_linear() {
        let spec = CodeSpec::new(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let u = random_bits(&mut rng, 64);
            let v = random_bits(&mut rng, 64);
            let cu = encode(&u, &spec).unwrap();
            let cv = encode(&v, &spec).unwrap();
            let cuv = encode(&xor_bits(&u, &v), &spec).unwrap();
            assert_eq!(cuv, xor_bits(&cu, &cv));
        }
    }

    #[test]
    fn noiseless_roundtrip() {
        let spec = CodeSpec::new(120).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let u = random_bits(&mut rng, 120);
            let cw = encode(&u, &spec).unwrap();
            let (decoded, _) = decode_soft(&ideal_llrs(&cw, 10.0), &spec).unwrap();
            assert_eq!(decoded, u);
        }
    }

    #[test]
    fn corrects_sparse_sign_flips() {
        let spec = CodeSpec::new(200).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let u = random_bits(&mut rng, 200);
            let cw = encode(&u, &spec).unwrap();
            let mut llrs = ideal_llrs(&cw, 4.0);
            // flip well-separated positions, below the free-distance bound
            for j in 0..4 {
                let pos = 13 + j * 97 + trial;
                llrs[pos] = -llrs[pos];
            }
            let (decoded, _) = decode_soft(&llrs, &spec).unwrap();
            assert_eq!(decoded, u, "trial {trial}");
        }
    }

    #[test]
    fn erasure_input_returns_candidate() {
        let spec = CodeSpec::new(40).unwrap();
        let (decoded, _) = decode_soft(&vec![0.0; spec.code_bits()], &spec).unwrap();
        assert_eq!(decoded.len(), 40);
        // all-zero LLRs carry no information; CRC judges validity
        let crc = CrcSpec::default();
        let _ = crc_check(&decoded, &crc);
    }

    #[test]
    fn strong_zero_llrs_decode_to_zero() {
        let spec = CodeSpec::new(60).unwrap();
        let (decoded, _) = decode_soft(&vec![-20.0; spec.code_bits()], &spec).unwrap();
        assert_eq!(decoded, vec![0; 60]);
    }

    #[test]
    fn length_mismatch_rejected() {
        let spec = CodeSpec::new(40).unwrap();
        assert!(matches!(
            encode(&vec![0; 39], &spec),
            Err(FecError::LengthMismatch { .. })
        ));
        assert!(matches!(
            decode_soft(&vec![0.0; 7], &spec),
            Err(FecError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn crc_roundtrip_and_single_flip() {
        let crc = CrcSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let u = random_bits(&mut rng, 90);
            let v = crc_append(&u, &crc);
            assert!(crc_check(&v, &crc));
            let mut corrupted = v.clone();
            let pos = rng.gen_range(0..v.len());
            corrupted[pos] ^= 1;
            assert!(!crc_check(&corrupted, &crc));
        }
    }

    #[test]
    fn crc_xor_linearity() {
        let crc = CrcSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let u1 = random_bits(&mut rng, 70);
            let u2 = random_bits(&mut rng, 70);
            let v = xor_bits(&crc_append(&u1, &crc), &crc_append(&u2, &crc));
            assert!(crc_check(&v, &crc));
        }
    }

    proptest! {
        #[test]
        fn crc_linear_property(u1 in prop::collection::vec(0u8..2, 32),
                               u2 in prop::collection::vec(0u8..2, 32)) {
            let crc = CrcSpec::default();
            prop_assert!(crc_check(&crc_append(&u1, &crc), &crc));
            let v = xor_bits(&crc_append(&u1, &crc), &crc_append(&u2, &crc));
            prop_assert!(crc_check(&v, &crc));
        }
    }
}
