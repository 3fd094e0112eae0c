//! Log-likelihood ratios of the bitwise XOR of k colliding BPSK codewords.
//!
//! For a collision of size k the received sample is a Gaussian mixture over
//! the 2^k equiprobable ±1 hypothesis vectors. Hypotheses with an odd count
//! of +1 entries correspond to XOR bit 1, even counts to XOR bit 0. The LLR
//! is the log-ratio of the two mixture likelihoods, computed with a
//! max-subtracted log-sum-exp and clamped to ±50.

use num_complex::Complex64;
use thiserror::Error;

/// Positive LLR means XOR bit 1.
pub type LlrVector = Vec<f64>;

/// Hypothesis enumeration is exponential in k; collisions beyond this
/// size are treated as undecodable.
pub const MAX_COLLISION_SIZE: usize = 8;

/// Clamp magnitude for finite LLRs at high SNR.
pub const LLR_CLAMP: f64 = 50.0;

#[derive(Debug, Error, PartialEq)]
pub enum XorLlrError {
    #[error("collision size 0")]
    EmptyCollision,
    #[error("collision size {0} exceeds the enumeration cap of {MAX_COLLISION_SIZE}")]
    CollisionTooLarge(usize),
    #[error("noise variance must be positive, got {0}")]
    BadNoiseVariance(f64),
    #[error("per-symbol channel count does not match collision size")]
    ChannelMismatch,
    #[error("sample and channel sequences have different lengths")]
    LengthMismatch,
    #[error("equivalent channels required for the EC strategy")]
    MissingEquivalentChannels,
}

/// The 2^k ±1 hypothesis vectors partitioned by parity of the +1 count.
#[derive(Debug, Clone)]
pub struct HypothesisSet {
    pub k: usize,
    pub odd: Vec<Vec<f64>>,
    pub even: Vec<Vec<f64>>,
}

impl HypothesisSet {
    pub fn new(k: usize) -> Result<Self, XorLlrError> {
        if k == 0 {
            return Err(XorLlrError::EmptyCollision);
        }
        if k > MAX_COLLISION_SIZE {
            return Err(XorLlrError::CollisionTooLarge(k));
        }
        let mut odd = Vec::new();
        let mut even = Vec::new();
        for mask in 0u32..(1 << k) {
            let d: Vec<f64> = (0..k)
                .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
                .collect();
            if mask.count_ones() % 2 == 1 {
                odd.push(d);
            } else {
                even.push(d);
            }
        }
        Ok(Self { k, odd, even })
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// LLR of the XOR bit for a single received sample given the k channel
/// coefficients at that instant.
pub fn llr_xor_symbol(
    r: Complex64,
    channels: &[Complex64],
    n0: f64,
    hyp: &HypothesisSet,
) -> Result<f64, XorLlrError> {
    if channels.len() != hyp.k {
        return Err(XorLlrError::ChannelMismatch);
    }
    if n0 <= 0.0 || !n0.is_finite() {
        return Err(XorLlrError::BadNoiseVariance(n0));
    }
    let metric = |d: &[f64]| {
        let mut s = Complex64::new(0.0, 0.0);
        for (di, hi) in d.iter().zip(channels) {
            s += di * hi;
        }
        -(r - s).norm_sqr() / (2.0 * n0)
    };
    let num: Vec<f64> = hyp.odd.iter().map(|d| metric(d)).collect();
    let den: Vec<f64> = hyp.even.iter().map(|d| metric(d)).collect();
    let llr = log_sum_exp(&num) - log_sum_exp(&den);
    Ok(llr.clamp(-LLR_CLAMP, LLR_CLAMP))
}

/// Per-symbol XOR LLRs; `channels[l]` holds the k coefficients at symbol l
/// (they rotate from symbol to symbol under frequency offsets).
pub fn llr_xor(
    samples: &[Complex64],
    channels: &[Vec<Complex64>],
    n0: f64,
) -> Result<LlrVector, XorLlrError> {
    if samples.len() != channels.len() {
        return Err(XorLlrError::LengthMismatch);
    }
    let k = channels.first().map_or(0, |c| c.len());
    let hyp = HypothesisSet::new(k)?;
    samples
        .iter()
        .zip(channels)
        .map(|(&r, h)| llr_xor_symbol(r, h, n0, &hyp))
        .collect()
}

/// Multi-sample combining strategy for the async LLR path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineStrategy {
    /// Average the per-sample LLRs (ML).
    MeanLlr,
    /// Average the samples, then one LLR with the nominal channels (MS/US).
    MeanSample,
    /// Average the samples, use equivalent channel coefficients (EC).
    EquivalentChannel,
}

/// LLRs from k samples per symbol. `sample_sets[l]` holds the samples of
/// symbol l; `channels[l]` the nominal per-user coefficients; for EC,
/// `equivalent_channels[l]` replaces the nominal coefficients.
pub fn llr_multi_sample(
    sample_sets: &[Vec<Complex64>],
    strategy: CombineStrategy,
    channels: &[Vec<Complex64>],
    equivalent_channels: Option<&[Vec<Complex64>]>,
    n0: f64,
) -> Result<LlrVector, XorLlrError> {
    if sample_sets.len() != channels.len() {
        return Err(XorLlrError::LengthMismatch);
    }
    let k = channels.first().map_or(0, |c| c.len());
    let hyp = HypothesisSet::new(k)?;
    match strategy {
        CombineStrategy::MeanLlr => sample_sets
            .iter()
            .zip(channels)
            .map(|(row, h)| {
                let mut acc = 0.0;
                for &r in row {
                    acc += llr_xor_symbol(r, h, n0, &hyp)?;
                }
                Ok((acc / row.len() as f64).clamp(-LLR_CLAMP, LLR_CLAMP))
            })
            .collect(),
        CombineStrategy::MeanSample => sample_sets
            .iter()
            .zip(channels)
            .map(|(row, h)| {
                let mean = row.iter().sum::<Complex64>() / row.len() as f64;
                llr_xor_symbol(mean, h, n0, &hyp)
            })
            .collect(),
        CombineStrategy::EquivalentChannel => {
            let eq = equivalent_channels.ok_or(XorLlrError::MissingEquivalentChannels)?;
            if eq.len() != sample_sets.len() {
                return Err(XorLlrError::LengthMismatch);
            }
            sample_sets
                .iter()
                .zip(eq)
                .map(|(row, h)| {
                    let mean = row.iter().sum::<Complex64>() / row.len() as f64;
                    llr_xor_symbol(mean, h, n0, &hyp)
                })
                .collect()
        }
    }
}
