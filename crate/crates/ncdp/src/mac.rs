//! Frame-level protocol simulation.
//!
//! Implements the network-coded diversity protocol (each active terminal
//! transmits GF(2^n)-precoded copies of its message across the frame; the
//! receiver collects per-slot XOR equations and solves the linear system),
//! plus CRDSA (replica transmission with iterative interference
//! cancellation) and plain slotted ALOHA benchmarks. Both a no-feedback
//! setup and an ARQ setup with a bounded retransmission backlog are
//! supported, and the physical layer can be either idealized (every
//! occupied slot yields an error-free equation) or fully simulated
//! (waveform synthesis, XOR LLR computation, soft decoding, CRC check per
//! slot).

use crate::estimation::{em_estimate, EmConfig, PreambleBank};
use crate::fec::{crc_append, crc_check, decode_soft, encode, CodeSpec, CrcSpec};
use crate::galois::{solve_or_reduce, Field, FieldMatrix, FieldSpec, GaloisError, SolveOutcome};
use crate::waveform::{
    matched_filter_and_sample, raised_cosine, synthesize_collision, Burst, ChannelParams,
    PulseShape, SamplingStrategy, WaveformError, PREAMBLE_LEN, PREAMBLE_WORDS,
};
use crate::xorllr::{llr_multi_sample, CombineStrategy, XorLlrError, MAX_COLLISION_SIZE};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use thiserror::Error;

/// Name of the seed-to-coefficient generator. Transmitter and receiver
/// models must agree on it bit-exactly, so it is pinned here: the
/// SplitMix64 sequence of Steele, Lea and Flood, taken 64 bits per output.
pub const COEFFICIENT_GENERATOR: &str = "splitmix64";

/// One output of the named coefficient generator, advancing `state`.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Error)]
pub enum MacError {
    #[error("replica count {d} exceeds frame size {s}")]
    ReplicasExceedSlots { d: usize, s: usize },
    #[error("configuration invalid: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Galois(#[from] GaloisError),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error(transparent)]
    XorLlr(#[from] XorLlrError),
    #[error("fec error: {0}")]
    Fec(String),
}

/// How each terminal picks its per-slot coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoefficientPolicy {
    /// Coefficient uniform over all of GF(2^n); transmit probability per
    /// slot is `1 - 2^{-n}`.
    Uniform,
    /// Transmit in each slot independently with probability `p`, with a
    /// nonzero-uniform coefficient.
    FixedProbability(f64),
    /// Exactly `d` slots per frame, chosen uniformly without replacement,
    /// with nonzero-uniform coefficients.
    FixedReplicas(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feedback {
    /// Each frame is independent; unresolved messages are lost.
    None,
    /// Unresolved messages re-enter uniformly in one of the next `backlog`
    /// frames until recovered.
    Arq,
}

/// Frame-level protocol parameters.
#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    /// Slots per frame (S).
    pub slots: usize,
    pub field: FieldSpec,
    pub policy: CoefficientPolicy,
    /// Retransmission window in frames (B), used in ARQ mode.
    pub backlog: usize,
    pub feedback: Feedback,
    /// `true`: every occupied slot yields an error-free equation. `false`
    /// requires a `PhyConfig` and simulates each slot end to end.
    pub ideal_phy: bool,
    /// `true` (protocol behavior): a message counts as recovered whenever
    /// the elimination determines it uniquely, even in rank-deficient
    /// frames. `false`: all-or-nothing per frame, the accounting under
    /// which the closed-form throughput formula is derived.
    pub partial_recovery: bool,
    /// Message length in GF(2^n) symbols for ideal-PHY runs.
    pub message_blocks: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            slots: 150,
            field: FieldSpec::with_default_poly(8).expect("GF(2^8) is valid"),
            policy: CoefficientPolicy::Uniform,
            backlog: 50,
            feedback: Feedback::None,
            ideal_phy: true,
            partial_recovery: true,
            message_blocks: 1,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), MacError> {
        if self.slots == 0 {
            return Err(MacError::BadConfig("slots must be >= 1".into()));
        }
        if self.backlog == 0 {
            return Err(MacError::BadConfig("backlog must be >= 1".into()));
        }
        if self.message_blocks == 0 {
            return Err(MacError::BadConfig("message_blocks must be >= 1".into()));
        }
        match self.policy {
            CoefficientPolicy::FixedProbability(p) if !(0.0..=1.0).contains(&p) => {
                Err(MacError::BadConfig("transmit probability outside [0, 1]".into()))
            }
            CoefficientPolicy::FixedReplicas(d) if d == 0 || d > self.slots => {
                Err(MacError::ReplicasExceedSlots {
                    d,
                    s: self.slots,
                })
            }
            _ => Ok(()),
        }
    }
}

/// Poisson arrival process with normalized load `G` (new messages per
/// slot; `G * S` expected arrivals per frame).
#[derive(Debug, Clone, Copy)]
pub struct TrafficModel {
    pub g: f64,
}

impl TrafficModel {
    pub fn new(g: f64) -> Result<Self, MacError> {
        if !(g >= 0.0) || !g.is_finite() {
            return Err(MacError::BadConfig("load G must be >= 0".into()));
        }
        Ok(Self { g })
    }

    pub fn arrivals<R: Rng + ?Sized>(&self, slots: usize, rng: &mut R) -> usize {
        let lambda = self.g * slots as f64;
        if lambda <= 0.0 {
            return 0;
        }
        Poisson::new(lambda).expect("lambda > 0").sample(rng) as usize
    }
}

/// One active terminal within a frame.
#[derive(Debug, Clone)]
pub struct ActiveUser {
    pub terminal: u64,
    /// Preamble index, 1..=127, distinct within a frame.
    pub preamble: usize,
    /// Message as GF(2^n) symbols.
    pub message: Vec<u16>,
}

/// Per-frame record: who is active, their access pattern, and the decoded
/// per-slot equations (`None` marks a slot whose XOR decoding failed).
#[derive(Debug, Clone)]
pub struct FrameState {
    pub active: Vec<ActiveUser>,
    /// S x N_tx coefficient matrix; entry (j, i) is terminal i's
    /// coefficient in slot j (zero = no transmission).
    pub pattern: FieldMatrix,
    pub decoded_rows: Vec<Option<Vec<u16>>>,
}

/// Expand per-terminal seeds into the S x N_tx access pattern. The column
/// of terminal `i` is a deterministic function of `seeds[i]` through the
/// named coefficient generator, so the receiver can rebuild it.
pub fn generate_pattern(
    cfg: &ProtocolConfig,
    seeds: &[u64],
) -> Result<FieldMatrix, MacError> {
    cfg.validate()?;
    let field = Field::new(cfg.field);
    let s = cfg.slots;
    let order = cfg.field.order() as u64;
    let mut m = FieldMatrix::zeros(field, s, seeds.len());
    for (i, &seed) in seeds.iter().enumerate() {
        let mut state = seed;
        match cfg.policy {
            CoefficientPolicy::Uniform => {
                for j in 0..s {
                    m.set(j, i, (splitmix64(&mut state) % order) as u16);
                }
            }
            CoefficientPolicy::FixedProbability(p) => {
                for j in 0..s {
                    let toss = splitmix64(&mut state) as f64 / 2f64.powi(64);
                    if toss < p {
                        let c = 1 + (splitmix64(&mut state) % (order - 1)) as u16;
                        m.set(j, i, c);
                    }
                }
            }
            CoefficientPolicy::FixedReplicas(d) => {
                // partial Fisher-Yates over the slot indices
                let mut slots: Vec<usize> = (0..s).collect();
                for t in 0..d {
                    let pick = t + (splitmix64(&mut state) % (s - t) as u64) as usize;
                    slots.swap(t, pick);
                    let c = 1 + (splitmix64(&mut state) % (order - 1)) as u16;
                    m.set(slots[t], i, c);
                }
            }
        }
    }
    Ok(m)
}

/// Solve a frame's equation system; slots without a decoded equation are
/// dropped from the system.
pub fn decode_frame(frame: &FrameState) -> Result<SolveOutcome, MacError> {
    let pattern = &frame.pattern;
    let field = pattern.field().clone();
    let mut rows: Vec<Vec<u16>> = Vec::new();
    let mut rhs: Vec<Vec<u16>> = Vec::new();
    for (j, decoded) in frame.decoded_rows.iter().enumerate() {
        if let Some(v) = decoded {
            rows.push((0..pattern.cols()).map(|i| pattern.get(j, i)).collect());
            rhs.push(v.clone());
        }
    }
    let m = FieldMatrix::from_rows(field, &rows)
        .unwrap_or_else(|_| FieldMatrix::zeros(frame.pattern.field().clone(), 0, 0));
    if rows.is_empty() {
        // no equations: nothing recovered
        let mut unresolved = std::collections::BTreeSet::new();
        for i in 0..pattern.cols() {
            unresolved.insert(i);
        }
        return Ok(SolveOutcome {
            recovered: Default::default(),
            unresolved,
        });
    }
    Ok(solve_or_reduce(&m, &rhs)?)
}

/// Aggregate Monte Carlo metrics of one run.
///
/// `arrivals` counts settled messages (recovered + lost); messages still
/// backlogged when an ARQ run ends are reported in `backlogged` and
/// excluded from the loss rate. The identity `phi = offered_g * (1 -
/// upsilon)` holds exactly because `offered_g` is the empirical settled
/// load.
#[derive(Debug, Clone, Copy, Default)]
pub struct Metrics {
    pub frames: usize,
    pub slots: usize,
    pub arrivals: u64,
    pub recovered: u64,
    pub lost: u64,
    pub backlogged: u64,
    /// Transmissions made by eventually-recovered messages.
    pub transmissions: u64,
    /// Empirical settled load, messages per slot.
    pub offered_g: f64,
    /// Normalized throughput, recovered messages per slot.
    pub phi: f64,
    /// Loss rate over settled messages.
    pub upsilon: f64,
    /// Mean transmissions per recovered message.
    pub eta: f64,
}

impl Metrics {
    fn finalize(&mut self) {
        let slots_total = (self.frames * self.slots) as f64;
        self.offered_g = self.arrivals as f64 / slots_total;
        self.phi = self.recovered as f64 / slots_total;
        self.upsilon = if self.arrivals == 0 {
            0.0
        } else {
            self.lost as f64 / self.arrivals as f64
        };
        self.eta = self.transmissions as f64 / self.recovered as f64;
    }
}

/// Which protocol a run simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Ncdp,
    /// Replica transmission with iterative cancellation, `n_iter` rounds.
    Crdsa { n_iter: usize },
    SlottedAloha,
}

// ---------------------------------------------------------------------
// full-PHY slot pipeline
// ---------------------------------------------------------------------

/// Physical-layer parameters for full-PHY slot decoding.
#[derive(Debug, Clone)]
pub struct PhyConfig {
    pub code: CodeSpec,
    pub crc: CrcSpec,
    pub ebn0_db: f64,
    pub shape: PulseShape,
    pub strategy: SamplingStrategy,
    /// Upper edge of the relative-delay range, fraction of a symbol.
    pub delta_t_max: f64,
    /// Estimate amplitude/frequency/phase from the preambles with EM
    /// instead of using genie channel knowledge. Delays are always known.
    pub estimate_channels: bool,
    /// Prepend the Walsh preamble to each burst (required when
    /// `estimate_channels` is set).
    pub include_preamble: bool,
    pub em: EmConfig,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            code: CodeSpec::default(),
            crc: CrcSpec::default(),
            ebn0_db: 8.0,
            shape: PulseShape::default(),
            strategy: SamplingStrategy::MeanDelay,
            delta_t_max: 0.0,
            estimate_channels: false,
            include_preamble: false,
            em: EmConfig::default(),
        }
    }
}

impl PhyConfig {
    /// Noise variance per component for the configured `E_b/N0`, with
    /// unit-energy BPSK symbols: `E_b = E_s / (2 r)` per complex
    /// dimension, so `N0 = 1 / (2 r * (E_b/N0))`.
    pub fn noise_variance(&self) -> f64 {
        let ebn0 = 10f64.powf(self.ebn0_db / 10.0);
        1.0 / (2.0 * self.code.rate() * ebn0)
    }
}

/// One user's contribution to a slot in full-PHY mode.
#[derive(Debug, Clone)]
pub struct SlotUser {
    pub preamble: usize,
    /// Information bits transmitted in this slot, before the CRC field is
    /// appended (length `code.info_bits - crc.width`).
    pub payload_bits: Vec<u8>,
    pub channel: ChannelParams,
}

/// Outcome of decoding one collided slot.
#[derive(Debug, Clone)]
pub struct SlotDecode {
    /// CRC-validated decoded payload (the XOR of the users' payloads), or
    /// `None` when the CRC fails or the collision exceeds the LLR cap.
    pub payload: Option<Vec<u8>>,
    /// The true XOR of the transmitted payloads, for oracle tests.
    pub truth: Vec<u8>,
}

fn bpsk(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| if b == 1 { 1.0 } else { -1.0 }).collect()
}

/// Convert a bit string (MSB first per block) to GF(2^n) symbols.
pub fn bits_to_blocks(bits: &[u8], n: u8) -> Vec<u16> {
    bits.chunks(n as usize)
        .map(|chunk| chunk.iter().fold(0u16, |acc, &b| (acc << 1) | b as u16))
        .collect()
}

/// Convert GF(2^n) symbols back to a bit string (MSB first per block).
pub fn blocks_to_bits(blocks: &[u16], n: u8) -> Vec<u8> {
    blocks
        .iter()
        .flat_map(|&v| (0..n).rev().map(move |i| ((v >> i) & 1) as u8))
        .collect()
}

/// Nominal channel coefficient of a user at the sampling instant
/// `symbol_time + offset` (no pulse mismatch factor).
fn nominal_channel(ch: &ChannelParams, t: f64) -> Complex64 {
    ch.coefficient_at(t)
}

/// Decode the XOR of the payloads colliding in one slot: synthesize the
/// superposed waveform, sample it under the configured strategy, compute
/// the XOR LLRs, soft-decode, and validate the CRC.
pub fn decode_slot<R: Rng + ?Sized>(
    users: &[SlotUser],
    phy: &PhyConfig,
    rng: &mut R,
) -> Result<SlotDecode, MacError> {
    let payload_len = phy.code.info_bits - phy.crc.width as usize;
    let mut truth = vec![0u8; payload_len];
    for u in users {
        if u.payload_bits.len() != payload_len {
            return Err(MacError::BadConfig(
                "payload length does not match the code".into(),
            ));
        }
        for (t, &b) in truth.iter_mut().zip(&u.payload_bits) {
            *t ^= b;
        }
    }
    if users.is_empty() || users.len() > MAX_COLLISION_SIZE {
        return Ok(SlotDecode {
            payload: None,
            truth,
        });
    }
    let n0 = phy.noise_variance();

    // synthesize the collision
    let mut bursts = Vec::with_capacity(users.len());
    for u in users {
        let coded = encode(&crc_append(&u.payload_bits, &phy.crc), &phy.code)
            .map_err(|e| MacError::Fec(e.to_string()))?;
        let symbols = bpsk(&coded);
        let burst = if phy.include_preamble {
            Burst::new(u.preamble, &symbols)?
        } else {
            Burst::raw(symbols)
        };
        bursts.push((burst, u.channel));
    }
    // The payload works on symbol-level samples: the grid is synthesized
    // clean and every extracted sample carries its own AWGN term (the
    // noise process is drawn per sampling instant).
    let pairs: Vec<_> = bursts.iter().map(|(b, c)| (b.clone(), *c)).collect();
    let slot = synthesize_collision(&pairs, 0.0, &phy.shape, rng)?;

    // channel knowledge: genie or EM-estimated (delays always known)
    let params: Vec<ChannelParams> = if phy.estimate_channels {
        let noisy = synthesize_collision(&pairs, n0, &phy.shape, rng)?;
        let bank = PreambleBank::new();
        let active: Vec<usize> = users.iter().map(|u| u.preamble).collect();
        let est = em_estimate(&noisy, &active, &bank, &phy.em, rng)
            .map_err(|e| MacError::BadConfig(e.to_string()))?;
        users
            .iter()
            .zip(&est.estimates)
            .map(|(u, e)| ChannelParams {
                amplitude: e.amplitude.max(f64::EPSILON),
                freq_offset: e.freq_offset,
                phase: e.phase,
                rel_delay: u.channel.rel_delay,
            })
            .collect()
    } else {
        users.iter().map(|u| u.channel).collect()
    };

    // sample the payload region
    let first = if phy.include_preamble { PREAMBLE_LEN } else { 0 };
    let count = phy.code.code_bits();
    let delays: Vec<f64> = users.iter().map(|u| u.channel.rel_delay).collect();
    let mut sampled = matched_filter_and_sample(&slot, phy.strategy, &delays, first, count)?;
    if n0 > 0.0 {
        let sigma = n0.sqrt();
        for row in sampled.per_symbol.iter_mut() {
            for s in row.iter_mut() {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                *s += Complex64::new(re * sigma, im * sigma);
            }
        }
    }
    let mean_offset = sampled.offsets.iter().sum::<f64>() / sampled.offsets.len() as f64;

    // Per-symbol channel coefficients. All strategies model only the
    // present symbol (residual ISI stays unmodelled); the equivalent-
    // channel strategy additionally weights each coefficient by the pulse
    // value at the sampling mismatch.
    let rolloff = phy.shape.rolloff;
    let nominal_at = |tau: f64, l: usize| -> Vec<Complex64> {
        let t = slot.symbol_time(first + l) + tau;
        params.iter().map(|p| nominal_channel(p, t)).collect()
    };
    let corrected_at = |tau: f64, l: usize| -> Vec<Complex64> {
        let t = slot.symbol_time(first + l) + tau;
        params
            .iter()
            .map(|p| p.coefficient_at(t) * raised_cosine(tau - p.rel_delay, rolloff))
            .collect()
    };
    let llrs = match phy.strategy {
        SamplingStrategy::MeanDelay => {
            let channels: Vec<Vec<Complex64>> =
                (0..count).map(|l| nominal_at(mean_offset, l)).collect();
            crate::xorllr::llr_xor(
                &sampled.per_symbol.iter().map(|row| row[0]).collect::<Vec<_>>(),
                &channels,
                n0,
            )?
        }
        SamplingStrategy::MeanLlr => {
            // per-sample LLRs with the coefficients at that instant
            let mut acc = vec![0.0; count];
            for (q, &tau) in sampled.offsets.iter().enumerate() {
                let samples: Vec<Complex64> =
                    sampled.per_symbol.iter().map(|row| row[q]).collect();
                let channels: Vec<Vec<Complex64>> =
                    (0..count).map(|l| nominal_at(tau, l)).collect();
                let llr = crate::xorllr::llr_xor(&samples, &channels, n0)?;
                for (a, v) in acc.iter_mut().zip(llr) {
                    *a += v;
                }
            }
            let k = sampled.offsets.len() as f64;
            acc.iter_mut().for_each(|a| *a /= k);
            acc
        }
        SamplingStrategy::MeanSample | SamplingStrategy::UniformSampling { .. } => {
            let channels: Vec<Vec<Complex64>> =
                (0..count).map(|l| nominal_at(mean_offset, l)).collect();
            llr_multi_sample(
                &sampled.per_symbol,
                CombineStrategy::MeanSample,
                &channels,
                None,
                n0,
            )?
        }
        SamplingStrategy::EquivalentChannel => {
            // coefficient of the *averaged* sample: mean over the sampling
            // instants of the per-instant corrected coefficients
            let eq: Vec<Vec<Complex64>> = (0..count)
                .map(|l| {
                    let mut acc = vec![Complex64::new(0.0, 0.0); params.len()];
                    for &tau in &sampled.offsets {
                        for (a, c) in acc.iter_mut().zip(corrected_at(tau, l)) {
                            *a += c;
                        }
                    }
                    let k = sampled.offsets.len() as f64;
                    acc.iter_mut().for_each(|a| *a /= k);
                    acc
                })
                .collect();
            let channels: Vec<Vec<Complex64>> =
                (0..count).map(|l| nominal_at(mean_offset, l)).collect();
            llr_multi_sample(
                &sampled.per_symbol,
                CombineStrategy::EquivalentChannel,
                &channels,
                Some(&eq),
                n0,
            )?
        }
    };

    let (decoded, _) = decode_soft(&llrs, &phy.code).map_err(|e| MacError::Fec(e.to_string()))?;
    let payload = if crc_check(&decoded, &phy.crc) {
        Some(decoded[..payload_len].to_vec())
    } else {
        None
    };
    Ok(SlotDecode { payload, truth })
}

// ---------------------------------------------------------------------
// protocol simulation
// ---------------------------------------------------------------------

/// Lifetime bookkeeping of one message.
#[derive(Debug, Clone)]
struct MessageRecord {
    measured: bool,
    settled: bool,
    recovered: bool,
    transmissions: u64,
    message: Vec<u16>,
}

/// Outcome of one frame: which of the scheduled messages were recovered
/// and how many transmissions each made.
struct FrameOutcome {
    recovered: Vec<bool>,
    transmissions: Vec<u64>,
}

fn run_ncdp_frame<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    phy: Option<&PhyConfig>,
    messages: &[Vec<u16>],
    rng: &mut R,
) -> Result<FrameOutcome, MacError> {
    let n_tx = messages.len();
    if n_tx == 0 {
        return Ok(FrameOutcome {
            recovered: Vec::new(),
            transmissions: Vec::new(),
        });
    }
    let seeds: Vec<u64> = (0..n_tx).map(|_| rng.gen()).collect();
    let pattern = generate_pattern(cfg, &seeds)?;
    let transmissions: Vec<u64> = (0..n_tx)
        .map(|i| (0..cfg.slots).filter(|&j| pattern.get(j, i) != 0).count() as u64)
        .collect();
    let field = Field::new(cfg.field);
    // distinct preamble words per active terminal (identity collisions
    // are assumed negligible)
    let mut preambles: Vec<usize> = (1..=PREAMBLE_WORDS).collect();
    preambles.shuffle(rng);

    let decoded_rows: Vec<Option<Vec<u16>>> = if cfg.ideal_phy {
        (0..cfg.slots)
            .map(|j| {
                let mut row = vec![0u16; cfg.message_blocks];
                for (i, msg) in messages.iter().enumerate() {
                    let a = pattern.get(j, i);
                    if a != 0 {
                        for (acc, &m) in row.iter_mut().zip(msg) {
                            *acc ^= field.mul_raw(a, m);
                        }
                    }
                }
                Some(row)
            })
            .collect()
    } else {
        let phy = phy.ok_or_else(|| {
            MacError::BadConfig("full-PHY mode requires a PhyConfig".into())
        })?;
        let n = cfg.field.n();
        // per-terminal frequency offset is frame-constant; phase and delay
        // are redrawn per slot
        let freqs: Vec<f64> = (0..n_tx)
            .map(|_| rng.gen_range(0.0..=crate::waveform::MAX_FREQ_OFFSET))
            .collect();
        (0..cfg.slots)
            .map(|j| {
                let mut users = Vec::new();
                for (i, msg) in messages.iter().enumerate() {
                    let a = pattern.get(j, i);
                    if a == 0 {
                        continue;
                    }
                    let precoded: Vec<u16> =
                        msg.iter().map(|&m| field.mul_raw(a, m)).collect();
                    let mut delay = rng.gen_range(0.0..=phy.delta_t_max.max(0.0));
                    if phy.delta_t_max <= 0.0 {
                        delay = 0.0;
                    }
                    let channel = ChannelParams {
                        amplitude: 1.0,
                        freq_offset: freqs[i],
                        phase: rng.gen_range(-std::f64::consts::PI..=std::f64::consts::PI),
                        rel_delay: delay,
                    };
                    users.push(SlotUser {
                        preamble: preambles[i % preambles.len()],
                        payload_bits: blocks_to_bits(&precoded, n),
                        channel,
                    });
                }
                if users.is_empty() {
                    return Ok(Some(vec![0u16; cfg.message_blocks]));
                }
                let decode = decode_slot(&users, phy, rng)?;
                Ok(decode.payload.map(|bits| bits_to_blocks(&bits, n)))
            })
            .collect::<Result<_, MacError>>()?
    };

    let frame = FrameState {
        active: messages
            .iter()
            .enumerate()
            .map(|(i, m)| ActiveUser {
                terminal: i as u64,
                preamble: preambles[i % preambles.len()],
                message: m.clone(),
            })
            .collect(),
        pattern,
        decoded_rows,
    };
    let outcome = decode_frame(&frame)?;
    let mut recovered: Vec<bool> = (0..n_tx)
        .map(|i| {
            outcome
                .recovered
                .get(&i)
                .is_some_and(|v| v == &messages[i])
        })
        .collect();
    if !cfg.partial_recovery {
        // all-or-nothing applies to the columns the receiver actually
        // saw; a terminal whose pattern came out all-zero never
        // transmitted and is lost regardless
        let visible: Vec<bool> = (0..n_tx).map(|i| transmissions[i] > 0).collect();
        if visible
            .iter()
            .zip(&recovered)
            .any(|(&v, &r)| v && !r)
        {
            recovered.iter_mut().for_each(|r| *r = false);
        }
    }
    Ok(FrameOutcome {
        recovered,
        transmissions,
    })
}

fn run_crdsa_frame<R: Rng + ?Sized>(
    slots: usize,
    d: usize,
    n_iter: usize,
    n_tx: usize,
    rng: &mut R,
) -> FrameOutcome {
    let mut replica_slots: Vec<Vec<usize>> = Vec::with_capacity(n_tx);
    for _ in 0..n_tx {
        let mut all: Vec<usize> = (0..slots).collect();
        let (chosen, _) = all.partial_shuffle(rng, d);
        replica_slots.push(chosen.to_vec());
    }
    let recovered = peel_crdsa(slots, &replica_slots, n_iter);
    FrameOutcome {
        recovered,
        transmissions: vec![d as u64; n_tx],
    }
}

/// Iterative interference cancellation: a slot is decodable iff it holds
/// exactly one not-yet-cancelled burst; decoding a burst cancels all its
/// replicas. Runs to fixpoint or `n_iter` rounds.
pub fn peel_crdsa(slots: usize, replica_slots: &[Vec<usize>], n_iter: usize) -> Vec<bool> {
    let n_tx = replica_slots.len();
    let mut occupancy = vec![0usize; slots];
    for reps in replica_slots {
        for &s in reps {
            occupancy[s] += 1;
        }
    }
    let mut recovered = vec![false; n_tx];
    for _ in 0..n_iter {
        let mut progress = false;
        for i in 0..n_tx {
            if recovered[i] {
                continue;
            }
            if replica_slots[i].iter().any(|&s| occupancy[s] == 1) {
                recovered[i] = true;
                progress = true;
                for &s in &replica_slots[i] {
                    occupancy[s] -= 1;
                }
            }
        }
        if !progress {
            break;
        }
    }
    recovered
}

fn run_sa_frame<R: Rng + ?Sized>(slots: usize, n_tx: usize, rng: &mut R) -> FrameOutcome {
    let choices: Vec<usize> = (0..n_tx).map(|_| rng.gen_range(0..slots)).collect();
    let mut occupancy = vec![0usize; slots];
    for &c in &choices {
        occupancy[c] += 1;
    }
    FrameOutcome {
        recovered: choices.iter().map(|&c| occupancy[c] == 1).collect(),
        transmissions: vec![1; n_tx],
    }
}

/// Run parameters shared by all protocols.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub cfg: ProtocolConfig,
    pub phy: Option<PhyConfig>,
    pub traffic: TrafficModel,
    /// Measured frames (after the warm-up in ARQ mode).
    pub frames: usize,
}

/// Simulate a protocol run and aggregate metrics.
///
/// In ARQ mode a warm-up of `backlog` frames precedes the measurement
/// window and unresolved messages re-enter uniformly within the next
/// `backlog` frames; messages still pending at the end are reported as
/// `backlogged` and excluded from the loss rate. The preamble identity
/// space is treated as unbounded: identity collisions between active
/// terminals are assumed negligible, so every active terminal is
/// identified.
pub fn simulate<R: Rng + ?Sized>(run: &RunConfig, rng: &mut R) -> Result<Metrics, MacError> {
    run.cfg.validate()?;
    if run.frames == 0 {
        return Err(MacError::BadConfig("frames must be >= 1".into()));
    }
    let arq = run.cfg.feedback == Feedback::Arq;
    let warmup = if arq { run.cfg.backlog } else { 0 };
    let total_frames = warmup + run.frames;
    let order = run.cfg.field.order();

    let mut records: Vec<MessageRecord> = Vec::new();
    // message indices scheduled per frame
    let mut schedule: Vec<Vec<usize>> = vec![Vec::new(); total_frames + run.cfg.backlog + 1];
    let mut metrics = Metrics {
        frames: run.frames,
        slots: run.cfg.slots,
        ..Default::default()
    };

    for f in 0..total_frames {
        let measured_frame = f >= warmup;
        // new arrivals
        let arrivals = run.traffic.arrivals(run.cfg.slots, rng);
        for _ in 0..arrivals {
            let message: Vec<u16> = (0..run.cfg.message_blocks)
                .map(|_| (rng.gen::<u32>() % order) as u16)
                .collect();
            records.push(MessageRecord {
                measured: measured_frame,
                settled: false,
                recovered: false,
                transmissions: 0,
                message,
            });
            schedule[f].push(records.len() - 1);
        }
        let scheduled = std::mem::take(&mut schedule[f]);
        if scheduled.is_empty() {
            continue;
        }
        let outcome = match run.protocol {
            Protocol::Ncdp => {
                let messages: Vec<Vec<u16>> = scheduled
                    .iter()
                    .map(|&idx| records[idx].message.clone())
                    .collect();
                run_ncdp_frame(&run.cfg, run.phy.as_ref(), &messages, rng)?
            }
            Protocol::Crdsa { n_iter } => {
                let d = match run.cfg.policy {
                    CoefficientPolicy::FixedReplicas(d) => d,
                    _ => {
                        return Err(MacError::BadConfig(
                            "CRDSA requires the fixed-replicas policy".into(),
                        ))
                    }
                };
                run_crdsa_frame(run.cfg.slots, d, n_iter, scheduled.len(), rng)
            }
            Protocol::SlottedAloha => run_sa_frame(run.cfg.slots, scheduled.len(), rng),
        };
        for (pos, &idx) in scheduled.iter().enumerate() {
            let rec = &mut records[idx];
            rec.transmissions += outcome.transmissions[pos];
            if outcome.recovered[pos] {
                rec.settled = true;
                rec.recovered = true;
            } else if arq {
                // retransmit uniformly within the next B frames
                let delay = 1 + rng.gen_range(0..run.cfg.backlog);
                schedule[f + delay].push(idx);
            } else {
                rec.settled = true;
            }
        }
    }

    for rec in &records {
        if !rec.measured {
            continue;
        }
        if !rec.settled {
            metrics.backlogged += 1;
            continue;
        }
        metrics.arrivals += 1;
        if rec.recovered {
            metrics.recovered += 1;
            metrics.transmissions += rec.transmissions;
        } else {
            metrics.lost += 1;
        }
    }
    metrics.finalize();
    Ok(metrics)
}
