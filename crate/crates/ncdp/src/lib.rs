//! Simulation library for collision recovery in slotted ALOHA via
//! physical-layer network coding over extended Galois fields.
//!
//! The library spans the physical layer (SRRC pulse shaping, multi-user
//! XOR LLR computation, EM channel estimation, symbol-async mitigation)
//! and the MAC layer (finite-field frame decoding, CRDSA and slotted
//! ALOHA benchmarks, ARQ), with closed-form throughput formulas for
//! cross-validation against Monte Carlo.

pub mod analytic;
pub mod cli;
pub mod estimation;
pub mod fec;
pub mod galois;
pub mod mac;
pub mod waveform;
pub mod xorllr;

pub use galois::{Field, FieldElement, FieldMatrix, FieldSpec};
pub use waveform::{Burst, ChannelParams, CollisionSlot, PulseShape, SamplingStrategy};
