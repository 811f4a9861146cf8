//! Hamming-space retrieval toolkit.
//!
//! The pipeline: real-valued feature vectors (optionally produced by the
//! fixed-weight ordinal extractor in [`ordinal`]) are binarized with signed
//! random projections ([`simhash`]) into fixed-width codes ([`bitcode`]),
//! enrolled into searchers — multi-index hashing ([`mih`]) or the reference
//! linear scan and ball tree ([`baselines`]) — and evaluated with biometric
//! identification metrics ([`eval`]) over real or synthetic ([`synth`])
//! datasets.
//!
//! File formats (all little-endian) are versioned by four-byte magics:
//! `HVC1` code sets, `HVP1` projection banks, `HVE1` embeddings, `HVMI`
//! persisted indexes, `HVW1` combiner weights.

pub mod baselines;
pub mod bitcode;
mod byteio;
mod error;
pub mod eval;
pub mod mih;
pub mod ordinal;
mod rng;
pub mod simhash;
pub mod synth;

pub use bitcode::{BitCode, CodeSet, Substring};
pub use error::{Error, Result};
pub use mih::{MihIndex, Neighbor, QueryStats};
pub use simhash::{ProjectionBank, RealFeature};
