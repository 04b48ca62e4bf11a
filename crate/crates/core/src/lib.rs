//! Monte Carlo simulation and security analysis of BB84 with weak coherent
//! pulses.
//!
//! A session emits Poissonian signal and decoy pulses, passes them through
//! a lossy channel that an eavesdropper may control, and detects them with
//! a beam-splitter cascade that resolves photon number. Verification checks
//! the click-count statistics and per-photon-number error rates of both
//! intensities. The [`security`] module holds the closed-form information
//! rates, tagged-fraction bounds and key rate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod detector;
pub mod error;
pub mod io;
pub mod protocol;
pub mod rng;
pub mod security;
pub mod source;
pub mod statistics;

pub use channel::{Attack, Channel, ChannelConfig, ChannelOutcome, SubstituteModel};
pub use detector::{DetectionEvent, DetectorConfig, MeasuredBit};
pub use error::{Error, Result};
pub use protocol::{
    extract_raw_key, run_session, sift, verify, RawKey, SessionConfig, SessionLog, SiftedRecord,
    Verdict, VerificationReport,
};
pub use source::{Basis, PhotonState, PulseClass, PulseRecord, Source, SourceConfig};
pub use statistics::{CountHistogram, Probability};
