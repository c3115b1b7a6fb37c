//! Simulation of an RFID access card whose antenna-to-tag clip joint is a
//! relay, closed only after the holder presents two enrolled fingers on the
//! card itself.
//!
//! The crate is organised bottom-up:
//!
//! - [`gate`]: joint arithmetic deciding whether any tag is connected.
//! - [`antenna`]: spiral coil layout, inductance, tuning, reflection.
//! - [`channel`]: reader/card near-field link and frame delivery.
//! - [`fingerprint`]: minutiae templates, capture, matching, FAR/FRR.
//! - [`firmware`]: the card control unit state machine.
//! - [`reader`]: interrogation sequence and access-control decision.
//! - [`harness`]: attack scenarios and the countermeasure matrix.
//! - [`sim`]: configuration, scripted runs and trace formatting.

pub mod antenna;
pub mod channel;
pub mod error;
pub mod fingerprint;
pub mod firmware;
pub mod gate;
pub mod harness;
pub mod reader;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};

/// SplitMix64 step over `seed ^ stream`; gives independent, reproducible
/// sub-seeds for captures and scenario worlds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
