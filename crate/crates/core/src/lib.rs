//! Beam tracking for mmWave analog arrays.
//!
//! A large antenna array buys its link budget with a narrow beam, and a narrow
//! beam is exactly what a moving receiver keeps falling out of. This crate
//! simulates that tension end to end:
//!
//! ```text
//!   array      steering / beamforming vectors, normalized signal part
//!   channel    angle-of-arrival dynamics (Brownian rate), pilot measurements
//!   trackers   EKF / first-order / ML trackers, discrete and
//!              continuous-discrete variants behind one interface
//!   design     pilot period sizing from closed-form SNR statistics
//!   harness    seeded Monte Carlo runs with paired noise across trackers
//! ```
//!
//! All angles are radians, all times seconds, all SNRs linear unless a name
//! says otherwise. Estimators keep unwrapped angles internally; the [`array`]
//! boundary types reduce to `[0, 2*pi)`.

pub mod array;
pub mod channel;
pub mod design;
pub mod error;
pub mod harness;
pub mod trackers;

pub use error::{Error, Result};
