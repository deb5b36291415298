//! Joint time-delay and Doppler-stretch estimation with stepped-frequency
//! pulse trains.
//!
//! The crate covers waveform synthesis, the sampled noisy echo, the wideband
//! ambiguity-function estimator, closed-form theoretical MSEs and CRLBs, and a
//! reproducible Monte Carlo runner that checks one against the other.

pub mod ambiguity;
pub mod channel;
pub mod error;
pub mod io;
pub mod montecarlo;
pub mod plot;
pub mod presets;
pub mod quad;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod theory;
pub mod waveform;

pub use error::{Result, RsfError};
