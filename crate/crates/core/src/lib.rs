//! Numerical model of a seeded four-wave-mixing twin-beam source on the Cs D2 line.
//!
//! The crate is organised bottom-up:
//!
//! - [`atomic`]: line structure, vapor density, Doppler absorption, pump light shift
//! - [`squeezer`]: closed-form photon statistics of the seeded two-mode squeezer
//! - [`fock`]: brute-force truncated Fock-space evolution used as ground truth
//! - [`gain`]: phenomenological map from pump/cell knobs to squeeze strength
//! - [`sweep`]: seed-frequency sweep traces and pump-detuning frequency maps
//! - [`detection`]: Monte-Carlo photodetection and noise-reduction estimates

pub mod atomic;
pub mod detection;
mod error;
pub mod fock;
pub mod gain;
pub mod squeezer;
pub mod stats;
pub mod sweep;

pub use atomic::{AtomicLine, CellConditions, LightShiftModel, Resonances, VaporModel};
pub use detection::{McConfig, NrfEstimate, Regime};
pub use error::{Error, Result};
pub use fock::{FockState, JointDistribution, OracleConfig};
pub use gain::{GainCalibration, GainMode, PumpConfig};
pub use squeezer::{DetectionModel, SeedState, SqueezeParams, TwinBeamMoments};
pub use sweep::{FrequencyMap, SweepConfig, TraceSample};
