//! Signal-processing toolkit for a pseudo-inverse-prior neural vocoder.
//!
//! The crate is organised bottom-up:
//!
//! * [`dsp`] framing, STFT/ISTFT and polar conversions,
//! * [`melbank`] mel filterbank construction and its Moore–Penrose pseudo-inverse,
//! * [`prior`] the four amplitude-prior estimators and their benchmark,
//! * [`phase`] parallel phase estimation, anti-wrapping and Griffin–Lim,
//! * [`losses`] forward evaluation of the generator loss family,
//! * [`metrics`] objective speech-quality metrics,
//! * [`net`] forward-only generator inference,
//! * [`io`] WAV and tensor/weight container formats,
//! * [`fixtures`] deterministic synthetic test signals.

pub mod dsp;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod losses;
pub mod melbank;
pub mod metrics;
pub mod net;
pub mod nnls;
pub mod phase;
pub mod prior;

pub use error::{Error, Result};

/// Lower bound applied to amplitudes before taking logarithms, and to every
/// prior estimate.
pub const AMPLITUDE_FLOOR: f64 = 1e-5;
