pub mod analytic;
pub mod error;
pub mod harmonic;
pub mod lti;
pub mod metrics;
pub mod presets;
pub mod reset;
pub mod sim;

pub use error::{Error, ErrorKind, Result};
pub use harmonic::HarmonicSpectrum;
pub use lti::StateSpace;
pub use reset::{CgLpTuning, LoopConfig, ResetController};
