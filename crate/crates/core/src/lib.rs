//! Spectral influence, absorbing-walk certificates and Glauber dynamics for
//! multi-state spin systems.

pub mod complex;
pub mod error;
pub mod glauber;
pub mod influence;
pub mod lorentz;
pub mod report;
pub mod spectra;
pub mod trickle;
pub mod verdict;
pub mod walks;

pub use complex::{Face, LinkView, SpinSystem};
pub use error::{Error, Result};
pub use nalgebra::DMatrix;
pub use verdict::Verdict;
pub use walks::WalkGraph;
