//! Blind channel estimation for linearly precoded SISO-OFDM.
//!
//! The receiver estimates the channel frequency response from the sample
//! covariance of received frames, then removes the remaining phase
//! ambiguity without pilots by exploiting a split PAM constellation whose
//! even and odd subcarriers carry opposite-sign symbols.

pub mod channel;
pub mod constellation;
pub mod error;
pub mod estimator;
pub mod numerics;
pub mod ofdm;
pub mod precoder;
pub mod sim;

pub use num_complex::Complex64;

pub use channel::{ChannelMode, ChannelRealization, NoiseSpec, Pdp, PdpKind};
pub use constellation::{phase_pattern, SourceStats, SplitConstellation};
pub use error::{Error, Result};
pub use estimator::{
    ChannelEstimate, CovarianceAccumulator, EstimatorConfig, NoiseMode, PhaseAccumulator,
};
pub use numerics::HermitianMatrix;
pub use precoder::Precoder;
pub use sim::{EstimatorMode, Execution, RunResult, SimConfig};
