//! Joint radar-communication transmit beamforming: a dual-function MIMO
//! transmitter radiates precoded radar waveforms and communication symbols
//! from one array, shaping a multi-beam radar pattern while guaranteeing
//! per-user downlink SINR.
//!
//! The crate provides
//! * array geometry, steering and beam-pattern evaluation ([`array`]),
//! * the radar beampattern loss as a PSD quadratic form ([`objective`]),
//! * the radar-only, SDR and zero-forcing precoder designs ([`design`]),
//! * closed-form performance metrics ([`metrics`]),
//! * waveform-level Monte Carlo verification ([`simulate`]).
//!
//! Conic programs are solved by the companion `dfrc-conic` crate.

pub mod array;
pub mod cov;
pub mod design;
mod error;
pub mod io;
mod linalg;
pub mod metrics;
pub mod objective;
pub mod simulate;

pub use array::{
    angle_grid, beam_pattern, cross_correlation, desired_pattern, steering_vector, ArrayGeometry,
    BeamSpec,
};
pub use cov::HermitianCov;
pub use design::{Channel, DesignConfig, DesignOutcome, DesignStatus, Precoder, SinrThresholds};
pub use error::{CoreError, Result};
pub use objective::{build_radar_loss, eval_loss, minimize_alpha, RadarObjective};
