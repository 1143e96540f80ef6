//! Doubly-selective channel estimation for large-scale MIMO-OFDM.
//!
//! This crate implements a complete pilot-aided estimation pipeline for
//! channels that are selective in both delay (multipath) and time (Doppler),
//! observed through a single OFDM symbol shared by many transmit antennas:
//!
//! - [`bem`] - the complex-exponential basis expansion model (CE-BEM) and the
//!   conversions between BEM coefficients and time/frequency channel matrices.
//! - [`channel`] - sparse doubly-selective channel generation with a common
//!   delay support across antennas (Jakes-type time variation, ITU Vehicular B
//!   power-delay profile), plus an exact-BEM generator for controlled tests.
//! - [`pilot`] - the superimposed guard-pilot pattern, the block measurement
//!   matrix and its tap-ordered rearrangement, mutual coherence, and pilot
//!   position optimizers (block discrete stochastic optimization and a genetic
//!   baseline).
//! - [`recovery`] - estimators for the block-distributed sparse system:
//!   least squares, SOMP, block SOMP, the uplink joint estimator, linear
//!   smoothing, and channel reconstruction.
//! - [`sim`] - OFDM frame construction, channel application with calibrated
//!   SNR, and the Monte-Carlo experiment driver.
//! - [`cli`] - the `dsce` command-line front end (`design-pilots`, `sweep`,
//!   `verify`).
//!
//! The `examples/` directory contains one runnable example per capability;
//! start with `estimate_one_symbol`.

pub mod bem;
pub mod channel;
pub mod cli;
pub mod config;
pub mod linalg;
pub mod pilot;
pub mod recovery;
pub mod rng;
pub mod sim;
pub mod verify;

pub use channel::{ChannelRealization, SystemConfig, TapSeries};
pub use linalg::{C64, CMat};

/// Errors returned across the crate.
#[derive(Debug)]
pub enum Error {
    /// A scalar parameter is out of range or a requested configuration is
    /// infeasible (e.g. pilot groups cannot be packed into one symbol).
    Parameter(String),
    /// Array or matrix shapes do not line up.
    Dimension(String),
    /// The input is degenerate for the requested operation (zero column,
    /// zero reference signal, ...).
    DegenerateInput(String),
    /// A configuration file failed to parse. `line` is 1-based; 0 means the
    /// problem is not tied to a specific line.
    Config { line: usize, message: String },
    Io(std::io::Error),
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Error::Parameter(m) => write!(f, "parameter error: {m}"),
            Error::Dimension(m) => write!(f, "dimension error: {m}"),
            Error::DegenerateInput(m) => write!(f, "degenerate input: {m}"),
            Error::Config { line: 0, message } => write!(f, "config error: {message}"),
            Error::Config { line, message } => write!(f, "config error at line {line}: {message}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
