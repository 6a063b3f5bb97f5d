//! Foveated entropic differencing (FED): a full-reference quality metric
//! that weights local GSM entropy differences of narrow radial subbands by a
//! foveation-based error sensitivity.
//!
//! The crate also carries the pieces needed to validate the metric:
//! gnomonic viewport extraction from equirectangular frames, frame I/O, and
//! a correlation harness (logistic mapping, PLCC/SROCC/KROCC/RMSE).

pub mod csf;
pub mod eval;
pub mod error;
pub mod fed;
pub mod filterbank;
pub mod frame;
pub mod geometry;
pub mod io;
pub mod gsm;
pub mod synth;
pub mod viewport;

mod fft2;

pub use error::{FedError, Result};
pub use frame::LuminanceFrame;
