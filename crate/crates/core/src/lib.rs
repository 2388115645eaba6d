//! Rate-distortion guided compression of small dense networks.
//!
//! The crate has three layers:
//! - `net`, `autodiff`, `importance`: the network being compressed and the
//!   per-parameter importance scores derived from its derivatives.
//! - `rd`, `relu`: the information-theoretic core (weighted water-filling,
//!   the achieving compressor) and the analytic ReLU machinery used to
//!   verify optimality of importance-weighted compression at desk scale.
//! - `compress`, `metrics`, `synth`, `io`: pruning, weighted k-means,
//!   bit accounting, evaluation metrics, and file formats.

pub mod autodiff;
pub mod compress;
mod error;
pub mod importance;
pub mod io;
pub mod metrics;
pub mod net;
pub mod rd;
pub mod relu;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
