//! Random dynamical quantum maps: random channels and noisy random circuits,
//! their spectra and steady states, and benchmark scoring of output
//! statistics against fixed-trace Wishart predictions.
//!
//! The linear algebra, channel, spectral and Marchenko-Pastur layers are
//! generic over [`scalar::Real`]; circuits, the protocol and QASM export are
//! `f64`.

pub mod channel;
pub mod circuit;
pub mod error;
pub mod linalg;
pub mod protocol;
pub mod qasm;
pub mod rmt;
pub mod rng;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};

pub type C32 = num_complex::Complex<f32>;
pub type C64 = num_complex::Complex<f64>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type DensityMatrix64 = linalg::DensityMatrix<f64>;
pub type KrausChannel64 = channel::KrausChannel<f64>;
pub type KrausChannel32 = channel::KrausChannel<f32>;
pub type MPParams64 = rmt::MPParams<f64>;
