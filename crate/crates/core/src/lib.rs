//! Sparse recovery when the noise sits on the signal, not on the measurements.
//!
//! A vector `x` with at most `k` entries above `r` in magnitude and a small
//! `l_p` tail is measured as `y = A x`. Because the tail is folded through
//! `A`, its variance is amplified by `N/m` in the measurement domain. This
//! crate provides the encoders, the signal class, four families of decoders
//! (basis pursuit, reweighted `l1`, selective least `p`-powers, and
//! `l1`-warm-started hard thresholding with a QCQP correction), and a seeded
//! experiment harness.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the harness uses.

pub mod encoders;
pub mod error;
pub mod harness;
pub mod iht;
pub mod l1;
pub mod scalar;
pub mod signals;
pub mod slp;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Encoder = encoders::Encoder<f64>;
pub type DecodeResult = l1::DecodeResult<f64>;
