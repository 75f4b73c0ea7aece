//! Prior-guided underwater image enhancement.
//!
//! The crate bundles the deterministic pieces of a compact enhancement
//! network built around three hand-crafted priors:
//!
//! * a gray-world white balance fused with the input through per-channel
//!   weights ([`priors::white_balance`], [`priors::fuse_wb`]),
//! * a one-level Haar filter bank ([`priors::haar_dwt2`]),
//! * Sobel gradient magnitude used as an edge gate ([`priors::sobel_magnitude`]).
//!
//! On top of those sit the forward-only network ([`network`]), the composite
//! restoration objective with analytic gradients ([`losses`]), the evaluation
//! metrics ([`metrics`]) and a latency harness ([`bench`]).

pub mod bench;
pub mod colorspace;
mod error;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod network;
pub mod priors;

pub use error::{Error, Result};
pub use image::Image;
