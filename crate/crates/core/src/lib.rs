//! Calibrationless parallel MRI reconstruction toolkit.
//!
//! Recovers multi-coil k-space from undersampled measurements without a
//! calibration region, two ways:
//!
//! - an iteratively reweighted least-squares solver that exploits the low
//!   rank of the block-Hankel lifting of multi-channel k-space
//!   ([`pslr::pslr_reconstruct`]), and
//! - pre-learned unrolled networks that replace the per-iterate linear
//!   denoiser with a fixed residual CNN, in k-space alone or hybrid
//!   k-space + image domain ([`net`]).
//!
//! Supporting pieces: a synthetic multi-coil acquisition simulator
//! ([`sim`]), the lifting algebra ([`lifting`]), binary grid container and
//! JSON configs/reports ([`io`]), and SNR metrics ([`metrics`]). The `pmri`
//! binary wires these into a simulate/train/reconstruct/benchmark CLI.

pub mod error;
pub mod fft;
pub mod grid;
pub mod io;
pub mod lifting;
pub mod metrics;
pub mod net;
pub mod pslr;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use grid::{apply_mask, ComplexGrid, MultiChannelGrid, SamplingMask};
