//! Core algorithms for dual-view mammogram synthesis with a
//! difference-guided denoising diffusion model.
//!
//! Everything in this crate is pure computation over owned buffers:
//! image arithmetic, the CC/MLO/|CC−MLO| channel codec, the diffusion
//! schedule and sampler, a small trainable noise-prediction network with
//! hand-written gradients, Otsu segmentation, overlap metrics, and the
//! two-sample statistics used to compare metric distributions. File
//! formats, PNG I/O and the command-line pipeline live in the companion
//! `dualview-cli` crate.
//!
//! The crate is `no_std` (with `alloc`) so the numeric core stays free of
//! platform dependencies; float transcendentals come from `libm`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod codec;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod image;
pub mod metrics;
pub mod phantom;
pub mod postprocess;
pub mod preprocess;
pub mod rng;
pub mod segmentation;
pub mod stats;
pub mod training;

pub use codec::{encode, decode, consistency_residual, DualViewPair, Laterality};
pub use error::{Error, Result};
pub use image::{BinaryMask, EncodedTriple, GrayImage};
pub use rng::Rng;
