//! Neural field regression toolkit.
//!
//! Fits small MLPs to 2D images and 3D signed distance fields on the
//! unit domain, comparing several input encodings: classic sinusoidal
//! positional encoding, trainable latent grids, a local positional
//! encoding that modulates per-cell sinusoids, and multi-resolution
//! dense / hashed grids. Everything is seed-deterministic end to end,
//! from parameter init through training to the rendered output bytes.

pub mod encoding;
pub mod error;
pub mod fields;
pub mod io;
pub mod metrics;
pub mod model;
pub mod network;
pub mod numerics;
pub mod optim;
pub mod render;

pub use error::{Error, Result};
