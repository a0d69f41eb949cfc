//! Numerics for progressive-resolution diffusion sampling.
//!
//! Deterministic DDIM sampling that can raise the latent resolution
//! mid-trajectory by *noise refresh* (resize the predicted clean latent, then
//! re-noise it) and compensate the resulting energy loss with a per-stage
//! guidance ladder. Exact toy denoisers make every quantity checkable against
//! closed forms or brute force.
//!
//! The crate is `no_std` and only needs `alloc`; IO, configuration and the
//! command line live in the `rhr` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod checks;
pub mod codec;
pub mod denoiser;
mod error;
pub mod latent;
pub mod noise;
pub mod oracle;
pub mod sampler;
pub mod schedule;
pub mod toy;

pub use error::{Error, Result};
pub use latent::{LatentGrid, ResizeMethod};
pub use noise::SeededRng;
