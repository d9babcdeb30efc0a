#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod electrostatics;
pub mod emission;
pub mod error;
mod fourier;
pub mod lattice;
mod linalg;
pub mod medium;
pub mod modes;
pub mod quantization;

pub use error::{Error, Result};
