//! Compress-forward relaying over the full-duplex Gaussian relay channel.
//!
//! The source protects each bit level of a 16-ary constellation with its own
//! binary LDPC code (multilevel coding). The relay quantizes what it hears with
//! trellis coded quantization, protects the compressed bits with systematic
//! rate-1/2 LDPC codes and sends only the parity. The destination decodes the
//! source and relay codewords jointly by exchanging soft information between
//! two sum-product decoders through a BCJR pass over the quantizer trellis.
//!
//! This crate is `no_std` (it needs `alloc`). File formats, configuration,
//! sweeps and the command line live in the `cfrelay` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
pub mod constellation;
pub mod error;
pub mod joint;
pub mod ldpc;
pub mod math;
pub mod mlc;
pub mod partition;
pub mod point;
pub mod scalar;
pub mod tcq;

pub use error::{Error, Result};
pub use point::Point;
