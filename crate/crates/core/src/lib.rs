//! Desk-scale wave-optics simulation of OAM photon states sent over a 55 m
//! underwater link, with the image-based measurement pipeline used to
//! analyze the received mode patterns.

pub mod analysis;
pub mod channel;
pub mod detector;
pub mod error;
pub mod fft;
pub mod modes;
pub mod runner;
pub mod seed;
pub mod source;

pub use error::{Error, Result};
