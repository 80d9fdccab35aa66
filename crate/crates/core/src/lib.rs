//! Simulator for a tactile graphic display built from bi-stable (latching)
//! solenoids.
//!
//! The display is a 16×16 matrix of taxels. A 4-to-16 decoder grounds one
//! row at a time while a shared bank of 32 column transistors, gated by
//! XOR/AND logic on the mode pin and a 16-bit column port, fires set or reset
//! pulses into that row. Latched plungers draw no holding current.
//!
//! - [`taxel`]: grid geometry, frames, solenoid state
//! - [`circuit`]: decoder, column gates, coil pulses, energy, heat, hazards
//! - [`firmware`]: scan planning and the controller state machine
//! - [`protocol`]: the framed host link
//! - [`device`]: firmware + board behind the protocol
//! - [`raster`]: images and Braille text to frames

pub mod circuit;
pub mod device;
pub mod firmware;
pub mod protocol;
pub mod raster;
pub mod taxel;

pub use taxel::{Bitmap, GridDims};
