//! Joint transmit beamforming and RIS reflection design for secure MISO links.

// `!(x > 0.0)` rejects NaN as well, which is the intent throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod beamopt;
pub mod conic;
pub mod driver;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod risopt;
pub mod system;

pub use error::{Error, Result};
