//! GNSS backscatter positioning toolkit.
//!
//! Absolute positioning with virtual satellites mirrored through a surveyed
//! tag, differential carrier-phase base-vector solving, ON-OFF keying
//! detection, a deterministic measurement simulator and a reflection
//! amplifier design calculator.

pub mod cli;
pub mod geodesy;
pub mod measurements;
pub mod rfdesign;
pub mod solver_abs;
pub mod solver_diff;
pub mod simulator;
pub mod tagdetect;

mod wls;

pub use nalgebra;
