//! Numerical homogenization of non-Newtonian flow through periodically
//! perforated domains in two dimensions.

pub mod cell;
pub mod darcy;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod micro;

pub use error::{Error, Result};
