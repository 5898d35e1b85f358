//! Space-time finite elements with incrementally built POD reduced-order models
//! and goal-oriented dual-weighted-residual error control.

pub mod config;
pub mod driver;
pub mod dwr;
pub mod error;
pub mod fom;
pub mod goal;
pub mod linalg;
pub mod output;
pub mod pod;
pub mod quadrature;
pub mod rom;
pub mod slab;
pub mod spatial;
pub mod temporal;

pub use error::{Error, Result};
