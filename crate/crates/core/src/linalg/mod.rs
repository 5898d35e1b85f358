//! Linear algebra plumbing: compressed sparse rows, banded LU and bandwidth-reducing orderings.

mod banded;
mod ordering;
mod sparse;

pub use banded::BandedLu;
pub use ordering::reverse_cuthill_mckee;
pub use sparse::{CsrMatrix, TripletBuilder};

use nalgebra::DVector;

/// Max-norm of a vector, 0 for empty input.
pub fn norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}
