//! Dual-weighted residual error estimation and its bookkeeping.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::fom::FullOrderModel;
use crate::slab::{SlabSystem, SlabVectors};

/// Estimator of one slab: `Σ_i Z_iᵀ(F - A U - B U_prev)_i` evaluated with full vectors.
pub fn full_space_estimate(
    system: &SlabSystem,
    u: &[DVector<f64>],
    previous_end: &DVector<f64>,
    z: &[DVector<f64>],
    load: &[DVector<f64>],
) -> f64 {
    let au = system.apply(u);
    let bu = system.apply_coupling(previous_end);
    let mut eta = 0.0;
    for i in 0..u.len() {
        let mut r = &load[i] - &au[i] - &bu[i];
        for (x, &c) in r.iter_mut().zip(system.constrained()) {
            if c {
                *x = 0.0;
            }
        }
        eta += z[i].dot(&r);
    }
    eta
}

/// Both sides of the discrete error identity for a linear goal:
/// `(J(u_fine) - J(u_coarse), Σ_m η_m)` with fine dual weights.
pub fn error_identity_check(
    fom: &FullOrderModel,
    u_fine: &[SlabVectors],
    u_coarse: &[SlabVectors],
    z_fine: &[SlabVectors],
) -> (f64, f64) {
    let j = |traj: &[SlabVectors]| traj.iter().map(|u| fom.slab_goal(u)).sum::<f64>();
    let lhs = j(u_fine) - j(u_coarse);
    let mut rhs = 0.0;
    let mut prev = fom.initial().clone();
    for (m, u) in u_coarse.iter().enumerate() {
        rhs += full_space_estimate(fom.system(), u, &prev, &z_fine[m], &fom.load(m));
        prev = fom.system().end_value(u);
    }
    (lhs, rhs)
}

/// Relative estimate `η / (J_slab + η)`. When the denominator is numerically zero,
/// `fallback` (a running mean of `|J_slab|`) is used instead.
pub fn relative_estimate(eta: f64, j_slab: f64, fallback: f64, j_total: f64) -> f64 {
    let denom = j_slab + eta;
    if denom.abs() < 1e-14 * (1.0 + j_total.abs()) {
        if fallback > 0.0 {
            eta / fallback
        } else if eta == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        eta / denom
    }
}

/// `|η / (J_fine - J_coarse)|`, `None` when the true error vanishes.
pub fn effectivity(j_fine: f64, j_coarse: f64, eta_total: f64) -> Option<f64> {
    let err = j_fine - j_coarse;
    if err == 0.0 || !err.is_finite() {
        None
    } else {
        Some((eta_total / err).abs())
    }
}

/// Agreement of the estimator with the true error relative to a tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Prediction {
    /// True error above, estimate below the tolerance: a missed violation.
    Underestimate = 1,
    /// True error below, estimate above: an unnecessary enrichment.
    Overestimate = 2,
    /// Both above.
    BothAbove = 3,
    /// Both below.
    BothBelow = 4,
}

impl Prediction {
    pub fn case(&self) -> u8 {
        *self as u8
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.case())
    }
}

pub fn classify(true_err_rel: f64, est_rel: f64, tol: f64) -> Prediction {
    match (true_err_rel.abs() > tol, est_rel.abs() > tol) {
        (true, false) => Prediction::Underestimate,
        (false, true) => Prediction::Overestimate,
        (true, true) => Prediction::BothAbove,
        (false, false) => Prediction::BothBelow,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn classification_examples() {
        assert_eq!(classify(0.02, 0.005, 0.01).case(), 1);
        assert_eq!(classify(0.005, 0.02, 0.01).case(), 2);
        assert_eq!(classify(0.02, 0.03, 0.01).case(), 3);
        assert_eq!(classify(0.001, 0.002, 0.01).case(), 4);
    }

    #[test]
    fn effectivity_examples() {
        assert_eq!(effectivity(2.0, 1.5, 0.5), Some(1.0));
        assert_eq!(effectivity(2.0, 1.5, -1.0), Some(2.0));
        assert_eq!(effectivity(1.0, 1.0, 0.3), None);
    }

    #[test]
    fn relative_estimate_guard() {
        assert!((relative_estimate(0.01, 0.99, 5.0, 1.0) - 0.01).abs() < 1e-15);
        assert_eq!(relative_estimate(1e-3, -1e-3, 0.5, 1.0), 2e-3);
        assert_eq!(relative_estimate(0.0, 0.0, 0.0, 0.0), 0.0);
        assert!(relative_estimate(1e-20, -1e-20, 0.0, 0.0).is_infinite());
    }

    proptest! {
        #[test]
        fn classify_is_total_and_consistent(err in -1.0f64..1.0, est in -1.0f64..1.0, tol in 1e-6f64..0.5) {
            let c = classify(err, est, tol);
            let expected_above = (err.abs() > tol, est.abs() > tol);
            let got = match c {
                Prediction::Underestimate => (true, false),
                Prediction::Overestimate => (false, true),
                Prediction::BothAbove => (true, true),
                Prediction::BothBelow => (false, false),
            };
            prop_assert_eq!(got, expected_above);
        }
    }
}
