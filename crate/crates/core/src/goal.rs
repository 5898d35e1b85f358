//! Time-averaged goal functionals and their slab-wise derivatives.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::spatial::{boundary_stress_vector, subdomain_vector, Face, SpatialMesh, SpatialOperators};
use crate::temporal::TemporalMatrices;

/// Goal functional as written in a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GoalSpec {
    /// `(1/T) ∫_I ∫_ω u` over the box `ω = [lower, upper]`.
    MeanValueSubdomain { lower: Vec<f64>, upper: Vec<f64> },
    /// `(1/T) ∫_I ∫_Ω u²`.
    SquaredL2,
    /// `(1/T) ∫_I ∫_Γ (σ(u)·n)_component` on one face of the box.
    BoundaryStress { axis: usize, upper: bool, component: usize },
}

/// Spatial part of a goal: a linear density `gᵀu` or a quadratic form `uᵀMu`.
#[derive(Debug, Clone)]
pub enum GoalDensity {
    Linear(DVector<f64>),
    Quadratic(CsrMatrix),
}

/// A goal bound to a discretization, scaled by `1/T`.
#[derive(Debug, Clone)]
pub struct Goal {
    spec: GoalSpec,
    scale: f64,
    density: GoalDensity,
}

impl Goal {
    pub fn new(spec: &GoalSpec, mesh: &SpatialMesh, ops: &SpatialOperators, duration: f64) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::config("T", "time horizon must be positive"));
        }
        let density = match spec {
            GoalSpec::MeanValueSubdomain { lower, upper } => {
                GoalDensity::Linear(subdomain_vector(mesh, ops, lower, upper)?)
            }
            GoalSpec::SquaredL2 => GoalDensity::Quadratic(ops.mass.clone()),
            GoalSpec::BoundaryStress { axis, upper, component } => {
                let face = Face { axis: *axis, upper: *upper };
                GoalDensity::Linear(boundary_stress_vector(mesh, ops, face, *component)?)
            }
        };
        Ok(Goal { spec: spec.clone(), scale: 1.0 / duration, density })
    }

    /// Goal from an explicit density, for tests and custom drivers.
    pub fn from_density(density: GoalDensity, duration: f64) -> Self {
        let spec = match density {
            GoalDensity::Linear(_) => GoalSpec::MeanValueSubdomain { lower: vec![], upper: vec![] },
            GoalDensity::Quadratic(_) => GoalSpec::SquaredL2,
        };
        Goal { spec, scale: 1.0 / duration, density }
    }

    pub fn spec(&self) -> &GoalSpec {
        &self.spec
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn density(&self) -> &GoalDensity {
        &self.density
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.density, GoalDensity::Linear(_))
    }

    /// Contribution of one slab with temporal coefficients `u`.
    pub fn slab_value(&self, tm: &TemporalMatrices, u: &[DVector<f64>]) -> f64 {
        match &self.density {
            GoalDensity::Linear(g) => {
                self.scale * u.iter().zip(tm.integrals.iter()).map(|(ui, w)| w * g.dot(ui)).sum::<f64>()
            }
            GoalDensity::Quadratic(m) => {
                let mu: Vec<DVector<f64>> = u.iter().map(|ui| m.mul_vec(ui)).collect();
                let mut total = 0.0;
                for (i, ui) in u.iter().enumerate() {
                    for (j, muj) in mu.iter().enumerate() {
                        total += tm.mass[(i, j)] * ui.dot(muj);
                    }
                }
                self.scale * total
            }
        }
    }

    /// Slab right-hand side of the dual problem, `J'(u)(φ_i)` per temporal node.
    /// Quadratic goals need the linearization point `state`.
    pub fn slab_rhs(&self, tm: &TemporalMatrices, state: Option<&[DVector<f64>]>) -> Result<Vec<DVector<f64>>> {
        match &self.density {
            GoalDensity::Linear(g) => Ok(tm.integrals.iter().map(|w| g * (self.scale * w)).collect()),
            GoalDensity::Quadratic(m) => {
                let u = state.ok_or_else(|| {
                    Error::config("goal", "squared L2 goal needs a linearization state for its derivative")
                })?;
                let mu: Vec<DVector<f64>> = u.iter().map(|ui| m.mul_vec(ui)).collect();
                Ok((0..tm.len())
                    .map(|i| {
                        let mut r = DVector::zeros(m.nrows());
                        for (j, muj) in mu.iter().enumerate() {
                            r.axpy(2.0 * self.scale * tm.mass[(i, j)], muj, 1.0);
                        }
                        r
                    })
                    .collect())
            }
        }
    }
}
