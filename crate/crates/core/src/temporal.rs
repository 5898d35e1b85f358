//! Discontinuous Galerkin dG(r) time discretization: nodal bases on the
//! reference interval and the per-interval matrices `M_k`, `C_k`, `D_k`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, gauss_lobatto};

/// Node family defining the location of the temporal degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeFamily {
    GaussLegendre,
    GaussLobatto,
}

/// Uniform partition of `(start, end)` into `intervals` time slabs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalGrid {
    start: f64,
    end: f64,
    intervals: usize,
}

impl TemporalGrid {
    pub fn new(start: f64, end: f64, intervals: usize) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::config("M", "need at least one time interval"));
        }
        if !(end > start) || !start.is_finite() || !end.is_finite() {
            return Err(Error::config("T", format!("invalid time domain ({start}, {end})")));
        }
        Ok(Self { start, end, intervals })
    }

    pub fn len(&self) -> usize {
        self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals == 0
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    /// Length of the time domain.
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Uniform step size `k`.
    pub fn step(&self) -> f64 {
        self.duration() / self.intervals as f64
    }

    /// Bounds `(t_{m-1}, t_m)` of the zero-based interval `m`.
    pub fn interval(&self, m: usize) -> (f64, f64) {
        let k = self.step();
        let lo = self.start + m as f64 * k;
        let hi = if m + 1 == self.intervals {
            self.end
        } else {
            self.start + (m + 1) as f64 * k
        };
        (lo, hi)
    }

    pub fn midpoint(&self, m: usize) -> f64 {
        let (a, b) = self.interval(m);
        0.5 * (a + b)
    }
}

/// Lagrange basis of degree `r` on `[0, 1]` with nodes of the given family.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalBasis {
    degree: usize,
    family: NodeFamily,
    nodes: Vec<f64>,
}

impl TemporalBasis {
    pub fn new(degree: usize, family: NodeFamily) -> Result<Self> {
        let nodes = match family {
            NodeFamily::GaussLegendre => gauss_legendre(degree + 1).0,
            NodeFamily::GaussLobatto => {
                if degree == 0 {
                    return Err(Error::config(
                        "r",
                        "Gauss-Lobatto nodes need a temporal degree of at least 1",
                    ));
                }
                gauss_lobatto(degree + 1).0
            }
        };
        Ok(Self { degree, family, nodes })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn family(&self) -> NodeFamily {
        self.family
    }

    /// Number of temporal degrees of freedom per interval, `r + 1`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn value(&self, i: usize, tau: f64) -> f64 {
        let xi = self.nodes[i];
        self.nodes
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &xj)| (tau - xj) / (xi - xj))
            .product()
    }

    pub fn derivative(&self, i: usize, tau: f64) -> f64 {
        let xi = self.nodes[i];
        let mut total = 0.0;
        for (l, &xl) in self.nodes.iter().enumerate() {
            if l == i {
                continue;
            }
            let mut term = 1.0 / (xi - xl);
            for (j, &xj) in self.nodes.iter().enumerate() {
                if j != i && j != l {
                    term *= (tau - xj) / (xi - xj);
                }
            }
            total += term;
        }
        total
    }

    pub fn values(&self, tau: f64) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i, tau)).collect()
    }
}

/// Temporal matrices of one interval of length `k`.
///
/// Entries follow the `[test i][trial j]` convention.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMatrices {
    /// Step size the matrices were built for.
    pub step: f64,
    /// `∫ φ_j φ_i dt`.
    pub mass: DMatrix<f64>,
    /// `∫ ∂_t φ_j φ_i dt` without the jump term.
    pub derivative_no_jump: DMatrix<f64>,
    /// `φ_j(t_{m-1}^+) φ_i(t_{m-1}^+)`.
    pub start_jump: DMatrix<f64>,
    /// `φ_j(t_{m-1}^-) φ_i(t_{m-1}^+)`, with `φ_j` taken from the previous interval.
    pub coupling: DMatrix<f64>,
    /// Basis values at the left end of the interval.
    pub left_values: DVector<f64>,
    /// Basis values at the right end of the interval.
    pub right_values: DVector<f64>,
    /// `∫ φ_i dt`.
    pub integrals: DVector<f64>,
    /// Internal quadrature points on `[0, 1]` for time integrals of data.
    pub quad_points: Vec<f64>,
    /// Weights of `quad_points`, scaled to the physical interval length.
    pub quad_weights: Vec<f64>,
    /// `quad_basis[(q, i)] = φ_i(quad_points[q])`.
    pub quad_basis: DMatrix<f64>,
}

impl TemporalMatrices {
    /// Jump-augmented derivative matrix `C_k` used by the slab systems.
    pub fn derivative(&self) -> DMatrix<f64> {
        &self.derivative_no_jump + &self.start_jump
    }

    pub fn len(&self) -> usize {
        self.mass.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.nrows() == 0
    }
}

/// Temporal matrices on an interval of length `k`, computed on `(0, 1)` with an
/// `(r + 2)`-point Gauss rule and scaled.
pub fn temporal_matrices(basis: &TemporalBasis, k: f64) -> Result<TemporalMatrices> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::config("k", format!("time step must be positive, got {k}")));
    }
    let n = basis.len();
    let (qp, qw) = gauss_legendre(basis.degree() + 2);
    let quad_basis = DMatrix::from_fn(qp.len(), n, |q, i| basis.value(i, qp[q]));
    let quad_deriv = DMatrix::from_fn(qp.len(), n, |q, i| basis.derivative(i, qp[q]));

    let mut mass = DMatrix::zeros(n, n);
    let mut deriv = DMatrix::zeros(n, n);
    let mut integrals = DVector::zeros(n);
    for q in 0..qp.len() {
        for i in 0..n {
            integrals[i] += k * qw[q] * quad_basis[(q, i)];
            for j in 0..n {
                mass[(i, j)] += k * qw[q] * quad_basis[(q, j)] * quad_basis[(q, i)];
                deriv[(i, j)] += qw[q] * quad_deriv[(q, j)] * quad_basis[(q, i)];
            }
        }
    }
    let left = DVector::from_vec(basis.values(0.0));
    let right = DVector::from_vec(basis.values(1.0));
    let start_jump = &left * left.transpose();
    let coupling = &left * right.transpose();

    Ok(TemporalMatrices {
        step: k,
        mass,
        derivative_no_jump: deriv,
        start_jump,
        coupling,
        left_values: left,
        right_values: right,
        integrals,
        quad_points: qp,
        quad_weights: qw.iter().map(|w| w * k).collect(),
        quad_basis,
    })
}

/// The four matrices of the split form used by elastodynamics:
/// `(M_k, C_k without jump, D_k^1, D_k^2)`.
pub fn temporal_matrices_split(
    basis: &TemporalBasis,
    k: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let t = temporal_matrices(basis, k)?;
    Ok((t.mass, t.derivative_no_jump, t.start_jump, t.coupling))
}

/// `Σ_i coeffs[i] φ_i(τ)`: reconstructs a space vector at reference time `τ`.
pub fn evaluate_in_time(coeffs: &[DVector<f64>], basis: &TemporalBasis, tau: f64) -> DVector<f64> {
    assert_eq!(coeffs.len(), basis.len(), "one coefficient vector per temporal node");
    let n = coeffs.first().map_or(0, |c| c.len());
    let mut out = DVector::zeros(n);
    for (i, c) in coeffs.iter().enumerate() {
        out.axpy(basis.value(i, tau), c, 1.0);
    }
    out
}
