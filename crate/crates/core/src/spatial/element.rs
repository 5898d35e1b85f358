use crate::quadrature::gauss_legendre;

/// Equispaced 1D Lagrange polynomial `i` of degree `s` at `x ∈ [0, 1]`, with derivative.
pub(crate) fn lagrange_1d(s: usize, i: usize, x: f64) -> (f64, f64) {
    let node = |j: usize| j as f64 / s as f64;
    let mut value = 1.0;
    let mut deriv = 0.0;
    for j in (0..=s).filter(|&j| j != i) {
        let denom = node(i) - node(j);
        let factor = (x - node(j)) / denom;
        deriv = deriv * factor + value / denom;
        value *= factor;
    }
    (value, deriv)
}

/// `Q_s` shape functions on the unit cell `[0, 1]^dim` with a tensor Gauss rule
/// of `s + 1` points per axis.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    dim: usize,
    degree: usize,
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
    values: Vec<Vec<f64>>,
    grads: Vec<Vec<[f64; 3]>>,
}

impl ReferenceElement {
    pub fn new(dim: usize, degree: usize) -> Self {
        let (qp, qw) = gauss_legendre(degree + 1);
        let nq1 = qp.len();
        let per = |a: usize| if a < dim { nq1 } else { 1 };
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for k in 0..per(2) {
            for j in 0..per(1) {
                for i in 0..per(0) {
                    let idx = [i, j, k];
                    let mut x = [0.0; 3];
                    let mut w = 1.0;
                    for a in 0..dim {
                        x[a] = qp[idx[a]];
                        w *= qw[idx[a]];
                    }
                    points.push(x);
                    weights.push(w);
                }
            }
        }
        let mut el = ReferenceElement {
            dim,
            degree,
            points: Vec::new(),
            weights,
            values: Vec::new(),
            grads: Vec::new(),
        };
        for x in &points {
            let (v, g) = el.evaluate(*x);
            el.values.push(v);
            el.grads.push(g);
        }
        el.points = points;
        el
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_shapes(&self) -> usize {
        (self.degree + 1).pow(self.dim as u32)
    }

    /// Reference quadrature points (unused axes are 0).
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Reference weights; they sum to 1.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `values()[q][a]`: shape `a` at quadrature point `q`.
    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Reference gradients at the quadrature points.
    pub fn grads(&self) -> &[Vec<[f64; 3]>] {
        &self.grads
    }

    /// Shape values and reference gradients at an arbitrary point of the unit cell.
    pub fn evaluate(&self, x: [f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
        let s = self.degree;
        let per = |a: usize| if a < self.dim { s + 1 } else { 1 };
        let one_d: Vec<Vec<(f64, f64)>> = (0..self.dim)
            .map(|a| (0..=s).map(|i| lagrange_1d(s, i, x[a])).collect())
            .collect();
        let mut values = Vec::with_capacity(self.num_shapes());
        let mut grads = Vec::with_capacity(self.num_shapes());
        for k in 0..per(2) {
            for j in 0..per(1) {
                for i in 0..per(0) {
                    let idx = [i, j, k];
                    let mut v = 1.0;
                    for a in 0..self.dim {
                        v *= one_d[a][idx[a]].0;
                    }
                    let mut g = [0.0; 3];
                    for (d, gd) in g.iter_mut().enumerate().take(self.dim) {
                        let mut prod = 1.0;
                        for a in 0..self.dim {
                            prod *= if a == d { one_d[a][idx[a]].1 } else { one_d[a][idx[a]].0 };
                        }
                        *gd = prod;
                    }
                    values.push(v);
                    grads.push(g);
                }
            }
        }
        (values, grads)
    }
}
