use nalgebra::DVector;

use super::assembly::{FieldKind, SpatialOperators};
use super::element::ReferenceElement;
use super::mesh::{Face, SpatialMesh};
use super::source::QuadratureCloud;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// A quadrature point on the boundary with the data of its cell.
#[derive(Debug, Clone)]
pub struct FacePoint {
    pub nodes: Vec<usize>,
    pub values: Vec<f64>,
    /// Physical gradients of the cell's shape functions.
    pub grads: Vec<[f64; 3]>,
    pub weight: f64,
}

/// Tensor Gauss points on every cell face lying on `face`.
pub fn face_quadrature(mesh: &SpatialMesh, face: Face) -> Vec<FacePoint> {
    let dim = mesh.dim();
    let el = ReferenceElement::new(dim, mesh.degree());
    let (qp, qw) = gauss_legendre(mesh.degree() + 1);
    let tangential: Vec<usize> = (0..dim).filter(|&a| a != face.axis).collect();
    let per = |i: usize| if i < tangential.len() { qp.len() } else { 1 };
    let mut ref_points = Vec::new();
    for j in 0..per(1) {
        for i in 0..per(0) {
            let mut x = [0.0; 3];
            x[face.axis] = if face.upper { 1.0 } else { 0.0 };
            let mut w = 1.0;
            for (t, &a) in tangential.iter().enumerate() {
                let idx = [i, j][t];
                x[a] = qp[idx];
                w *= qw[idx] * mesh.cell_size(a);
            }
            ref_points.push((x, w));
        }
    }
    let evaluated: Vec<_> = ref_points
        .iter()
        .map(|(x, w)| {
            let (v, g) = el.evaluate(*x);
            let g = g
                .into_iter()
                .map(|r| {
                    let mut p = [0.0; 3];
                    for a in 0..dim {
                        p[a] = r[a] / mesh.cell_size(a);
                    }
                    p
                })
                .collect::<Vec<_>>();
            (v, g, *w)
        })
        .collect();
    let mut out = Vec::new();
    for cell in mesh.cells_on_face(face) {
        let nodes = mesh.cell_nodes(cell);
        for (v, g, w) in &evaluated {
            out.push(FacePoint { nodes: nodes.clone(), values: v.clone(), grads: g.clone(), weight: *w });
        }
    }
    out
}

/// `g_i = ∫_ω φ_i` for the box `ω = [lower, upper]`, constrained entries zeroed.
pub fn subdomain_vector(mesh: &SpatialMesh, ops: &SpatialOperators, lower: &[f64], upper: &[f64]) -> Result<DVector<f64>> {
    if lower.len() != mesh.dim() || upper.len() != mesh.dim() {
        return Err(Error::config("goal.subdomain", format!("need {} bounds per corner", mesh.dim())));
    }
    if ops.field != FieldKind::Scalar {
        return Err(Error::config("goal", "subdomain mean values are defined for scalar problems"));
    }
    let cloud = QuadratureCloud::new(mesh);
    let mut g = DVector::zeros(ops.dofs());
    for q in 0..cloud.len() {
        let x = cloud.coords(q);
        if (0..mesh.dim()).all(|a| lower[a] <= x[a] && x[a] <= upper[a]) {
            cloud.for_each_shape(q, |node, w| g[node] += w);
        }
    }
    ops.apply_constraints(g.as_mut_slice());
    Ok(g)
}

/// `s_i = ∫_face (σ(φ_i)·n)_component` over the displacement unknowns.
pub fn boundary_stress_vector(
    mesh: &SpatialMesh,
    ops: &SpatialOperators,
    face: Face,
    component: usize,
) -> Result<DVector<f64>> {
    let FieldKind::Elastic { dim, material } = ops.field else {
        return Err(Error::config("goal", "boundary stress needs an elastodynamics problem"));
    };
    if component >= dim || face.axis >= dim {
        return Err(Error::config("goal.component", format!("component and face axis must be below {dim}")));
    }
    let n = face.normal();
    let (mu, lambda) = (material.mu, material.lambda);
    let k = component;
    let mut s = DVector::zeros(ops.dofs());
    for fp in face_quadrature(mesh, face) {
        for (node, grad) in fp.nodes.iter().zip(&fp.grads) {
            let dn: f64 = (0..dim).map(|a| grad[a] * n[a]).sum();
            for c in 0..dim {
                // Traction component k of σ(N e_c)·n.
                let mut t = mu * n[c] * grad[k] + lambda * n[k] * grad[c];
                if c == k {
                    t += mu * dn;
                }
                s[ops.primary_dof(*node, c)] += fp.weight * t;
            }
        }
    }
    ops.apply_constraints(s.as_mut_slice());
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{assemble_elasto, assemble_heat, build_mesh, Material};

    #[test]
    fn subdomain_vector_measures_the_left_half() {
        let m = build_mesh(1, &[(0.0, 1.0)], &[64], 1).unwrap();
        let ops = assemble_heat(&m, &[]).unwrap();
        let g = subdomain_vector(&m, &ops, &[0.0], &[0.5]).unwrap();
        assert!((g.sum() - 0.5).abs() < 1e-14);
        let x = DVector::from_fn(ops.dofs(), |i, _| m.node_coords(i)[0]);
        assert!((g.dot(&x) - 0.125).abs() < 1e-14);
    }

    #[test]
    fn face_quadrature_measures_the_face() {
        let m = build_mesh(3, &[(0.0, 6.0), (0.0, 1.0), (0.0, 2.0)], &[3, 2, 2], 2).unwrap();
        let area: f64 = face_quadrature(&m, Face::upper(2)).iter().map(|p| p.weight).sum();
        assert!((area - 6.0).abs() < 1e-13);
        let area: f64 = face_quadrature(&m, Face::lower(0)).iter().map(|p| p.weight).sum();
        assert!((area - 2.0).abs() < 1e-13);
    }

    #[test]
    fn stress_of_a_uniform_strain_is_exact() {
        let m = build_mesh(3, &[(0.0, 2.0), (0.0, 1.0), (0.0, 1.0)], &[2, 1, 1], 1).unwrap();
        let mat = Material { mu: 2.0, lambda: 3.0 };
        let ops = assemble_elasto(&m, mat, &[Face::upper(0)]).unwrap();
        // u = (x1, 0, 0): σ11 = 2μ + λ, σ22 = σ33 = λ. On x1 = 0 the normal is -e1.
        let mut u = DVector::zeros(ops.dofs());
        for node in 0..m.num_nodes() {
            u[node * 3] = m.node_coords(node)[0];
        }
        let s0 = boundary_stress_vector(&m, &ops, Face::lower(0), 0).unwrap();
        assert!((s0.dot(&u) + (2.0 * 2.0 + 3.0)).abs() < 1e-12);
        let s1 = boundary_stress_vector(&m, &ops, Face::lower(0), 1).unwrap();
        assert!(s1.dot(&u).abs() < 1e-12);
        // u = (0, x1, 0): shear σ12 = μ, traction on x1 = 0 is -μ e2.
        let mut w = DVector::zeros(ops.dofs());
        for node in 0..m.num_nodes() {
            w[node * 3 + 1] = m.node_coords(node)[0];
        }
        assert!((s1.dot(&w) + 2.0).abs() < 1e-12);
    }
}
