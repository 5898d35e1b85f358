use serde::{Deserialize, Serialize};

use super::element::ReferenceElement;
use super::mesh::{Face, SpatialMesh};
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, TripletBuilder};

/// Lamé parameters of an isotropic linear elastic body (unit density).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub mu: f64,
    pub lambda: f64,
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::config("material.mu", format!("shear modulus must be positive, got {}", self.mu)));
        }
        if !self.lambda.is_finite() || 3.0 * self.lambda + 2.0 * self.mu <= 0.0 {
            return Err(Error::config(
                "material.lambda",
                format!("3·lambda + 2·mu must be positive, got lambda = {}", self.lambda),
            ));
        }
        Ok(())
    }
}

/// What the spatial unknowns represent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldKind {
    /// One scalar per node.
    Scalar,
    /// Displacement and velocity: all `u` components first (node-major), then all `v`.
    Elastic { dim: usize, material: Material },
}

/// Spatial operators `M_h`, `K_h` with the Dirichlet rows replaced by identity rows.
#[derive(Debug, Clone)]
pub struct SpatialOperators {
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    /// `true` for constrained degrees of freedom.
    pub constrained: Vec<bool>,
    pub field: FieldKind,
    /// Nodes of the underlying mesh.
    pub nodes: usize,
}

impl SpatialOperators {
    pub fn dofs(&self) -> usize {
        self.constrained.len()
    }

    /// Number of displacement (or scalar) unknowns per node.
    pub fn components(&self) -> usize {
        match self.field {
            FieldKind::Scalar => 1,
            FieldKind::Elastic { dim, .. } => dim,
        }
    }

    /// Index of the displacement (or scalar) unknown `c` at `node`.
    pub fn primary_dof(&self, node: usize, c: usize) -> usize {
        node * self.components() + c
    }

    /// Row receiving body forces and tractions in component `c` at `node`: the
    /// scalar unknown for heat, the momentum equation for elastodynamics.
    pub fn forcing_dof(&self, node: usize, c: usize) -> usize {
        match self.field {
            FieldKind::Scalar => node,
            FieldKind::Elastic { dim, .. } => (self.nodes + node) * dim + c,
        }
    }

    /// Zeroes the constrained entries of `v`.
    pub fn apply_constraints(&self, v: &mut [f64]) {
        for (x, &c) in v.iter_mut().zip(&self.constrained) {
            if c {
                *x = 0.0;
            }
        }
    }
}

/// Element matrices on a uniform cell: `mass[a][b]` and
/// `grad[a][b][c1][c2] = ∫ ∂_{c1}N_a ∂_{c2}N_b`.
pub(crate) struct CellMatrices {
    pub mass: Vec<Vec<f64>>,
    pub grad: Vec<Vec<[[f64; 3]; 3]>>,
}

pub(crate) fn cell_matrices(mesh: &SpatialMesh, el: &ReferenceElement) -> CellMatrices {
    let dim = mesh.dim();
    let h: Vec<f64> = (0..dim).map(|a| mesh.cell_size(a)).collect();
    let jac: f64 = h.iter().product();
    let n = el.num_shapes();
    let mut mass = vec![vec![0.0; n]; n];
    let mut grad = vec![vec![[[0.0; 3]; 3]; n]; n];
    for q in 0..el.weights().len() {
        let w = el.weights()[q] * jac;
        let v = &el.values()[q];
        let g: Vec<[f64; 3]> = el.grads()[q]
            .iter()
            .map(|r| {
                let mut p = [0.0; 3];
                for a in 0..dim {
                    p[a] = r[a] / h[a];
                }
                p
            })
            .collect();
        for a in 0..n {
            for b in 0..n {
                mass[a][b] += w * v[a] * v[b];
                for c1 in 0..dim {
                    for c2 in 0..dim {
                        grad[a][b][c1][c2] += w * g[a][c1] * g[b][c2];
                    }
                }
            }
        }
    }
    CellMatrices { mass, grad }
}

fn constrained_nodes(mesh: &SpatialMesh, faces: &[Face]) -> Result<Vec<bool>> {
    for f in faces {
        if f.axis >= mesh.dim() {
            return Err(Error::config(
                "dirichlet",
                format!("face on axis {} does not exist in {} dimensions", f.axis, mesh.dim()),
            ));
        }
    }
    Ok((0..mesh.num_nodes())
        .map(|node| faces.iter().any(|&f| mesh.node_on_face(node, f)))
        .collect())
}

fn push_unless_constrained(b: &mut TripletBuilder, constrained: &[bool], i: usize, j: usize, v: f64) {
    if !constrained[i] && !constrained[j] {
        b.push(i, j, v);
    }
}

fn add_identity_rows(b: &mut TripletBuilder, constrained: &[bool]) {
    for (i, &c) in constrained.iter().enumerate() {
        if c {
            b.push(i, i, 1.0);
        }
    }
}

/// Mass and Laplace stiffness of the scalar heat problem with homogeneous
/// Dirichlet conditions on `dirichlet`.
pub fn assemble_heat(mesh: &SpatialMesh, dirichlet: &[Face]) -> Result<SpatialOperators> {
    let el = ReferenceElement::new(mesh.dim(), mesh.degree());
    let cm = cell_matrices(mesh, &el);
    let constrained = constrained_nodes(mesh, dirichlet)?;
    let n = mesh.num_nodes();
    let loc = el.num_shapes();
    let cap = mesh.num_cells() * loc * loc;
    let mut mb = TripletBuilder::with_capacity(n, n, cap);
    let mut kb = TripletBuilder::with_capacity(n, n, cap);
    for cell in 0..mesh.num_cells() {
        let nodes = mesh.cell_nodes(cell);
        for (a, &i) in nodes.iter().enumerate() {
            for (b, &j) in nodes.iter().enumerate() {
                let g = &cm.grad[a][b];
                let lap: f64 = (0..mesh.dim()).map(|c| g[c][c]).sum();
                push_unless_constrained(&mut mb, &constrained, i, j, cm.mass[a][b]);
                push_unless_constrained(&mut kb, &constrained, i, j, lap);
            }
        }
    }
    add_identity_rows(&mut mb, &constrained);
    add_identity_rows(&mut kb, &constrained);
    Ok(SpatialOperators {
        mass: mb.build(),
        stiffness: kb.build(),
        constrained,
        field: FieldKind::Scalar,
        nodes: n,
    })
}

/// Unconstrained elastic stiffness `(σ(φ_j), ∇φ_i)` on displacement unknowns `node * dim + c`.
pub fn elastic_stiffness(mesh: &SpatialMesh, material: Material) -> Result<CsrMatrix> {
    material.validate()?;
    let dim = mesh.dim();
    let el = ReferenceElement::new(dim, mesh.degree());
    let cm = cell_matrices(mesh, &el);
    let n = mesh.num_nodes() * dim;
    let loc = el.num_shapes() * dim;
    let mut kb = TripletBuilder::with_capacity(n, n, mesh.num_cells() * loc * loc);
    for cell in 0..mesh.num_cells() {
        let nodes = mesh.cell_nodes(cell);
        for (a, &na) in nodes.iter().enumerate() {
            for (b, &nb) in nodes.iter().enumerate() {
                let g = &cm.grad[a][b];
                let lap: f64 = (0..dim).map(|c| g[c][c]).sum();
                for c1 in 0..dim {
                    for c2 in 0..dim {
                        // 2μ ε(φ_j):∇φ_i + λ div φ_j div φ_i with φ_i = N_a e_{c1}, φ_j = N_b e_{c2}.
                        let mut s = material.mu * g[c2][c1] + material.lambda * g[c1][c2];
                        if c1 == c2 {
                            s += material.mu * lap;
                        }
                        kb.push(na * dim + c1, nb * dim + c2, s);
                    }
                }
            }
        }
    }
    Ok(kb.build())
}

/// First-order elastodynamics operators on `[u; v]`.
///
/// The kinematic equation is tested in the energy product and the momentum
/// equation in `L²`: `M_h = diag(K, M)`, `K_h = [[0, -K], [K, 0]]`. The reduced
/// mass `ZᵀM_hZ` stays positive definite and the reduced `K_h` stays skew in
/// the energy norm, so Galerkin projection with one basis for `[u; v]` is stable.
/// Needs at least one clamped face, otherwise `K` is singular.
pub fn assemble_elasto(mesh: &SpatialMesh, material: Material, clamped: &[Face]) -> Result<SpatialOperators> {
    if clamped.is_empty() {
        return Err(Error::config("dirichlet", "elastodynamics needs at least one clamped face"));
    }
    let stiff = elastic_stiffness(mesh, material)?;
    let dim = mesh.dim();
    let node_constrained = constrained_nodes(mesh, clamped)?;
    let nn = mesh.num_nodes();
    let half = nn * dim;
    let ndof = 2 * half;
    let constrained: Vec<bool> = (0..ndof).map(|i| node_constrained[(i % half) / dim]).collect();
    let scalar = assemble_heat(mesh, &[])?.mass;
    let mut mb = TripletBuilder::with_capacity(ndof, ndof, 2 * stiff.nnz());
    let mut kb = TripletBuilder::with_capacity(ndof, ndof, 2 * stiff.nnz());
    for i in 0..half {
        let (cols, vals) = stiff.row(i);
        for (&j, &s) in cols.iter().zip(vals) {
            push_unless_constrained(&mut mb, &constrained, i, j, s);
            push_unless_constrained(&mut kb, &constrained, i, half + j, -s);
            push_unless_constrained(&mut kb, &constrained, half + i, j, s);
        }
    }
    for a in 0..nn {
        let (cols, vals) = scalar.row(a);
        for (&b, &m) in cols.iter().zip(vals) {
            for c in 0..dim {
                push_unless_constrained(&mut mb, &constrained, half + a * dim + c, half + b * dim + c, m);
            }
        }
    }
    add_identity_rows(&mut mb, &constrained);
    add_identity_rows(&mut kb, &constrained);
    Ok(SpatialOperators {
        mass: mb.build(),
        stiffness: kb.build(),
        constrained,
        field: FieldKind::Elastic { dim, material },
        nodes: nn,
    })
}

/// Scalar mass matrix without boundary conditions.
pub fn scalar_mass(mesh: &SpatialMesh) -> CsrMatrix {
    assemble_heat(mesh, &[]).expect("no faces to validate").mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::mesh::build_mesh;
    use nalgebra::DVector;

    #[test]
    fn p1_matrices_in_one_dimension() {
        let m = build_mesh(1, &[(0.0, 1.0)], &[4], 1).unwrap();
        let ops = assemble_heat(&m, &[]).unwrap();
        let h = 0.25;
        assert!((ops.mass.get(1, 1) - 4.0 * h / 6.0).abs() < 1e-15);
        assert!((ops.mass.get(1, 2) - h / 6.0).abs() < 1e-15);
        assert!((ops.stiffness.get(1, 1) - 2.0 / h).abs() < 1e-12);
        assert!((ops.stiffness.get(1, 2) + 1.0 / h).abs() < 1e-12);
        assert!((ops.mass.get(0, 0) - 2.0 * h / 6.0).abs() < 1e-15);
    }

    #[test]
    fn mass_integrates_constants_and_stiffness_kills_them() {
        for (dim, s) in [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1)] {
            let ext = vec![(0.0, 1.5); dim];
            let m = build_mesh(dim, &ext, &vec![3; dim], s).unwrap();
            let ops = assemble_heat(&m, &[]).unwrap();
            let one = DVector::from_element(ops.dofs(), 1.0);
            let vol = one.dot(&ops.mass.mul_vec(&one));
            assert!((vol - 1.5f64.powi(dim as i32)).abs() < 1e-12);
            assert!(ops.stiffness.mul_vec(&one).amax() < 1e-11);
            assert!(ops.mass.asymmetry() < 1e-15);
        }
    }

    #[test]
    fn stiffness_energy_of_a_linear_function() {
        // ∫|∇x|² = area for u = x on the unit square.
        let m = build_mesh(2, &[(0.0, 1.0), (0.0, 1.0)], &[5, 4], 1).unwrap();
        let ops = assemble_heat(&m, &[]).unwrap();
        let u = DVector::from_fn(ops.dofs(), |i, _| m.node_coords(i)[0]);
        assert!((u.dot(&ops.stiffness.mul_vec(&u)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_rows_become_identity() {
        let m = build_mesh(1, &[(0.0, 1.0)], &[4], 1).unwrap();
        let ops = assemble_heat(&m, &m.all_faces()).unwrap();
        assert!(ops.constrained[0] && ops.constrained[4] && !ops.constrained[2]);
        assert_eq!(ops.mass.get(0, 0), 1.0);
        assert_eq!(ops.mass.get(0, 1), 0.0);
        assert_eq!(ops.mass.get(1, 0), 0.0);
        assert_eq!(ops.stiffness.get(4, 4), 1.0);
    }

    #[test]
    fn elastic_energy_of_rigid_motions_and_a_shear() {
        let m = build_mesh(3, &[(0.0, 2.0), (0.0, 1.0), (0.0, 1.0)], &[2, 2, 2], 1).unwrap();
        let k = elastic_stiffness(&m, Material { mu: 1.3, lambda: 0.7 }).unwrap();
        let field = |f: &dyn Fn([f64; 3]) -> [f64; 3]| {
            let mut v = DVector::zeros(m.num_nodes() * 3);
            for node in 0..m.num_nodes() {
                let u = f(m.node_coords(node));
                for c in 0..3 {
                    v[node * 3 + c] = u[c];
                }
            }
            v
        };
        assert!(k.asymmetry() < 1e-13);
        let rotation = field(&|x| [-x[1], x[0], 0.0]);
        assert!(k.mul_vec(&rotation).amax() < 1e-11);
        let translation = field(&|_| [0.3, -1.0, 2.0]);
        assert!(k.mul_vec(&translation).amax() < 1e-11);
        // u = (x2, 0, 0): ε has ε12 = 1/2, energy ∫ 2μ ε:ε = μ·volume.
        let shear = field(&|x| [x[1], 0.0, 0.0]);
        assert!((shear.dot(&k.mul_vec(&shear)) - 1.3 * 2.0).abs() < 1e-12);
        // u = (x1, 0, 0): energy (2μ + λ)·volume.
        let stretch = field(&|x| [x[0], 0.0, 0.0]);
        assert!((stretch.dot(&k.mul_vec(&stretch)) - (2.0 * 1.3 + 0.7) * 2.0).abs() < 1e-12);
    }

    #[test]
    fn elastic_blocks_have_the_expected_structure() {
        let m = build_mesh(2, &[(0.0, 1.0), (0.0, 1.0)], &[2, 2], 1).unwrap();
        let mat = Material { mu: 1.0, lambda: 1.0 };
        let ops = assemble_elasto(&m, mat, &[Face::lower(0)]).unwrap();
        let k = elastic_stiffness(&m, mat).unwrap();
        let half = m.num_nodes() * 2;
        assert_eq!(ops.dofs(), 2 * half);
        assert!(ops.mass.asymmetry() < 1e-15);
        // Node 4 is interior.
        let (u, v) = (4 * 2, half + 4 * 2);
        assert_eq!(ops.mass.get(u, u), k.get(u, u));
        assert_eq!(ops.mass.get(u, v), 0.0);
        assert!((ops.mass.get(v, v) - 4.0 / 9.0 * 0.25).abs() < 1e-15);
        assert_eq!(ops.stiffness.get(u, v), -k.get(u, u));
        assert_eq!(ops.stiffness.get(v, u), k.get(u, u));
        assert_eq!(ops.stiffness.get(u, u), 0.0);
        assert_eq!(ops.stiffness.get(v, v), 0.0);
        // Skew on the free unknowns.
        let dense = ops.stiffness.to_dense();
        for i in 0..ops.dofs() {
            for j in 0..ops.dofs() {
                if !ops.constrained[i] && !ops.constrained[j] {
                    assert!((dense[(i, j)] + dense[(j, i)]).abs() < 1e-13);
                }
            }
        }
        assert!(ops.constrained[0] && ops.constrained[half + 1]);
        assert!(!ops.constrained[4 * 2]);
        assert_eq!(ops.forcing_dof(4, 1), half + 4 * 2 + 1);
    }

    #[test]
    fn elastodynamics_needs_a_clamped_face() {
        let m = build_mesh(2, &[(0.0, 1.0), (0.0, 1.0)], &[1, 1], 1).unwrap();
        assert!(assemble_elasto(&m, Material { mu: 1.0, lambda: 1.0 }, &[]).is_err());
    }

    #[test]
    fn bad_material_is_rejected() {
        let m = build_mesh(2, &[(0.0, 1.0), (0.0, 1.0)], &[1, 1], 1).unwrap();
        assert!(assemble_elasto(&m, Material { mu: -1.0, lambda: 1.0 }, &[]).is_err());
        assert!(assemble_heat(&m, &[Face::lower(2)]).is_err());
    }
}
