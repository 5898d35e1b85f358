use crate::error::{Error, Result};

/// One face of the box-shaped domain: `axis` and whether it is the upper end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Face {
    pub axis: usize,
    pub upper: bool,
}

impl Face {
    pub const fn lower(axis: usize) -> Self {
        Face { axis, upper: false }
    }

    pub const fn upper(axis: usize) -> Self {
        Face { axis, upper: true }
    }

    /// Outward unit normal in 3 components.
    pub fn normal(&self) -> [f64; 3] {
        let mut n = [0.0; 3];
        n[self.axis] = if self.upper { 1.0 } else { -1.0 };
        n
    }
}

/// Tensor-product mesh of a box with `Q_s` Lagrange elements and lexicographic
/// node numbering (first axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh {
    dim: usize,
    lower: [f64; 3],
    upper: [f64; 3],
    cells: [usize; 3],
    degree: usize,
}

/// Build a box mesh. `extents` and `cells_per_axis` need one entry per dimension.
pub fn build_mesh(
    dim: usize,
    extents: &[(f64, f64)],
    cells_per_axis: &[usize],
    degree: usize,
) -> Result<SpatialMesh> {
    if !(1..=3).contains(&dim) {
        return Err(Error::config("dim", format!("spatial dimension must be 1, 2 or 3, got {dim}")));
    }
    if extents.len() != dim || cells_per_axis.len() != dim {
        return Err(Error::config(
            "mesh",
            format!("expected {dim} extents and cell counts, got {} and {}", extents.len(), cells_per_axis.len()),
        ));
    }
    if degree == 0 {
        return Err(Error::config("mesh.degree", "element degree must be at least 1"));
    }
    let mut lower = [0.0; 3];
    let mut upper = [1.0; 3];
    let mut cells = [1usize; 3];
    for a in 0..dim {
        let (lo, hi) = extents[a];
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::config(
                "mesh.extents",
                format!("axis {a} has degenerate or inverted extent ({lo}, {hi})"),
            ));
        }
        if cells_per_axis[a] == 0 {
            return Err(Error::config("mesh.cells", format!("axis {a} has zero cells")));
        }
        lower[a] = lo;
        upper[a] = hi;
        cells[a] = cells_per_axis[a];
    }
    Ok(SpatialMesh { dim, lower, upper, cells, degree })
}

impl SpatialMesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn extent(&self, axis: usize) -> (f64, f64) {
        (self.lower[axis], self.upper[axis])
    }

    /// Cell width along `axis`.
    pub fn cell_size(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.cells[axis] as f64
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|a| self.upper[a] - self.lower[a]).product()
    }

    /// Nodes along `axis` (1 for unused axes).
    pub fn nodes_along(&self, axis: usize) -> usize {
        if axis < self.dim {
            self.cells[axis] * self.degree + 1
        } else {
            1
        }
    }

    pub fn num_nodes(&self) -> usize {
        (0..3).map(|a| self.nodes_along(a)).product()
    }

    pub fn num_cells(&self) -> usize {
        self.cells[..self.dim].iter().product()
    }

    /// Scalar degrees of freedom, one per node.
    pub fn num_dofs(&self) -> usize {
        self.num_nodes()
    }

    pub fn node_index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.nodes_along(0) * (ijk[1] + self.nodes_along(1) * ijk[2])
    }

    pub fn node_multi_index(&self, node: usize) -> [usize; 3] {
        let (n0, n1) = (self.nodes_along(0), self.nodes_along(1));
        [node % n0, (node / n0) % n1, node / (n0 * n1)]
    }

    pub fn node_coords(&self, node: usize) -> [f64; 3] {
        let ijk = self.node_multi_index(node);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            let h = self.cell_size(a) / self.degree as f64;
            x[a] = if ijk[a] + 1 == self.nodes_along(a) {
                self.upper[a]
            } else {
                self.lower[a] + ijk[a] as f64 * h
            };
        }
        x
    }

    pub fn cell_multi_index(&self, cell: usize) -> [usize; 3] {
        let (c0, c1) = (self.cells[0], if self.dim > 1 { self.cells[1] } else { 1 });
        [cell % c0, (cell / c0) % c1, cell / (c0 * c1)]
    }

    pub fn cell_index(&self, ijk: [usize; 3]) -> usize {
        let (c0, c1) = (self.cells[0], if self.dim > 1 { self.cells[1] } else { 1 });
        ijk[0] + c0 * (ijk[1] + c1 * ijk[2])
    }

    /// Lower corner of a cell.
    pub fn cell_origin(&self, cell: usize) -> [f64; 3] {
        let ijk = self.cell_multi_index(cell);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.lower[a] + ijk[a] as f64 * self.cell_size(a);
        }
        x
    }

    /// Global node numbers of a cell in local lexicographic order.
    pub fn cell_nodes(&self, cell: usize) -> Vec<usize> {
        let c = self.cell_multi_index(cell);
        let s = self.degree;
        let per = |a: usize| if a < self.dim { s + 1 } else { 1 };
        let mut nodes = Vec::with_capacity(per(0) * per(1) * per(2));
        for k in 0..per(2) {
            for j in 0..per(1) {
                for i in 0..per(0) {
                    nodes.push(self.node_index([c[0] * s + i, c[1] * s + j, c[2] * s + k]));
                }
            }
        }
        nodes
    }

    pub fn node_on_face(&self, node: usize, face: Face) -> bool {
        if face.axis >= self.dim {
            return false;
        }
        let ijk = self.node_multi_index(node);
        if face.upper {
            ijk[face.axis] + 1 == self.nodes_along(face.axis)
        } else {
            ijk[face.axis] == 0
        }
    }

    /// All `2·dim` faces of the box.
    pub fn all_faces(&self) -> Vec<Face> {
        (0..self.dim).flat_map(|a| [Face::lower(a), Face::upper(a)]).collect()
    }

    /// Cells touching `face`.
    pub fn cells_on_face(&self, face: Face) -> Vec<usize> {
        (0..self.num_cells())
            .filter(|&c| {
                let ijk = self.cell_multi_index(c);
                if face.upper {
                    ijk[face.axis] + 1 == self.cells[face.axis]
                } else {
                    ijk[face.axis] == 0
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dof_counts_of_the_reference_meshes() {
        assert_eq!(build_mesh(1, &[(0.0, 1.0)], &[8192], 1).unwrap().num_dofs(), 8193);
        assert_eq!(
            build_mesh(2, &[(0.0, 1.0), (0.0, 1.0)], &[64, 64], 1).unwrap().num_dofs(),
            4225
        );
        // 12x2x2 hexahedra, 3 displacement + 3 velocity components per node.
        let beam = build_mesh(3, &[(0.0, 6.0), (0.0, 1.0), (0.0, 1.0)], &[12, 2, 2], 1).unwrap();
        assert_eq!(beam.num_nodes() * 6, 702);
        assert_eq!(build_mesh(1, &[(0.0, 1.0)], &[3], 2).unwrap().num_dofs(), 7);
    }

    #[test]
    fn single_cell_has_nodes_at_the_ends() {
        let m = build_mesh(1, &[(0.0, 1.0)], &[1], 1).unwrap();
        assert_eq!(m.num_dofs(), 2);
        assert_eq!(m.node_coords(0)[0], 0.0);
        assert_eq!(m.node_coords(1)[0], 1.0);
    }

    #[test]
    fn invalid_meshes_are_rejected() {
        assert!(build_mesh(1, &[(0.0, 1.0)], &[0], 1).is_err());
        assert!(build_mesh(1, &[(1.0, 0.0)], &[4], 1).is_err());
        assert!(build_mesh(4, &[(0.0, 1.0); 4], &[1; 4], 1).is_err());
        assert!(build_mesh(2, &[(0.0, 1.0)], &[1, 1], 1).is_err());
        assert!(build_mesh(1, &[(0.0, 1.0)], &[2], 0).is_err());
    }

    #[test]
    fn cell_nodes_are_lexicographic() {
        let m = build_mesh(2, &[(0.0, 2.0), (0.0, 1.0)], &[2, 1], 1).unwrap();
        assert_eq!(m.cell_nodes(0), vec![0, 1, 3, 4]);
        assert_eq!(m.cell_nodes(1), vec![1, 2, 4, 5]);
        assert_eq!(m.node_coords(5), [2.0, 1.0, 0.0]);
        assert!(m.node_on_face(3, Face::lower(0)));
        assert!(m.node_on_face(3, Face::upper(1)));
        assert!(!m.node_on_face(4, Face::lower(0)));
    }
}
