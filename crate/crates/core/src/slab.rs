//! Space-time slab systems `A U_m = F_m - B U_{m-1}` and their transposes.

use std::io::{self, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{reverse_cuthill_mckee, BandedLu, CsrMatrix, TripletBuilder};
use crate::spatial::{SourceTerm, SpatialOperators};
use crate::temporal::TemporalMatrices;

/// Coefficients of one slab: one spatial vector per temporal node.
pub type SlabVectors = Vec<DVector<f64>>;

/// `A = C_k ⊗ M_h + M_k ⊗ K_h` with `C_k` jump-augmented, factored once.
///
/// The coupling `B = -D_k ⊗ M_h` is never stored: its action only needs the
/// end-point trace of the previous slab. Internally unknowns are interleaved
/// node-major (spatial RCM order, temporal index fastest) to keep the band narrow.
#[derive(Debug, Clone)]
pub struct SlabSystem {
    n: usize,
    nt: usize,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    constrained: Vec<bool>,
    tm: TemporalMatrices,
    position: Vec<usize>,
    matrix: CsrMatrix,
    lu: BandedLu,
}

impl SlabSystem {
    pub fn new(ops: &SpatialOperators, tm: &TemporalMatrices) -> Result<Self> {
        let n = ops.dofs();
        if ops.mass.nrows() != n || ops.stiffness.nrows() != n {
            return Err(Error::Dimension(format!(
                "spatial operators are {}x{} and {}x{} for {n} unknowns",
                ops.mass.nrows(),
                ops.mass.ncols(),
                ops.stiffness.nrows(),
                ops.stiffness.ncols()
            )));
        }
        let nt = tm.len();
        let mut adjacency = ops.mass.pattern();
        for (i, row) in adjacency.iter_mut().enumerate() {
            row.extend_from_slice(ops.stiffness.row(i).0);
            row.sort_unstable();
            row.dedup();
        }
        let perm = reverse_cuthill_mckee(&adjacency);
        let mut position = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            position[old] = new;
        }
        let c = tm.derivative();
        let rcm_width = spatial_bandwidth(&adjacency, &position);
        let natural: Vec<usize> = (0..n).collect();
        if spatial_bandwidth(&adjacency, &natural) <= rcm_width {
            position = natural;
        }
        let mut b = TripletBuilder::with_capacity(n * nt, n * nt, (ops.mass.nnz() + ops.stiffness.nnz()) * nt * nt);
        for (spatial, coeff) in [(&ops.mass, &c), (&ops.stiffness, &tm.mass)] {
            for row in 0..n {
                let (cols, vals) = spatial.row(row);
                for (&col, &v) in cols.iter().zip(vals) {
                    for i in 0..nt {
                        for j in 0..nt {
                            let w = coeff[(i, j)] * v;
                            if w != 0.0 {
                                b.push(position[row] * nt + i, position[col] * nt + j, w);
                            }
                        }
                    }
                }
            }
        }
        let matrix = b.build();
        let lu = BandedLu::factor(&matrix)?;
        Ok(SlabSystem {
            n,
            nt,
            mass: ops.mass.clone(),
            stiffness: ops.stiffness.clone(),
            constrained: ops.constrained.clone(),
            tm: tm.clone(),
            position,
            matrix,
            lu,
        })
    }

    /// Spatial unknowns per temporal node.
    pub fn dofs(&self) -> usize {
        self.n
    }

    /// Temporal nodes per slab, `r + 1`.
    pub fn temporal_dofs(&self) -> usize {
        self.nt
    }

    pub fn temporal(&self) -> &TemporalMatrices {
        &self.tm
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    /// Band widths `(kl, ku)` of the interleaved system.
    pub fn bandwidths(&self) -> (usize, usize) {
        self.lu.bandwidths()
    }

    fn pack(&self, u: &[DVector<f64>]) -> Vec<f64> {
        let mut x = vec![0.0; self.n * self.nt];
        for (i, ui) in u.iter().enumerate() {
            for (d, &p) in self.position.iter().enumerate() {
                x[p * self.nt + i] = ui[d];
            }
        }
        x
    }

    fn unpack(&self, x: &[f64]) -> SlabVectors {
        (0..self.nt)
            .map(|i| DVector::from_fn(self.n, |d, _| x[self.position[d] * self.nt + i]))
            .collect()
    }

    fn check(&self, u: &[DVector<f64>], what: &str) -> Result<()> {
        if u.len() != self.nt || u.iter().any(|v| v.len() != self.n) {
            return Err(Error::Dimension(format!(
                "{what}: expected {} vectors of length {}",
                self.nt, self.n
            )));
        }
        Ok(())
    }

    /// `Σ_j φ_j(t_m^-) U_j`, the value at the right end of the slab.
    pub fn end_value(&self, u: &[DVector<f64>]) -> DVector<f64> {
        combine(u, self.tm.right_values.as_slice())
    }

    /// `Σ_i φ_i(t_{m-1}^+) Z_i`, the value at the left end of the slab.
    pub fn start_value(&self, z: &[DVector<f64>]) -> DVector<f64> {
        combine(z, self.tm.left_values.as_slice())
    }

    /// `A u` in block form.
    pub fn apply(&self, u: &[DVector<f64>]) -> SlabVectors {
        let c = self.tm.derivative();
        let mu: Vec<_> = u.iter().map(|v| self.mass.mul_vec(v)).collect();
        let ku: Vec<_> = u.iter().map(|v| self.stiffness.mul_vec(v)).collect();
        (0..self.nt)
            .map(|i| {
                let mut out = DVector::zeros(self.n);
                for j in 0..self.nt {
                    out.axpy(c[(i, j)], &mu[j], 1.0);
                    out.axpy(self.tm.mass[(i, j)], &ku[j], 1.0);
                }
                out
            })
            .collect()
    }

    /// `Aᵀ z` in block form.
    pub fn apply_transpose(&self, z: &[DVector<f64>]) -> SlabVectors {
        let c = self.tm.derivative();
        let mz: Vec<_> = z.iter().map(|v| self.mass.mul_vec(v)).collect();
        let kz: Vec<_> = z.iter().map(|v| self.stiffness.mul_vec(v)).collect();
        (0..self.nt)
            .map(|j| {
                let mut out = DVector::zeros(self.n);
                for i in 0..self.nt {
                    out.axpy(c[(i, j)], &mz[i], 1.0);
                    out.axpy(self.tm.mass[(i, j)], &kz[i], 1.0);
                }
                out
            })
            .collect()
    }

    /// `B u_prev = -φ(0) ⊗ M_h·(end value of u_prev)`.
    pub fn apply_coupling(&self, previous_end: &DVector<f64>) -> SlabVectors {
        let m = self.mass.mul_vec(previous_end);
        self.tm.left_values.iter().map(|l| &m * -l).collect()
    }

    /// Solves `A U = F - B U_prev` where `incoming` is the end value of the
    /// previous slab (or the initial condition).
    pub fn solve_primal(&self, incoming: &DVector<f64>, load: &[DVector<f64>]) -> Result<SlabVectors> {
        self.check(load, "primal load")?;
        let m = self.mass.mul_vec(incoming);
        let mut rhs: SlabVectors = load.to_vec();
        for (r, l) in rhs.iter_mut().zip(self.tm.left_values.iter()) {
            r.axpy(*l, &m, 1.0);
        }
        self.solve_raw(&rhs, false)
    }

    /// Solves `Aᵀ Z = J - Bᵀ Z_next` where `incoming` is the start value of the
    /// next slab's dual solution (zero on the last slab).
    pub fn solve_dual(&self, incoming: &DVector<f64>, rhs: &[DVector<f64>]) -> Result<SlabVectors> {
        self.check(rhs, "dual right-hand side")?;
        let m = self.mass.mul_vec(incoming);
        let mut full: SlabVectors = rhs.to_vec();
        for (r, l) in full.iter_mut().zip(self.tm.right_values.iter()) {
            r.axpy(*l, &m, 1.0);
        }
        self.solve_raw(&full, true)
    }

    /// `A x = b` (or `Aᵀ x = b`) without coupling terms; constrained entries of `b` are dropped.
    pub fn solve_raw(&self, b: &[DVector<f64>], transpose: bool) -> Result<SlabVectors> {
        self.check(b, "slab right-hand side")?;
        let mut b = b.to_vec();
        for v in &mut b {
            for (x, &c) in v.iter_mut().zip(&self.constrained) {
                if c {
                    *x = 0.0;
                }
            }
        }
        let mut x = self.pack(&b);
        if transpose {
            self.lu.solve_transpose_in_place(&mut x);
        } else {
            self.lu.solve_in_place(&mut x);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("slab solve produced non-finite values".into()));
        }
        Ok(self.unpack(&x))
    }

    /// The assembled `A` in natural block order (temporal-major), for checks.
    pub fn matrix_block_order(&self) -> CsrMatrix {
        let mut inverse = vec![0; self.n];
        for (d, &p) in self.position.iter().enumerate() {
            inverse[p] = d;
        }
        let nt = self.nt;
        let mut b = TripletBuilder::with_capacity(self.n * nt, self.n * nt, self.matrix.nnz());
        for row in 0..self.matrix.nrows() {
            let (cols, vals) = self.matrix.row(row);
            for (&col, &v) in cols.iter().zip(vals) {
                b.push((row % nt) * self.n + inverse[row / nt], (col % nt) * self.n + inverse[col / nt], v);
            }
        }
        b.build()
    }
}

fn spatial_bandwidth(adjacency: &[Vec<usize>], position: &[usize]) -> usize {
    adjacency
        .iter()
        .enumerate()
        .flat_map(|(v, row)| row.iter().map(move |&w| position[v].abs_diff(position[w])))
        .max()
        .unwrap_or(0)
}

fn combine(u: &[DVector<f64>], weights: &[f64]) -> DVector<f64> {
    let n = u.first().map_or(0, |v| v.len());
    let mut out = DVector::zeros(n);
    for (ui, &w) in u.iter().zip(weights) {
        out.axpy(w, ui, 1.0);
    }
    out
}

/// `F_i = ∫_{I_m} f(t) φ_i(t) dt` by the internal temporal rule, starting at `t0`.
pub fn slab_load(source: &SourceTerm, tm: &TemporalMatrices, t0: f64) -> SlabVectors {
    let nt = tm.len();
    let mut out = vec![DVector::zeros(source.dofs()); nt];
    if source.is_zero() {
        return out;
    }
    for (q, (&tau, &w)) in tm.quad_points.iter().zip(&tm.quad_weights).enumerate() {
        let f = source.load(t0 + tau * tm.step);
        for (i, o) in out.iter_mut().enumerate() {
            o.axpy(w * tm.quad_basis[(q, i)], &f, 1.0);
        }
    }
    out
}

/// Streams slab coefficient vectors to a little-endian binary file.
///
/// Layout: `u64 n`, `u64 r`, `u64 M`, then for each slab `(r + 1)·n` `f64`
/// values, temporal node major.
pub struct SnapshotWriter<W: Write> {
    out: W,
    n: usize,
    nt: usize,
}

impl<W: Write> SnapshotWriter<W> {
    pub fn new(mut out: W, n: usize, r: usize, slabs: usize) -> io::Result<Self> {
        for v in [n, r, slabs] {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        Ok(SnapshotWriter { out, n, nt: r + 1 })
    }

    pub fn write_slab(&mut self, u: &[DVector<f64>]) -> io::Result<()> {
        if u.len() != self.nt || u.iter().any(|v| v.len() != self.n) {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "slab does not match the header"));
        }
        for v in u {
            for x in v.iter() {
                self.out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Reads a file written by [`SnapshotWriter`]: `(n, r, slabs)`.
pub fn read_snapshots(bytes: &[u8]) -> Result<(usize, usize, Vec<SlabVectors>)> {
    let word = |i: usize| -> Result<[u8; 8]> {
        bytes
            .get(i * 8..i * 8 + 8)
            .and_then(|s| s.try_into().ok())
            .ok_or_else(|| Error::Dimension("snapshot file is truncated".into()))
    };
    let n = u64::from_le_bytes(word(0)?) as usize;
    let r = u64::from_le_bytes(word(1)?) as usize;
    let m = u64::from_le_bytes(word(2)?) as usize;
    let mut slabs = Vec::with_capacity(m);
    let mut pos = 3;
    for _ in 0..m {
        let mut slab = Vec::with_capacity(r + 1);
        for _ in 0..=r {
            let mut v = DVector::zeros(n);
            for x in v.iter_mut() {
                *x = f64::from_le_bytes(word(pos)?);
                pos += 1;
            }
            slab.push(v);
        }
        slabs.push(slab);
    }
    Ok((n, r, slabs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{assemble_heat, build_mesh, SourceId};
    use crate::temporal::{temporal_matrices, NodeFamily, TemporalBasis};
    use nalgebra::{dmatrix, DMatrix};

    fn heat(cells: usize, r: usize, family: NodeFamily, k: f64) -> (SpatialOperators, SlabSystem) {
        let mesh = build_mesh(1, &[(0.0, 1.0)], &[cells], 1).unwrap();
        let ops = assemble_heat(&mesh, &mesh.all_faces()).unwrap();
        let tm = temporal_matrices(&TemporalBasis::new(r, family).unwrap(), k).unwrap();
        let sys = SlabSystem::new(&ops, &tm).unwrap();
        (ops, sys)
    }

    #[test]
    fn single_interior_dof_gives_the_scalar_kronecker_product() {
        // Two cells of width 1/2: interior M = 1/3, K = 4.
        let (_, sys) = heat(2, 1, NodeFamily::GaussLobatto, 0.5);
        let a = sys.matrix_block_order().to_dense();
        let c = dmatrix![0.5, 0.5; -0.5, 0.5];
        let mk = dmatrix![2.0, 1.0; 1.0, 2.0] * (0.5 / 6.0);
        let expected = c / 3.0 + mk * 4.0;
        // Interior node 1 sits at rows 1 and 4 in block order.
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((a[(i * 3 + 1, j * 3 + 1)] - expected[(i, j)]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let (ops, sys) = heat(8, 1, NodeFamily::GaussLegendre, 0.1);
        let zero = vec![DVector::zeros(ops.dofs()); 2];
        let u = sys.solve_primal(&DVector::zeros(ops.dofs()), &zero).unwrap();
        assert!(u.iter().all(|v| v.amax() == 0.0));
    }

    #[test]
    fn eigenmode_decay_matches_the_scalar_dg_recursion() {
        let cells = 16;
        let k = 0.01;
        let (ops, sys) = heat(cells, 1, NodeFamily::GaussLegendre, k);
        let tm = sys.temporal().clone();
        // Discrete sine mode: eigenvector of the generalized problem on a uniform grid.
        let h = 1.0 / cells as f64;
        let mode = DVector::from_fn(ops.dofs(), |i, _| (std::f64::consts::PI * i as f64 * h).sin());
        let lam = mode.dot(&ops.stiffness.mul_vec(&mode)) / mode.dot(&ops.mass.mul_vec(&mode));
        let a_scalar: DMatrix<f64> = tm.derivative() + &tm.mass * lam;
        let lu = a_scalar.lu();
        let mut amp = 1.0;
        let mut trace = mode.clone();
        let zero = vec![DVector::zeros(ops.dofs()); 2];
        for _ in 0..20 {
            let u = sys.solve_primal(&trace, &zero).unwrap();
            trace = sys.end_value(&u);
            let coeffs = lu.solve(&(&tm.left_values * amp)).unwrap();
            amp = coeffs.dot(&tm.right_values);
        }
        assert!((&trace - &mode * amp).amax() < 1e-12);
        assert!((amp - (-lam * 0.2).exp()).abs() < 1e-4);
    }

    #[test]
    fn sequential_solves_equal_the_monolithic_system() {
        let (ops, sys) = heat(10, 1, NodeFamily::GaussLegendre, 0.05);
        let n = ops.dofs();
        let nt = 2;
        let slabs = 6;
        let loads: Vec<SlabVectors> = (0..slabs)
            .map(|m| (0..nt).map(|i| DVector::from_fn(n, |d, _| ((d * 7 + i * 3 + m) % 5) as f64 - 2.0)).collect())
            .collect();
        let u0 = DVector::from_fn(n, |d, _| (std::f64::consts::PI * d as f64 / 10.0).sin());
        let mut seq = Vec::new();
        let mut trace = u0.clone();
        for f in &loads {
            let u = sys.solve_primal(&trace, f).unwrap();
            trace = sys.end_value(&u);
            seq.push(u);
        }
        // Block-bidiagonal oracle assembled densely.
        let a = sys.matrix_block_order().to_dense();
        let tm = sys.temporal();
        let big = slabs * nt * n;
        let mut mono = DMatrix::zeros(big, big);
        let mut rhs = DVector::zeros(big);
        let mass = sys.mass().to_dense();
        for m in 0..slabs {
            mono.view_mut((m * nt * n, m * nt * n), (nt * n, nt * n)).copy_from(&a);
            for i in 0..nt {
                let mut r = loads[m][i].clone();
                for (d, &c) in sys.constrained().iter().enumerate() {
                    if c {
                        r[d] = 0.0;
                    }
                }
                if m == 0 {
                    r += &mass * &u0 * tm.left_values[i];
                }
                rhs.rows_mut((m * nt + i) * n, n).copy_from(&r);
                if m > 0 {
                    for j in 0..nt {
                        let block = &mass * -(tm.left_values[i] * tm.right_values[j]);
                        mono.view_mut(((m * nt + i) * n, ((m - 1) * nt + j) * n), (n, n)).copy_from(&block);
                    }
                }
            }
        }
        let x = mono.lu().solve(&rhs).unwrap();
        for m in 0..slabs {
            for i in 0..nt {
                let diff = (x.rows((m * nt + i) * n, n) - &seq[m][i]).amax();
                assert!(diff < 1e-10, "slab {m} node {i}: {diff}");
            }
        }
    }

    #[test]
    fn dual_solve_is_the_transpose() {
        let (ops, sys) = heat(12, 2, NodeFamily::GaussLobatto, 0.1);
        let n = ops.dofs();
        let j: SlabVectors = (0..3).map(|i| DVector::from_fn(n, |d, _| (d + i) as f64 * 0.1)).collect();
        let next = DVector::from_fn(n, |d, _| (d as f64).cos());
        let z = sys.solve_dual(&next, &j).unwrap();
        let atz = sys.apply_transpose(&z);
        // Aᵀ Z = J - Bᵀ Z_next with (Bᵀ Z_next)_j = -φ_j(1) M·next.
        let m_next = sys.mass().mul_vec(&next);
        for i in 0..3 {
            let mut expected = &j[i] + &m_next * sys.temporal().right_values[i];
            for (d, &c) in sys.constrained().iter().enumerate() {
                if c {
                    expected[d] = 0.0;
                }
            }
            let mut got = atz[i].clone();
            for (d, &c) in sys.constrained().iter().enumerate() {
                if c {
                    got[d] = 0.0;
                }
            }
            assert!((got - expected).amax() < 1e-11);
        }
    }

    #[test]
    fn primal_residual_is_small() {
        let (ops, sys) = heat(30, 1, NodeFamily::GaussLegendre, 0.02);
        let mesh = build_mesh(1, &[(0.0, 1.0)], &[30], 1).unwrap();
        let src = SourceTerm::new(SourceId::Moving1d, &mesh, &ops).unwrap();
        let f = slab_load(&src, sys.temporal(), 0.3);
        let prev = DVector::from_fn(ops.dofs(), |d, _| if d == 0 || d == 30 { 0.0 } else { 1.0 });
        let u = sys.solve_primal(&prev, &f).unwrap();
        let au = sys.apply(&u);
        let bu = sys.apply_coupling(&prev);
        let scale = 1.0 + f.iter().map(|v| v.amax()).fold(0.0, f64::max);
        for i in 0..2 {
            let res = &f[i] - &au[i] - &bu[i];
            assert!(res.amax() <= 1e-10 * scale);
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let slab = vec![DVector::from_vec(vec![1.0, -2.5]), DVector::from_vec(vec![3.0, 1e-300])];
        let mut w = SnapshotWriter::new(Vec::new(), 2, 1, 1).unwrap();
        w.write_slab(&slab).unwrap();
        assert!(w.write_slab(&slab[..1]).is_err());
        let bytes = w.finish().unwrap();
        assert_eq!(bytes.len(), 3 * 8 + 4 * 8);
        let (n, r, slabs) = read_snapshots(&bytes).unwrap();
        assert_eq!((n, r), (2, 1));
        assert_eq!(slabs[0], slab);
        assert!(read_snapshots(&bytes[..30]).is_err());
    }
}
