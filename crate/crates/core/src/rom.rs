//! Galerkin reduced slab systems for the primal and dual problems and the
//! cross-basis couplings used by the reduced error estimator.

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};
use crate::fom::FullOrderModel;
use crate::goal::GoalDensity;
use crate::linalg::CsrMatrix;
use crate::pod::ReducedBasis;
use crate::slab::SlabVectors;
use crate::spatial::{LoadSample, SourceTerm};
use crate::temporal::TemporalMatrices;

/// Source data projected onto one basis.
///
/// Keeps `G_q = Zᵀ(w_q φ(x_q))` for every quadrature point together with its
/// prefix sums, so an indicator source on a point range costs `O(N)`.
#[derive(Debug, Clone)]
pub struct ReducedLoads {
    n: usize,
    rows: Vec<f64>,
    prefix: Vec<f64>,
    profile: Option<DVector<f64>>,
}

impl ReducedLoads {
    pub fn new(source: &SourceTerm, z: &DMatrix<f64>, constrained: &[bool]) -> Self {
        let n = z.ncols();
        let profile = source.profile().map(|p| z.transpose() * p);
        if source.is_zero() || profile.is_some() || n == 0 {
            return ReducedLoads { n, rows: Vec::new(), prefix: Vec::new(), profile };
        }
        let cloud = source.cloud();
        let components = source.dofs() / cloud.mesh().num_nodes();
        let nq = cloud.len();
        let mut rows = vec![0.0; nq * n];
        for q in 0..nq {
            let row = &mut rows[q * n..(q + 1) * n];
            cloud.for_each_shape(q, |node, w| {
                let dof = node * components;
                if !constrained[dof] {
                    for (r, zc) in row.iter_mut().zip(z.row(dof).iter()) {
                        *r += w * zc;
                    }
                }
            });
        }
        let mut prefix = vec![0.0; (nq + 1) * n];
        for q in 0..nq {
            for c in 0..n {
                prefix[(q + 1) * n + c] = prefix[q * n + c] + rows[q * n + c];
            }
        }
        ReducedLoads { n, rows, prefix, profile }
    }

    /// `Zᵀ f(t)` for one source sample.
    pub fn apply(&self, sample: &LoadSample) -> DVector<f64> {
        let n = self.n;
        let mut out = DVector::zeros(n);
        if n == 0 {
            return out;
        }
        match sample {
            LoadSample::Zero => {}
            LoadSample::Indicator { amplitude, ranges } => {
                if *amplitude != 0.0 {
                    for r in ranges {
                        for c in 0..n {
                            out[c] += self.prefix[r.end * n + c] - self.prefix[r.start * n + c];
                        }
                    }
                    out *= *amplitude;
                }
            }
            LoadSample::Pointwise(values) => {
                for (q, v) in values.iter().enumerate() {
                    if *v != 0.0 {
                        for c in 0..n {
                            out[c] += v * self.rows[q * n + c];
                        }
                    }
                }
            }
            LoadSample::Scaled { amplitude } => {
                if let Some(p) = &self.profile {
                    out = p * *amplitude;
                }
            }
        }
        out
    }

    /// Reduced slab load `Σ_q w_q φ_i(τ_q) Zᵀ f(t0 + k τ_q)`.
    pub fn slab(&self, source: &SourceTerm, tm: &TemporalMatrices, t0: f64) -> SlabVectors {
        let mut out = vec![DVector::zeros(self.n); tm.len()];
        if source.is_zero() || self.n == 0 {
            return out;
        }
        for (q, (&tau, &w)) in tm.quad_points.iter().zip(&tm.quad_weights).enumerate() {
            let r = self.apply(&source.sample(t0 + tau * tm.step));
            for (i, o) in out.iter_mut().enumerate() {
                o.axpy(w * tm.quad_basis[(q, i)], &r, 1.0);
            }
        }
        out
    }
}

/// Goal density projected onto a basis.
#[derive(Debug, Clone)]
enum ReducedGoal {
    Linear { primal: DVector<f64>, dual: DVector<f64> },
    Quadratic,
}

/// Dense LU of a reduced slab matrix (absent for an empty basis).
#[derive(Debug, Clone)]
struct DenseSolver {
    lu: Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    n: usize,
}

impl DenseSolver {
    fn new(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Ok(DenseSolver { lu: None, n });
        }
        let lu = a.lu();
        if !lu.is_invertible() {
            return Err(Error::Numerical("reduced slab matrix is singular; the basis is degenerate".into()));
        }
        Ok(DenseSolver { lu: Some(lu), n })
    }

    fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.lu {
            None => Ok(DVector::zeros(self.n)),
            Some(lu) => lu
                .solve(b)
                .filter(|x| x.iter().all(|v| v.is_finite()))
                .ok_or_else(|| Error::Numerical("reduced slab solve failed".into())),
        }
    }
}

fn project(a: &CsrMatrix, left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
    if left.ncols() == 0 || right.ncols() == 0 {
        return DMatrix::zeros(left.ncols(), right.ncols());
    }
    a.project(left, right)
}

fn flatten(u: &[DVector<f64>], n: usize) -> DVector<f64> {
    let mut out = DVector::zeros(u.len() * n);
    for (i, ui) in u.iter().enumerate() {
        out.rows_mut(i * n, n).copy_from(ui);
    }
    out
}

fn split(x: &DVector<f64>, nt: usize, n: usize) -> SlabVectors {
    (0..nt).map(|i| x.rows(i * n, n).into_owned()).collect()
}

fn combine(u: &[DVector<f64>], weights: &DVector<f64>, n: usize) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    for (ui, w) in u.iter().zip(weights.iter()) {
        out.axpy(*w, ui, 1.0);
    }
    out
}

/// Projected operators for a primal basis `Z_p` and a dual basis `Z_d`.
#[derive(Debug, Clone)]
pub struct ReducedOperators {
    tm: TemporalMatrices,
    zp: DMatrix<f64>,
    zd: DMatrix<f64>,
    mass: CsrMatrix,
    pub mpp: DMatrix<f64>,
    pub kpp: DMatrix<f64>,
    pub mdd: DMatrix<f64>,
    pub kdd: DMatrix<f64>,
    pub mdp: DMatrix<f64>,
    pub kdp: DMatrix<f64>,
    primal: DenseSolver,
    dual: DenseSolver,
    /// `A_dp = C_k ⊗ M_dp + M_k ⊗ K_dp`.
    a_dp: DMatrix<f64>,
    loads_p: ReducedLoads,
    loads_d: ReducedLoads,
    goal: ReducedGoal,
    goal_scale: f64,
}

/// Reduced space-time matrix `C_k ⊗ M + M_k ⊗ K` in temporal-major block order.
pub fn reduced_slab_matrix(tm: &TemporalMatrices, m: &DMatrix<f64>, k: &DMatrix<f64>) -> DMatrix<f64> {
    tm.derivative().kronecker(m) + tm.mass.kronecker(k)
}

impl ReducedOperators {
    pub fn new(fom: &FullOrderModel, primal: &ReducedBasis, dual: &ReducedBasis) -> Result<Self> {
        let n = fom.dofs();
        if primal.dim() != n || dual.dim() != n {
            return Err(Error::Dimension(format!(
                "bases have {} and {} rows for {n} unknowns",
                primal.dim(),
                dual.dim()
            )));
        }
        let sys = fom.system();
        let tm = fom.temporal().clone();
        let (zp, zd) = (primal.matrix().clone(), dual.matrix().clone());
        let (m, k) = (sys.mass(), sys.stiffness());
        let mpp = project(m, &zp, &zp);
        let kpp = project(k, &zp, &zp);
        let mdd = project(m, &zd, &zd);
        let kdd = project(k, &zd, &zd);
        let mdp = project(m, &zd, &zp);
        let kdp = project(k, &zd, &zp);
        let primal_solver = DenseSolver::new(reduced_slab_matrix(&tm, &mpp, &kpp))?;
        let dual_solver = DenseSolver::new(reduced_slab_matrix(&tm, &mdd, &kdd).transpose())?;
        let a_dp = reduced_slab_matrix(&tm, &mdp, &kdp);
        let constrained = sys.constrained();
        let loads_p = ReducedLoads::new(fom.source(), &zp, constrained);
        let loads_d = ReducedLoads::new(fom.source(), &zd, constrained);
        let goal = match fom.goal().density() {
            GoalDensity::Linear(g) => ReducedGoal::Linear { primal: zp.transpose() * g, dual: zd.transpose() * g },
            GoalDensity::Quadratic(_) => ReducedGoal::Quadratic,
        };
        Ok(ReducedOperators {
            tm,
            zp,
            zd,
            mass: m.clone(),
            mpp,
            kpp,
            mdd,
            kdd,
            mdp,
            kdp,
            primal: primal_solver,
            dual: dual_solver,
            a_dp,
            loads_p,
            loads_d,
            goal,
            goal_scale: fom.goal().scale(),
        })
    }

    pub fn primal_len(&self) -> usize {
        self.zp.ncols()
    }

    pub fn dual_len(&self) -> usize {
        self.zd.ncols()
    }

    pub fn temporal(&self) -> &TemporalMatrices {
        &self.tm
    }

    /// `Z_pᵀ M_h v`: reduced coupling data of a full end value.
    pub fn primal_trace_coupling(&self, full_end: &DVector<f64>) -> DVector<f64> {
        self.zp.transpose() * self.mass.mul_vec(full_end)
    }

    /// `Z_dᵀ M_h v`: estimator coupling data of a full end value.
    pub fn dual_trace_coupling(&self, full_end: &DVector<f64>) -> DVector<f64> {
        self.zd.transpose() * self.mass.mul_vec(full_end)
    }

    /// `M_pp · end(u)` and `M_dp · end(u)` for a reduced previous slab.
    pub fn couplings_from_reduced(&self, u_prev: &[DVector<f64>]) -> (DVector<f64>, DVector<f64>) {
        let end = self.end_value(u_prev);
        (&self.mpp * &end, &self.mdp * &end)
    }

    pub fn end_value(&self, u: &[DVector<f64>]) -> DVector<f64> {
        combine(u, &self.tm.right_values, self.primal_len())
    }

    pub fn dual_start_value(&self, z: &[DVector<f64>]) -> DVector<f64> {
        combine(z, &self.tm.left_values, self.dual_len())
    }

    pub fn primal_load(&self, source: &SourceTerm, t0: f64) -> SlabVectors {
        self.loads_p.slab(source, &self.tm, t0)
    }

    pub fn dual_load(&self, source: &SourceTerm, t0: f64) -> SlabVectors {
        self.loads_d.slab(source, &self.tm, t0)
    }

    /// Solves `A_N u = F_N + φ(0) ⊗ coupling`, where `coupling = Z_pᵀ M_h u_prev(t_{m-1})`.
    pub fn solve_primal(&self, coupling: &DVector<f64>, load: &[DVector<f64>]) -> Result<SlabVectors> {
        let n = self.primal_len();
        let mut rhs = load.to_vec();
        for (r, l) in rhs.iter_mut().zip(self.tm.left_values.iter()) {
            r.axpy(*l, coupling, 1.0);
        }
        Ok(split(&self.primal.solve(&flatten(&rhs, n))?, self.tm.len(), n))
    }

    /// Solves `A_Nᵀ z = J_N + φ(1) ⊗ (M_dd · z_next(t_m^+))`.
    pub fn solve_dual(&self, next_start: &DVector<f64>, rhs: &[DVector<f64>]) -> Result<SlabVectors> {
        let n = self.dual_len();
        let coupling = &self.mdd * next_start;
        let mut full = rhs.to_vec();
        for (r, l) in full.iter_mut().zip(self.tm.right_values.iter()) {
            r.axpy(*l, &coupling, 1.0);
        }
        Ok(split(&self.dual.solve(&flatten(&full, n))?, self.tm.len(), n))
    }

    /// Reduced goal right-hand side, linearized at the reduced primal `u` when needed.
    pub fn dual_rhs(&self, u: &[DVector<f64>]) -> SlabVectors {
        let s = self.goal_scale;
        match &self.goal {
            ReducedGoal::Linear { dual, .. } => self.tm.integrals.iter().map(|w| dual * (s * w)).collect(),
            ReducedGoal::Quadratic => {
                let mu: Vec<_> = u.iter().map(|ui| &self.mdp * ui).collect();
                (0..self.tm.len())
                    .map(|i| {
                        let mut r = DVector::zeros(self.dual_len());
                        for (j, v) in mu.iter().enumerate() {
                            r.axpy(2.0 * s * self.tm.mass[(i, j)], v, 1.0);
                        }
                        r
                    })
                    .collect()
            }
        }
    }

    /// Goal contribution of a reduced slab solution.
    pub fn goal_value(&self, u: &[DVector<f64>]) -> f64 {
        let s = self.goal_scale;
        match &self.goal {
            ReducedGoal::Linear { primal, .. } => {
                s * u.iter().zip(self.tm.integrals.iter()).map(|(ui, w)| w * primal.dot(ui)).sum::<f64>()
            }
            ReducedGoal::Quadratic => {
                let mu: Vec<_> = u.iter().map(|ui| &self.mpp * ui).collect();
                let mut total = 0.0;
                for (i, ui) in u.iter().enumerate() {
                    for (j, v) in mu.iter().enumerate() {
                        total += self.tm.mass[(i, j)] * ui.dot(v);
                    }
                }
                s * total
            }
        }
    }

    /// Slab estimator `Σ_i z_i·(F_d - A_dp u - B_dp u_prev)_i`; `dual_coupling` is
    /// `Z_dᵀ M_h u_prev(t_{m-1})`.
    pub fn estimate(
        &self,
        u: &[DVector<f64>],
        dual_coupling: &DVector<f64>,
        z: &[DVector<f64>],
        dual_load: &[DVector<f64>],
    ) -> f64 {
        let nd = self.dual_len();
        if nd == 0 {
            return 0.0;
        }
        let au = &self.a_dp * flatten(u, self.primal_len());
        let mut eta = 0.0;
        for i in 0..self.tm.len() {
            let mut r = dual_load[i].clone() - au.rows(i * nd, nd);
            r.axpy(self.tm.left_values[i], dual_coupling, 1.0);
            eta += z[i].dot(&r);
        }
        eta
    }

    pub fn prolongate_primal(&self, u: &[DVector<f64>]) -> SlabVectors {
        u.iter().map(|ui| &self.zp * ui).collect()
    }

    pub fn prolongate_dual(&self, z: &[DVector<f64>]) -> SlabVectors {
        z.iter().map(|zi| &self.zd * zi).collect()
    }

    pub fn restrict_primal(&self, u: &[DVector<f64>]) -> SlabVectors {
        u.iter().map(|ui| self.zp.transpose() * ui).collect()
    }
}

/// `U = Z u` per temporal node.
pub fn prolongate(u: &[DVector<f64>], z: &DMatrix<f64>) -> SlabVectors {
    u.iter().map(|ui| z * ui).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goal::{Goal, GoalSpec};
    use crate::spatial::{assemble_heat, build_mesh, SourceId};
    use crate::temporal::{NodeFamily, TemporalBasis, TemporalGrid};

    fn model(cells: usize, source: SourceId, goal: GoalSpec) -> FullOrderModel {
        let mesh = build_mesh(1, &[(0.0, 1.0)], &[cells], 1).unwrap();
        let ops = assemble_heat(&mesh, &mesh.all_faces()).unwrap();
        let grid = TemporalGrid::new(0.0, 4.0, 32).unwrap();
        let basis = TemporalBasis::new(1, NodeFamily::GaussLegendre).unwrap();
        let src = SourceTerm::new(source, &mesh, &ops).unwrap();
        let goal = Goal::new(&goal, &mesh, &ops, 4.0).unwrap();
        FullOrderModel::new(mesh, ops, grid, basis, src, goal, None).unwrap()
    }

    fn mean_goal() -> GoalSpec {
        GoalSpec::MeanValueSubdomain { lower: vec![0.0], upper: vec![0.5] }
    }

    fn identity_basis(n: usize) -> ReducedBasis {
        ReducedBasis::from_columns(DMatrix::identity(n, n), None, 1.0).unwrap()
    }

    #[test]
    fn full_basis_reproduces_the_full_order_model() {
        let fom = model(24, SourceId::Moving1d, mean_goal());
        let n = fom.dofs();
        let red = ReducedOperators::new(&fom, &identity_basis(n), &identity_basis(n)).unwrap();
        let mut coupling = red.primal_trace_coupling(fom.initial());
        let mut incoming = fom.initial().clone();
        for m in 0..fom.slabs() {
            let full = fom.solve_primal_slab(m, &incoming).unwrap();
            let t0 = fom.grid().interval(m).0;
            let u = red.solve_primal(&coupling, &red.primal_load(fom.source(), t0)).unwrap();
            for (a, b) in full.iter().zip(&u) {
                assert!((a - b).amax() < 1e-10);
            }
            assert!((fom.slab_goal(&full) - red.goal_value(&u)).abs() < 1e-14);
            incoming = fom.system().end_value(&full);
            coupling = red.couplings_from_reduced(&u).0;
        }
    }

    #[test]
    fn one_mode_projection_is_the_scalar_system() {
        let fom = model(10, SourceId::Zero, mean_goal());
        let n = fom.dofs();
        let v = DVector::from_fn(n, |i, _| if i == 0 || i == n - 1 { 0.0 } else { 1.0 });
        let unit: DVector<f64> = &v / v.norm();
        let z = DMatrix::from_column_slice(n, 1, unit.as_slice());
        let b = ReducedBasis::from_columns(z.clone(), None, 1.0).unwrap();
        let red = ReducedOperators::new(&fom, &b, &b).unwrap();
        let m = (z.transpose() * fom.system().mass().mul_dense(&z))[(0, 0)];
        let k = (z.transpose() * fom.system().stiffness().mul_dense(&z))[(0, 0)];
        let expected = fom.temporal().derivative() * m + &fom.temporal().mass * k;
        assert!((reduced_slab_matrix(fom.temporal(), &red.mpp, &red.kpp) - expected).amax() < 1e-14);
    }

    #[test]
    fn galerkin_orthogonality_of_the_reduced_solution() {
        let fom = model(40, SourceId::Moving1d, mean_goal());
        let snaps = fom.primal_trajectory().unwrap();
        let mut y = DMatrix::zeros(fom.dofs(), 6);
        for (c, m) in [3, 9, 20].iter().enumerate() {
            y.set_column(2 * c, &snaps[*m][0]);
            y.set_column(2 * c + 1, &snaps[*m][1]);
        }
        let basis = crate::pod::pod_batch(&y, 1.0).unwrap();
        let red = ReducedOperators::new(&fom, &basis, &basis).unwrap();
        let mut coupling = red.primal_trace_coupling(fom.initial());
        let mut full_prev = fom.initial().clone();
        for m in 0..12 {
            let t0 = fom.grid().interval(m).0;
            let u = red.solve_primal(&coupling, &red.primal_load(fom.source(), t0)).unwrap();
            let big = red.prolongate_primal(&u);
            let f = fom.load(m);
            let au = fom.system().apply(&big);
            let bu = fom.system().apply_coupling(&full_prev);
            for i in 0..2 {
                let r = &f[i] - &au[i] - &bu[i];
                let proj = basis.matrix().transpose() * r;
                assert!(proj.amax() < 1e-9, "slab {m}: {}", proj.amax());
            }
            full_prev = fom.system().end_value(&big);
            coupling = red.couplings_from_reduced(&u).0;
        }
    }

    #[test]
    fn reduced_loads_match_projected_full_loads() {
        let fom = model(50, SourceId::Moving1d, mean_goal());
        let z = DMatrix::from_fn(fom.dofs(), 3, |i, c| ((i * (c + 2)) as f64 * 0.1).sin());
        let loads = ReducedLoads::new(fom.source(), &z, fom.system().constrained());
        for t in [0.13, 1.7, 2.2, 3.9] {
            let full = fom.source().load(t);
            let red = loads.apply(&fom.source().sample(t));
            assert!((z.transpose() * full - red).amax() < 1e-13);
        }
    }

    #[test]
    fn empty_basis_gives_zero() {
        let fom = model(8, SourceId::Moving1d, mean_goal());
        let e = ReducedBasis::empty(fom.dofs(), 0.9);
        let red = ReducedOperators::new(&fom, &e, &e).unwrap();
        let u = red.solve_primal(&DVector::zeros(0), &red.primal_load(fom.source(), 0.0)).unwrap();
        assert_eq!(u.len(), 2);
        assert_eq!(red.goal_value(&u), 0.0);
        assert_eq!(red.estimate(&u, &DVector::zeros(0), &u, &u), 0.0);
    }

    #[test]
    fn prolongation_is_an_isometry_on_the_span() {
        let z = crate::pod::pod_batch(&DMatrix::from_fn(9, 3, |i, j| ((i + 1) * (j + 2)) as f64 % 5.0), 1.0)
            .unwrap()
            .matrix()
            .clone();
        let u = vec![DVector::from_fn(z.ncols(), |i, _| i as f64 - 0.5)];
        let big = prolongate(&u, &z);
        assert!((big[0].norm() - u[0].norm()).abs() < 1e-12);
        let back = z.transpose() * &big[0];
        assert!((back - &u[0]).amax() < 1e-12);
        assert!(prolongate(&[DVector::zeros(z.ncols())], &z)[0].amax() == 0.0);
    }
}
