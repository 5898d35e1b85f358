//! The full-order model: a discretization plus data, solved slab by slab.

use std::io::Write;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::goal::Goal;
use crate::slab::{slab_load, SlabSystem, SlabVectors, SnapshotWriter};
use crate::spatial::{SourceTerm, SpatialMesh, SpatialOperators};
use crate::temporal::{temporal_matrices, TemporalBasis, TemporalGrid, TemporalMatrices};

/// Everything needed to run primal and dual full-order sweeps.
#[derive(Debug, Clone)]
pub struct FullOrderModel {
    mesh: SpatialMesh,
    ops: SpatialOperators,
    grid: TemporalGrid,
    basis: TemporalBasis,
    system: SlabSystem,
    source: SourceTerm,
    goal: Goal,
    initial: DVector<f64>,
}

impl FullOrderModel {
    /// `initial = None` means a zero initial state.
    pub fn new(
        mesh: SpatialMesh,
        ops: SpatialOperators,
        grid: TemporalGrid,
        basis: TemporalBasis,
        source: SourceTerm,
        goal: Goal,
        initial: Option<DVector<f64>>,
    ) -> Result<Self> {
        let tm = temporal_matrices(&basis, grid.step())?;
        let system = SlabSystem::new(&ops, &tm)?;
        let initial = initial.unwrap_or_else(|| DVector::zeros(ops.dofs()));
        if initial.len() != ops.dofs() || source.dofs() != ops.dofs() {
            return Err(Error::Dimension(format!(
                "initial state ({}) and source ({}) must have {} entries",
                initial.len(),
                source.dofs(),
                ops.dofs()
            )));
        }
        Ok(FullOrderModel { mesh, ops, grid, basis, system, source, goal, initial })
    }

    pub fn mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    pub fn operators(&self) -> &SpatialOperators {
        &self.ops
    }

    pub fn grid(&self) -> &TemporalGrid {
        &self.grid
    }

    pub fn temporal_basis(&self) -> &TemporalBasis {
        &self.basis
    }

    pub fn temporal(&self) -> &TemporalMatrices {
        self.system.temporal()
    }

    pub fn system(&self) -> &SlabSystem {
        &self.system
    }

    pub fn source(&self) -> &SourceTerm {
        &self.source
    }

    pub fn goal(&self) -> &Goal {
        &self.goal
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.initial
    }

    pub fn dofs(&self) -> usize {
        self.ops.dofs()
    }

    pub fn slabs(&self) -> usize {
        self.grid.len()
    }

    /// Load vectors of slab `m`.
    pub fn load(&self, m: usize) -> SlabVectors {
        slab_load(&self.source, self.temporal(), self.grid.interval(m).0)
    }

    /// Primal solve on slab `m` given the end value of the previous slab.
    pub fn solve_primal_slab(&self, m: usize, incoming: &DVector<f64>) -> Result<SlabVectors> {
        self.system.solve_primal(incoming, &self.load(m))
    }

    /// Dual solve on one slab; `state` is the primal linearization point for nonlinear goals.
    pub fn solve_dual_slab(&self, incoming: &DVector<f64>, state: Option<&[DVector<f64>]>) -> Result<SlabVectors> {
        let rhs = self.goal.slab_rhs(self.temporal(), state)?;
        self.system.solve_dual(incoming, &rhs)
    }

    pub fn slab_goal(&self, u: &[DVector<f64>]) -> f64 {
        self.goal.slab_value(self.temporal(), u)
    }

    /// Forward sweep over all slabs, calling `visit(m, U_m)` for each.
    pub fn sweep_primal(&self, mut visit: impl FnMut(usize, &SlabVectors) -> Result<()>) -> Result<()> {
        let mut incoming = self.initial.clone();
        for m in 0..self.slabs() {
            let u = self.solve_primal_slab(m, &incoming)?;
            visit(m, &u)?;
            incoming = self.system.end_value(&u);
        }
        Ok(())
    }

    /// Whole primal trajectory. Memory grows with `M·(r+1)·n`; meant for small problems.
    pub fn primal_trajectory(&self) -> Result<Vec<SlabVectors>> {
        let mut out = Vec::with_capacity(self.slabs());
        self.sweep_primal(|_, u| {
            out.push(u.clone());
            Ok(())
        })?;
        Ok(out)
    }

    /// Per-slab goal values of the primal solution, optionally dumping every slab.
    pub fn goal_trajectory<W: Write>(&self, mut dump: Option<&mut SnapshotWriter<W>>) -> Result<Vec<f64>> {
        let mut values = Vec::with_capacity(self.slabs());
        self.sweep_primal(|_, u| {
            values.push(self.slab_goal(u));
            if let Some(w) = dump.as_deref_mut() {
                w.write_slab(u)?;
            }
            Ok(())
        })?;
        Ok(values)
    }

    /// Backward dual sweep over all slabs, linearized at `primal` when the goal is nonlinear.
    pub fn dual_trajectory(&self, primal: Option<&[SlabVectors]>) -> Result<Vec<SlabVectors>> {
        if !self.goal.is_linear() && primal.is_none() {
            return Err(Error::config("goal", "nonlinear goal needs the primal trajectory for its dual"));
        }
        let mut out = vec![Vec::new(); self.slabs()];
        let mut incoming = DVector::zeros(self.dofs());
        for m in (0..self.slabs()).rev() {
            let state = primal.map(|p| p[m].as_slice());
            let z = self.solve_dual_slab(&incoming, state)?;
            incoming = self.system.start_value(&z);
            out[m] = z;
        }
        Ok(out)
    }
}
