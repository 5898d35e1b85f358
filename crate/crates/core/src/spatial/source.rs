use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::assembly::{FieldKind, SpatialOperators};
use super::element::ReferenceElement;
use super::functionals::face_quadrature;
use super::mesh::{Face, SpatialMesh};
use crate::error::{Error, Result};

/// Every element quadrature point of the mesh, numbered lexicographically by
/// its global grid position so that the points of a box are index ranges.
#[derive(Debug, Clone)]
pub struct QuadratureCloud {
    mesh: SpatialMesh,
    element: ReferenceElement,
    per_cell: usize,
    counts: [usize; 3],
    axis_coords: [Vec<f64>; 3],
    jacobian: f64,
}

impl QuadratureCloud {
    pub fn new(mesh: &SpatialMesh) -> Self {
        let element = ReferenceElement::new(mesh.dim(), mesh.degree());
        let per_cell = mesh.degree() + 1;
        let mut counts = [1; 3];
        let mut axis_coords: [Vec<f64>; 3] = [vec![0.0], vec![0.0], vec![0.0]];
        let ref_pts: Vec<f64> = (0..per_cell).map(|i| element.points()[i][0]).collect();
        for a in 0..mesh.dim() {
            let cells = mesh.cells_per_axis()[a];
            counts[a] = cells * per_cell;
            let (lo, _) = mesh.extent(a);
            let h = mesh.cell_size(a);
            axis_coords[a] = (0..counts[a])
                .map(|g| lo + ((g / per_cell) as f64 + ref_pts[g % per_cell]) * h)
                .collect();
        }
        let jacobian = (0..mesh.dim()).map(|a| mesh.cell_size(a)).product();
        QuadratureCloud { mesh: mesh.clone(), element, per_cell, counts, axis_coords, jacobian }
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    /// Points along one axis.
    pub fn axis_count(&self, axis: usize) -> usize {
        self.counts[axis]
    }

    /// Sorted point coordinates along one axis.
    pub fn axis_coords(&self, axis: usize) -> &[f64] {
        &self.axis_coords[axis]
    }

    fn split(&self, q: usize) -> [usize; 3] {
        [q % self.counts[0], (q / self.counts[0]) % self.counts[1], q / (self.counts[0] * self.counts[1])]
    }

    pub fn coords(&self, q: usize) -> [f64; 3] {
        let g = self.split(q);
        [self.axis_coords[0][g[0]], self.axis_coords[1][g[1]], self.axis_coords[2][g[2]]]
    }

    /// Calls `f(node, w_q·N_a(x_q))` for every shape function of the cell holding `q`.
    pub fn for_each_shape(&self, q: usize, mut f: impl FnMut(usize, f64)) {
        let g = self.split(q);
        let p = self.per_cell;
        let dim = self.mesh.dim();
        let mut cell = [0; 3];
        let mut local = 0;
        let mut stride = 1;
        for a in 0..dim {
            cell[a] = g[a] / p;
            local += (g[a] % p) * stride;
            stride *= p;
        }
        let w = self.element.weights()[local] * self.jacobian;
        let nodes = self.mesh.cell_nodes(self.mesh.cell_index(cell));
        for (node, v) in nodes.iter().zip(&self.element.values()[local]) {
            f(*node, w * v);
        }
    }

    /// Index range of points along `axis` whose coordinate `x` satisfies `inside(x)`,
    /// assuming `inside` holds on one interval around `centre`.
    pub fn axis_range(&self, axis: usize, centre: f64, inside: impl Fn(f64) -> bool) -> Range<usize> {
        let xs = &self.axis_coords[axis];
        let lo = xs.partition_point(|&x| x < centre && !inside(x));
        let hi = xs.partition_point(|&x| x < centre || inside(x));
        lo..hi.max(lo)
    }
}

/// Built-in right-hand sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceId {
    /// No forcing.
    Zero,
    /// Heat pulse of width 0.1 sweeping across the unit interval and back, with
    /// an amplitude that changes every second.
    #[serde(rename = "moving_1d")]
    Moving1d,
    /// Disk of radius 0.125 orbiting the centre of the unit square, amplitude `sin(4πt)`.
    #[serde(rename = "rotating_2d")]
    Rotating2d,
    /// Vertical ramp-up/release traction on the top face of a beam.
    #[serde(rename = "beam_traction_3d")]
    BeamTraction3d,
}

impl SourceId {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceId::Zero => "zero",
            SourceId::Moving1d => "moving_1d",
            SourceId::Rotating2d => "rotating_2d",
            SourceId::BeamTraction3d => "beam_traction_3d",
        }
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(SourceId::Zero),
            "moving_1d" => Ok(SourceId::Moving1d),
            "rotating_2d" => Ok(SourceId::Rotating2d),
            "beam_traction_3d" => Ok(SourceId::BeamTraction3d),
            other => Err(Error::config("source", format!("unknown source id `{other}`"))),
        }
    }
}

/// Beam traction amplitude: linear ramp to `f_max` until `t1`, linear release until `t2`.
pub fn beam_traction_amplitude(t: f64) -> f64 {
    const F_MAX: f64 = 0.5;
    const T1: f64 = 5.0;
    const T2: f64 = 6.0;
    if t <= T1 {
        F_MAX * t / T1
    } else if t <= T2 {
        F_MAX * (1.0 - (t - T1) / (T2 - T1))
    } else {
        0.0
    }
}

/// Centre of the 1D pulse and its amplitude.
fn moving_pulse(t: f64) -> (f64, f64) {
    let amplitude = match t {
        t if t < 1.0 => 0.2,
        t if t < 2.0 => -0.5,
        t if t < 3.0 => 1.0,
        _ => -0.75,
    };
    let centre = if t < 2.0 { 0.4 * t + 0.1 } else { 0.9 - 0.4 * (t - 2.0) };
    (centre, amplitude)
}

fn orbit(t: f64) -> [f64; 2] {
    let phi = 2.0 * std::f64::consts::PI * t;
    [0.5 + 0.25 * phi.cos(), 0.5 + 0.25 * phi.sin()]
}

/// Source data at one instant, in a form that both the full and the reduced
/// load assembly can consume.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadSample {
    Zero,
    /// `amplitude` on the union of quadrature-point ranges.
    Indicator { amplitude: f64, ranges: Vec<Range<usize>> },
    /// Explicit value at every quadrature point.
    Pointwise(Vec<f64>),
    /// `amplitude` times the fixed load profile of the source.
    Scaled { amplitude: f64 },
}

type CustomFn = Arc<dyn Fn(f64, [f64; 3]) -> f64 + Send + Sync>;

/// A right-hand side bound to a discretization.
#[derive(Clone)]
pub struct SourceTerm {
    label: String,
    cloud: Arc<QuadratureCloud>,
    dofs: usize,
    components: usize,
    constrained: Vec<bool>,
    kind: SourceKind,
}

#[derive(Clone)]
enum SourceKind {
    Zero,
    Moving1d,
    Rotating2d,
    Profile { profile: DVector<f64>, amplitude: fn(f64) -> f64 },
    Custom(CustomFn),
}

impl fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceTerm").field("label", &self.label).field("dofs", &self.dofs).finish()
    }
}

impl SourceTerm {
    pub fn new(id: SourceId, mesh: &SpatialMesh, ops: &SpatialOperators) -> Result<Self> {
        let kind = match id {
            SourceId::Zero => SourceKind::Zero,
            SourceId::Moving1d => {
                if mesh.dim() != 1 || ops.field != FieldKind::Scalar {
                    return Err(Error::config("source", "moving_1d needs a scalar problem in one dimension"));
                }
                SourceKind::Moving1d
            }
            SourceId::Rotating2d => {
                if mesh.dim() != 2 || ops.field != FieldKind::Scalar {
                    return Err(Error::config("source", "rotating_2d needs a scalar problem in two dimensions"));
                }
                SourceKind::Rotating2d
            }
            SourceId::BeamTraction3d => {
                let FieldKind::Elastic { dim, .. } = ops.field else {
                    return Err(Error::config("source", "beam_traction_3d needs an elastodynamics problem"));
                };
                let top = Face::upper(dim - 1);
                let mut profile = DVector::zeros(ops.dofs());
                for fp in face_quadrature(mesh, top) {
                    for (node, v) in fp.nodes.iter().zip(&fp.values) {
                        profile[ops.forcing_dof(*node, dim - 1)] += fp.weight * v;
                    }
                }
                ops.apply_constraints(profile.as_mut_slice());
                SourceKind::Profile { profile, amplitude: beam_traction_amplitude }
            }
        };
        Ok(Self::with_kind(id.as_str(), kind, mesh, ops))
    }

    /// Scalar source `f(t, x)` sampled at the element quadrature points.
    pub fn custom(
        label: &str,
        mesh: &SpatialMesh,
        ops: &SpatialOperators,
        f: impl Fn(f64, [f64; 3]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if ops.field != FieldKind::Scalar {
            return Err(Error::config("source", "custom sources are scalar"));
        }
        Ok(Self::with_kind(label, SourceKind::Custom(Arc::new(f)), mesh, ops))
    }

    fn with_kind(label: &str, kind: SourceKind, mesh: &SpatialMesh, ops: &SpatialOperators) -> Self {
        SourceTerm {
            label: label.to_string(),
            cloud: Arc::new(QuadratureCloud::new(mesh)),
            dofs: ops.dofs(),
            components: ops.components(),
            constrained: ops.constrained.clone(),
            kind,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn cloud(&self) -> &QuadratureCloud {
        &self.cloud
    }

    pub fn dofs(&self) -> usize {
        self.dofs
    }

    /// Fixed load profile used by [`LoadSample::Scaled`].
    pub fn profile(&self) -> Option<&DVector<f64>> {
        match &self.kind {
            SourceKind::Profile { profile, .. } => Some(profile),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, SourceKind::Zero)
    }

    pub fn sample(&self, t: f64) -> LoadSample {
        let cloud = &*self.cloud;
        match &self.kind {
            SourceKind::Zero => LoadSample::Zero,
            SourceKind::Moving1d => {
                let (centre, amplitude) = moving_pulse(t);
                let range = cloud.axis_range(0, centre, |x| (x - centre).abs() <= 0.05);
                LoadSample::Indicator { amplitude, ranges: vec![range] }
            }
            SourceKind::Rotating2d => {
                let p = orbit(t);
                let r2 = 0.125f64 * 0.125;
                let amplitude = (4.0 * std::f64::consts::PI * t).sin();
                let n0 = cloud.axis_count(0);
                let mut ranges = Vec::new();
                for (j, &y) in cloud.axis_coords(1).iter().enumerate() {
                    let dy2 = (y - p[1]).powi(2);
                    if dy2 >= r2 {
                        continue;
                    }
                    let row = cloud.axis_range(0, p[0], |x| (x - p[0]).powi(2) + dy2 < r2);
                    if !row.is_empty() {
                        ranges.push(j * n0 + row.start..j * n0 + row.end);
                    }
                }
                LoadSample::Indicator { amplitude, ranges }
            }
            SourceKind::Profile { amplitude, .. } => LoadSample::Scaled { amplitude: amplitude(t) },
            SourceKind::Custom(f) => LoadSample::Pointwise((0..cloud.len()).map(|q| f(t, cloud.coords(q))).collect()),
        }
    }

    /// Spatial load vector `∫ f(t)·φ_i` with constrained entries zeroed.
    pub fn load(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dofs);
        self.add_load(t, 1.0, out.as_mut_slice());
        out
    }

    /// `out += scale · load(t)`.
    pub fn add_load(&self, t: f64, scale: f64, out: &mut [f64]) {
        let c = self.components;
        match self.sample(t) {
            LoadSample::Zero => {}
            LoadSample::Indicator { amplitude, ranges } => {
                let a = scale * amplitude;
                if a == 0.0 {
                    return;
                }
                for q in ranges.into_iter().flatten() {
                    self.cloud.for_each_shape(q, |node, w| out[node * c] += a * w);
                }
            }
            LoadSample::Pointwise(values) => {
                for (q, v) in values.into_iter().enumerate() {
                    if v != 0.0 {
                        self.cloud.for_each_shape(q, |node, w| out[node * c] += scale * v * w);
                    }
                }
            }
            LoadSample::Scaled { amplitude } => {
                if let Some(p) = self.profile() {
                    for (o, x) in out.iter_mut().zip(p.iter()) {
                        *o += scale * amplitude * x;
                    }
                }
            }
        }
        for (o, &fixed) in out.iter_mut().zip(&self.constrained) {
            if fixed {
                *o = 0.0;
            }
        }
    }
}
