//! Tensor-product finite elements in space: meshes, operators, sources and
//! spatial goal densities.

mod assembly;
mod element;
mod functionals;
mod mesh;
mod source;

pub use assembly::{assemble_elasto, assemble_heat, elastic_stiffness, scalar_mass, FieldKind, Material, SpatialOperators};
pub use element::ReferenceElement;
pub use functionals::{boundary_stress_vector, face_quadrature, subdomain_vector, FacePoint};
pub use mesh::{build_mesh, Face, SpatialMesh};
pub use source::{beam_traction_amplitude, LoadSample, QuadratureCloud, SourceId, SourceTerm};
