//! JSON experiment descriptions and the built-in presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::driver::{DriverConfig, RunMode};
use crate::error::{Error, Result};
use crate::fom::FullOrderModel;
use crate::goal::{Goal, GoalSpec};
use crate::spatial::{assemble_elasto, assemble_heat, build_mesh, Face, Material, SourceId, SourceTerm};
use crate::temporal::{NodeFamily, TemporalBasis, TemporalGrid};

/// Which PDE the experiment solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Heat,
    Elastodynamics,
}

/// Tensor-product box mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// `[lower, upper]` per axis.
    pub extents: Vec<[f64; 2]>,
    pub cells: Vec<usize>,
    pub degree: usize,
}

/// One face of the box carrying homogeneous Dirichlet data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceConfig {
    pub axis: usize,
    pub upper: bool,
}

/// Temporal discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub end: f64,
    pub slabs: usize,
    pub degree: usize,
    pub family: NodeFamily,
}

/// Reduced-order model and adaptivity settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RomConfig {
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub tol: f64,
    pub parent_slabs: usize,
    pub slabs_per_parent: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_enrichments: Option<usize>,
    #[serde(default = "default_true")]
    pub validation: bool,
}

fn default_true() -> bool {
    true
}

/// A complete experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub equation: Equation,
    pub mesh: MeshConfig,
    pub dirichlet: Vec<FaceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<Material>,
    pub time: TimeConfig,
    pub source: SourceId,
    pub goal: GoalSpec,
    pub rom: RomConfig,
    pub mode: RunMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Built-in experiments as `(name, JSON)`.
pub const PRESETS: &[(&str, &str)] = &[
    ("heat_1d", include_str!("../../../presets/heat_1d.json")),
    ("heat_2d", include_str!("../../../presets/heat_2d.json")),
    ("elasto_3d", include_str!("../../../presets/elasto_3d.json")),
];

/// Parses a configuration from JSON text, reporting the path of the offending key.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        // Missing keys are reported against their parent, so name the key itself.
        let field = match missing_field(&message) {
            Some(name) if path == "." => name.to_string(),
            Some(name) => format!("{path}.{name}"),
            None => path,
        };
        Error::Config { field, message }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn missing_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}

/// Reads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_config(&text)
}

/// Looks up a built-in preset by name.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::config("preset", format!("unknown preset `{name}`")))?;
    parse_config(text)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let dim = self.mesh.extents.len();
        if self.mesh.cells.len() != dim {
            return Err(Error::config("mesh.cells", format!("expected {dim} entries, got {}", self.mesh.cells.len())));
        }
        if let Some(face) = self.dirichlet.iter().find(|f| f.axis >= dim) {
            return Err(Error::config("dirichlet", format!("axis {} out of range for dimension {dim}", face.axis)));
        }
        match (self.equation, &self.material) {
            (Equation::Elastodynamics, None) => {
                return Err(Error::config("material", "elastodynamics needs Lamé parameters"))
            }
            (Equation::Elastodynamics, Some(m)) => m.validate()?,
            (Equation::Heat, Some(_)) => {
                return Err(Error::config("material", "the heat equation takes no material"))
            }
            (Equation::Heat, None) => {}
        }
        let rom = &self.rom;
        if rom.parent_slabs * rom.slabs_per_parent != self.time.slabs {
            return Err(Error::config(
                "rom.slabs_per_parent",
                format!(
                    "{} parent-slabs of {} slabs do not cover {} slabs",
                    rom.parent_slabs, rom.slabs_per_parent, self.time.slabs
                ),
            ));
        }
        self.driver_config(1).validate(self.time.slabs).map_err(|e| match e {
            Error::Config { field, message } => Error::Config { field: format!("rom.{field}"), message },
            other => other,
        })
    }

    pub fn dim(&self) -> usize {
        self.mesh.extents.len()
    }

    pub fn driver_config(&self, threads: usize) -> DriverConfig {
        DriverConfig {
            tol: self.rom.tol,
            eps_primal: self.rom.eps_primal,
            eps_dual: self.rom.eps_dual,
            parent_slabs: self.rom.parent_slabs,
            max_enrichments: self.rom.max_enrichments,
            validation: self.rom.validation,
            threads,
        }
    }

    /// Assembles the full-order model described by this configuration.
    pub fn build_model(&self) -> Result<FullOrderModel> {
        self.validate()?;
        let extents: Vec<(f64, f64)> = self.mesh.extents.iter().map(|e| (e[0], e[1])).collect();
        let mesh = build_mesh(self.dim(), &extents, &self.mesh.cells, self.mesh.degree)?;
        let faces: Vec<Face> = self.dirichlet.iter().map(|f| Face { axis: f.axis, upper: f.upper }).collect();
        let ops = match (self.equation, self.material) {
            (Equation::Heat, _) => assemble_heat(&mesh, &faces)?,
            (Equation::Elastodynamics, Some(material)) => assemble_elasto(&mesh, material, &faces)?,
            (Equation::Elastodynamics, None) => unreachable!("validated above"),
        };
        let grid = TemporalGrid::new(0.0, self.time.end, self.time.slabs)?;
        let basis = TemporalBasis::new(self.time.degree, self.time.family)?;
        let source = SourceTerm::new(self.source, &mesh, &ops)?;
        let goal = Goal::new(&self.goal, &mesh, &ops, self.time.end)?;
        FullOrderModel::new(mesh, ops, grid, basis, source, goal, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for (name, _) in PRESETS {
            let cfg = preset(name).unwrap();
            assert_eq!(&cfg.name, name);
        }
    }

    #[test]
    fn heat_1d_preset_values() {
        let cfg = preset("heat_1d").unwrap();
        assert_eq!(cfg.time.slabs, 5120);
        assert_eq!(cfg.rom.parent_slabs, 64);
        assert_eq!(cfg.rom.slabs_per_parent, 80);
        assert_eq!(cfg.time.degree, 1);
        assert_eq!(cfg.time.family, NodeFamily::GaussLegendre);
        assert!((cfg.rom.eps_primal - (1.0 - 1e-8)).abs() < 1e-16);
    }

    #[test]
    fn elasto_3d_preset_values() {
        let cfg = preset("elasto_3d").unwrap();
        assert_eq!(cfg.time.slabs, 1600);
        assert_eq!(cfg.rom.parent_slabs, 80);
        assert_eq!(cfg.rom.slabs_per_parent, 20);
        assert_eq!(cfg.time.degree, 2);
        assert_eq!(cfg.time.family, NodeFamily::GaussLobatto);
        assert!((cfg.rom.eps_primal - (1.0 - 1e-11)).abs() < 1e-16);
    }

    #[test]
    fn missing_tol_is_named() {
        let mut value: serde_json::Value = serde_json::from_str(PRESETS[0].1).unwrap();
        value["rom"].as_object_mut().unwrap().remove("tol");
        match parse_config(&value.to_string()) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "rom.tol"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut value: serde_json::Value = serde_json::from_str(PRESETS[0].1).unwrap();
        value["mesh"]["colour"] = serde_json::json!("red");
        match parse_config(&value.to_string()) {
            Err(Error::Config { field, .. }) => assert!(field.starts_with("mesh"), "{field}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inconsistent_parent_split_is_rejected() {
        let mut cfg = preset("heat_1d").unwrap();
        cfg.rom.slabs_per_parent = 79;
        assert!(matches!(cfg.validate(), Err(Error::Config { ref field, .. }) if field == "rom.slabs_per_parent"));
    }

    #[test]
    fn round_trip_is_identity() {
        for (name, _) in PRESETS {
            let cfg = preset(name).unwrap();
            let text = serde_json::to_string_pretty(&cfg).unwrap();
            assert_eq!(parse_config(&text).unwrap(), cfg);
        }
    }
}
