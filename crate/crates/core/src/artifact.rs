//! One submission: meshes, an optional truss model, optional blueprint and
//! the metadata manifest that ties them to the checker.

use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blueprint::{parse_blueprint, Axis, BlueprintDoc};
use crate::doc;
use crate::error::{Error, Result};
use crate::fea::{parse_model, parse_solver_report, AnalysisModel, SolverReportDoc};
use crate::mesh::{load_mesh, TriMesh};

pub const MANIFEST_SCHEMA: &str = "artifact_manifest/1";
pub const MANIFEST_FILE: &str = "artifact_manifest.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshEntry {
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_name: Option<String>,
}

/// A declared value: a bare number (read in the requirement's unit) or a
/// full record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Declared {
    Bare(f64),
    Full {
        value: f64,
        #[serde(default)]
        unit: String,
        /// Defaults to `design` and `assembly`.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        scopes: Vec<String>,
    },
}

impl Declared {
    pub fn value(&self) -> f64 {
        match self {
            Declared::Bare(v) | Declared::Full { value: v, .. } => *v,
        }
    }

    pub fn unit(&self) -> &str {
        match self {
            Declared::Bare(_) => "",
            Declared::Full { unit, .. } => unit,
        }
    }

    pub fn scopes(&self) -> Vec<String> {
        match self {
            Declared::Full { scopes, .. } if !scopes.is_empty() => scopes.clone(),
            _ => vec!["design".into(), "assembly".into()],
        }
    }
}

fn default_axis() -> Axis {
    Axis::Z
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactManifest {
    pub schema: String,
    #[serde(default)]
    pub meshes: Vec<MeshEntry>,
    /// Truss analysis model document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blueprint: Option<String>,
    /// Report from an external solver; used instead of the built-in one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_report: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_kg_m3: Option<f64>,
    #[serde(default = "default_axis")]
    pub projection_axis: Axis,
    /// Extra node sets merged into the model's selectors.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub selectors: BTreeMap<String, Vec<usize>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub declared_measurements: BTreeMap<String, Declared>,
    /// Metric name → canonical key.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aliases: BTreeMap<String, String>,
}

impl ArtifactManifest {
    pub fn new() -> Self {
        ArtifactManifest {
            schema: MANIFEST_SCHEMA.into(),
            meshes: Vec::new(),
            model: None,
            blueprint: None,
            solver_report: None,
            density_kg_m3: None,
            projection_axis: Axis::Z,
            selectors: BTreeMap::new(),
            declared_measurements: BTreeMap::new(),
            aliases: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != MANIFEST_SCHEMA {
            return Err(Error::schema("$.schema", format!("expected `{MANIFEST_SCHEMA}`")));
        }
        if self.meshes.is_empty() && self.model.is_none() && self.solver_report.is_none() {
            return Err(Error::schema("$", "artifact ships neither a mesh nor an analysis model"));
        }
        if let Some(d) = self.density_kg_m3 {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::schema("$.density_kg_m3", "density must be positive"));
            }
        }
        for (k, d) in &self.declared_measurements {
            if !d.value().is_finite() {
                return Err(Error::schema(format!("$.declared_measurements.{k}"), "value must be finite"));
            }
        }
        let files = self.meshes.iter().map(|m| m.file.as_str()).chain(
            [&self.model, &self.blueprint, &self.solver_report]
                .into_iter()
                .filter_map(|f| f.as_deref()),
        );
        for f in files {
            let p = Path::new(f);
            if p.as_os_str().is_empty() || p.components().any(|c| !matches!(c, Component::Normal(_) | Component::CurDir)) {
                return Err(Error::schema("$", format!("artifact path `{f}` must be relative and stay inside the artifact")));
            }
        }
        Ok(())
    }
}

impl Default for ArtifactManifest {
    fn default() -> Self {
        Self::new()
    }
}

pub fn parse_manifest_bytes(bytes: &[u8]) -> Result<ArtifactManifest> {
    let m: ArtifactManifest = doc::from_bytes(bytes)?;
    m.validate()?;
    Ok(m)
}

/// A loaded artifact. Mesh problems are kept as data so that an invalid
/// submission can still be graded.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub dir: PathBuf,
    pub manifest: ArtifactManifest,
    pub mesh: Option<TriMesh<f64>>,
    pub mesh_error: Option<String>,
    pub model: Option<AnalysisModel<f64>>,
    pub blueprint: Option<BlueprintDoc>,
    pub solver_report: Option<SolverReportDoc>,
}

/// Load from a directory holding `artifact_manifest.v1` or from the manifest
/// path itself.
pub fn load_artifact(path: &Path) -> Result<Artifact> {
    let (dir, manifest_path) = if path.is_dir() {
        (path.to_path_buf(), path.join(MANIFEST_FILE))
    } else {
        (path.parent().unwrap_or(Path::new(".")).to_path_buf(), path.to_path_buf())
    };
    let bytes = std::fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest = parse_manifest_bytes(&bytes)?;

    let mut parts = Vec::new();
    let mut mesh_error = None;
    for entry in &manifest.meshes {
        match load_mesh::<f64>(&dir.join(&entry.file)) {
            Ok(mut m) => {
                if let Some(n) = &entry.body_name {
                    m.name = n.clone();
                }
                parts.push(m);
            }
            Err(e) => {
                mesh_error = Some(format!("{}: {e}", entry.file));
                break;
            }
        }
    }
    let mesh = if mesh_error.is_none() && !parts.is_empty() {
        Some(TriMesh::merge("artifact", &parts))
    } else {
        None
    };

    let model = match &manifest.model {
        Some(f) => {
            let mut m = parse_model::<f64>(&dir.join(f))?;
            for (name, ids) in &manifest.selectors {
                if ids.iter().any(|&i| i >= m.nodes.len()) {
                    return Err(Error::schema(format!("$.selectors.{name}"), "selector references a missing node"));
                }
                m.node_sets.insert(name.clone(), ids.clone());
            }
            Some(m)
        }
        None => None,
    };
    let blueprint = manifest.blueprint.as_ref().map(|f| parse_blueprint(&dir.join(f))).transpose()?;
    let solver_report = manifest
        .solver_report
        .as_ref()
        .map(|f| parse_solver_report(&dir.join(f)))
        .transpose()?;
    Ok(Artifact {
        dir,
        manifest,
        mesh,
        mesh_error,
        model,
        blueprint,
        solver_report,
    })
}
