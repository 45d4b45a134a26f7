//! Deterministic engineering-validation harness for CAD artifacts.

pub mod artifact;
pub mod blueprint;
pub mod brief;
pub mod checker;
pub mod controller;
pub mod diag;
pub mod doc;
pub mod error;
pub mod fea;
pub mod feedback;
pub mod geom;
pub mod grade;
pub mod mesh;
pub mod metrics;
pub mod render;
pub mod sample_pack;
pub mod scalar;
pub mod supervise;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision mesh, the default for ingestion and grading.
pub type Mesh = mesh::TriMesh<f64>;
pub type MeshF32 = mesh::TriMesh<f32>;
pub type Model = fea::AnalysisModel<f64>;
pub type ModelF32 = fea::AnalysisModel<f32>;
pub type Point = geom::Vec3<f64>;
pub type PointF32 = geom::Vec3<f32>;
