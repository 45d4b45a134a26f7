//! Bundled sample cases. Each case has a brief and four artifact variants
//! (`passing`, `failing_stress`, `failing_unbound`, `invalid_mesh`), all
//! generated from code so the committed files under `fixtures/` can be
//! checked against the generator. `expected.v1` holds the graded verdict
//! of each variant.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifact::{ArtifactManifest, Declared, MeshEntry, MANIFEST_FILE};
use crate::controller::BRIEF_FILE;
use crate::doc;
use crate::error::{Error, Result};
use crate::fea::{AnalysisModel, FeaMaterial, Member, PointMass, Support};
use crate::geom::Vec3;
use crate::mesh::shapes::{box_mesh, prism_between};
use crate::mesh::{mass_properties, to_obj, TriMesh};

pub const CASES: [&str; 4] = ["baja", "bracket", "enclosure", "baseplate"];
pub const VARIANTS: [&str; 4] = ["passing", "failing_stress", "failing_unbound", "invalid_mesh"];
pub const EXPECTED_FILE: &str = "expected.v1";
pub const MESH_FILE: &str = "part.obj";
pub const MODEL_FILE: &str = "model.yaml";
pub const STUB_AGENT: &str = "stub_agent.sh";
pub const PACK_MANIFEST: &str = "pack_manifest.v1";
pub const PACK_SCHEMA: &str = "sample_pack/1";

/// Relative path and contents of one generated file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackFile {
    pub path: String,
    pub bytes: Vec<u8>,
}

impl PackFile {
    fn new(path: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        PackFile {
            path: path.into(),
            bytes: bytes.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackManifest {
    pub schema: String,
    /// Relative path → sha256 hex.
    pub files: BTreeMap<String, String>,
}

const STUB_AGENT_SH: &str = r#"#!/bin/sh
# Replays bundled variants as agent submissions.
# usage: stub_agent.sh <case_dir> <step>...
# Step k serves attempt k and the last step repeats. A step is a variant
# directory name, `fail` (exit 1 with no output) or `sleep:N` (stall N
# seconds, then exit without output).
set -eu
dir=$1
shift
n=${HEPH_ATTEMPT:-1}
i=1
step=
for s in "$@"; do
  step=$s
  [ "$i" -ge "$n" ] && break
  i=$((i + 1))
done
case $step in
  fail) echo "stub: failing on request" >&2; exit 1 ;;
  sleep:*) sleep "${step#sleep:}"; exit 0 ;;
esac
out=${HEPH_WORKSPACE:-.}/output
mkdir -p "$out"
for f in "$dir/$step"/*; do
  [ "$(basename "$f")" = expected.v1 ] || cp "$f" "$out/"
done
echo "stub: submitted $step for attempt $n"
"#;

const BAJA_BRIEF: &str = r#"id: baja
full_prompt: >-
  Design the roll cage of a single-seat off-road competition vehicle from
  round steel tube. Treat the helmet node as the load introduction point.
prompt:
  geometric_constraints:
    - primary members are round tube, 25.4 mm OD
  materials:
    - {name: AISI 4130, E_MPa: 205000, yield_MPa: 370}
  load_cases:
    - id: LC1
      description: frontal impact
      loads: [{selector: helmet, vector: [-12000, 0, -3000]}]
    - id: LC2
      description: side impact
      loads: [{selector: helmet, vector: [0, 9000, -3000]}]
    - id: LC3
      description: rear lift
      loads: [{selector: helmet, vector: [0, 0, 9000]}]
    - id: LC4
      description: rollover
      loads: [{selector: helmet, vector: [2000, 1500, -15000]}]
requirements:
  pass_fail_criteria:
    - {id: R1, type: geometric_check, metric: "primary tube OD (mm)", op: "==", limit_mm: 25.4, applies_to: [design]}
    - {id: R2, type: structural_analysis, metric: "max von Mises tube stress (MPa)", op: "<=", limit_MPa: 246.7, applies_to: "LC1--LC4"}
    - {id: R3, type: structural_analysis, metric: "helmet location deflection (mm)", op: "<=", limit_mm: 25, applies_to: [LC1, LC4]}
    - {id: R4, type: buckling_analysis, metric: "first mode load factor under LC4", op: ">=", limit: 1.5, applies_to: [LC4]}
verification:
  primary_class: structural
"#;

const BRACKET_BRIEF: &str = r#"id: bracket
full_prompt: >-
  Design a single-part titanium bracket joining an engine casing flange
  (four bolts on a 76.2 mm square pattern) to an accessory pin. Minimise
  mass while passing four static load cases.
prompt:
  geometric_constraints:
    - envelope 203 x 152 x 102 mm
    - four 12.7 mm bolt holes on a 76.2 x 76.2 mm pattern
  materials:
    - {name: Ti-6Al-4V, E_MPa: 113800, density_kg_m3: 4430}
  load_cases:
    - id: LC1
      description: vertical
      loads: [{selector: pin_hole_center, vector: [0, 0, -35600]}]
    - id: LC2
      description: horizontal
      loads: [{selector: pin_hole_center, vector: [37800, 0, 0]}]
    - id: LC3
      description: combined, largest compressive component
      loads: [{selector: pin_hole_center, vector: [0, 28305, 31435]}]
    - id: LC4
      description: oblique
      loads: [{selector: pin_hole_center, vector: [0, -22200, -22200]}]
requirements:
  pass_fail_criteria:
    - {id: R1, type: structural_analysis, metric: max_von_mises_stress, op: "<=", limit_MPa: 633, applies_to: [LC1, LC2, LC3, LC4]}
    - {id: R2, type: structural_analysis, metric: max_von_mises_stress, op: "<=", limit_MPa: 748, applies_to: [LC1, LC2, LC3, LC4]}
    - {id: R3, type: structural_analysis, metric: max_displacement_at_pin_hole_center, op: "<=", limit_mm: 1.0, applies_to: [LC1, LC2, LC3, LC4]}
    - {id: R4, type: structural_analysis, metric: mass, op: "<=", limit_kg: 1.0, applies_to: [design]}
    - {id: R5, type: buckling_analysis, metric: first_mode_load_factor, op: ">=", limit: 2.0, applies_to: [LC3]}
verification:
  primary_class: structural
"#;

const ENCLOSURE_BRIEF: &str = r#"id: enclosure
multi_part: true
full_prompt: >-
  Design a small-satellite equipment box in Al 6061-T6 for random
  vibration, sine and shock qualification, delivered as an assembly.
prompt:
  geometric_constraints:
    - enclosure 200 x 150 x 70 mm
  materials:
    - {name: Al 6061-T6, E_MPa: 68900, density_kg_m3: 2700}
  load_cases:
    - "LC1: random vibration, 14.1 grms"
    - "LC2: sine sweep"
    - "LC3: pyroshock"
    - id: LC4
      description: quasi-static 30 g
      loads: [{selector: all, vector: [0, 0, -30], kind: acceleration_g}]
requirements:
  pass_fail_criteria:
    - {id: R1, type: vibration_analysis, metric: first_natural_frequency_flange_constrained, op: ">=", limit_Hz: 140, applies_to: [constrained_modal]}
    - {id: R2, type: vibration_analysis, metric: random_3sigma_wall_stress, op: "<=", limit_MPa: 221.4, applies_to: [LC1]}
    - {id: R3, type: vibration_analysis, metric: random_3sigma_fastener_ligament_stress, op: "<=", limit_MPa: 220.8, applies_to: [LC1]}
    - {id: R4, type: vibration_analysis, metric: sine_peak_stress, op: "<=", limit_MPa: 220.8, applies_to: [LC2]}
    - {id: R5, type: vibration_analysis, metric: shock_SRS_peak_stress, op: "<=", limit_MPa: 221.4, applies_to: [LC3]}
    - {id: R6, type: structural_analysis, metric: qs_30g_max_stress, op: "<=", limit_MPa: 220.8, applies_to: [LC4]}
    - {id: R7, type: structural_analysis, metric: empty_enclosure_mass, op: "<=", limit_g: 800, applies_to: [assembly]}
verification:
  primary_class: vibration
  requires_non_fea_solver: {R2: true, R3: true, R4: true, R5: true}
"#;

const BASEPLATE_BRIEF: &str = r#"id: baseplate
multi_part: true
full_prompt: >-
  Design an anchored S355 steel baseplate for a tubular column on a
  cracked concrete slab, delivered as a multi-body assembly.
prompt:
  geometric_constraints:
    - plate 300 x 300 mm, at least 20 mm thick
    - four anchors on a 200 x 200 mm pattern
  materials:
    - {name: S355, E_MPa: 205000, yield_MPa: 355}
  load_cases:
    - id: LC1
      description: column base shear and compression
      loads: [{selector: column_footprint, vector: [20000, 0, -40000]}]
requirements:
  pass_fail_criteria:
    - {id: R1, type: structural_analysis, metric: per_anchor_tension_demand, op: "<=", limit_kN: 37, applies_to: [LC1]}
    - {id: R2, type: structural_analysis, metric: per_anchor_shear_demand, op: "<=", limit_kN: 43, applies_to: [LC1]}
    - {id: R3, type: structural_analysis, metric: combined_tension_shear_interaction, op: "<=", limit: 1.0, applies_to: [LC1]}
    - {id: R4, type: structural_analysis, metric: concrete_cone_utilization, op: "<=", limit: 1.0, applies_to: [LC1]}
    - {id: R5, type: structural_analysis, metric: plate_max_bending_stress, op: "<=", limit_MPa: 319.5, applies_to: [LC1]}
    - {id: R6, type: structural_analysis, metric: plate_deflection_across_column_footprint, op: "<=", limit_mm: 1.0, applies_to: [LC1]}
    - {id: R_asm1, type: connection_integrity, metric: connection_DCR, op: "<=", limit: 1.0, applies_to: [LC1]}
    - {id: R_asm2, type: connection_integrity, metric: fillet_weld_DCR, op: "<=", limit: 1.0, applies_to: [LC1]}
verification:
  primary_class: structural
  requires_non_fea_solver: {R3: true, R4: true}
"#;

pub fn brief_text(case: &str) -> Option<&'static str> {
    Some(match case {
        "baja" => BAJA_BRIEF,
        "bracket" => BRACKET_BRIEF,
        "enclosure" => ENCLOSURE_BRIEF,
        "baseplate" => BASEPLATE_BRIEF,
        _ => return None,
    })
}

/// Committed verdict of a variant.
pub fn expected_text(case: &str, variant: &str) -> Option<&'static str> {
    macro_rules! table {
        ($($c:literal / $v:literal),* $(,)?) => {
            match (case, variant) {
                $(($c, $v) => Some(include_str!(concat!("../fixtures/", $c, "/", $v, "/expected.v1"))),)*
                _ => None,
            }
        };
    }
    table!(
        "baja" / "passing", "baja" / "failing_stress", "baja" / "failing_unbound", "baja" / "invalid_mesh",
        "bracket" / "passing", "bracket" / "failing_stress", "bracket" / "failing_unbound", "bracket" / "invalid_mesh",
        "enclosure" / "passing", "enclosure" / "failing_stress", "enclosure" / "failing_unbound", "enclosure" / "invalid_mesh",
        "baseplate" / "passing", "baseplate" / "failing_stress", "baseplate" / "failing_unbound", "baseplate" / "invalid_mesh",
    )
}

/// Round tube section: (area mm², second moment mm⁴).
pub fn tube_section(od: f64, wall: f64) -> (f64, f64) {
    let id = od - 2.0 * wall;
    (PI / 4.0 * (od * od - id * id), PI / 64.0 * (od.powi(4) - id.powi(4)))
}

/// Solid round section: (area mm², second moment mm⁴).
pub fn rod_section(r: f64) -> (f64, f64) {
    (PI * r * r, PI * r.powi(4) / 4.0)
}

fn material(name: &str, e: f64, density: f64, yield_strength: f64) -> FeaMaterial<f64> {
    FeaMaterial {
        name: name.into(),
        e,
        density,
        yield_strength,
    }
}

fn model(name: &str, nodes: &[[f64; 3]], bars: &[(usize, usize)], section: (f64, f64), mat: &FeaMaterial<f64>) -> AnalysisModel<f64> {
    AnalysisModel {
        name: name.into(),
        nodes: nodes.iter().map(|p| Vec3::of(p[0], p[1], p[2])).collect(),
        members: bars
            .iter()
            .map(|&(i, j)| Member {
                i,
                j,
                area: section.0,
                i_min: section.1,
                material: mat.clone(),
            })
            .collect(),
        supports: Vec::new(),
        node_sets: BTreeMap::new(),
        load_cases: Vec::new(),
        point_masses: Vec::new(),
    }
}

fn fix(m: &mut AnalysisModel<f64>, nodes: impl IntoIterator<Item = usize>) {
    m.supports.extend(nodes.into_iter().map(|node| Support { node, fixed: [true; 3] }));
}

fn struts(nodes: &[[f64; 3]], bars: &[(usize, usize)], radius: f64) -> Vec<TriMesh<f64>> {
    bars.iter().map(|&(i, j)| prism_between(nodes[i], nodes[j], radius, 12)).collect()
}

fn slab(min: [f64; 3], max: [f64; 3]) -> TriMesh<f64> {
    box_mesh(Vec3::of(min[0], min[1], min[2]), Vec3::of(max[0], max[1], max[2]))
}

/// One artifact submission before serialisation.
struct Submission {
    model: AnalysisModel<f64>,
    mesh: TriMesh<f64>,
    manifest: ArtifactManifest,
}

impl Submission {
    fn new(model: AnalysisModel<f64>, parts: &[TriMesh<f64>], name: &str) -> Self {
        let mut manifest = ArtifactManifest::new();
        manifest.meshes.push(MeshEntry {
            file: MESH_FILE.into(),
            body_name: Some(name.into()),
        });
        manifest.model = Some(MODEL_FILE.into());
        Submission {
            model,
            mesh: TriMesh::merge(name, parts),
            manifest,
        }
    }

    fn alias(mut self, name: &str, canonical: &str) -> Self {
        self.manifest.aliases.insert(name.into(), canonical.into());
        self
    }

    fn declare(mut self, key: &str, d: Declared) -> Self {
        self.manifest.declared_measurements.insert(key.into(), d);
        self
    }

    /// Same submission with one triangle missing, so the mesh is open.
    fn holed(&self) -> Self {
        let mut s = Submission {
            model: self.model.clone(),
            mesh: self.mesh.clone(),
            manifest: self.manifest.clone(),
        };
        s.mesh.triangles.pop();
        s.mesh.body_id.pop();
        s
    }

    fn files(&self, dir: &str) -> Vec<PackFile> {
        vec![
            PackFile::new(format!("{dir}/{MANIFEST_FILE}"), doc::to_string(&self.manifest)),
            PackFile::new(format!("{dir}/{MESH_FILE}"), to_obj(&self.mesh)),
            PackFile::new(format!("{dir}/{MODEL_FILE}"), self.model.to_yaml()),
        ]
    }
}

fn baja_submission(wall: f64) -> Submission {
    let (r, h) = (600.0, 900.0);
    let mut nodes = vec![[0.0, 0.0, h]];
    for deg in [90.0_f64, 210.0, 330.0] {
        let a = deg.to_radians();
        nodes.push([r * a.cos(), r * a.sin(), 0.0]);
    }
    let bars = [(0, 1), (0, 2), (0, 3)];
    let steel = material("AISI 4130", 205000.0, 7870.0, 370.0);
    let mut m = model("baja_tripod", &nodes, &bars, tube_section(25.4, wall), &steel);
    fix(&mut m, 1..4);
    m.node_sets.insert("helmet".into(), vec![0]);
    let parts = struts(&nodes, &bars, 12.7);
    Submission::new(m, &parts, "roll_cage")
        .declare("tube_OD_mm", Declared::Bare(25.4))
        .alias("primary tube OD (mm)", "tube_OD_mm")
        .alias("max von Mises tube stress (MPa)", "max_von_mises_stress")
        .alias("first mode load factor under LC4", "first_mode_load_factor")
}

fn baja() -> Vec<(&'static str, Submission)> {
    let defl = ("helmet location deflection (mm)", "max_displacement_at_helmet");
    let passing = baja_submission(3.05).alias(defl.0, defl.1);
    let invalid = passing.holed();
    vec![
        ("passing", passing),
        ("failing_stress", baja_submission(0.5).alias(defl.0, defl.1)),
        ("failing_unbound", baja_submission(3.05)),
        ("invalid_mesh", invalid),
    ]
}

fn bracket_submission(radius: f64) -> Submission {
    let h = 102.0;
    let b = 38.1;
    let nodes = [[0.0, 0.0, 0.0], [b, b, h], [-b, b, h], [-b, -b, h], [b, -b, h]];
    let bars = [(0, 1), (0, 2), (0, 3), (0, 4)];
    let ti = material("Ti-6Al-4V", 113800.0, 4430.0, 880.0);
    let mut m = model("bracket_rods", &nodes, &bars, rod_section(radius), &ti);
    fix(&mut m, 1..5);
    m.node_sets.insert("pin_hole_center".into(), vec![0]);
    let mut parts = struts(&nodes, &bars, radius);
    parts.push(slab([-50.0, -50.0, h], [50.0, 50.0, h + 6.0]));
    parts.push(slab([-10.0, -10.0, -10.0], [10.0, 10.0, 10.0]));
    let mesh = TriMesh::merge("bracket", &parts);
    let mass = mass_properties(&mesh, ti.density, 2).expect("bracket mesh is a closed solid").mass;
    // Mass is declared under a project name; only an alias exposes it as `mass`.
    Submission::new(m, &parts, "bracket").declare(
        "bracket_mass_kg",
        Declared::Full {
            value: round_to(mass, 4),
            unit: "kg".into(),
            scopes: Vec::new(),
        },
    )
}

fn bracket() -> Vec<(&'static str, Submission)> {
    let passing = bracket_submission(8.0).alias("bracket_mass_kg", "mass");
    let invalid = passing.holed();
    vec![
        ("passing", passing),
        ("failing_stress", bracket_submission(3.0).alias("bracket_mass_kg", "mass")),
        ("failing_unbound", bracket_submission(8.0)),
        ("invalid_mesh", invalid),
    ]
}

fn enclosure_submission(radius: f64, density: Option<f64>) -> Submission {
    let (x, y, z) = (100.0, 75.0, 70.0);
    let nodes = [
        [-x, -y, 0.0],
        [x, -y, 0.0],
        [x, y, 0.0],
        [-x, y, 0.0],
        [-x, -y, z],
        [x, -y, z],
        [x, y, z],
        [-x, y, z],
    ];
    let bars = [
        (0, 4),
        (1, 5),
        (2, 6),
        (3, 7),
        (4, 5),
        (5, 6),
        (6, 7),
        (7, 4),
        (4, 6),
        (0, 5),
        (1, 6),
        (2, 7),
        (3, 4),
    ];
    let al = material("Al 6061-T6", 68900.0, 2700.0, 276.0);
    let mut m = model("enclosure_frame", &nodes, &bars, rod_section(radius), &al);
    fix(&mut m, 0..4);
    m.node_sets.insert("flange".into(), vec![0, 1, 2, 3]);
    m.point_masses = (4..8).map(|node| PointMass { node, mass_kg: 0.5 }).collect();
    let mut parts = struts(&nodes, &bars, radius);
    parts.push(slab([-x, -y, -2.0], [x, y, 0.0]));
    let mut s = Submission::new(m, &parts, "enclosure")
        .alias("first_natural_frequency_flange_constrained", "first_natural_frequency")
        .alias("qs_30g_max_stress", "max_von_mises_stress");
    s.manifest.density_kg_m3 = density;
    s
}

fn enclosure() -> Vec<(&'static str, Submission)> {
    let passing = enclosure_submission(3.0, Some(2700.0));
    let invalid = passing.holed();
    vec![
        ("passing", passing),
        ("failing_stress", enclosure_submission(0.4, Some(2700.0))),
        ("failing_unbound", enclosure_submission(3.0, None)),
        ("invalid_mesh", invalid),
    ]
}

fn baseplate_submission(area: f64, shear_declared: bool) -> Submission {
    let nodes = [
        [0.0, 0.0, 20.0],
        [100.0, 100.0, 0.0],
        [-100.0, 100.0, 0.0],
        [-100.0, -100.0, 0.0],
        [100.0, -100.0, 0.0],
    ];
    let bars = [(0, 1), (0, 2), (0, 3), (0, 4)];
    let steel = material("S355", 205000.0, 7850.0, 355.0);
    // Plate strips 40 mm wide, 20 mm thick.
    let mut m = model("baseplate_strips", &nodes, &bars, (area, 26667.0), &steel);
    fix(&mut m, 1..5);
    m.node_sets.insert("column_footprint".into(), vec![0]);
    let parts = [
        slab([-150.0, -150.0, 0.0], [150.0, 150.0, 20.0]),
        slab([-40.0, -40.0, 20.0], [40.0, 40.0, 220.0]),
    ];
    let kn = |v: f64| Declared::Full {
        value: v,
        unit: "kN".into(),
        scopes: vec!["LC1".into()],
    };
    let ratio = |v: f64| Declared::Full {
        value: v,
        unit: String::new(),
        scopes: vec!["LC1".into()],
    };
    let mut s = Submission::new(m, &parts, "baseplate")
        .declare("per_anchor_tension_demand", kn(21.5))
        .declare("connection_DCR", ratio(0.62))
        .declare("fillet_weld_DCR", ratio(0.48))
        .alias("plate_max_bending_stress", "max_von_mises_stress")
        .alias("plate_deflection_across_column_footprint", "max_displacement_at_column_footprint");
    if shear_declared {
        s = s.declare("per_anchor_shear_demand", kn(8.0));
    }
    s
}

fn baseplate() -> Vec<(&'static str, Submission)> {
    let passing = baseplate_submission(800.0, true);
    let invalid = passing.holed();
    vec![
        ("passing", passing),
        ("failing_stress", baseplate_submission(200.0, true)),
        ("failing_unbound", baseplate_submission(800.0, false)),
        ("invalid_mesh", invalid),
    ]
}

fn round_to(v: f64, digits: i32) -> f64 {
    let f = 10f64.powi(digits);
    (v * f).round() / f
}

fn submissions(case: &str) -> Vec<(&'static str, Submission)> {
    match case {
        "baja" => baja(),
        "bracket" => bracket(),
        "enclosure" => enclosure(),
        "baseplate" => baseplate(),
        _ => Vec::new(),
    }
}

/// Every generated file except the `expected.v1` verdicts.
pub fn build_pack() -> Vec<PackFile> {
    let mut out = vec![PackFile::new(STUB_AGENT, STUB_AGENT_SH)];
    for case in CASES {
        out.push(PackFile::new(format!("{case}/{BRIEF_FILE}"), brief_text(case).unwrap_or_default()));
        for (variant, s) in submissions(case) {
            out.extend(s.files(&format!("{case}/{variant}")));
        }
    }
    out
}

/// Generated files plus the committed verdicts.
pub fn pack_with_expected() -> Vec<PackFile> {
    let mut out = build_pack();
    for case in CASES {
        for variant in VARIANTS {
            let text = expected_text(case, variant).unwrap_or_default();
            out.push(PackFile::new(format!("{case}/{variant}/{EXPECTED_FILE}"), text));
        }
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write the pack under `dir` with a sha256 manifest. Files whose contents
/// already match are left untouched, so a second call changes nothing.
pub fn install_fixtures(dir: &Path) -> Result<PackManifest> {
    let files = pack_with_expected();
    let mut manifest = PackManifest {
        schema: PACK_SCHEMA.into(),
        files: BTreeMap::new(),
    };
    for f in &files {
        let path = dir.join(&f.path);
        if std::fs::read(&path).ok().as_deref() != Some(f.bytes.as_slice()) {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            std::fs::write(&path, &f.bytes).map_err(|e| Error::io(&path, e))?;
        }
        manifest.files.insert(f.path.clone(), sha256_hex(&f.bytes));
    }
    let mpath = dir.join(PACK_MANIFEST);
    let text = doc::to_string(&manifest);
    if std::fs::read_to_string(&mpath).ok().as_deref() != Some(text.as_str()) {
        std::fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))?;
    }
    Ok(manifest)
}

/// Files under `dir` whose contents differ from the pack manifest.
pub fn verify_install(dir: &Path) -> Result<Vec<String>> {
    let manifest: PackManifest = doc::read_typed(&dir.join(PACK_MANIFEST))?;
    let mut bad = Vec::new();
    for (rel, hash) in &manifest.files {
        match std::fs::read(dir.join(rel)) {
            Ok(b) if &sha256_hex(&b) == hash => {}
            _ => bad.push(rel.clone()),
        }
    }
    Ok(bad)
}
