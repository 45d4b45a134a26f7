//! Schema-v4 design blueprints: parts, envelopes, construction units over a
//! closed primitive grammar, and acceptance claims.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use serde_yaml::Value;

use crate::brief::{Brief, Operator};
use crate::diag::Diagnostic;
use crate::doc::{self, At};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u64 = 4;

/// Support zones must sit on the envelope boundary to within this distance (mm).
pub const BOUNDARY_TOLERANCE_MM: f64 = 1e-6;

/// The closed primitive grammar.
pub const PRIMITIVE_OPS: [&str; 4] = ["cylinder", "extrude_polygon", "subtract_cylinder", "fillet_hint"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn parse(text: &str) -> Option<Axis> {
        match text.trim().to_ascii_lowercase().as_str() {
            "x" => Some(Axis::X),
            "y" => Some(Axis::Y),
            "z" => Some(Axis::Z),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    /// The two remaining axes in ascending order; 2-D profile coordinates map
    /// onto these.
    pub fn others(self) -> [Axis; 2] {
        match self {
            Axis::X => [Axis::Y, Axis::Z],
            Axis::Y => [Axis::X, Axis::Z],
            Axis::Z => [Axis::X, Axis::Y],
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Axis → `[lo, hi]` map in mm. May be partial (footprints, unit envelopes).
pub type Spans = BTreeMap<Axis, [f64; 2]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none", rename = "yield_strength_MPa")]
    pub yield_strength_mpa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub safety_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub brief_id: String,
    pub units: String,
    pub coordinate_system: BTreeMap<Axis, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub material: Option<Material>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub axis: Axis,
    /// True for an outward `+axis` normal (the envelope's upper face).
    pub positive: bool,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportZone {
    pub name: String,
    pub plane: Plane,
    pub footprint: Spans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Additive,
    Subtractive,
    Modifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Primitive {
    Cylinder {
        axis: Axis,
        radius_outer: f64,
        wall_thickness: f64,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        sweep_path: Option<String>,
    },
    ExtrudePolygon {
        polygon_2d: Vec<[f64; 2]>,
        extrude_axis: Axis,
        extrude_length: f64,
    },
    SubtractCylinder {
        axis: Axis,
        radius: f64,
        center_2d: [f64; 2],
    },
    FilletHint {
        edge_selector: String,
        radius: f64,
    },
}

impl Primitive {
    pub fn op(&self) -> &'static str {
        match self {
            Primitive::Cylinder { .. } => "cylinder",
            Primitive::ExtrudePolygon { .. } => "extrude_polygon",
            Primitive::SubtractCylinder { .. } => "subtract_cylinder",
            Primitive::FilletHint { .. } => "fillet_hint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionUnit {
    pub id: String,
    pub role: Role,
    /// `envelope.must_fit_inside`
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub envelope: Option<Spans>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target: Option<String>,
    pub primitives: Vec<Primitive>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub metric: String,
    pub operator: Operator,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartPlan {
    pub name: String,
    pub bounding_envelope: Spans,
    pub support_zones: Vec<SupportZone>,
    pub construction_units: Vec<ConstructionUnit>,
    pub acceptance_claims: Vec<Claim>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlueprintDoc {
    pub schema_version: u64,
    pub metadata: Metadata,
    /// Optional declared sweep paths: name → AABB.
    pub paths: Option<BTreeMap<String, Spans>>,
    pub parts: Vec<PartPlan>,
}

impl BlueprintDoc {
    pub fn part(&self, name: &str) -> Option<&PartPlan> {
        self.parts.iter().find(|p| p.name == name)
    }

    pub fn primitives(&self) -> impl Iterator<Item = &Primitive> {
        self.parts
            .iter()
            .flat_map(|p| p.construction_units.iter())
            .flat_map(|u| u.primitives.iter())
    }
}

pub fn parse_blueprint(path: &Path) -> Result<BlueprintDoc> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_blueprint_bytes(&bytes)
}

pub fn parse_blueprint_str(text: &str) -> Result<BlueprintDoc> {
    parse_blueprint_bytes(text.as_bytes())
}

pub fn parse_blueprint_bytes(bytes: &[u8]) -> Result<BlueprintDoc> {
    let value = doc::parse_bytes(bytes)?;
    blueprint_from_value(&value)
}

fn blueprint_from_value(value: &Value) -> Result<BlueprintDoc> {
    let root = At::root(value);
    root.map()?;
    let ver_at = root
        .get_any(&["assembly_schema_version", "schema_version"])
        .ok_or_else(|| root.err("missing assembly_schema_version"))?;
    let schema_version = ver_at.u64()?;
    if schema_version != SCHEMA_VERSION {
        return Err(ver_at.err(format!(
            "schema version {schema_version} is not supported (expected {SCHEMA_VERSION})"
        )));
    }
    let metadata = parse_metadata(&root.req("metadata")?)?;

    let paths = match root.get("paths") {
        Some(p) => {
            let mut table = BTreeMap::new();
            for (name, decl) in p.entries()? {
                let spans_at = decl.get("aabb").unwrap_or(decl);
                table.insert(name, parse_spans(&spans_at, false)?);
            }
            Some(table)
        }
        None => None,
    };

    let mut parts = Vec::new();
    let mut names = HashSet::new();
    for part_at in root.req("parts")?.seq()? {
        let part = parse_part(&part_at, paths.as_ref())?;
        if !names.insert(part.name.clone()) {
            return Err(part_at.err(format!("duplicate part name `{}`", part.name)));
        }
        parts.push(part);
    }
    Ok(BlueprintDoc {
        schema_version,
        metadata,
        paths,
        parts,
    })
}

fn parse_metadata(at: &At<'_>) -> Result<Metadata> {
    let brief_id = at.get("brief_id").map(|a| a.text()).transpose()?.unwrap_or_default();
    let units_at = at.req("units")?;
    let units = units_at.text()?;
    if units != "mm" {
        return Err(units_at.err(format!("units must be `mm`, found `{units}`")));
    }
    let cs_at = at.req("coordinate_system")?;
    let mut coordinate_system = BTreeMap::new();
    for (k, v) in cs_at.entries()? {
        let axis = Axis::parse(&k).ok_or_else(|| v.err(format!("`{k}` is not an axis")))?;
        let label = v.text()?;
        if label.trim().is_empty() {
            return Err(v.err("semantic label is empty"));
        }
        coordinate_system.insert(axis, label);
    }
    if coordinate_system.len() != 3 {
        return Err(cs_at.err("coordinate_system must label each of x, y, z exactly once"));
    }
    let labels: HashSet<_> = coordinate_system.values().collect();
    if labels.len() != 3 {
        return Err(cs_at.err("coordinate_system labels must be distinct"));
    }
    let material = match at.get("material") {
        Some(m) => Some(Material {
            name: m.req("name")?.text()?,
            yield_strength_mpa: m.get("yield_strength_MPa").map(|a| a.f64()).transpose()?,
            safety_factor: m.get("safety_factor").map(|a| a.f64()).transpose()?,
        }),
        None => None,
    };
    Ok(Metadata {
        brief_id,
        units,
        coordinate_system,
        material,
    })
}

/// Reads `{x: [lo, hi], ...}`; with `span_suffix`, also `x_span` keys.
fn parse_spans(at: &At<'_>, span_suffix: bool) -> Result<Spans> {
    let mut out = Spans::new();
    for (k, v) in at.entries()? {
        let key = if span_suffix {
            k.strip_suffix("_span").unwrap_or(&k).to_string()
        } else {
            k.clone()
        };
        let axis = Axis::parse(&key).ok_or_else(|| v.err(format!("`{k}` is not an axis")))?;
        if out.insert(axis, v.span()?).is_some() {
            return Err(v.err(format!("axis {axis} given twice")));
        }
    }
    Ok(out)
}

fn parse_part(at: &At<'_>, paths: Option<&BTreeMap<String, Spans>>) -> Result<PartPlan> {
    let name = at.req("name")?.text()?;
    if name.trim().is_empty() {
        return Err(at.err("part name is empty"));
    }
    let geo = at.get("geometry_definition");
    let geo_ref = geo.as_ref().unwrap_or(at);
    let env_at = geo_ref
        .get("bounding_envelope")
        .or_else(|| at.get("bounding_envelope"))
        .ok_or_else(|| Error::schema(format!("{}.geometry_definition.bounding_envelope", at.path()), "required field is missing"))?;
    let bounding_envelope = parse_spans(&env_at, false)?;
    if bounding_envelope.len() != 3 {
        return Err(env_at.err("bounding_envelope must span x, y and z"));
    }

    let mut support_zones = Vec::new();
    if let Some(zones) = geo_ref.get("support_zones").or_else(|| at.get("support_zones")) {
        for z in zones.seq()? {
            let zone = parse_support_zone(&z)?;
            check_zone_on_boundary(&z, &zone, &bounding_envelope)?;
            support_zones.push(zone);
        }
    }

    let mut construction_units = Vec::new();
    let mut ids = HashSet::new();
    if let Some(units) = at.get("construction_units") {
        for u in units.seq()? {
            let unit = parse_unit(&u, paths)?;
            if !ids.insert(unit.id.clone()) {
                return Err(u.err(format!("duplicate construction unit id `{}`", unit.id)));
            }
            construction_units.push(unit);
        }
    }
    // Modifier references resolve against sibling units.
    for unit in &construction_units {
        let mut refs: Vec<&str> = Vec::new();
        if let Some(t) = &unit.target {
            refs.push(t);
        }
        for p in &unit.primitives {
            if let Primitive::FilletHint { edge_selector, .. } = p {
                refs.push(edge_selector.split('.').next().unwrap_or(edge_selector));
            }
        }
        for r in refs {
            if r == unit.id || !ids.contains(r) {
                return Err(Error::schema(
                    format!("{}.construction_units[{}]", at.path(), unit.id),
                    format!("modifier references unknown unit `{r}`"),
                ));
            }
        }
    }

    let mut acceptance_claims = Vec::new();
    let mut claim_ids = HashSet::new();
    if let Some(claims) = at.get("acceptance_claims") {
        for c in claims.seq()? {
            let claim = parse_claim(&c)?;
            if !claim_ids.insert(claim.id.clone()) {
                return Err(c.err(format!("duplicate claim id `{}` in part", claim.id)));
            }
            acceptance_claims.push(claim);
        }
    }
    Ok(PartPlan {
        name,
        bounding_envelope,
        support_zones,
        construction_units,
        acceptance_claims,
    })
}

fn parse_support_zone(at: &At<'_>) -> Result<SupportZone> {
    let name = at.req("name")?.text()?;
    let plane_at = at.req("plane")?;
    let normal_at = plane_at.req("normal")?;
    let normal = normal_at.text()?;
    let (positive, axis_text) = match normal.trim() {
        n if n.starts_with('+') => (true, &n[1..]),
        n if n.starts_with('-') => (false, &n[1..]),
        n => (true, n),
    };
    let axis = Axis::parse(axis_text).ok_or_else(|| normal_at.err(format!("`{normal}` is not a signed axis")))?;
    let offset = plane_at.req("offset")?.f64()?;
    let footprint = parse_spans(&at.req("footprint")?, true)?;
    Ok(SupportZone {
        name,
        plane: Plane { axis, positive, offset },
        footprint,
    })
}

fn check_zone_on_boundary(at: &At<'_>, zone: &SupportZone, env: &Spans) -> Result<()> {
    let [lo, hi] = env[&zone.plane.axis];
    let face = if zone.plane.positive { hi } else { lo };
    if (zone.plane.offset - face).abs() > BOUNDARY_TOLERANCE_MM {
        return Err(at.err(format!(
            "support zone `{}` plane {}{} at {} is not on the envelope face at {}",
            zone.name,
            if zone.plane.positive { "+" } else { "-" },
            zone.plane.axis,
            zone.plane.offset,
            face
        )));
    }
    for (axis, [flo, fhi]) in &zone.footprint {
        if *axis == zone.plane.axis {
            return Err(at.err(format!("footprint of `{}` spans its own normal axis", zone.name)));
        }
        let [elo, ehi] = env[axis];
        if *flo < elo - BOUNDARY_TOLERANCE_MM || *fhi > ehi + BOUNDARY_TOLERANCE_MM {
            return Err(at.err(format!(
                "footprint of `{}` on {axis} [{flo}, {fhi}] leaves the envelope [{elo}, {ehi}]",
                zone.name
            )));
        }
    }
    Ok(())
}

fn parse_unit(at: &At<'_>, paths: Option<&BTreeMap<String, Spans>>) -> Result<ConstructionUnit> {
    let id = at.req("id")?.text()?;
    if id.trim().is_empty() {
        return Err(at.err("construction unit id is empty"));
    }
    let role_at = at.req("role")?;
    let role = match role_at.str()? {
        "additive" => Role::Additive,
        "subtractive" => Role::Subtractive,
        "modifier" => Role::Modifier,
        other => return Err(role_at.err(format!("unknown role `{other}`"))),
    };
    let envelope = match at.get("envelope") {
        Some(e) => {
            let inner = e.get("must_fit_inside").unwrap_or(e);
            let spans = parse_spans(&inner, false)?;
            if spans.is_empty() {
                None
            } else {
                Some(spans)
            }
        }
        None => None,
    };
    if role != Role::Modifier && envelope.is_none() {
        return Err(at.err(format!("{role:?} unit `{id}` needs a nonempty envelope").to_lowercase()));
    }
    let target = at.get("target").map(|t| t.text()).transpose()?;
    let prims_at = at
        .get_any(&["constructive_primitives", "primitives"])
        .ok_or_else(|| Error::schema(format!("{}.constructive_primitives", at.path()), "required field is missing"))?;
    let mut primitives = Vec::new();
    for p in prims_at.seq()? {
        primitives.push(parse_primitive(&p, &id, paths)?);
    }
    Ok(ConstructionUnit {
        id,
        role,
        envelope,
        target,
        primitives,
    })
}

fn positive(at: &At<'_>, key: &str) -> Result<f64> {
    let a = at.req(key)?;
    let v = a.f64()?;
    if v <= 0.0 {
        return Err(a.err(format!("{key} must be positive")));
    }
    Ok(v)
}

fn axis_field(at: &At<'_>, key: &str) -> Result<Axis> {
    let a = at.req(key)?;
    let t = a.text()?;
    Axis::parse(&t).ok_or_else(|| a.err(format!("`{t}` is not an axis")))
}

fn pair(at: &At<'_>) -> Result<[f64; 2]> {
    let v = at.f64_list()?;
    if v.len() != 2 {
        return Err(at.err("expected a 2-vector"));
    }
    Ok([v[0], v[1]])
}

fn check_fields(at: &At<'_>, allowed: &[&str]) -> Result<()> {
    for (k, v) in at.entries()? {
        if k != "op" && !allowed.contains(&k.as_str()) {
            return Err(v.err(format!("unknown parameter `{k}`")));
        }
    }
    Ok(())
}

fn parse_primitive(at: &At<'_>, unit_id: &str, paths: Option<&BTreeMap<String, Spans>>) -> Result<Primitive> {
    let op = at.req("op")?.text()?;
    match op.as_str() {
        "cylinder" => {
            check_fields(at, &["axis", "radius_outer", "wall_thickness", "sweep_path"])?;
            let radius_outer = positive(at, "radius_outer")?;
            let wall_at = at.req("wall_thickness")?;
            let wall_thickness = wall_at.f64()?;
            if !(wall_thickness > 0.0 && wall_thickness < radius_outer) {
                return Err(wall_at.err("wall_thickness must lie in (0, radius_outer)"));
            }
            let sweep_path = at.get("sweep_path").map(|p| p.text()).transpose()?;
            if let (Some(table), Some(name)) = (paths, &sweep_path) {
                if !table.contains_key(name) {
                    return Err(at.err(format!("sweep_path `{name}` is not declared in paths")));
                }
            }
            Ok(Primitive::Cylinder {
                axis: axis_field(at, "axis")?,
                radius_outer,
                wall_thickness,
                sweep_path,
            })
        }
        "extrude_polygon" => {
            check_fields(at, &["polygon_2d", "extrude_axis", "extrude_length"])?;
            let poly_at = at.req("polygon_2d")?;
            let polygon_2d = poly_at.seq()?.iter().map(pair).collect::<Result<Vec<_>>>()?;
            if polygon_2d.len() < 3 {
                return Err(poly_at.err("polygon needs at least 3 vertices"));
            }
            if !polygon_is_simple(&polygon_2d) {
                return Err(poly_at.err("polygon is self-intersecting or degenerate"));
            }
            Ok(Primitive::ExtrudePolygon {
                polygon_2d,
                extrude_axis: axis_field(at, "extrude_axis")?,
                extrude_length: positive(at, "extrude_length")?,
            })
        }
        "subtract_cylinder" => {
            check_fields(at, &["axis", "radius", "center_2d"])?;
            Ok(Primitive::SubtractCylinder {
                axis: axis_field(at, "axis")?,
                radius: positive(at, "radius")?,
                center_2d: pair(&at.req("center_2d")?)?,
            })
        }
        "fillet_hint" => {
            check_fields(at, &["edge_selector", "radius"])?;
            Ok(Primitive::FilletHint {
                edge_selector: at.req("edge_selector")?.text()?,
                radius: positive(at, "radius")?,
            })
        }
        _ => Err(Error::Grammar {
            unit_id: unit_id.to_string(),
            op,
        }),
    }
}

fn parse_claim(at: &At<'_>) -> Result<Claim> {
    let id = at.req("id")?.text()?;
    if id.trim().is_empty() {
        return Err(at.err("claim id is empty"));
    }
    let op_at = at
        .get_any(&["operator", "op"])
        .ok_or_else(|| at.err("claim operator is missing"))?;
    let op_text = op_at.text()?;
    let operator = Operator::parse(&op_text).ok_or_else(|| op_at.err(format!("unknown operator `{op_text}`")))?;
    Ok(Claim {
        id,
        metric: at.req("metric")?.text()?,
        operator,
        value: at.req("value")?.f64()?,
    })
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

/// Non-self-intersecting with nonzero area; O(n²) edge-pair test.
pub fn polygon_is_simple(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let area2: f64 = (0..n).map(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        a[0] * b[1] - b[0] * a[1]
    }).sum();
    if area2.abs() <= 1e-12 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// One containment violation of a unit's bounding volume against its part
/// envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeViolation {
    pub part: String,
    pub unit: String,
    /// Primitive index when the bounding volume came from a declared sweep path.
    pub primitive: Option<usize>,
    pub axis: Axis,
    pub overshoot_mm: f64,
}

fn containment(part: &PartPlan, unit: &str, primitive: Option<usize>, vol: &Spans, out: &mut Vec<EnvelopeViolation>) {
    for (axis, [lo, hi]) in vol {
        let [plo, phi] = part.bounding_envelope[axis];
        for overshoot in [plo - lo, hi - phi] {
            if overshoot > BOUNDARY_TOLERANCE_MM {
                out.push(EnvelopeViolation {
                    part: part.name.clone(),
                    unit: unit.to_string(),
                    primitive,
                    axis: *axis,
                    overshoot_mm: overshoot,
                });
            }
        }
    }
}

/// Containment of every unit's conservative bounding volume in its part
/// envelope. A cylinder swept along a declared path uses the path AABB grown
/// by the outer radius; all other primitives use the unit envelope.
pub fn envelope_violations(bp: &BlueprintDoc) -> Vec<EnvelopeViolation> {
    let mut out = Vec::new();
    for part in &bp.parts {
        for unit in &part.construction_units {
            let Some(env) = &unit.envelope else { continue };
            containment(part, &unit.id, None, env, &mut out);
            for (i, p) in unit.primitives.iter().enumerate() {
                if let Primitive::Cylinder {
                    radius_outer,
                    sweep_path: Some(name),
                    ..
                } = p
                {
                    if let Some(aabb) = bp.paths.as_ref().and_then(|t| t.get(name)) {
                        let grown: Spans = aabb
                            .iter()
                            .map(|(a, [lo, hi])| (*a, [lo - radius_outer, hi + radius_outer]))
                            .collect();
                        containment(part, &unit.id, Some(i), &grown, &mut out);
                    }
                }
            }
        }
    }
    out
}

pub fn check_envelopes(bp: &BlueprintDoc) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for part in &bp.parts {
        let has_body = part
            .construction_units
            .iter()
            .any(|u| matches!(u.role, Role::Additive | Role::Subtractive));
        if !has_body {
            out.push(Diagnostic::error(
                format!("parts[{}].construction_units", part.name),
                "additive/subtractive unit required",
            ));
        }
    }
    for v in envelope_violations(bp) {
        let what = match v.primitive {
            Some(i) => format!("primitive {i} of unit `{}`", v.unit),
            None => format!("unit `{}`", v.unit),
        };
        out.push(Diagnostic::error(
            format!("parts[{}].construction_units[{}].envelope.{}", v.part, v.unit, v.axis),
            format!(
                "{what} exceeds the part envelope on axis {} by {} mm",
                v.axis,
                fmt_mm(v.overshoot_mm)
            ),
        ));
    }
    out.extend(primitive_fit_warnings(bp));
    out
}

fn fmt_mm(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    format!("{r}")
}

/// Size-only fit of primitive cross-sections inside their unit envelope.
/// Placement is not declared in the grammar, so these are warnings.
fn primitive_fit_warnings(bp: &BlueprintDoc) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for part in &bp.parts {
        for unit in &part.construction_units {
            let Some(env) = &unit.envelope else { continue };
            let extent = |a: Axis| env.get(&a).map(|[lo, hi]| hi - lo);
            let mut check = |i: usize, axis: Axis, size: f64, what: &str| {
                if let Some(e) = extent(axis) {
                    if size > e + BOUNDARY_TOLERANCE_MM {
                        out.push(Diagnostic::warning(
                            format!("parts[{}].construction_units[{}].primitives[{i}]", part.name, unit.id),
                            format!("{what} {} mm exceeds the unit envelope extent {} mm on {axis}", fmt_mm(size), fmt_mm(e)),
                        ));
                    }
                }
            };
            for (i, p) in unit.primitives.iter().enumerate() {
                match p {
                    Primitive::Cylinder { axis, radius_outer, .. } => {
                        for a in axis.others() {
                            check(i, a, 2.0 * radius_outer, "outer diameter");
                        }
                    }
                    Primitive::ExtrudePolygon {
                        polygon_2d,
                        extrude_axis,
                        extrude_length,
                    } => {
                        let [a0, a1] = extrude_axis.others();
                        for (k, a) in [a0, a1].into_iter().enumerate() {
                            let lo = polygon_2d.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
                            let hi = polygon_2d.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
                            check(i, a, hi - lo, "profile width");
                        }
                        check(i, *extrude_axis, *extrude_length, "extrude length");
                    }
                    Primitive::SubtractCylinder { axis, radius, .. } => {
                        for a in axis.others() {
                            check(i, a, 2.0 * radius, "hole diameter");
                        }
                    }
                    Primitive::FilletHint { .. } => {}
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundClaim {
    pub part: String,
    pub claim: Claim,
    pub requirement_id: String,
}

/// Claims matched to brief requirements by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClaimBinding {
    pub bound: Vec<BoundClaim>,
    pub unmatched_claims: Vec<(String, Claim)>,
    pub unclaimed_requirements: Vec<String>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ClaimBinding {
    pub fn claims_for<'a>(&'a self, requirement_id: &'a str) -> impl Iterator<Item = &'a BoundClaim> {
        self.bound.iter().filter(move |b| b.requirement_id == requirement_id)
    }
}

pub fn extract_claims(bp: &BlueprintDoc, brief: &Brief) -> ClaimBinding {
    let mut binding = ClaimBinding::default();
    for part in &bp.parts {
        for claim in &part.acceptance_claims {
            let path = format!("parts[{}].acceptance_claims[{}]", part.name, claim.id);
            match brief.requirement(&claim.id) {
                Some(req) => {
                    if req.operator != claim.operator {
                        binding.diagnostics.push(Diagnostic::warning(
                            path,
                            format!(
                                "claim operator {} differs from requirement operator {}",
                                claim.operator, req.operator
                            ),
                        ));
                    }
                    binding.bound.push(BoundClaim {
                        part: part.name.clone(),
                        claim: claim.clone(),
                        requirement_id: req.id.clone(),
                    });
                }
                None => {
                    binding.diagnostics.push(Diagnostic::warning(
                        path,
                        format!("claim `{}` matches no requirement in brief `{}`", claim.id, brief.id),
                    ));
                    binding.unmatched_claims.push((part.name.clone(), claim.clone()));
                }
            }
        }
    }
    for req in &brief.requirements {
        if !binding.bound.iter().any(|b| b.requirement_id == req.id) {
            binding.diagnostics.push(Diagnostic::info(
                format!("requirements[{}]", req.id),
                format!("requirement {} is not claimed by the blueprint", req.id),
            ));
            binding.unclaimed_requirements.push(req.id.clone());
        }
    }
    binding
}

// ---- keyed diffs -------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffKind {
    MetadataChanged,
    PathsChanged,
    PartAdded,
    PartRemoved,
    PartModified,
    UnitAdded,
    UnitRemoved,
    UnitModified,
    ClaimAdded,
    ClaimRemoved,
    ClaimChanged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffEntry {
    pub kind: DiffKind,
    /// Slash-separated path into the keyed form, e.g.
    /// `/parts/main_hoop/units/hoop_tube/primitives/0/wall_thickness`.
    pub path: String,
    pub before: Option<Json>,
    pub after: Option<Json>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlueprintDiff {
    pub schema: String,
    pub entries: Vec<DiffEntry>,
}

impl BlueprintDiff {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct KeyedPart {
    bounding_envelope: Spans,
    support_zones: BTreeMap<String, KeyedZone>,
    units: BTreeMap<String, KeyedUnit>,
    claims: BTreeMap<String, KeyedClaim>,
}

#[derive(Serialize, Deserialize)]
struct KeyedZone {
    plane: Plane,
    footprint: Spans,
}

#[derive(Serialize, Deserialize)]
struct KeyedUnit {
    role: Role,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    envelope: Option<Spans>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    target: Option<String>,
    primitives: Vec<Primitive>,
}

#[derive(Serialize, Deserialize)]
struct KeyedClaim {
    metric: String,
    operator: Operator,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct KeyedDoc {
    schema_version: u64,
    metadata: Metadata,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    paths: Option<BTreeMap<String, Spans>>,
    parts: BTreeMap<String, KeyedPart>,
}

/// Id-keyed form: parts by name, units and claims by id. Two documents are
/// structurally equal iff their keyed forms are equal.
pub fn keyed(bp: &BlueprintDoc) -> Json {
    let parts = bp
        .parts
        .iter()
        .map(|p| {
            (
                p.name.clone(),
                KeyedPart {
                    bounding_envelope: p.bounding_envelope.clone(),
                    support_zones: p
                        .support_zones
                        .iter()
                        .map(|z| {
                            (
                                z.name.clone(),
                                KeyedZone {
                                    plane: z.plane,
                                    footprint: z.footprint.clone(),
                                },
                            )
                        })
                        .collect(),
                    units: p
                        .construction_units
                        .iter()
                        .map(|u| {
                            (
                                u.id.clone(),
                                KeyedUnit {
                                    role: u.role,
                                    envelope: u.envelope.clone(),
                                    target: u.target.clone(),
                                    primitives: u.primitives.clone(),
                                },
                            )
                        })
                        .collect(),
                    claims: p
                        .acceptance_claims
                        .iter()
                        .map(|c| {
                            (
                                c.id.clone(),
                                KeyedClaim {
                                    metric: c.metric.clone(),
                                    operator: c.operator,
                                    value: c.value,
                                },
                            )
                        })
                        .collect(),
                },
            )
        })
        .collect();
    serde_json::to_value(KeyedDoc {
        schema_version: bp.schema_version,
        metadata: bp.metadata.clone(),
        paths: bp.paths.clone(),
        parts,
    })
    .expect("keyed blueprint serializes")
}

fn from_keyed(value: Json) -> Result<BlueprintDoc> {
    let k: KeyedDoc = serde_json::from_value(value).map_err(|e| Error::schema("$", e.to_string()))?;
    let parts = k
        .parts
        .into_iter()
        .map(|(name, p)| PartPlan {
            name,
            bounding_envelope: p.bounding_envelope,
            support_zones: p
                .support_zones
                .into_iter()
                .map(|(name, z)| SupportZone {
                    name,
                    plane: z.plane,
                    footprint: z.footprint,
                })
                .collect(),
            construction_units: p
                .units
                .into_iter()
                .map(|(id, u)| ConstructionUnit {
                    id,
                    role: u.role,
                    envelope: u.envelope,
                    target: u.target,
                    primitives: u.primitives,
                })
                .collect(),
            acceptance_claims: p
                .claims
                .into_iter()
                .map(|(id, c)| Claim {
                    id,
                    metric: c.metric,
                    operator: c.operator,
                    value: c.value,
                })
                .collect(),
        })
        .collect();
    Ok(BlueprintDoc {
        schema_version: k.schema_version,
        metadata: k.metadata,
        paths: k.paths,
        parts,
    })
}

pub fn structurally_equal(a: &BlueprintDoc, b: &BlueprintDoc) -> bool {
    keyed(a) == keyed(b)
}

fn escape(seg: &str) -> String {
    seg.replace('~', "~0").replace('/', "~1")
}

fn unescape(seg: &str) -> String {
    seg.replace("~1", "/").replace("~0", "~")
}

fn kind_for(segs: &[String], before: bool, after: bool) -> DiffKind {
    let entity = |added, removed, modified, depth: usize| {
        if segs.len() == depth && !before {
            added
        } else if segs.len() == depth && !after {
            removed
        } else {
            modified
        }
    };
    match segs.first().map(String::as_str) {
        Some("parts") if segs.len() <= 2 => entity(DiffKind::PartAdded, DiffKind::PartRemoved, DiffKind::PartModified, 2),
        Some("parts") => match segs[2].as_str() {
            "units" if segs.len() >= 4 => entity(DiffKind::UnitAdded, DiffKind::UnitRemoved, DiffKind::UnitModified, 4),
            "claims" if segs.len() >= 4 => entity(DiffKind::ClaimAdded, DiffKind::ClaimRemoved, DiffKind::ClaimChanged, 4),
            _ => DiffKind::PartModified,
        },
        Some("paths") => DiffKind::PathsChanged,
        _ => DiffKind::MetadataChanged,
    }
}

fn diff_values(old: Option<&Json>, new: Option<&Json>, segs: &mut Vec<String>, out: &mut Vec<DiffEntry>) {
    match (old, new) {
        (Some(Json::Object(a)), Some(Json::Object(b))) => {
            let keys: std::collections::BTreeSet<&String> = a.keys().chain(b.keys()).collect();
            for k in keys {
                segs.push(k.clone());
                diff_values(a.get(k), b.get(k), segs, out);
                segs.pop();
            }
        }
        (Some(Json::Array(a)), Some(Json::Array(b))) if a.len() == b.len() => {
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                segs.push(i.to_string());
                diff_values(Some(x), Some(y), segs, out);
                segs.pop();
            }
        }
        (a, b) if a == b => {}
        (a, b) => out.push(DiffEntry {
            kind: kind_for(segs, a.is_some(), b.is_some()),
            path: format!("/{}", segs.iter().map(|s| escape(s)).collect::<Vec<_>>().join("/")),
            before: a.cloned(),
            after: b.cloned(),
        }),
    }
}

/// Id-keyed structural diff. Empty iff the documents are structurally equal.
pub fn diff_blueprints(old: &BlueprintDoc, new: &BlueprintDoc) -> BlueprintDiff {
    let mut entries = Vec::new();
    diff_values(Some(&keyed(old)), Some(&keyed(new)), &mut Vec::new(), &mut entries);
    BlueprintDiff {
        schema: "blueprint_diff/1".into(),
        entries,
    }
}

fn set_path(root: &mut Json, segs: &[String], value: Option<Json>) -> Result<()> {
    let (last, parents) = segs.split_last().ok_or_else(|| Error::schema("/", "empty diff path"))?;
    let mut cur = root;
    for s in parents {
        cur = match cur {
            Json::Object(m) => m.entry(s.clone()).or_insert_with(|| Json::Object(Default::default())),
            Json::Array(a) => {
                let i: usize = s.parse().map_err(|_| Error::schema(s.clone(), "bad array index"))?;
                a.get_mut(i).ok_or_else(|| Error::schema(s.clone(), "array index out of range"))?
            }
            _ => return Err(Error::schema(s.clone(), "path descends into a scalar")),
        };
    }
    match (cur, value) {
        (Json::Object(m), Some(v)) => {
            m.insert(last.clone(), v);
        }
        (Json::Object(m), None) => {
            m.remove(last);
        }
        (Json::Array(a), Some(v)) => {
            let i: usize = last.parse().map_err(|_| Error::schema(last.clone(), "bad array index"))?;
            *a.get_mut(i).ok_or_else(|| Error::schema(last.clone(), "array index out of range"))? = v;
        }
        _ => return Err(Error::schema(last.clone(), "cannot apply diff entry here")),
    }
    Ok(())
}

/// `apply_diff(old, &diff_blueprints(old, new))` is structurally equal to `new`.
pub fn apply_diff(old: &BlueprintDoc, diff: &BlueprintDiff) -> Result<BlueprintDoc> {
    let mut tree = keyed(old);
    for e in &diff.entries {
        let segs: Vec<String> = e.path.trim_start_matches('/').split('/').map(unescape).collect();
        set_path(&mut tree, &segs, e.after.clone())?;
    }
    from_keyed(tree)
}
