//! Engineering briefs: prompt, structured constraints and the ordered list of
//! typed pass/fail requirements.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_yaml::{Mapping, Value};

use crate::diag::Diagnostic;
use crate::doc::{self, At};
use crate::error::{Error, Result};

/// Relative tolerance applied to `EQ` requirements that do not state one.
pub const DEFAULT_EQ_TOLERANCE: f64 = 1e-3;

pub const MAX_REQUIREMENTS: usize = 32;

/// Scope tokens a requirement may use besides declared load cases.
pub const FIXED_SCOPES: [&str; 3] = ["design", "assembly", "constrained_modal"];

/// Units the harness knows how to read from a `limit_<unit>` suffix.
pub const KNOWN_UNITS: [&str; 9] = ["MPa", "mm", "kg", "g", "Hz", "kN", "N", "m", ""];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequirementType {
    Structural,
    Vibration,
    Thermal,
    Fluid,
    Radiation,
    Buckling,
    Dimensional,
    MaterialCompliance,
    GeometricCheck,
}

impl RequirementType {
    pub const ALL: [RequirementType; 9] = [
        Self::Structural,
        Self::Vibration,
        Self::Thermal,
        Self::Fluid,
        Self::Radiation,
        Self::Buckling,
        Self::Dimensional,
        Self::MaterialCompliance,
        Self::GeometricCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Structural => "structural",
            Self::Vibration => "vibration",
            Self::Thermal => "thermal",
            Self::Fluid => "fluid",
            Self::Radiation => "radiation",
            Self::Buckling => "buckling",
            Self::Dimensional => "dimensional",
            Self::MaterialCompliance => "material_compliance",
            Self::GeometricCheck => "geometric_check",
        }
    }

    /// Accepts the canonical names plus the pool spellings
    /// (`structural_analysis`, `vibration_analysis`, `buckling_analysis`,
    /// `connection_integrity`).
    pub fn parse(text: &str) -> Option<Self> {
        let t = text.trim().to_ascii_lowercase();
        let t = t.strip_suffix("_analysis").unwrap_or(&t);
        if t == "connection_integrity" {
            return Some(Self::Structural);
        }
        Self::ALL.into_iter().find(|r| r.as_str() == t)
    }

    /// Solver card conventionally producing this requirement type, if any.
    pub fn analysis_card(self) -> Option<&'static str> {
        match self {
            Self::Structural => Some("*STATIC"),
            Self::Vibration => Some("*FREQUENCY"),
            Self::Buckling => Some("*BUCKLE"),
            Self::Thermal => Some("*HEAT TRANSFER"),
            Self::Fluid => Some("CFD"),
            Self::Radiation => Some("RADIATION"),
            _ => None,
        }
    }
}

impl fmt::Display for RequirementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
}

impl Operator {
    pub fn parse(text: &str) -> Option<Self> {
        match text.trim() {
            "<=" | "≤" | "LE" | "le" | "=<" => Some(Self::Le),
            ">=" | "≥" | "GE" | "ge" | "=>" => Some(Self::Ge),
            "==" | "=" | "EQ" | "eq" => Some(Self::Eq),
            _ => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Self::Le => "<=",
            Self::Ge => ">=",
            Self::Eq => "==",
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Numeric threshold with the unit read from its `limit_<unit>` field name.
#[derive(Debug, Clone, PartialEq)]
pub struct Limit {
    pub value: f64,
    /// Empty for a bare `limit` field.
    pub unit: String,
}

impl Limit {
    pub fn field_name(&self) -> String {
        if self.unit.is_empty() {
            "limit".into()
        } else {
            format!("limit_{}", self.unit)
        }
    }

    pub fn unit_is_known(&self) -> bool {
        KNOWN_UNITS.contains(&self.unit.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Requirement {
    pub id: String,
    pub rtype: RequirementType,
    pub metric: String,
    pub operator: Operator,
    pub limit: Limit,
    /// Explicit relative tolerance (EQ only); see [`Requirement::tolerance`].
    pub explicit_tolerance: Option<f64>,
    pub applies_to: Vec<String>,
    pub derivation: Option<String>,
    /// Unrecognized requirement fields (`note`, `rationale`, ...), kept verbatim.
    pub extras: Mapping,
}

impl Requirement {
    /// Resolved relative tolerance for EQ requirements.
    pub fn tolerance(&self) -> Option<f64> {
        match self.operator {
            Operator::Eq => Some(self.explicit_tolerance.unwrap_or(DEFAULT_EQ_TOLERANCE)),
            _ => None,
        }
    }

    pub fn tolerance_is_default(&self) -> bool {
        self.operator == Operator::Eq && self.explicit_tolerance.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialRef {
    pub name: String,
    pub properties: Mapping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadKind {
    Force,
    AccelerationG,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadDecl {
    pub selector: String,
    pub vector: [f64; 3],
    pub kind: LoadKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadCaseDecl {
    pub id: String,
    pub description: String,
    pub loads: Vec<LoadDecl>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StructuredPrompt {
    pub geometric_constraints: Vec<String>,
    pub materials: Vec<MaterialRef>,
    pub load_cases: Vec<LoadCaseDecl>,
    pub output_format: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerificationBlock {
    pub primary_class: String,
    pub secondary_classes: Vec<String>,
    pub excluded_classes: Vec<String>,
    pub requires_non_fea_solver: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Brief {
    pub id: String,
    pub full_prompt: String,
    pub structured_prompt: StructuredPrompt,
    pub requirements: Vec<Requirement>,
    pub verification: VerificationBlock,
    pub eval_coverage: Vec<String>,
    pub multi_part: bool,
    /// Unknown top-level fields (including `notes`), preserved in order.
    pub extras: Mapping,
}

impl Brief {
    pub fn requirement(&self, id: &str) -> Option<&Requirement> {
        self.requirements.iter().find(|r| r.id == id)
    }

    pub fn declared_load_cases(&self) -> Vec<&str> {
        self.structured_prompt.load_cases.iter().map(|l| l.id.as_str()).collect()
    }

    /// Whether the harness can evaluate this requirement. A requirement is set
    /// aside when `requires_non_fea_solver` flags its id, metric, or type as
    /// needing a non-FEA solver.
    pub fn is_evaluable(&self, req: &Requirement) -> bool {
        let flags = &self.verification.requires_non_fea_solver;
        let flagged = |k: &str| flags.get(k).copied().unwrap_or(false);
        !(flagged(&req.id) || flagged(&req.metric) || flagged(req.rtype.as_str()))
    }

    pub fn to_value(&self) -> Value {
        let mut m = Mapping::new();
        let mut put = |k: &str, v: Value| {
            m.insert(doc::s(k), v);
        };
        put("id", doc::s(&self.id));
        put("multi_part", Value::Bool(self.multi_part));
        put("full_prompt", doc::s(&self.full_prompt));
        put("prompt", prompt_to_value(&self.structured_prompt));
        let reqs: Vec<Value> = self.requirements.iter().map(requirement_to_value).collect();
        put(
            "requirements",
            doc::mapping([("pass_fail_criteria", Some(Value::Sequence(reqs)))]),
        );
        put("verification", verification_to_value(&self.verification));
        put("eval_coverage", doc::str_seq(&self.eval_coverage));
        for (k, v) in &self.extras {
            m.insert(k.clone(), v.clone());
        }
        Value::Mapping(m)
    }

    /// YAML rendering; `parse_brief_str(to_yaml(b))` reproduces `b`.
    pub fn to_yaml(&self) -> String {
        doc::emit_yaml(&self.to_value())
    }
}

pub fn parse_brief(path: &Path) -> Result<Brief> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("brief");
    parse_brief_bytes(&bytes, stem)
}

pub fn parse_brief_str(text: &str) -> Result<Brief> {
    parse_brief_bytes(text.as_bytes(), "brief")
}

/// Parse brief bytes; `fallback_id` names the brief when it carries no `id`.
pub fn parse_brief_bytes(bytes: &[u8], fallback_id: &str) -> Result<Brief> {
    let value = doc::parse_bytes(bytes)?;
    brief_from_value(&value, fallback_id)
}

const BRIEF_KEYS: [&str; 10] = [
    "id",
    "brief_id",
    "multi_part",
    "full_prompt",
    "prompt",
    "requirements",
    "verification",
    "eval_coverage",
    "source",
    "schema",
];

pub fn brief_from_value(value: &Value, fallback_id: &str) -> Result<Brief> {
    let root = At::root(value);
    let map = root.map()?;

    let id = match root.get_any(&["id", "brief_id"]) {
        Some(a) => a.text()?,
        None => fallback_id.to_string(),
    };
    if id.trim().is_empty() {
        return Err(root.err("brief id is empty"));
    }
    let multi_part = root.get("multi_part").map(|a| a.bool()).transpose()?.unwrap_or(false);
    let full_prompt = root.get("full_prompt").map(|a| a.text()).transpose()?.unwrap_or_default();
    let structured_prompt = match root.get("prompt") {
        Some(p) => parse_prompt(&p)?,
        None => StructuredPrompt::default(),
    };

    let reqs_at = root
        .req("requirements")?
        .req("pass_fail_criteria")
        .map_err(|_| Error::schema("$.requirements.pass_fail_criteria", "required field is missing"))?;
    let items = reqs_at.seq()?;
    if items.is_empty() {
        return Err(reqs_at.err("requirement list is empty"));
    }
    if items.len() > MAX_REQUIREMENTS {
        return Err(reqs_at.err(format!(
            "{} requirements exceed the maximum of {MAX_REQUIREMENTS}",
            items.len()
        )));
    }
    let mut requirements = Vec::with_capacity(items.len());
    let mut seen = HashSet::new();
    for item in &items {
        let req = parse_requirement(item)?;
        if !seen.insert(req.id.clone()) {
            return Err(item.err(format!("duplicate requirement id `{}`", req.id)));
        }
        requirements.push(req);
    }

    let verification = match root.get("verification") {
        Some(v) => parse_verification(&v)?,
        None => VerificationBlock::default(),
    };
    let eval_coverage = match root.get("eval_coverage") {
        Some(a) => match a.value {
            Value::Sequence(_) => a.str_list()?,
            _ => vec![a.text()?],
        },
        None => Vec::new(),
    };

    let mut extras = Mapping::new();
    for (k, v) in map {
        let key = doc::key_text(k);
        if !BRIEF_KEYS.contains(&key.as_str()) {
            extras.insert(k.clone(), v.clone());
        }
    }

    Ok(Brief {
        id,
        full_prompt,
        structured_prompt,
        requirements,
        verification,
        eval_coverage,
        multi_part,
        extras,
    })
}

const REQUIREMENT_KEYS: [&str; 9] = [
    "id",
    "type",
    "rtype",
    "metric",
    "operator",
    "op",
    "tolerance",
    "applies_to",
    "derivation",
];

fn parse_requirement(at: &At<'_>) -> Result<Requirement> {
    let map = at.map()?;
    let id = at.req("id")?.text()?;
    if id.trim().is_empty() {
        return Err(at.err("requirement id is empty"));
    }
    let type_at = at
        .get_any(&["type", "rtype"])
        .ok_or_else(|| Error::schema(format!("{}.type", at.path()), "required field is missing"))?;
    let type_text = type_at.str()?;
    let rtype = RequirementType::parse(type_text)
        .ok_or_else(|| type_at.err(format!("unknown requirement type `{type_text}`")))?;
    let metric = at.req("metric")?.text()?;
    let op_at = at
        .get_any(&["operator", "op"])
        .ok_or_else(|| Error::schema(format!("{}.operator", at.path()), "required field is missing"))?;
    let op_text = op_at.text()?;
    let operator =
        Operator::parse(&op_text).ok_or_else(|| op_at.err(format!("unknown operator `{op_text}`")))?;

    let mut limit = None;
    for (k, _) in map {
        let key = doc::key_text(k);
        let unit = if key == "limit" {
            Some(String::new())
        } else {
            key.strip_prefix("limit_").map(str::to_string)
        };
        if let Some(unit) = unit {
            if limit.is_some() {
                return Err(at.err("more than one limit field"));
            }
            let value = at.req(&key)?.f64()?;
            limit = Some(Limit { value, unit });
        }
    }
    let limit = limit.ok_or_else(|| Error::schema(format!("{}.limit", at.path()), "missing limit"))?;

    let explicit_tolerance = match at.get("tolerance") {
        Some(t) => {
            let v = t.f64()?;
            if !(v > 0.0 && v < 1.0) {
                return Err(t.err("relative tolerance must lie in (0, 1)"));
            }
            if operator != Operator::Eq {
                return Err(t.err("tolerance is only meaningful for `==` requirements"));
            }
            Some(v)
        }
        None => None,
    };

    let applies_to = match at.get("applies_to") {
        Some(a) => {
            let raw = match a.value {
                Value::Sequence(_) => a.str_list()?,
                _ => vec![a.text()?],
            };
            let mut out = Vec::new();
            for token in raw {
                for t in expand_scope_token(&token) {
                    if !out.contains(&t) {
                        out.push(t);
                    }
                }
            }
            out
        }
        None => Vec::new(),
    };
    if applies_to.is_empty() {
        return Err(Error::schema(
            format!("{}.applies_to", at.path()),
            "requirement applies to no scope",
        ));
    }
    let derivation = at.get("derivation").map(|d| d.text()).transpose()?;

    let mut extras = Mapping::new();
    for (k, v) in map {
        let key = doc::key_text(k);
        if !REQUIREMENT_KEYS.contains(&key.as_str()) && key != "limit" && !key.starts_with("limit_") {
            extras.insert(k.clone(), v.clone());
        }
    }

    Ok(Requirement {
        id,
        rtype,
        metric,
        operator,
        limit,
        explicit_tolerance,
        applies_to,
        derivation,
        extras,
    })
}

/// Expand `LC1--LC4`, `LC1-LC4`, `LC1..LC4` and `LC1–LC4` ranges; other tokens
/// pass through trimmed.
pub fn expand_scope_token(token: &str) -> Vec<String> {
    let t = token.trim();
    for sep in ["--", "..", "–", "-"] {
        if let Some((a, b)) = t.split_once(sep) {
            if let (Some(lo), Some(hi)) = (lc_number(a.trim()), lc_number(b.trim())) {
                if lo <= hi && hi - lo < 1000 {
                    return (lo..=hi).map(|n| format!("LC{n}")).collect();
                }
            }
        }
    }
    vec![t.to_string()]
}

pub fn lc_number(token: &str) -> Option<u32> {
    let digits = token.strip_prefix("LC")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

pub fn is_load_case_token(token: &str) -> bool {
    lc_number(token).is_some()
}

fn parse_prompt(at: &At<'_>) -> Result<StructuredPrompt> {
    if !at.value.is_mapping() {
        return Err(at.err("expected a mapping"));
    }
    let geometric_constraints = match at.get("geometric_constraints") {
        Some(a) => match a.value {
            Value::Sequence(_) => a.str_list()?,
            _ => vec![a.text()?],
        },
        None => Vec::new(),
    };
    let mut materials = Vec::new();
    if let Some(m) = at.get_any(&["materials", "material"]) {
        let items = match m.value {
            Value::Sequence(_) => m.seq()?,
            _ => vec![m],
        };
        for item in items {
            materials.push(parse_material(&item)?);
        }
    }
    let mut load_cases = Vec::new();
    if let Some(lcs) = at.get("load_cases") {
        let mut seen = HashSet::new();
        for item in lcs.seq()? {
            let lc = parse_load_case(&item)?;
            if !seen.insert(lc.id.clone()) {
                return Err(item.err(format!("duplicate load case id `{}`", lc.id)));
            }
            load_cases.push(lc);
        }
    }
    let output_format = at.get("output_format").map(|a| a.text()).transpose()?.unwrap_or_default();
    Ok(StructuredPrompt {
        geometric_constraints,
        materials,
        load_cases,
        output_format,
    })
}

fn parse_material(at: &At<'_>) -> Result<MaterialRef> {
    match at.value {
        Value::Mapping(map) => {
            let name = at.req("name")?.text()?;
            let mut properties = map.clone();
            properties.remove("name");
            Ok(MaterialRef { name, properties })
        }
        _ => Ok(MaterialRef {
            name: at.text()?,
            properties: Mapping::new(),
        }),
    }
}

fn parse_load_case(at: &At<'_>) -> Result<LoadCaseDecl> {
    if let Value::String(text) = at.value {
        // `LC1: 5 G frontal impact` shorthand
        let (id, desc) = text.split_once(':').unwrap_or((text.as_str(), ""));
        let id = id.trim().to_string();
        if !is_load_case_token(&id) {
            return Err(at.err(format!("load case shorthand `{text}` does not start with LCn")));
        }
        return Ok(LoadCaseDecl {
            id,
            description: desc.trim().to_string(),
            loads: Vec::new(),
        });
    }
    let id = at.req("id")?.text()?;
    if id.trim().is_empty() {
        return Err(at.err("load case id is empty"));
    }
    let description = at.get("description").map(|a| a.text()).transpose()?.unwrap_or_default();
    let mut loads = Vec::new();
    if let Some(ls) = at.get("loads") {
        for l in ls.seq()? {
            let selector = l.req("selector")?.text()?;
            let vec_at = l.req("vector")?;
            let v = vec_at.f64_list()?;
            if v.len() != 3 {
                return Err(vec_at.err("load vector must have three components"));
            }
            let kind = match l.get("kind") {
                Some(k) => match k.str()? {
                    "force" => LoadKind::Force,
                    "acceleration_g" => LoadKind::AccelerationG,
                    other => return Err(k.err(format!("unknown load kind `{other}`"))),
                },
                None => LoadKind::Force,
            };
            loads.push(LoadDecl {
                selector,
                vector: [v[0], v[1], v[2]],
                kind,
            });
        }
    }
    Ok(LoadCaseDecl {
        id,
        description,
        loads,
    })
}

fn parse_verification(at: &At<'_>) -> Result<VerificationBlock> {
    if !at.value.is_mapping() {
        return Err(at.err("expected a mapping"));
    }
    let list = |keys: &[&str]| -> Result<Vec<String>> {
        match at.get_any(keys) {
            Some(a) => match a.value {
                Value::Sequence(_) => a.str_list(),
                _ => Ok(vec![a.text()?]),
            },
            None => Ok(Vec::new()),
        }
    };
    let primary_class = at
        .get_any(&["primary_class", "primary"])
        .map(|a| a.text())
        .transpose()?
        .unwrap_or_default();
    let secondary_classes = list(&["secondary_classes", "secondary"])?;
    let excluded_classes = list(&["excluded_classes", "excluded"])?;
    let overlap: BTreeSet<_> = secondary_classes
        .iter()
        .filter(|c| excluded_classes.contains(c))
        .collect();
    if !overlap.is_empty() {
        return Err(at.err(format!(
            "classes {overlap:?} are both secondary and excluded"
        )));
    }
    let mut requires_non_fea_solver = BTreeMap::new();
    if let Some(flags) = at.get("requires_non_fea_solver") {
        match flags.value {
            Value::Bool(b) => {
                requires_non_fea_solver.insert("fluid".to_string(), *b);
                requires_non_fea_solver.insert("radiation".to_string(), *b);
            }
            _ => {
                for (k, v) in flags.entries()? {
                    requires_non_fea_solver.insert(k, v.bool()?);
                }
            }
        }
    }
    Ok(VerificationBlock {
        primary_class,
        secondary_classes,
        excluded_classes,
        requires_non_fea_solver,
    })
}

fn prompt_to_value(p: &StructuredPrompt) -> Value {
    let materials: Vec<Value> = p
        .materials
        .iter()
        .map(|m| {
            let mut map = Mapping::new();
            map.insert(doc::s("name"), doc::s(&m.name));
            for (k, v) in &m.properties {
                map.insert(k.clone(), v.clone());
            }
            Value::Mapping(map)
        })
        .collect();
    let load_cases: Vec<Value> = p
        .load_cases
        .iter()
        .map(|lc| {
            let loads: Vec<Value> = lc
                .loads
                .iter()
                .map(|l| {
                    doc::mapping([
                        ("selector", Some(doc::s(&l.selector))),
                        (
                            "vector",
                            Some(Value::Sequence(l.vector.iter().map(|c| doc::num(*c)).collect())),
                        ),
                        (
                            "kind",
                            Some(doc::s(match l.kind {
                                LoadKind::Force => "force",
                                LoadKind::AccelerationG => "acceleration_g",
                            })),
                        ),
                    ])
                })
                .collect();
            doc::mapping([
                ("id", Some(doc::s(&lc.id))),
                ("description", Some(doc::s(&lc.description))),
                ("loads", Some(Value::Sequence(loads))),
            ])
        })
        .collect();
    doc::mapping([
        ("geometric_constraints", Some(doc::str_seq(&p.geometric_constraints))),
        ("materials", Some(Value::Sequence(materials))),
        ("load_cases", Some(Value::Sequence(load_cases))),
        ("output_format", Some(doc::s(&p.output_format))),
    ])
}

fn requirement_to_value(r: &Requirement) -> Value {
    let mut m = Mapping::new();
    m.insert(doc::s("id"), doc::s(&r.id));
    m.insert(doc::s("type"), doc::s(r.rtype.as_str()));
    m.insert(doc::s("metric"), doc::s(&r.metric));
    m.insert(doc::s("operator"), doc::s(r.operator.symbol()));
    m.insert(doc::s(r.limit.field_name()), doc::num(r.limit.value));
    if let Some(t) = r.explicit_tolerance {
        m.insert(doc::s("tolerance"), Value::Number(t.into()));
    }
    m.insert(doc::s("applies_to"), doc::str_seq(&r.applies_to));
    if let Some(d) = &r.derivation {
        m.insert(doc::s("derivation"), doc::s(d));
    }
    for (k, v) in &r.extras {
        m.insert(k.clone(), v.clone());
    }
    Value::Mapping(m)
}

fn verification_to_value(v: &VerificationBlock) -> Value {
    let mut flags = Mapping::new();
    for (k, b) in &v.requires_non_fea_solver {
        flags.insert(doc::s(k), Value::Bool(*b));
    }
    doc::mapping([
        ("primary_class", Some(doc::s(&v.primary_class))),
        ("secondary_classes", Some(doc::str_seq(&v.secondary_classes))),
        ("excluded_classes", Some(doc::str_seq(&v.excluded_classes))),
        ("requires_non_fea_solver", Some(Value::Mapping(flags))),
    ])
}

fn class_matches(class: &str, rtype: RequirementType) -> bool {
    let c = class.trim().to_ascii_lowercase();
    let c = c.strip_suffix("_analysis").unwrap_or(&c);
    c == rtype.as_str()
        || rtype
            .analysis_card()
            .is_some_and(|card| card.to_ascii_lowercase() == c)
}

/// Internal-consistency diagnostics. Errors and warnings mark real problems;
/// info entries record harness decisions (not-evaluable requirements, opaque
/// units).
pub fn validate_brief(brief: &Brief) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let declared: BTreeSet<&str> = brief.declared_load_cases().into_iter().collect();
    for (i, r) in brief.requirements.iter().enumerate() {
        let path = format!("requirements.pass_fail_criteria[{i}]");
        if !(is_requirement_id(&r.id)) {
            out.push(Diagnostic::warning(
                format!("{path}.id"),
                format!("id `{}` does not follow the R<n> / R_asm<n> pattern", r.id),
            ));
        }
        for token in &r.applies_to {
            if FIXED_SCOPES.contains(&token.as_str()) {
                continue;
            }
            if is_load_case_token(token) {
                if declared.is_empty() {
                    out.push(Diagnostic::warning(
                        format!("{path}.applies_to"),
                        format!("load case `{token}` used but the brief declares no load cases"),
                    ));
                } else if !declared.contains(token.as_str()) {
                    out.push(Diagnostic::error(
                        format!("{path}.applies_to"),
                        format!("load case `{token}` is not declared (declared: {declared:?})"),
                    ));
                }
            } else {
                out.push(Diagnostic::error(
                    format!("{path}.applies_to"),
                    format!("unknown scope token `{token}`"),
                ));
            }
        }
        if !r.limit.unit_is_known() {
            out.push(Diagnostic::info(
                format!("{path}.{}", r.limit.field_name()),
                format!("unit `{}` is not recognized; values bind only on an exact unit match", r.limit.unit),
            ));
        }
        let evaluable = brief.is_evaluable(r);
        if !evaluable {
            out.push(Diagnostic::info(
                path.clone(),
                format!("requirement {} is not evaluable by this harness (requires a non-FEA solver)", r.id),
            ));
        } else {
            if matches!(r.rtype, RequirementType::Fluid | RequirementType::Radiation) {
                out.push(Diagnostic::warning(
                    path.clone(),
                    format!(
                        "{} requirement {} is not flagged in requires_non_fea_solver; it can only bind to an externally supplied value",
                        r.rtype, r.id
                    ),
                ));
            }
            if let Some(class) = brief
                .verification
                .excluded_classes
                .iter()
                .find(|c| class_matches(c, r.rtype))
            {
                out.push(Diagnostic::error(
                    path.clone(),
                    format!(
                        "requirement {} needs excluded analysis class `{class}` but is not flagged in requires_non_fea_solver",
                        r.id
                    ),
                ));
            }
        }
    }
    out
}

pub fn is_requirement_id(id: &str) -> bool {
    if let Some(rest) = id.strip_prefix("R_asm") {
        return rest.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_');
    }
    match id.strip_prefix('R') {
        Some(d) => !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()),
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diag::{count, Severity};

    const BRIEF_A: &str = r#"
id: bracket_a
full_prompt: Design a single-part titanium mounting bracket.
prompt:
  load_cases:
    - {id: LC1, description: vertical}
    - {id: LC2, description: axial}
    - {id: LC3, description: lateral}
    - {id: LC4, description: combined}
requirements:
  pass_fail_criteria:
    - id: R1
      type: structural_analysis
      metric: max_von_mises_stress
      op: "<="
      limit_MPa: 633
      derivation: ultimate_strength/1.5
      applies_to: [LC1, LC2, LC3, LC4]
    - id: R4
      type: structural_analysis
      metric: mass
      op: "<="
      limit_kg: 1.0
      secondary: at least 40
      applies_to: [design]
source:
  catalog: pt
extra_field: {keep: me}
"#;

    #[test]
    fn brief_a_r1_limit_and_operator() {
        let b = parse_brief_str(BRIEF_A).unwrap();
        let r1 = &b.requirements[0];
        assert_eq!(r1.operator, Operator::Le);
        assert_eq!(r1.limit, Limit { value: 633.0, unit: "MPa".into() });
        assert_eq!(r1.rtype, RequirementType::Structural);
        assert_eq!(r1.applies_to, vec!["LC1", "LC2", "LC3", "LC4"]);
        assert!(b.extras.contains_key("extra_field"));
        assert!(!b.extras.contains_key("source"));
        assert_eq!(b.requirements[1].extras.get("secondary").and_then(|v| v.as_str()), Some("at least 40"));
    }

    #[test]
    fn table1_r1_eq_row() {
        let text = r#"
id: baja
requirements:
  pass_fail_criteria:
    - {id: R1, type: geometric_check, metric: "primary tube OD (mm)", operator: "=", limit_mm: 25.4, applies_to: [design]}
"#;
        let b = parse_brief_str(text).unwrap();
        let r = &b.requirements[0];
        assert_eq!(r.operator, Operator::Eq);
        assert_eq!(r.limit.value, 25.4);
        assert_eq!(r.limit.unit, "mm");
        assert_eq!(r.applies_to, vec!["design"]);
        assert_eq!(r.tolerance(), Some(DEFAULT_EQ_TOLERANCE));
        assert!(r.tolerance_is_default());
    }

    #[test]
    fn empty_requirement_list_is_schema_error() {
        let text = "id: x\nrequirements:\n  pass_fail_criteria: []\n";
        assert!(matches!(parse_brief_str(text), Err(Error::Schema { .. })));
    }

    #[test]
    fn duplicate_ids_unknown_type_missing_limit() {
        let dup = "requirements:\n  pass_fail_criteria:\n    - {id: R1, type: structural, metric: m, op: '<=', limit: 1, applies_to: [design]}\n    - {id: R1, type: structural, metric: m, op: '<=', limit: 1, applies_to: [design]}\n";
        assert!(matches!(parse_brief_str(dup), Err(Error::Schema { .. })));
        let bad_type = "requirements:\n  pass_fail_criteria:\n    - {id: R1, type: magic, metric: m, op: '<=', limit: 1, applies_to: [design]}\n";
        assert!(matches!(parse_brief_str(bad_type), Err(Error::Schema { .. })));
        let no_limit = "requirements:\n  pass_fail_criteria:\n    - {id: R1, type: structural, metric: m, op: '<=', applies_to: [design]}\n";
        assert!(matches!(parse_brief_str(no_limit), Err(Error::Schema { .. })));
    }

    #[test]
    fn too_many_requirements_rejected() {
        let mut text = String::from("requirements:\n  pass_fail_criteria:\n");
        for i in 1..=33 {
            text.push_str(&format!(
                "    - {{id: R{i}, type: structural, metric: m, op: '<=', limit: 1, applies_to: [design]}}\n"
            ));
        }
        assert!(matches!(parse_brief_str(&text), Err(Error::Schema { .. })));
    }

    #[test]
    fn unresolvable_load_case_is_one_error() {
        let text = r#"
prompt:
  load_cases: [{id: LC1}, {id: LC2}, {id: LC3}, {id: LC4}]
requirements:
  pass_fail_criteria:
    - {id: R1, type: structural, metric: m, op: "<=", limit_MPa: 1, applies_to: [LC9]}
"#;
        let b = parse_brief_str(text).unwrap();
        let d = validate_brief(&b);
        assert_eq!(count(&d, Severity::Error), 1, "{d:?}");
    }

    #[test]
    fn fluid_flagged_is_info_not_evaluable() {
        let text = r#"
requirements:
  pass_fail_criteria:
    - {id: R1, type: fluid, metric: wing_lift_margin, op: ">=", limit: 1.0, applies_to: [design]}
verification:
  primary_class: "*STATIC"
  excluded_classes: [CFD]
  requires_non_fea_solver: {wing_lift_margin: true}
"#;
        let b = parse_brief_str(text).unwrap();
        assert!(!b.is_evaluable(&b.requirements[0]));
        let d = validate_brief(&b);
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].severity, Severity::Info);
        assert!(d[0].message.contains("not evaluable by this harness"));
    }

    #[test]
    fn excluded_class_without_flag_is_error() {
        let text = r#"
requirements:
  pass_fail_criteria:
    - {id: R1, type: thermal, metric: t_max, op: "<=", limit: 80, applies_to: [design]}
verification:
  excluded_classes: ["*HEAT TRANSFER"]
"#;
        let b = parse_brief_str(text).unwrap();
        assert_eq!(count(&validate_brief(&b), Severity::Error), 1);
    }

    #[test]
    fn secondary_and_excluded_must_be_disjoint() {
        let text = r#"
requirements:
  pass_fail_criteria:
    - {id: R1, type: structural, metric: m, op: "<=", limit: 1, applies_to: [design]}
verification:
  secondary_classes: ["*BUCKLE"]
  excluded_classes: ["*BUCKLE"]
"#;
        assert!(matches!(parse_brief_str(text), Err(Error::Schema { .. })));
    }

    #[test]
    fn scope_ranges_expand() {
        assert_eq!(expand_scope_token("LC1--LC4"), vec!["LC1", "LC2", "LC3", "LC4"]);
        assert_eq!(expand_scope_token("LC2–LC3"), vec!["LC2", "LC3"]);
        assert_eq!(expand_scope_token("design"), vec!["design"]);
    }

    #[test]
    fn unknown_unit_is_opaque_with_info() {
        let text = "requirements:\n  pass_fail_criteria:\n    - {id: R1, type: structural, metric: m, op: '<=', limit_psi: 30, applies_to: [design]}\n";
        let b = parse_brief_str(text).unwrap();
        assert_eq!(b.requirements[0].limit.unit, "psi");
        let d = validate_brief(&b);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].severity, Severity::Info);
    }

    #[test]
    fn yaml_round_trip() {
        let b = parse_brief_str(BRIEF_A).unwrap();
        let again = parse_brief_str(&b.to_yaml()).unwrap();
        assert_eq!(b, again);
    }

    #[test]
    fn alias_spellings_normalize() {
        assert_eq!(RequirementType::parse("vibration_analysis"), Some(RequirementType::Vibration));
        assert_eq!(RequirementType::parse("buckling_analysis"), Some(RequirementType::Buckling));
        assert_eq!(RequirementType::parse("connection_integrity"), Some(RequirementType::Structural));
        assert_eq!(RequirementType::parse("material_compliance"), Some(RequirementType::MaterialCompliance));
    }
}
