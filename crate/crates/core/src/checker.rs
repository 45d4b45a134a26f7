//! Binds requirement metrics to values and turns them into typed verdicts.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::artifact::Artifact;
use crate::blueprint::ClaimBinding;
use crate::brief::{Brief, Operator, Requirement};
use crate::error::{Error, Result};
use crate::fea::SolverReportDoc;
use crate::mesh::{mass_properties, validity};

pub const VERDICT_SCHEMA: &str = "verdict/1";

/// How not-evaluable requirements are graded; written into every verdict.
pub const GRADING_CONVENTION: &str =
    "not_evaluable requirements are excluded from req_pass_fraction and do not block strict_pass";

/// Value sources, highest precedence first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Solver,
    MeshDerived,
    Declared,
    Claim,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Solver => "solver",
            Provenance::MeshDerived => "mesh_derived",
            Provenance::Declared => "declared",
            Provenance::Claim => "claim",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unit groups with the factor to the group's base unit.
const UNITS: &[(&str, &str, f64)] = &[
    ("mm", "length", 1.0),
    ("cm", "length", 10.0),
    ("m", "length", 1000.0),
    ("in", "length", 25.4),
    ("MPa", "stress", 1.0),
    ("N/mm2", "stress", 1.0),
    ("N/mm^2", "stress", 1.0),
    ("kPa", "stress", 1e-3),
    ("Pa", "stress", 1e-6),
    ("GPa", "stress", 1e3),
    ("kg", "mass", 1.0),
    ("g", "mass", 1e-3),
    ("lb", "mass", 0.45359237),
    ("N", "force", 1.0),
    ("kN", "force", 1e3),
    ("Hz", "frequency", 1.0),
    ("kHz", "frequency", 1e3),
    ("mm3", "volume", 1.0),
    ("mm^3", "volume", 1.0),
    ("cm3", "volume", 1e3),
    ("kg/m2", "areal_density", 1.0),
    ("kg/m^2", "areal_density", 1.0),
];

/// Convert `value` from unit `from` to unit `to`. An empty `from` means the
/// value was declared without a unit and is read in `to`.
pub fn convert(value: f64, from: &str, to: &str) -> Option<f64> {
    if from.is_empty() || from == to {
        return Some(value);
    }
    let find = |u: &str| UNITS.iter().find(|x| x.0 == u);
    let (a, b) = (find(from)?, find(to)?);
    (a.1 == b.1).then(|| value * a.2 / b.2)
}

/// Metric name → canonical key, kept flat so resolution is idempotent.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AliasTable {
    map: BTreeMap<String, String>,
}

pub const MASS_ALIASES: [&str; 4] = ["empty_enclosure_mass", "dry_mass", "mesh_derived_mass", "self_weight_kg"];

impl AliasTable {
    pub fn builtin() -> Self {
        let mut t = AliasTable::default();
        for a in MASS_ALIASES {
            t.add(a, "mass").expect("built-in aliases are consistent");
        }
        t
    }

    /// Per-node-set displacement aliases for `max_displacement_at_<set>`.
    pub fn add_node_set(&mut self, set: &str) -> Result<()> {
        let key = format!("max_displacement_at_{set}");
        for a in [format!("{set}_displacement"), format!("{set}_deflection"), format!("max_displacement_{set}")] {
            self.add(&a, &key)?;
        }
        Ok(())
    }

    pub fn resolve<'a>(&'a self, name: &'a str) -> &'a str {
        let n = name.trim();
        self.map.get(n).map(String::as_str).unwrap_or(n)
    }

    pub fn add(&mut self, alias: &str, canonical: &str) -> Result<()> {
        let alias = alias.trim();
        let target = self.resolve(canonical).to_string();
        if alias == target {
            return Ok(());
        }
        if let Some(prev) = self.map.get(alias) {
            if *prev != target {
                return Err(Error::AliasConflict {
                    alias: alias.into(),
                    first: prev.clone(),
                    second: target,
                });
            }
            return Ok(());
        }
        // `alias` may itself have been a canonical target; re-point its aliases.
        for v in self.map.values_mut() {
            if v == alias {
                *v = target.clone();
            }
        }
        self.map.insert(alias.into(), target);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entry {
    pub value: f64,
    pub unit: String,
    pub provenance: Provenance,
    pub source: String,
}

/// `(scope, canonical key) → value`, filled in precedence order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricNamespace {
    pub aliases: AliasTable,
    entries: BTreeMap<String, BTreeMap<String, Entry>>,
    /// Analysis cards with recorded solver failures, with load case if any.
    pub failures: Vec<(String, Option<String>)>,
}

impl MetricNamespace {
    pub fn new(aliases: AliasTable) -> Self {
        MetricNamespace {
            aliases,
            ..Default::default()
        }
    }

    /// Insert under the resolved key. Lower precedence never overrides;
    /// a different value from the same level is ambiguous.
    pub fn insert(&mut self, scope: &str, name: &str, entry: Entry) -> Result<()> {
        let key = self.aliases.resolve(name).to_string();
        let slot = self.entries.entry(scope.to_string()).or_default();
        match slot.get(&key) {
            None => {
                slot.insert(key, entry);
            }
            Some(prev) if prev.provenance < entry.provenance => {}
            Some(prev) if prev.provenance > entry.provenance => {
                slot.insert(key, entry);
            }
            Some(prev) => {
                let same = convert(entry.value, &entry.unit, &prev.unit).map(|v| v == prev.value).unwrap_or(false);
                if !same {
                    return Err(Error::AmbiguousBinding {
                        key: format!("{scope}/{key}"),
                        sources: vec![prev.source.clone(), entry.source],
                    });
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, scope: &str, name: &str) -> Option<&Entry> {
        self.entries.get(scope)?.get(self.aliases.resolve(name))
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(|m| m.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scopes(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn solver_failed(&self, card: &str, scope: &str) -> bool {
        self.failures
            .iter()
            .any(|(c, lc)| c == card && lc.as_deref().map(|l| l == scope).unwrap_or(true))
    }
}

const DESIGN_SCOPES: [&str; 2] = ["design", "assembly"];

/// Fill the namespace from solver, mesh, declared and claim sources, in that
/// order.
pub fn build_namespace(
    brief: &Brief,
    artifact: &Artifact,
    report: Option<&SolverReportDoc>,
    claims: Option<&ClaimBinding>,
) -> Result<MetricNamespace> {
    let mut aliases = AliasTable::builtin();
    if let Some(model) = &artifact.model {
        for set in model.node_sets.keys() {
            aliases.add_node_set(set)?;
        }
    }
    for (a, c) in &artifact.manifest.aliases {
        aliases.add(a, c)?;
    }
    let mut ns = MetricNamespace::new(aliases);

    if let Some(r) = report {
        for e in &r.errors {
            ns.failures.push((e.analysis_class.clone(), e.load_case.clone()));
        }
        for (lc, metrics) in &r.load_cases {
            for (k, v) in metrics {
                let source = format!("solver {} {lc}", v.analysis);
                let entry = Entry {
                    value: v.value,
                    unit: v.unit.clone(),
                    provenance: Provenance::Solver,
                    source,
                };
                ns.insert(lc, k, entry)?;
            }
        }
        for (lc, b) in &r.buckling {
            if b.is_unbounded() {
                let entry = Entry {
                    value: f64::INFINITY,
                    unit: String::new(),
                    provenance: Provenance::Solver,
                    source: format!("solver *BUCKLE {lc}: no compressive member"),
                };
                ns.insert(lc, "first_mode_load_factor", entry)?;
            }
        }
        if let Some(&f) = r.modal.frequencies_hz.first() {
            for scope in ["constrained_modal", "design"] {
                let entry = Entry {
                    value: f,
                    unit: "Hz".into(),
                    provenance: Provenance::Solver,
                    source: "solver *FREQUENCY".into(),
                };
                ns.insert(scope, "first_natural_frequency", entry)?;
            }
        }
    }

    if let Some(mesh) = &artifact.mesh {
        if validity(mesh).valid_solid {
            let axis = artifact.manifest.projection_axis.index();
            let density = artifact.manifest.density_kg_m3;
            let mp = mass_properties(mesh, density.unwrap_or(1.0), axis)?;
            let e = mp.bbox.extent();
            let mut vals = vec![
                ("volume", mp.volume, "mm3"),
                ("bbox_x", e.x, "mm"),
                ("bbox_y", e.y, "mm"),
                ("bbox_z", e.z, "mm"),
            ];
            if density.is_some() {
                vals.push(("mass", mp.mass, "kg"));
                vals.push(("projected_areal_density", mp.projected_areal_density, "kg/m2"));
            }
            for scope in DESIGN_SCOPES {
                for (k, v, u) in &vals {
                    let entry = Entry {
                        value: *v,
                        unit: (*u).into(),
                        provenance: Provenance::MeshDerived,
                        source: format!("mesh {k}"),
                    };
                    ns.insert(scope, k, entry)?;
                }
            }
        }
    }

    for (k, d) in &artifact.manifest.declared_measurements {
        for scope in d.scopes() {
            let entry = Entry {
                value: d.value(),
                unit: d.unit().into(),
                provenance: Provenance::Declared,
                source: format!("declared_measurements.{k}"),
            };
            ns.insert(&scope, k, entry)?;
        }
    }

    if let Some(binding) = claims {
        for b in &binding.bound {
            let Some(req) = brief.requirement(&b.requirement_id) else {
                continue;
            };
            for scope in &req.applies_to {
                let entry = Entry {
                    value: b.claim.value,
                    unit: req.limit.unit.clone(),
                    provenance: Provenance::Claim,
                    source: format!("blueprint claim {}/{}", b.part, b.claim.id),
                };
                ns.insert(scope, &req.metric, entry)?;
            }
        }
    }
    Ok(ns)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Unbound,
    SolverError,
    NotEvaluable,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Unbound => "unbound",
            Status::SolverError => "solver_error",
            Status::NotEvaluable => "not_evaluable",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeValue {
    pub scope: String,
    pub value: f64,
    /// `None` for an infinite value.
    pub margin: Option<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub metric: String,
    pub key: String,
    pub status: Status,
    pub operator: String,
    pub limit: f64,
    pub unit: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Value at the worst scope, in the requirement's unit.
    pub measured: Option<f64>,
    pub margin: Option<f64>,
    pub worst_scope: Option<String>,
    pub provenance: Option<Provenance>,
    pub binding_note: Option<String>,
    pub scopes: Vec<ScopeValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseVerdict {
    pub schema: String,
    pub case_id: String,
    pub verdicts: Vec<Verdict>,
    pub strict_pass: bool,
    pub req_pass_fraction: f64,
    pub pass_count: usize,
    pub evaluable_count: usize,
    pub not_evaluable_count: usize,
    pub convention: String,
}

impl CaseVerdict {
    pub fn count(&self, s: Status) -> usize {
        self.verdicts.iter().filter(|v| v.status == s).count()
    }

    pub fn verdict(&self, id: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.id == id)
    }

    /// Assemble from per-requirement verdicts.
    pub fn from_verdicts(case_id: &str, verdicts: Vec<Verdict>) -> Self {
        let count = |s| verdicts.iter().filter(|v| v.status == s).count();
        let not_evaluable_count = count(Status::NotEvaluable);
        let evaluable_count = verdicts.len() - not_evaluable_count;
        let pass_count = count(Status::Pass);
        let blocking = count(Status::Unbound) + count(Status::SolverError);
        CaseVerdict {
            schema: VERDICT_SCHEMA.into(),
            case_id: case_id.into(),
            strict_pass: pass_count == evaluable_count && blocking == 0,
            req_pass_fraction: if evaluable_count == 0 {
                1.0
            } else {
                pass_count as f64 / evaluable_count as f64
            },
            pass_count,
            evaluable_count,
            not_evaluable_count,
            convention: GRADING_CONVENTION.into(),
            verdicts,
        }
    }
}

/// Signed relative headroom; `None` when the value is infinite.
pub fn margin(op: Operator, value: f64, limit: f64, tolerance: f64) -> Option<f64> {
    if !value.is_finite() {
        return None;
    }
    let denom = if limit != 0.0 { limit.abs() } else { 1.0 };
    Some(match op {
        Operator::Le => (limit - value) / denom,
        Operator::Ge => (value - limit) / denom,
        Operator::Eq => tolerance - (value - limit).abs() / denom,
    })
}

fn infinite_passes(op: Operator, value: f64) -> bool {
    match op {
        Operator::Ge => value == f64::INFINITY,
        Operator::Le => value == f64::NEG_INFINITY,
        Operator::Eq => false,
    }
}

fn analysis_card(req: &Requirement) -> Option<&'static str> {
    match req.rtype.analysis_card()? {
        c @ ("*STATIC" | "*BUCKLE" | "*FREQUENCY") => Some(c),
        _ => None,
    }
}

/// One verdict for one requirement.
pub fn evaluate_requirement(brief: &Brief, req: &Requirement, ns: &MetricNamespace) -> Verdict {
    let key = ns.aliases.resolve(&req.metric).to_string();
    let mut v = Verdict {
        id: req.id.clone(),
        metric: req.metric.clone(),
        key: key.clone(),
        status: Status::Unbound,
        operator: req.operator.symbol().into(),
        limit: req.limit.value,
        unit: req.limit.unit.clone(),
        tolerance: req.tolerance(),
        measured: None,
        margin: None,
        worst_scope: None,
        provenance: None,
        binding_note: None,
        scopes: Vec::new(),
    };
    if !brief.is_evaluable(req) {
        v.status = Status::NotEvaluable;
        v.binding_note = Some(format!("{} requirement needs a non-FEA solver", req.rtype));
        return v;
    }
    let card = analysis_card(req);
    let tol = req.tolerance().unwrap_or(0.0);
    for scope in &req.applies_to {
        let entry = ns.get(scope, &key);
        let trusted = entry.filter(|e| e.provenance <= Provenance::MeshDerived);
        if trusted.is_none() {
            if let Some(c) = card.filter(|c| ns.solver_failed(c, scope)) {
                v.status = Status::SolverError;
                v.binding_note = Some(format!("{c} analysis failed for scope {scope}; `{key}` has no solver value"));
                v.scopes.clear();
                return v;
            }
        }
        let Some(e) = entry else {
            v.binding_note = Some(format!(
                "metric `{}` unbound on scope {scope}: no source provided `{key}`",
                req.metric
            ));
            v.scopes.clear();
            return v;
        };
        let Some(value) = convert(e.value, &e.unit, &req.limit.unit) else {
            v.binding_note = Some(format!(
                "metric `{}` on scope {scope} has unit `{}`, not convertible to `{}`",
                req.metric, e.unit, req.limit.unit
            ));
            v.scopes.clear();
            return v;
        };
        v.scopes.push(ScopeValue {
            scope: scope.clone(),
            value,
            margin: margin(req.operator, value, req.limit.value, tol),
            provenance: e.provenance,
        });
    }
    // Infinite values rank as ±∞ margins when choosing the worst scope.
    let rank = |s: &ScopeValue| match s.margin {
        Some(m) => m,
        None if infinite_passes(req.operator, s.value) => f64::INFINITY,
        None => f64::NEG_INFINITY,
    };
    let worst = v
        .scopes
        .iter()
        .min_by(|a, b| rank(a).total_cmp(&rank(b)))
        .expect("applies_to is never empty");
    v.status = if rank(worst) >= 0.0 { Status::Pass } else { Status::Fail };
    v.measured = Some(worst.value);
    v.margin = worst.margin;
    v.worst_scope = Some(worst.scope.clone());
    v.provenance = Some(worst.provenance);
    v
}

pub fn evaluate(brief: &Brief, ns: &MetricNamespace) -> CaseVerdict {
    let verdicts = brief.requirements.iter().map(|r| evaluate_requirement(brief, r, ns)).collect();
    CaseVerdict::from_verdicts(&brief.id, verdicts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupGrade {
    pub group: String,
    pub cases: usize,
    pub strict_count: usize,
    /// `k/n`.
    pub strict: String,
    pub mean_req_pass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteGrade {
    pub schema: String,
    pub groups: Vec<GroupGrade>,
    pub overall: GroupGrade,
}

fn group_grade(name: &str, cases: &[&CaseVerdict]) -> GroupGrade {
    let n = cases.len();
    let strict_count = cases.iter().filter(|c| c.strict_pass).count();
    let mut sum = 0.0;
    for c in cases {
        sum += c.req_pass_fraction;
    }
    GroupGrade {
        group: name.into(),
        cases: n,
        strict_count,
        strict: format!("{strict_count}/{n}"),
        mean_req_pass: sum / n as f64,
    }
}

/// Strict count and mean requirement pass per group and overall. Cases are
/// ordered by id first, so input order never matters.
pub fn grade_suite(cases: &[CaseVerdict], groups: &BTreeMap<String, String>) -> Result<SuiteGrade> {
    if cases.is_empty() {
        return Err(Error::EmptyList);
    }
    let mut sorted: Vec<&CaseVerdict> = cases.iter().collect();
    sorted.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    let mut by_group: BTreeMap<&str, Vec<&CaseVerdict>> = BTreeMap::new();
    for c in &sorted {
        if let Some(g) = groups.get(&c.case_id) {
            by_group.entry(g.as_str()).or_default().push(c);
        }
    }
    Ok(SuiteGrade {
        schema: "suite_grade/1".into(),
        groups: by_group.iter().map(|(g, cs)| group_grade(g, cs)).collect(),
        overall: group_grade("overall", &sorted),
    })
}

impl SuiteGrade {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,cases,strict_count,strict,mean_req_pass\n");
        for g in self.groups.iter().chain(std::iter::once(&self.overall)) {
            out.push_str(&format!(
                "{},{},{},{},{:.6}\n",
                g.group, g.cases, g.strict_count, g.strict, g.mean_req_pass
            ));
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<12} {:>6} {:>8} {:>14}\n", "group", "cases", "strict", "mean req pass");
        for g in self.groups.iter().chain(std::iter::once(&self.overall)) {
            out.push_str(&format!(
                "{:<12} {:>6} {:>8} {:>13.1}%\n",
                g.group,
                g.cases,
                g.strict,
                100.0 * g.mean_req_pass
            ));
        }
        out
    }
}
