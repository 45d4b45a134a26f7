//! Linear-elastic pin-jointed 3D truss: model document, direct stiffness
//! solve, member Euler buckling and lumped-mass first frequency.
//!
//! Units are mm, N, MPa; densities in kg/m³, masses in kg.

mod report;
mod solve;

use std::collections::BTreeMap;
use std::path::Path;

use serde_yaml::Value;

use crate::brief::{Brief, LoadKind};
use crate::doc::{self, At};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scalar::Scalar;

pub use report::{
    parse_solver_report, parse_solver_report_bytes, run_analysis, AnalysisFailure, BucklingEntry, MetricValue,
    ModalEntry, ReportStatus, Request, SolverReportDoc, CARD_BUCKLE, CARD_FREQUENCY, CARD_STATIC, REPORT_SCHEMA,
};
pub use solve::{
    buckling_factors, first_frequency, solve_static, BucklingSolution, ModalSolution, StaticSolution, DOF_CAP,
    MAX_EIGEN_ITERATIONS,
};

/// Standard gravity used to turn `acceleration_g` into forces.
pub const G0: f64 = 9.80665;
pub const MIN_MEMBER_LENGTH_MM: f64 = 1e-6;
pub const MODEL_SCHEMA: &str = "analysis_model/1";

#[derive(Debug, Clone, PartialEq)]
pub struct FeaMaterial<T> {
    pub name: String,
    /// Young's modulus, MPa.
    pub e: T,
    /// kg/m³.
    pub density: T,
    /// MPa.
    pub yield_strength: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member<T> {
    pub i: usize,
    pub j: usize,
    /// mm².
    pub area: T,
    /// Minimum second moment of area, mm⁴.
    pub i_min: T,
    pub material: FeaMaterial<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Support {
    pub node: usize,
    pub fixed: [bool; 3],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadTarget {
    Node(usize),
    /// Total force shared equally by the set's nodes.
    Set(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodalLoad<T> {
    pub target: LoadTarget,
    /// N.
    pub force: Vec3<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadCase<T> {
    pub id: String,
    pub loads: Vec<NodalLoad<T>>,
    /// Body acceleration in g applied to the lumped masses.
    pub acceleration_g: Option<Vec3<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass<T> {
    pub node: usize,
    pub mass_kg: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisModel<T> {
    pub name: String,
    pub nodes: Vec<Vec3<T>>,
    pub members: Vec<Member<T>>,
    pub supports: Vec<Support>,
    pub node_sets: BTreeMap<String, Vec<usize>>,
    pub load_cases: Vec<LoadCase<T>>,
    pub point_masses: Vec<PointMass<T>>,
}

const AXES: [&str; 3] = ["x", "y", "z"];

impl<T: Scalar> AnalysisModel<T> {
    pub fn dof_count(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn load_case(&self, id: &str) -> Result<&LoadCase<T>> {
        self.load_cases
            .iter()
            .find(|lc| lc.id == id)
            .ok_or_else(|| Error::UnknownLoadCase(id.to_string()))
    }

    pub fn member_length(&self, m: &Member<T>) -> T {
        (self.nodes[m.j] - self.nodes[m.i]).norm()
    }

    /// Lumped nodal masses in kg: half of each member's ρ·A·L to each end,
    /// plus point masses.
    pub fn nodal_masses(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.nodes.len()];
        for mem in &self.members {
            let half = mem.material.density * mem.area * self.member_length(mem) * T::of(0.5e-9);
            m[mem.i] += half;
            m[mem.j] += half;
        }
        for pm in &self.point_masses {
            m[pm.node] += pm.mass_kg;
        }
        m
    }

    pub fn total_mass(&self) -> T {
        self.nodal_masses().into_iter().fold(T::zero(), |a, b| a + b)
    }

    /// Applied nodal force vector (3 per node) for a load case.
    pub fn load_vector(&self, lc: &LoadCase<T>) -> Result<Vec<T>> {
        let mut f = vec![T::zero(); self.dof_count()];
        for load in &lc.loads {
            let nodes: Vec<usize> = match &load.target {
                LoadTarget::Node(n) => vec![*n],
                LoadTarget::Set(s) => self
                    .node_sets
                    .get(s)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("load case {} targets unknown node set `{s}`", lc.id)))?,
            };
            let share = load.force / T::of_usize(nodes.len());
            for n in nodes {
                for a in 0..3 {
                    f[3 * n + a] += share[a];
                }
            }
        }
        if let Some(g) = lc.acceleration_g {
            for (n, m) in self.nodal_masses().into_iter().enumerate() {
                for a in 0..3 {
                    f[3 * n + a] += m * g[a] * T::of(G0);
                }
            }
        }
        Ok(f)
    }

    /// Check the structural invariants that do not need a factorization.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::schema("/nodes", "model has no nodes"));
        }
        if let Some(k) = self.nodes.iter().position(|p| !p.is_finite()) {
            return Err(Error::schema(format!("/nodes/{k}"), "coordinate is not finite"));
        }
        for (k, m) in self.members.iter().enumerate() {
            let path = format!("/members/{k}");
            if m.i >= n || m.j >= n {
                return Err(Error::schema(path, "member references a missing node"));
            }
            if !(self.member_length(m).f64() > MIN_MEMBER_LENGTH_MM) {
                return Err(Error::schema(path, "member length must exceed 1e-6 mm"));
            }
            let positive = |v: T| v.is_finite() && v > T::zero();
            if !positive(m.area) || !positive(m.i_min) || !positive(m.material.e) {
                return Err(Error::schema(path, "area, I_min and E must be positive"));
            }
            if !(m.material.density.is_finite() && m.material.density >= T::zero()) {
                return Err(Error::schema(path, "density must be non-negative"));
            }
        }
        if self.supports.is_empty() {
            return Err(Error::schema("/supports", "model has no supports"));
        }
        for (k, s) in self.supports.iter().enumerate() {
            if s.node >= n {
                return Err(Error::schema(format!("/supports/{k}"), "support references a missing node"));
            }
        }
        for (name, ids) in &self.node_sets {
            if ids.is_empty() || ids.iter().any(|&i| i >= n) {
                return Err(Error::schema(format!("/node_sets/{name}"), "node set is empty or references a missing node"));
            }
        }
        for (k, pm) in self.point_masses.iter().enumerate() {
            if pm.node >= n || !(pm.mass_kg.is_finite() && pm.mass_kg >= T::zero()) {
                return Err(Error::schema(format!("/point_masses/{k}"), "bad point mass"));
            }
        }
        for lc in &self.load_cases {
            for load in &lc.loads {
                match &load.target {
                    LoadTarget::Node(i) if *i >= n => {
                        return Err(Error::schema(format!("/load_cases/{}", lc.id), "load references a missing node"))
                    }
                    LoadTarget::Set(s) if !self.node_sets.contains_key(s) => {
                        return Err(Error::schema(format!("/load_cases/{}", lc.id), format!("unknown node set `{s}`")))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Replace the loads of every load case the brief declares loads for.
    /// Brief selectors name node sets.
    pub fn with_brief_loads(&self, brief: &Brief) -> Result<Self> {
        let mut out = self.clone();
        for decl in &brief.structured_prompt.load_cases {
            if decl.loads.is_empty() {
                continue;
            }
            let mut lc = LoadCase {
                id: decl.id.clone(),
                loads: Vec::new(),
                acceleration_g: None,
            };
            for l in &decl.loads {
                let v = Vec3::of(l.vector[0], l.vector[1], l.vector[2]);
                match l.kind {
                    LoadKind::Force => {
                        if !self.node_sets.contains_key(&l.selector) {
                            return Err(Error::InvalidArgument(format!(
                                "brief load case {} uses selector `{}` that the model does not declare",
                                decl.id, l.selector
                            )));
                        }
                        lc.loads.push(NodalLoad {
                            target: LoadTarget::Set(l.selector.clone()),
                            force: v,
                        });
                    }
                    LoadKind::AccelerationG => {
                        lc.acceleration_g = Some(lc.acceleration_g.unwrap_or_else(Vec3::zero) + v);
                    }
                }
            }
            match out.load_cases.iter_mut().find(|x| x.id == decl.id) {
                Some(slot) => *slot = lc,
                None => out.load_cases.push(lc),
            }
        }
        Ok(out)
    }

    pub fn cast<U: Scalar>(&self) -> AnalysisModel<U> {
        let c = |v: T| U::of(v.f64());
        AnalysisModel {
            name: self.name.clone(),
            nodes: self.nodes.iter().map(|p| p.cast()).collect(),
            members: self
                .members
                .iter()
                .map(|m| Member {
                    i: m.i,
                    j: m.j,
                    area: c(m.area),
                    i_min: c(m.i_min),
                    material: FeaMaterial {
                        name: m.material.name.clone(),
                        e: c(m.material.e),
                        density: c(m.material.density),
                        yield_strength: c(m.material.yield_strength),
                    },
                })
                .collect(),
            supports: self.supports.clone(),
            node_sets: self.node_sets.clone(),
            load_cases: self
                .load_cases
                .iter()
                .map(|lc| LoadCase {
                    id: lc.id.clone(),
                    loads: lc
                        .loads
                        .iter()
                        .map(|l| NodalLoad {
                            target: l.target.clone(),
                            force: l.force.cast(),
                        })
                        .collect(),
                    acceleration_g: lc.acceleration_g.map(|g| g.cast()),
                })
                .collect(),
            point_masses: self
                .point_masses
                .iter()
                .map(|p| PointMass {
                    node: p.node,
                    mass_kg: c(p.mass_kg),
                })
                .collect(),
        }
    }

    /// Document form; materials are written inline per member.
    pub fn to_value(&self) -> Value {
        let v3 = |p: &Vec3<T>| Value::Sequence(p.to_f64().iter().map(|&x| doc::num(x)).collect());
        let members = self
            .members
            .iter()
            .map(|m| {
                doc::map_of([
                    ("i", Value::from(m.i as u64)),
                    ("j", Value::from(m.j as u64)),
                    ("area", doc::num(m.area.f64())),
                    ("I_min", doc::num(m.i_min.f64())),
                    (
                        "material",
                        doc::map_of([
                            ("name", doc::s(&m.material.name)),
                            ("E", doc::num(m.material.e.f64())),
                            ("density", doc::num(m.material.density.f64())),
                            ("yield", doc::num(m.material.yield_strength.f64())),
                        ]),
                    ),
                ])
            })
            .collect();
        let supports = self
            .supports
            .iter()
            .map(|s| {
                let dofs: Vec<String> = (0..3).filter(|&a| s.fixed[a]).map(|a| AXES[a].to_string()).collect();
                doc::map_of([("node", Value::from(s.node as u64)), ("fixed_dofs", doc::str_seq(&dofs))])
            })
            .collect();
        let node_sets = doc::map_of(self.node_sets.iter().map(|(k, ids)| {
            (k.as_str(), Value::Sequence(ids.iter().map(|&i| Value::from(i as u64)).collect()))
        }));
        let load_cases = doc::map_of(self.load_cases.iter().map(|lc| {
            let loads = lc
                .loads
                .iter()
                .map(|l| {
                    let target = match &l.target {
                        LoadTarget::Node(n) => ("node", Value::from(*n as u64)),
                        LoadTarget::Set(s) => ("node_set", doc::s(s)),
                    };
                    doc::map_of([target, ("force", v3(&l.force))])
                })
                .collect();
            let mut pairs = vec![("loads", Value::Sequence(loads))];
            if let Some(g) = &lc.acceleration_g {
                pairs.push(("acceleration_g", v3(g)));
            }
            (lc.id.as_str(), doc::map_of(pairs))
        }));
        let mut pairs = vec![
            ("schema", doc::s(MODEL_SCHEMA)),
            ("name", doc::s(&self.name)),
            ("nodes", Value::Sequence(self.nodes.iter().map(v3).collect())),
            ("members", Value::Sequence(members)),
            ("supports", Value::Sequence(supports)),
            ("node_sets", node_sets),
            ("load_cases", load_cases),
        ];
        if !self.point_masses.is_empty() {
            let pm = self
                .point_masses
                .iter()
                .map(|p| doc::map_of([("node", Value::from(p.node as u64)), ("mass_kg", doc::num(p.mass_kg.f64()))]))
                .collect();
            pairs.push(("point_masses", Value::Sequence(pm)));
        }
        doc::map_of(pairs)
    }

    pub fn to_yaml(&self) -> String {
        doc::emit_yaml(&self.to_value())
    }
}

pub fn parse_model<T: Scalar>(path: &Path) -> Result<AnalysisModel<T>> {
    let value = doc::read_file(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    model_from_value(&value, stem)
}

pub fn parse_model_str<T: Scalar>(text: &str) -> Result<AnalysisModel<T>> {
    model_from_value(&doc::parse_str(text)?, "model")
}

fn node_index(at: &At<'_>, n: usize) -> Result<usize> {
    let i = at.u64()? as usize;
    if i >= n {
        return Err(at.err(format!("node {i} does not exist")));
    }
    Ok(i)
}

fn vec3<T: Scalar>(at: &At<'_>) -> Result<Vec3<T>> {
    let v = at.f64_list()?;
    if v.len() != 3 || v.iter().any(|x| !x.is_finite()) {
        return Err(at.err("expected three finite numbers"));
    }
    Ok(Vec3::of(v[0], v[1], v[2]))
}

fn material<T: Scalar>(at: &At<'_>, name: &str) -> Result<FeaMaterial<T>> {
    let name = at.get("name").map(|a| a.text()).transpose()?.unwrap_or_else(|| name.to_string());
    Ok(FeaMaterial {
        name,
        e: T::of(at.req("E")?.f64()?),
        density: T::of(at.get("density").map(|a| a.f64()).transpose()?.unwrap_or(0.0)),
        yield_strength: T::of(at.get_any(&["yield", "yield_strength_MPa"]).map(|a| a.f64()).transpose()?.unwrap_or(0.0)),
    })
}

fn fixed_dofs(at: &At<'_>) -> Result<[bool; 3]> {
    let mut fixed = [false; 3];
    let items = match at.value {
        Value::String(s) if s == "all" => return Ok([true; 3]),
        Value::String(_) => vec![at.text()?],
        _ => at.str_list()?,
    };
    for d in items {
        match AXES.iter().position(|a| *a == d) {
            Some(a) => fixed[a] = true,
            None => return Err(at.err(format!("unknown dof `{d}`, expected x, y or z"))),
        }
    }
    Ok(fixed)
}

pub fn model_from_value<T: Scalar>(value: &Value, fallback_name: &str) -> Result<AnalysisModel<T>> {
    let root = At::root(value);
    root.map()?;
    if let Some(s) = root.get("schema") {
        if s.str()? != MODEL_SCHEMA {
            return Err(s.err(format!("expected `{MODEL_SCHEMA}`")));
        }
    }
    let name = root.get("name").map(|a| a.text()).transpose()?.unwrap_or_else(|| fallback_name.to_string());
    let nodes: Vec<Vec3<T>> = root.req("nodes")?.seq()?.iter().map(vec3).collect::<Result<_>>()?;
    let n = nodes.len();

    let mut library = BTreeMap::new();
    if let Some(ms) = root.get("materials") {
        for (k, a) in ms.entries()? {
            library.insert(k.clone(), material::<T>(&a, &k)?);
        }
    }
    let mut members = Vec::new();
    for m in root.req("members")?.seq()? {
        let mat_at = m.req("material")?;
        let mat = match mat_at.value {
            Value::String(key) => library
                .get(key)
                .cloned()
                .ok_or_else(|| mat_at.err(format!("unknown material `{key}`")))?,
            _ => material(&mat_at, "material")?,
        };
        members.push(Member {
            i: node_index(&m.req("i")?, n)?,
            j: node_index(&m.req("j")?, n)?,
            area: T::of(m.req("area")?.f64()?),
            i_min: T::of(m.req("I_min")?.f64()?),
            material: mat,
        });
    }

    let mut node_sets = BTreeMap::new();
    if let Some(ns) = root.get("node_sets") {
        for (k, a) in ns.entries()? {
            let ids = a.seq()?.iter().map(|i| node_index(i, n)).collect::<Result<Vec<_>>>()?;
            node_sets.insert(k, ids);
        }
    }

    let mut supports = Vec::new();
    for s in root.req("supports")?.seq()? {
        let fixed = fixed_dofs(&s.req("fixed_dofs")?)?;
        if let Some(set) = s.get("node_set") {
            let key = set.text()?;
            let ids = node_sets.get(&key).ok_or_else(|| set.err(format!("unknown node set `{key}`")))?;
            supports.extend(ids.iter().map(|&node| Support { node, fixed }));
        } else {
            supports.push(Support {
                node: node_index(&s.req("node")?, n)?,
                fixed,
            });
        }
    }

    let mut load_cases = Vec::new();
    if let Some(lcs) = root.get("load_cases") {
        let items: Vec<(String, At<'_>)> = match lcs.value {
            Value::Sequence(_) => lcs
                .seq()?
                .into_iter()
                .map(|a| Ok((a.req("id")?.text()?, a)))
                .collect::<Result<_>>()?,
            _ => lcs.entries()?,
        };
        for (id, a) in items {
            if load_cases.iter().any(|lc: &LoadCase<T>| lc.id == id) {
                return Err(a.err(format!("duplicate load case `{id}`")));
            }
            let (loads_at, accel) = match a.value {
                Value::Sequence(_) => (Some(a.clone()), None),
                _ => (a.get("loads"), a.get("acceleration_g").map(|g| vec3(&g)).transpose()?),
            };
            let mut loads = Vec::new();
            for l in loads_at.map(|x| x.seq()).transpose()?.unwrap_or_default() {
                let target = match (l.get("node_set"), l.get("node")) {
                    (Some(s), None) => LoadTarget::Set(s.text()?),
                    (None, Some(nd)) => LoadTarget::Node(node_index(&nd, n)?),
                    _ => return Err(l.err("load needs exactly one of node_set or node")),
                };
                loads.push(NodalLoad {
                    target,
                    force: vec3(&l.req("force")?)?,
                });
            }
            load_cases.push(LoadCase {
                id,
                loads,
                acceleration_g: accel,
            });
        }
    }

    let mut point_masses = Vec::new();
    if let Some(pms) = root.get("point_masses") {
        for p in pms.seq()? {
            point_masses.push(PointMass {
                node: node_index(&p.req("node")?, n)?,
                mass_kg: T::of(p.req("mass_kg")?.f64()?),
            });
        }
    }

    let model = AnalysisModel {
        name,
        nodes,
        members,
        supports,
        node_sets,
        load_cases,
        point_masses,
    };
    model.validate()?;
    Ok(model)
}
