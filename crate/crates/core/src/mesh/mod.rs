//! Triangle meshes: ingestion, validity, mass properties, surface sampling and
//! voxel occupancy.

mod io;
pub mod shapes;
mod voxel;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::scalar::Scalar;

pub use io::{load_mesh, load_mesh_bytes, to_obj, MeshFormat};
pub use voxel::{voxelize, VoxelGrid, MAX_VOXEL_RES};

/// Vertices closer than this (mm) are merged on ingestion.
pub const WELD_TOLERANCE_MM: f64 = 1e-6;
/// Triangles at or below this area (mm²) are dropped on ingestion.
pub const DEGENERATE_AREA_MM2: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh<T> {
    pub name: String,
    pub vertices: Vec<Vec3<T>>,
    pub triangles: Vec<[u32; 3]>,
    /// Body label per triangle.
    pub body_id: Vec<u32>,
    /// Degenerate triangles removed during ingestion.
    pub dropped_degenerate: usize,
}

/// Welding accumulator keyed on a tolerance-sized grid. Vertices only weld
/// within one body, so touching bodies stay separately closed.
struct Welder {
    cells: HashMap<(u32, [i64; 3]), Vec<u32>>,
    points: Vec<[f64; 3]>,
}

impl Welder {
    fn new() -> Self {
        Welder {
            cells: HashMap::new(),
            points: Vec::new(),
        }
    }

    fn key(p: [f64; 3]) -> [i64; 3] {
        p.map(|c| (c / WELD_TOLERANCE_MM).floor() as i64)
    }

    fn insert(&mut self, p: [f64; 3], body: u32) -> u32 {
        let k = Self::key(p);
        let tol2 = WELD_TOLERANCE_MM * WELD_TOLERANCE_MM;
        let mut best: Option<(f64, u32)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let nk = [k[0].saturating_add(dx), k[1].saturating_add(dy), k[2].saturating_add(dz)];
                    if let Some(ids) = self.cells.get(&(body, nk)) {
                        for &id in ids {
                            let q = self.points[id as usize];
                            let d2 = (0..3).map(|a| (p[a] - q[a]) * (p[a] - q[a])).sum::<f64>();
                            if d2 <= tol2 && best.is_none_or(|(bd, bid)| d2 < bd || (d2 == bd && id < bid)) {
                                best = Some((d2, id));
                            }
                        }
                    }
                }
            }
        }
        if let Some((_, id)) = best {
            return id;
        }
        let id = self.points.len() as u32;
        self.points.push(p);
        self.cells.entry((body, k)).or_default().push(id);
        id
    }
}

fn tri_area_f64(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    0.5 * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
}

impl<T: Scalar> TriMesh<T> {
    /// Build from raw positions and faces: welds coincident vertices, drops
    /// degenerate triangles and unreferenced vertices.
    pub fn from_indexed(name: &str, positions: &[[f64; 3]], faces: &[[u32; 3]], bodies: &[u32]) -> Result<Self> {
        if let Some(p) = positions.iter().find(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument(format!("non-finite vertex coordinate {p:?}")));
        }
        let mut welder = Welder::new();
        let mut triangles = Vec::with_capacity(faces.len());
        let mut body_id = Vec::with_capacity(faces.len());
        let mut dropped = 0;
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i as usize >= positions.len()) {
                return Err(Error::InvalidArgument(format!("face {fi} references a missing vertex")));
            }
            let body = bodies.get(fi).copied().unwrap_or(0);
            let t = f.map(|i| welder.insert(positions[i as usize], body));
            let pts = t.map(|i| welder.points[i as usize]);
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] || tri_area_f64(pts[0], pts[1], pts[2]) <= DEGENERATE_AREA_MM2 {
                dropped += 1;
                continue;
            }
            triangles.push(t);
            body_id.push(body);
        }
        if triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        // Compact to referenced vertices in first-use order.
        let mut new_index = vec![u32::MAX; welder.points.len()];
        let mut vertices = Vec::new();
        for t in &mut triangles {
            for i in t.iter_mut() {
                let slot = &mut new_index[*i as usize];
                if *slot == u32::MAX {
                    *slot = vertices.len() as u32;
                    let p = welder.points[*i as usize];
                    vertices.push(Vec3::of(p[0], p[1], p[2]));
                }
                *i = *slot;
            }
        }
        Ok(TriMesh {
            name: name.to_string(),
            vertices,
            triangles,
            body_id,
            dropped_degenerate: dropped,
        })
    }

    /// Build from a triangle soup (three corners per triangle).
    pub fn from_soup(name: &str, soup: &[[[f64; 3]; 3]], bodies: &[u32]) -> Result<Self> {
        let positions: Vec<[f64; 3]> = soup.iter().flat_map(|t| t.iter().copied()).collect();
        let faces: Vec<[u32; 3]> = (0..soup.len() as u32).map(|i| [3 * i, 3 * i + 1, 3 * i + 2]).collect();
        Self::from_indexed(name, &positions, &faces, bodies)
    }

    /// Concatenate meshes; each input becomes its own body in order.
    pub fn merge(name: &str, parts: &[TriMesh<T>]) -> Self {
        let mut out = TriMesh {
            name: name.to_string(),
            vertices: Vec::new(),
            triangles: Vec::new(),
            body_id: Vec::new(),
            dropped_degenerate: 0,
        };
        for (b, m) in parts.iter().enumerate() {
            let base = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&m.vertices);
            out.triangles.extend(m.triangles.iter().map(|t| t.map(|i| i + base)));
            out.body_id.extend(std::iter::repeat_n(b as u32, m.triangles.len()));
            out.dropped_degenerate += m.dropped_degenerate;
        }
        out
    }

    pub fn corners(&self, t: usize) -> [Vec3<T>; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    pub fn triangle_area(&self, t: usize) -> T {
        let [a, b, c] = self.corners(t);
        (b - a).cross(c - a).norm() * T::of(0.5)
    }

    pub fn surface_area(&self) -> T {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn bbox(&self) -> Aabb<T> {
        Aabb::from_points(&self.vertices)
    }

    pub fn body_count(&self) -> usize {
        self.body_id.iter().copied().max().map_or(0, |m| m as usize + 1)
    }

    /// Triangles of one body as a standalone mesh (vertices shared).
    pub fn body(&self, b: u32) -> TriMesh<T> {
        let keep: Vec<usize> = (0..self.triangles.len()).filter(|&t| self.body_id[t] == b).collect();
        TriMesh {
            name: format!("{}#{b}", self.name),
            vertices: self.vertices.clone(),
            triangles: keep.iter().map(|&t| self.triangles[t]).collect(),
            body_id: vec![b; keep.len()],
            dropped_degenerate: 0,
        }
    }

    pub fn transformed(&self, f: impl Fn(Vec3<T>) -> Vec3<T>) -> TriMesh<T> {
        TriMesh {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn cast<U: Scalar>(&self) -> TriMesh<U> {
        TriMesh {
            name: self.name.clone(),
            vertices: self.vertices.iter().map(|v| v.cast()).collect(),
            triangles: self.triangles.clone(),
            body_id: self.body_id.clone(),
            dropped_degenerate: self.dropped_degenerate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub watertight: bool,
    pub consistently_oriented: bool,
    /// Always false: self-intersection is not tested.
    pub self_intersection_checked: bool,
    pub valid_solid: bool,
}

impl ValidityReport {
    pub fn invalid() -> Self {
        ValidityReport {
            watertight: false,
            consistently_oriented: false,
            self_intersection_checked: false,
            valid_solid: false,
        }
    }
}

/// Edge-manifold and orientation check. Every undirected edge must be used by
/// exactly two triangles, traversed in opposite directions.
pub fn validity<T: Scalar>(mesh: &TriMesh<T>) -> ValidityReport {
    // (lo, hi, forward) per directed half-edge, sorted: O(T log T).
    let mut edges: Vec<(u32, u32, bool)> = Vec::with_capacity(mesh.triangles.len() * 3);
    for t in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            edges.push((a.min(b), a.max(b), a < b));
        }
    }
    edges.sort_unstable();
    let mut watertight = !edges.is_empty();
    let mut oriented = !edges.is_empty();
    let mut i = 0;
    while i < edges.len() {
        let mut j = i;
        while j < edges.len() && edges[j].0 == edges[i].0 && edges[j].1 == edges[i].1 {
            j += 1;
        }
        let group = &edges[i..j];
        if group.len() != 2 {
            watertight = false;
        }
        let fwd = group.iter().filter(|e| e.2).count();
        if fwd * 2 != group.len() {
            oriented = false;
        }
        i = j;
    }
    ValidityReport {
        watertight,
        consistently_oriented: oriented,
        self_intersection_checked: false,
        valid_solid: watertight && oriented,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingSphere<T> {
    pub center: Vec3<T>,
    pub radius: T,
}

/// Center at the mean of referenced vertices, radius to the farthest vertex.
/// Rotates with the mesh, which keeps camera framing rotation-equivariant.
pub fn bounding_sphere<T: Scalar>(mesh: &TriMesh<T>) -> BoundingSphere<T> {
    let mut used = vec![false; mesh.vertices.len()];
    for t in &mesh.triangles {
        for &i in t {
            used[i as usize] = true;
        }
    }
    let pts: Vec<Vec3<T>> = mesh
        .vertices
        .iter()
        .zip(&used)
        .filter(|(_, u)| **u)
        .map(|(v, _)| *v)
        .collect();
    let n = T::of_usize(pts.len().max(1));
    let center = pts.iter().fold(Vec3::zero(), |acc, p| acc + *p) / n;
    let radius = pts.iter().map(|p| p.dist2(center)).fold(T::zero(), T::max).sqrt();
    BoundingSphere { center, radius }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassProperties<T> {
    /// mm³, absolute value of the signed sum.
    pub volume: T,
    /// Sign of the signed-tetrahedron sum (-1 for inward-facing winding).
    pub volume_sign: i8,
    pub centroid: Vec3<T>,
    /// kg
    pub mass: T,
    pub density: T,
    pub bbox: Aabb<T>,
    pub bounding_sphere: BoundingSphere<T>,
    /// kg/m² over the bbox face normal to `projection_axis`.
    pub projected_areal_density: T,
    pub projection_axis: usize,
}

/// Divergence-theorem volume and centroid, mass from density in kg/m³.
pub fn mass_properties<T: Scalar>(mesh: &TriMesh<T>, density: T, projection_axis: usize) -> Result<MassProperties<T>> {
    if projection_axis > 2 {
        return Err(Error::InvalidArgument(format!("projection axis {projection_axis} out of range")));
    }
    if !(density.is_finite() && density >= T::zero()) {
        return Err(Error::InvalidArgument("density must be finite and nonnegative".into()));
    }
    let v = validity(mesh);
    if !v.valid_solid {
        return Err(Error::InvalidSolid(format!(
            "mesh `{}` is not a valid solid (watertight: {}, oriented: {})",
            mesh.name, v.watertight, v.consistently_oriented
        )));
    }
    let mut six_vol = T::zero();
    let mut moment = Vec3::zero();
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.corners(t);
        let d = a.dot(b.cross(c));
        six_vol += d;
        moment += (a + b + c) * d;
    }
    let signed = six_vol / T::of(6.0);
    let bbox = mesh.bbox();
    let centroid = if six_vol.abs() > T::epsilon() {
        moment / (six_vol * T::of(4.0))
    } else {
        bbox.center()
    };
    let volume = signed.abs();
    let mass = volume * density * T::of(1e-9);
    let e = bbox.extent();
    let [u, w] = match projection_axis {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    };
    let footprint_m2 = e[u] * e[w] * T::of(1e-6);
    let projected_areal_density = if footprint_m2 > T::zero() {
        mass / footprint_m2
    } else {
        T::infinity()
    };
    Ok(MassProperties {
        volume,
        volume_sign: if signed < T::zero() { -1 } else { 1 },
        centroid,
        mass,
        density,
        bbox,
        bounding_sphere: bounding_sphere(mesh),
        projected_areal_density,
        projection_axis,
    })
}

/// Area-weighted uniform surface samples, deterministic in `(mesh, n, seed)`.
pub fn sample_surface<T: Scalar>(mesh: &TriMesh<T>, n: usize, seed: u64) -> Vec<Vec3<T>> {
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0_f64;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t).f64();
        cumulative.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    if total <= 0.0 {
        return out;
    }
    for _ in 0..n {
        let pick: f64 = rng.random::<f64>() * total;
        let t = cumulative.partition_point(|&c| c <= pick).min(cumulative.len() - 1);
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let s = r1.sqrt();
        let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
        let [a, b, c] = mesh.corners(t);
        out.push(a * T::of(wa) + b * T::of(wb) + c * T::of(wc));
    }
    out
}
